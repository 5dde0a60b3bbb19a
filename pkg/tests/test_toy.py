import numpy as np
import pytest

from see_embedding import distill as D
from see_embedding import toy
from see_embedding.embedding import param_count
from see_embedding.lexicon import ZERO_ID

SMALL = dict(V=120, num_sememes=24, n_train=300, n_test=100)


@pytest.fixture(scope="module")
def task():
    return toy.gen_task(3, **SMALL)


@pytest.fixture(scope="module")
def teacher(task):
    return toy.train_teacher(task, d=16, epochs=5, lr=0.5, seed=3)


class TestTask:
    def test_deterministic(self):
        a, b = toy.gen_task(5, **SMALL), toy.gen_task(5, **SMALL)
        assert np.array_equal(a.train_x, b.train_x) and np.array_equal(a.test_y, b.test_y)
        assert a.lexicon == b.lexicon

    def test_single_class(self):
        t = toy.gen_task(0, classes=1, **SMALL)
        assert not t.train_y.any() and not t.test_y.any()
        model = toy.ToyModel(W=np.random.default_rng(0).normal(size=(4, 1)), b=np.zeros(1),
                             table=np.random.default_rng(1).normal(size=(t.V, 4)))
        assert toy.evaluate(model, t, "test") == 1.0

    def test_majority_baseline_near_chance(self):
        t = toy.gen_task(0)
        assert toy.majority_baseline(t) == pytest.approx(0.25, abs=0.05)

    def test_senses_and_labels(self, task):
        for rec in task.lexicon:
            assert 1 <= len(rec.senses) <= 4
            assert all(1 <= len(s) <= 2 for s in rec.senses)
        assert np.array_equal(task.train_y, toy.label_sequences(task.train_x, task.token_class, task.classes))

    def test_splits_disjoint(self, task):
        train = {tuple(r) for r in task.train_x.tolist()}
        assert not any(tuple(r) in train for r in task.test_x.tolist())

    def test_bad_counts(self):
        with pytest.raises(ValueError):
            toy.gen_task(0, V=0)


class TestTeacher:
    def test_learns_default_task(self):
        t = toy.gen_task(0)
        res = toy.train_teacher(t, d=64, epochs=30, seed=0)
        assert res.test_acc > 0.9

    def test_zero_lr_leaves_params(self, task):
        a = toy.train_teacher(task, d=8, epochs=0, seed=1)
        b = toy.train_teacher(task, d=8, epochs=2, lr=0.0, seed=1)
        assert np.array_equal(a.model.table, b.model.table) and np.array_equal(a.model.W, b.model.W)

    def test_seeded_rerun(self, task):
        a = toy.train_teacher(task, d=8, epochs=2, seed=2)
        b = toy.train_teacher(task, d=8, epochs=2, seed=2)
        assert a.losses == b.losses

    def test_divergence_raises(self, task):
        with pytest.raises(FloatingPointError):
            with np.errstate(all="ignore"):
                toy.train_teacher(task, d=8, epochs=3, lr=1e300, seed=0)


class TestEvaluate:
    def test_memorizing_model(self, task):
        C = task.classes
        model = toy.ToyModel(W=np.eye(C), b=np.zeros(C), table=np.eye(C)[task.token_class])
        assert toy.evaluate(model, task, "train") == 1.0

    def test_untrained_chance(self):
        t = toy.gen_task(0)
        res = toy.train_teacher(t, d=16, epochs=0, seed=0)
        assert res.test_acc == pytest.approx(0.25, abs=0.1)

    def test_repeatable(self, teacher, task):
        assert toy.evaluate(teacher.model, task) == toy.evaluate(teacher.model, task)


class TestStudent:
    # the small task cannot reach 5x, so these runs lower the compression floor
    def cfg(self, task, **kw):
        return toy.student_config(task, d=16, o=2, r=3, m=1, **kw)

    def test_all_initial_excludes_ce_kl(self, task, teacher):
        res = toy.train_student_see(task, teacher.model, self.cfg(task), min_compression=1.0, stage_boundary=2, epochs=2, seed=0)
        for e in res.trace:
            rep = e.report
            assert rep.stage is D.Stage.INITIAL
            assert rep.ce > 0 and rep.kl > 0
            assert rep.total == pytest.approx(rep.embedding_mse + rep.hidden_mse)

    def test_embedding_mse_drops_by_boundary(self, task, teacher):
        res = toy.train_student_see(task, teacher.model, self.cfg(task), min_compression=1.0, stage_boundary=2, epochs=3, seed=0)
        assert res.embedding_mse_at(2) < res.embedding_mse_at(0)

    def test_seeded_trace(self, task, teacher):
        a = toy.train_student_see(task, teacher.model, self.cfg(task), min_compression=1.0, epochs=3, seed=4)
        b = toy.train_student_see(task, teacher.model, self.cfg(task), min_compression=1.0, epochs=3, seed=4)
        assert [e.report for e in a.trace] == [e.report for e in b.trace]

    def test_param_count_matches_config(self, task, teacher):
        res = toy.train_student_see(task, teacher.model, self.cfg(task), min_compression=1.0, epochs=0)
        assert res.model.embedding_params() == param_count(res.model.cfg)
        assert res.compression == pytest.approx(task.V * 16 / param_count(res.model.cfg))

    def test_rejects_weak_compression(self, task, teacher):
        with pytest.raises(ValueError, match="compresses"):
            toy.train_student_see(task, teacher.model, toy.student_config(task, d=16, o=2, r=3, m=8),
                                  min_compression=5.0)

    @pytest.mark.parametrize("stage", [D.Stage.INITIAL, D.Stage.FORMAL])
    def test_gradient_flow(self, task, teacher, stage):
        res = toy.train_student_see(task, teacher.model, self.cfg(task), min_compression=1.0, epochs=0)
        model = res.model
        before = model.store.params.copy()
        xb, yb = task.train_x[:8], task.train_y[:8]
        toy.student_step(model, teacher.model, xb, yb, D.LossWeights(), stage, toy._Sgd(0.1, 0.9))
        changed = np.any(model.store.params != before, axis=(1, 2))
        referenced = np.zeros(len(before), dtype=bool)
        referenced[np.unique(model.grids.grids[np.unique(xb)])] = True
        assert changed[referenced & (np.arange(len(before)) != ZERO_ID)].any()
        assert not changed[~referenced].any()
        assert not model.store.params[ZERO_ID].any()
