"""Desk-scale teacher/student distillation on a synthetic sememe task.

Every token gets a few senses built from latent sememes, and every sememe
belongs to one class. A token's class is the class of its first sememe in
its first sense; a sequence is labelled with the class that most of its
tokens carry (ties go to the lowest class id). The teacher is a dense
embedding table followed by mean pooling and a linear classifier. The
student swaps the table for sememe-entanglement factors and is trained with
the two-stage distillation losses.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import distill as D
from .embedding import (FactorStore, SeeConfig, init_factors, param_count, reconstruct_batch,
                        reconstruct_batch_backward)
from .lexicon import GridTable, Lexicon, LexiconRecord, UnitVocab, build_unit_vocab, compile_table

log = logging.getLogger(__name__)


@dataclass
class SyntheticTask:
    tokens: list[str]
    lexicon: Lexicon
    token_class: np.ndarray  # (V,)
    classes: int
    train_x: np.ndarray  # (n_train, seq_len) token ids
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    seed: int

    @property
    def V(self) -> int:
        return len(self.tokens)

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        if name == "train":
            return self.train_x, self.train_y
        if name == "test":
            return self.test_x, self.test_y
        raise ValueError(f"unknown split {name!r}")

    def train_coverage(self) -> float:
        """Fraction of the vocabulary that appears in the training split."""
        return float(np.unique(self.train_x).size / self.V)


def label_sequences(x: np.ndarray, token_class: np.ndarray, classes: int) -> np.ndarray:
    counts = np.zeros((x.shape[0], classes), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(x.shape[0]), x.shape[1]), token_class[x].ravel()), 1)
    return counts.argmax(axis=1)


def gen_task(seed: int = 0, V: int = 500, num_sememes: int = 64, classes: int = 4,
             seq_len: int = 8, n_train: int = 2000, n_test: int = 500, o: int = 2,
             num_morphemes: int = 120, focus: float = 0.6) -> SyntheticTask:
    """Deterministic synthetic task.

    Each token gets 1-4 senses of 1-``o`` sememes drawn from a Zipf-like
    distribution and 1-3 morphemes. Sequences mix tokens from one focus class
    (probability ``focus`` per position) with uniformly drawn tokens.
    """
    for name, v in dict(V=V, num_sememes=num_sememes, classes=classes, seq_len=seq_len,
                        n_train=n_train, n_test=n_test, o=o, num_morphemes=num_morphemes).items():
        if v < 1:
            raise ValueError(f"{name} must be positive")
    rng = np.random.default_rng(seed)
    zipf = 1.0 / np.arange(1, num_sememes + 1)
    zipf /= zipf.sum()
    # greedy balancing of Zipf mass keeps the classes near equally likely
    sememe_class = np.empty(num_sememes, dtype=np.int64)
    mass = np.zeros(classes)
    for k in range(num_sememes):
        c = int(np.argmin(mass))
        sememe_class[k] = c
        mass[c] += zipf[k]
    sememe_class = rng.permutation(classes)[sememe_class]
    sememes = [f"s{k}" for k in range(num_sememes)]
    morphs = [f"m{k}" for k in range(num_morphemes)]

    tokens, records = [], []
    token_class = np.empty(V, dtype=np.int64)
    for w in range(V):
        name = f"w{w}"
        n_m = int(rng.integers(1, 4))
        morph = tuple(morphs[k] for k in rng.choice(num_morphemes, size=n_m, replace=False))
        senses = []
        for _ in range(int(rng.integers(1, 5))):
            k = int(rng.integers(1, o + 1))
            ids = rng.choice(num_sememes, size=min(k, num_sememes), replace=False, p=zipf)
            senses.append(tuple(sememes[i] for i in ids))
        token_class[w] = sememe_class[int(senses[0][0][1:])]
        tokens.append(name)
        records.append(LexiconRecord(name, morph, tuple(senses)))

    by_class = [np.flatnonzero(token_class == c) for c in range(classes)]
    by_class = [ids if ids.size else np.arange(V) for ids in by_class]

    def draw(n, exclude=frozenset()):
        out, seen = [], set()
        while len(out) < n:
            c = int(rng.integers(classes))
            from_focus = rng.random(seq_len) < focus
            row = np.where(from_focus, rng.choice(by_class[c], size=seq_len),
                           rng.integers(V, size=seq_len))
            key = tuple(int(t) for t in row)
            if key in exclude or key in seen:
                continue
            seen.add(key)
            out.append(row)
        return np.array(out, dtype=np.int64), seen

    train_x, train_keys = draw(n_train)
    test_x, _ = draw(n_test, exclude=train_keys)
    return SyntheticTask(
        tokens=tokens,
        lexicon=Lexicon(records),
        token_class=token_class,
        classes=classes,
        train_x=train_x,
        train_y=label_sequences(train_x, token_class, classes),
        test_x=test_x,
        test_y=label_sequences(test_x, token_class, classes),
        seed=seed,
    )


def majority_baseline(task: SyntheticTask, split: str = "test") -> float:
    """Accuracy of always predicting the most frequent training label."""
    _, y = task.split(split)
    top = np.bincount(task.train_y, minlength=task.classes).argmax()
    return float(np.mean(y == top))


# -- models ----------------------------------------------------------------


@dataclass
class ToyModel:
    W: np.ndarray  # (d, C)
    b: np.ndarray  # (C,)
    table: np.ndarray | None = None  # dense (V, d)
    store: FactorStore | None = None
    grids: GridTable | None = None
    cfg: SeeConfig | None = None

    @property
    def is_see(self) -> bool:
        return self.store is not None

    def embeddings(self, ids: np.ndarray | None = None) -> np.ndarray:
        if not self.is_see:
            return self.table if ids is None else self.table[ids]
        g = self.grids.grids if ids is None else self.grids.grids[ids]
        return reconstruct_batch(g, self.store.params, self.cfg.d)

    def embedding_params(self) -> int:
        return param_count(self.cfg) if self.is_see else int(self.table.size)

    def hidden(self, x: np.ndarray) -> np.ndarray:
        uniq, inv = np.unique(x, return_inverse=True)
        E = self.embeddings(uniq)
        return E[inv.reshape(x.shape)].mean(axis=1)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.hidden(x) @ self.W + self.b


def evaluate(model: ToyModel, task: SyntheticTask, split: str = "test") -> float:
    x, y = task.split(split)
    return float(np.mean(model.logits(x).argmax(axis=1) == y))


def _onehot(y, C):
    out = np.zeros((y.size, C))
    out[np.arange(y.size), y] = 1.0
    return out


def _pool_backward(x: np.ndarray, dh: np.ndarray, n_rows: int) -> np.ndarray:
    """Scatter ``dh`` (N, d) back onto embedding rows through mean pooling."""
    dE = np.zeros((n_rows, dh.shape[1]))
    np.add.at(dE, x.ravel(), np.repeat(dh / x.shape[1], x.shape[1], axis=0))
    return dE


class _Sgd:
    def __init__(self, lr: float, momentum: float):
        self.lr, self.momentum, self.vel = lr, momentum, {}

    def step(self, name: str, grad: np.ndarray) -> np.ndarray:
        v = self.vel.get(name)
        v = grad if v is None else self.momentum * v + grad
        self.vel[name] = v
        return -self.lr * v


def _check_finite(*vals):
    if not all(np.isfinite(v) for v in vals):
        raise FloatingPointError("training diverged (non-finite loss)")


@dataclass
class TeacherResult:
    model: ToyModel
    train_acc: float
    test_acc: float
    losses: list[float] = field(default_factory=list)


def train_teacher(task: SyntheticTask, d: int = 64, epochs: int = 30, lr: float = 0.5,
                  seed: int = 0, batch: int = 32, momentum: float = 0.9) -> TeacherResult:
    """Minibatch SGD on cross-entropy through table, mean pool and linear layer."""
    rng = np.random.default_rng(seed)
    C = task.classes
    model = ToyModel(W=rng.normal(0, 1 / np.sqrt(d), (d, C)), b=np.zeros(C),
                     table=rng.normal(0, 1 / np.sqrt(d), (task.V, d)))
    opt = _Sgd(lr, momentum)
    x, y = task.train_x, task.train_y
    losses = []
    for epoch in range(epochs):
        order = rng.permutation(len(x))
        total = 0.0
        for s in range(0, len(x), batch):
            idx = order[s:s + batch]
            xb, yb = x[idx], _onehot(y[idx], C)
            h = model.hidden(xb)
            z = h @ model.W + model.b
            loss = D.cross_entropy(D.softmax(z), yb)
            _check_finite(loss)
            total += loss * len(idx)
            dz = D.cross_entropy_logits_grad(z, yb)
            dh = dz @ model.W.T
            model.W += opt.step("W", h.T @ dz)
            model.b += opt.step("b", dz.sum(axis=0))
            model.table += opt.step("E", _pool_backward(xb, dh, task.V))
        losses.append(total / len(x))
        log.debug("teacher epoch %d loss %.4f", epoch, losses[-1])
    return TeacherResult(model, evaluate(model, task, "train"), evaluate(model, task, "test"), losses)


@dataclass
class EpochMetrics:
    epoch: int
    report: D.LossReport  # batch-averaged components over the epoch
    embedding_mse_start: float  # full-table value before the epoch's first step
    train_acc: float
    test_acc: float


@dataclass
class StudentResult:
    model: ToyModel
    vocab: UnitVocab
    trace: list[EpochMetrics]
    train_acc: float
    test_acc: float
    embedding_mse_final: float
    compression: float

    def embedding_mse_at(self, epoch: int) -> float:
        """Full-table embedding MSE at the start of ``epoch`` (``epochs`` means after training)."""
        if epoch == len(self.trace):
            return self.embedding_mse_final
        return self.trace[epoch].embedding_mse_start


def student_config(task: SyntheticTask, d: int, o: int = 2, r: int = 3, m: int = 2,
                   seed: int = 0, target_var: float | None = None) -> SeeConfig:
    vocab = build_unit_vocab(task.lexicon, task.tokens)
    return SeeConfig(d=d, o=o, r=r, m=m, unit_count=vocab.size, seed=seed, target_var=target_var)


def student_step(model: ToyModel, teacher: ToyModel, xb: np.ndarray, yb: np.ndarray,
                 weights: D.LossWeights, stage: D.Stage, opt: _Sgd,
                 reverse_kl: bool = False) -> D.LossReport:
    """One distillation step on a batch; updates ``model`` in place.

    The embedding MSE is taken over the rows of the tokens in the batch, so
    only factors those tokens reference receive gradient.
    """
    mk, me, mh, mc = D.stage_mask(stage)
    C = model.W.shape[1]
    uniq, inv = np.unique(xb, return_inverse=True)
    inv = inv.reshape(xb.shape)
    g = model.grids.grids[uniq]
    Es = reconstruct_batch(g, model.store.params, model.cfg.d)
    Et = teacher.embeddings(uniq)
    hs, ht = Es[inv].mean(axis=1), Et[inv].mean(axis=1)
    zs, zt = hs @ model.W + model.b, ht @ teacher.W + teacher.b
    y1 = _onehot(yb, C)

    emb = D.embedding_mse(Et, Es)
    hid = D.hidden_mse(ht, hs)
    kl = D.kl_distill(zt, zs, weights.T, reverse=reverse_kl)
    ce = D.cross_entropy(D.softmax(zs), y1)
    rep = D.total_loss(emb, hid, kl, ce, weights, stage)
    _check_finite(rep.total)

    dz = mk * weights.alpha * D.kl_distill_grad(zt, zs, weights.T, reverse=reverse_kl)
    dz = dz + mc * D.cross_entropy_logits_grad(zs, y1)
    dh = mh * weights.gamma * D.hidden_mse_grad(ht, hs) + dz @ model.W.T
    dE = me * weights.beta * D.embedding_mse_grad(Et, Es) + _pool_backward(inv, dh, len(uniq))
    dF = reconstruct_batch_backward(g, model.store.params, dE)
    if mk or mc:
        model.W += opt.step("W", hs.T @ dz)
        model.b += opt.step("b", dz.sum(axis=0))
    model.store.apply(opt.step("F", dF))
    return rep


def train_student_see(task: SyntheticTask, teacher: ToyModel, see_cfg: SeeConfig,
                      weights: D.LossWeights = D.LossWeights(), stage_boundary: int = 2,
                      epochs: int = 20, lr: float = 0.5, seed: int = 0, batch: int = 32,
                      momentum: float = 0.9, min_compression: float = 5.0,
                      reverse_kl: bool = False) -> StudentResult:
    """Two-stage distillation of ``teacher`` into a factor-based student.

    Epochs before ``stage_boundary`` optimise the embedding and hidden MSE
    terms only; later epochs optimise the full weighted loss. The student's
    classifier starts as a copy of the teacher's.
    """
    vocab = build_unit_vocab(task.lexicon, task.tokens)
    if see_cfg.unit_count != vocab.size:
        see_cfg = replace(see_cfg, unit_count=vocab.size)
    d = teacher.W.shape[0]
    if see_cfg.d != d:
        raise ValueError(f"student d={see_cfg.d} does not match teacher d={d}")
    compression = task.V * d / param_count(see_cfg)
    if compression < min_compression:
        raise ValueError(f"student compresses the embedding only {compression:.2f}x")
    grids = compile_table(task.lexicon, task.tokens, vocab, see_cfg.r, see_cfg.o)
    model = ToyModel(W=teacher.W.copy(), b=teacher.b.copy(), store=init_factors(see_cfg),
                     grids=grids, cfg=see_cfg)
    rng = np.random.default_rng(seed)
    opt = _Sgd(lr, momentum)
    x, y = task.train_x, task.train_y
    teacher_table = teacher.embeddings()
    trace = []
    for epoch in range(epochs):
        stage = D.stage_of(epoch, stage_boundary)
        if epoch == stage_boundary:
            opt.vel.clear()
        start_mse = D.embedding_mse(teacher_table, model.embeddings())
        order = rng.permutation(len(x))
        sums = np.zeros(4)
        for s in range(0, len(x), batch):
            idx = order[s:s + batch]
            rep = student_step(model, teacher, x[idx], y[idx], weights, stage, opt, reverse_kl)
            sums += len(idx) * np.array([rep.embedding_mse, rep.hidden_mse, rep.kl, rep.ce])
        emb, hid, kl, ce = sums / len(x)
        trace.append(EpochMetrics(epoch, D.total_loss(emb, hid, kl, ce, weights, stage), start_mse,
                                  evaluate(model, task, "train"), evaluate(model, task, "test")))
        log.debug("student epoch %d %s", epoch, trace[-1].report.line(epoch))
    final_mse = D.embedding_mse(teacher_table, model.embeddings())
    return StudentResult(model, vocab, trace, evaluate(model, task, "train"),
                         evaluate(model, task, "test"), final_mse, compression)
