"""Command-line front end.

Exit codes: 0 on success, 1 when a check fails, 2 on bad input.
Tables are tab-separated UTF-8. ``SEE_OUTPUT_DIR`` overrides the output
directory of ``train``, ``distill`` and ``sweep``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import distill as D
from . import toy
from .baselines import lrmf_rank_for_ratio, morphte_params
from .config import ConfigError, RunConfig, load_config
from .embedding import (SeeConfig, init_factors, materialize, param_count,
                        reconstruct_backward, reconstruct_row, solve_m_for_ratio)
from .io import (FormatError, config_meta, load_factor_store, load_grid_table, read_container,
                 save_factor_store, save_grid_table, write_container)
from .lexicon import (LexiconError, build_unit_vocab, compile_table, coverage_stats,
                      load_morpheme_table, parse_lexicon)
from .tensor_core import finite_diff_check, kron_chain, kron_chain_backward

ENV_OUTPUT_DIR = "SEE_OUTPUT_DIR"
GRADCHECK_LIMIT = 1e-5


class InputError(Exception):
    pass


class CheckFailed(Exception):
    pass


def _read_text(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"file not found: {path}")
    return p.read_text(encoding="utf-8")


def _table(rows, out=None):
    out = out or sys.stdout
    for row in rows:
        out.write("\t".join(str(v) for v in row) + "\n")


def _ratio(original: int, params: int) -> str:
    return f"{float(Fraction(original, params)):.2f}"


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    over = {k: getattr(args, k, None) for k in ("seed", "vocab_size", "d", "o", "r", "unit_count",
                                                 "epochs", "lr", "stage_boundary")}
    if getattr(args, "m", None):
        over["m"] = tuple(args.m)
    return cfg.override(**over)


def _output_dir(cfg: RunConfig, args) -> Path:
    out = os.environ.get(ENV_OUTPUT_DIR) or getattr(args, "out", None) or cfg.output_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- subcommands ---------------------------------------------------------


def cmd_compile(args) -> int:
    morph_table = None
    if args.morphemes:
        morph_table = load_morpheme_table(_read_text(args.morphemes).splitlines(keepends=True))
    lex = parse_lexicon(_read_text(args.lexicon), morph_table)
    tokens = [t.strip() for t in _read_text(args.tokens).splitlines() if t.strip()]
    vocab = build_unit_vocab(lex, tokens, morph_table)
    table = compile_table(lex, tokens, vocab, args.r, args.o, morph_table)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_grid_table(out, table, vocab.units)
    stats = coverage_stats(table)
    rows = [("stat", "value"), ("words", stats.words), ("vocab_size", vocab.size),
            ("sememes", vocab.n_sememes), ("morphemes", vocab.n_morphemes),
            ("oov_fraction", f"{stats.oov_fraction:.6f}"), ("mean_senses", f"{stats.mean_senses:.6f}"),
            ("truncated_senses", stats.truncated_senses), ("pad_fill_rate", f"{stats.pad_fill_rate:.6f}")]
    with open(out.with_suffix(".stats.tsv"), "w", encoding="utf-8") as fh:
        _table(rows, fh)
    _table(rows)
    return 0


def cmd_init(args) -> int:
    header, _ = _grid_header(args.grids)
    cfg = SeeConfig(d=args.d, o=header["o"], r=header["r"], m=args.m,
                    unit_count=header["vocab_size"], seed=args.seed)
    save_factor_store(args.out, init_factors(cfg))
    print(f"wrote {args.out}: unit_count={cfg.unit_count} m={cfg.m} q={cfg.q} params={param_count(cfg)}")
    return 0


def _grid_header(path):
    if not Path(path).is_file():
        raise InputError(f"file not found: {path}")
    header, arrays = read_container(path, "grid_table")
    return header["meta"], arrays


def cmd_materialize(args) -> int:
    for p in (args.grids, args.store):
        if not Path(p).is_file():
            raise InputError(f"file not found: {p}")
    table = load_grid_table(args.grids)
    store = load_factor_store(args.store)
    d = args.d or store.q**table.o
    cfg = SeeConfig(d=d, o=table.o, r=table.r, m=store.m, unit_count=store.unit_count, seed=store.seed)
    if cfg.q != store.q:
        raise InputError(f"d={d} needs q={cfg.q} but the store has q={store.q}")
    mat = materialize(table, store, cfg)
    np.save(args.out, mat.matrix, allow_pickle=False)
    print(f"wrote {args.out}: {mat.matrix.shape[0]}x{mat.matrix.shape[1]} ({mat.scalars} scalars)")
    return 0


def count_rows(cfg: RunConfig) -> list[tuple]:
    V, d = cfg.vocab_size, cfg.d
    original = V * d
    rows = [("method", "setting", "params", "ratio"), ("original", f"V={V},d={d}", original, "1.00")]
    for m in cfg.m:
        see = SeeConfig(d=d, o=cfg.o, r=cfg.r, m=m, unit_count=cfg.unit_count)
        n = param_count(see)
        rows.append(("see", f"units={cfg.unit_count - 1},o={cfg.o},r={cfg.r},q={see.q},m={m}", n,
                     _ratio(original, n)))
    for b in cfg.baselines:
        n = b.params(V, d)
        rows.append((b.kind, b.label(), n, _ratio(original, n)))
    return rows


def cmd_count(args) -> int:
    cfg = _config(args)
    print(f"# config_hash={cfg.digest()}")
    _table(count_rows(cfg))
    return 0


def cmd_solve_ratio(args) -> int:
    cfg = _config(args)
    base = SeeConfig(d=cfg.d, o=cfg.o, r=cfg.r, m=1, unit_count=cfg.unit_count)
    original = cfg.vocab_size * cfg.d
    try:
        m = solve_m_for_ratio(base, original, args.target)
        k = lrmf_rank_for_ratio(cfg.vocab_size, cfg.d, args.target)
    except ValueError as e:
        raise InputError(str(e)) from None
    n = param_count(replace(base, m=m))
    rows = [("method", "choice", "params", "ratio"),
            ("see", f"m={m}", n, _ratio(original, n)),
            ("matrix", f"k={k}", (cfg.vocab_size + cfg.d) * k,
             _ratio(original, (cfg.vocab_size + cfg.d) * k))]
    print(f"# config_hash={cfg.digest()} target={args.target}")
    _table(rows)
    return 0


def gradcheck(seed: int, trials: int, inject_bug: bool = False) -> dict[str, float]:
    """Max relative finite-difference error per gradient over random trials."""
    if trials < 1:
        raise InputError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = {"kron_chain_backward": 0.0, "reconstruct_backward": 0.0, "kl_distill": 0.0}
    bug = 2.0 if inject_bug else 1.0
    for _ in range(trials):
        q, o = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        chain = [rng.normal(size=q) for _ in range(o)]
        up = rng.normal(size=q**o)
        k = int(rng.integers(o))
        grads = kron_chain_backward(chain, up)

        def f(x, k=k):
            c = list(chain)
            c[k] = x
            return float(up @ kron_chain(c))

        err = finite_diff_check(f, chain[k], bug * grads[k])
        worst["kron_chain_backward"] = max(worst["kron_chain_backward"], err)

        q, o, r, m = int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(2, 6)), int(rng.integers(1, 4))
        d = int(rng.integers(1, q**o + 1))
        units = int(rng.integers(3, 8))
        cfg = SeeConfig(d=d, o=o, r=r, m=m, unit_count=units)
        store = init_factors(replace(cfg, seed=int(rng.integers(1 << 31))))
        store.params[2:] = rng.normal(size=store.params[2:].shape)
        grid = rng.integers(0, units, size=(r, o))
        up = rng.normal(size=d)
        gmap = reconstruct_backward(grid, store, cfg, up)
        if not gmap:
            continue
        (u, i), g = sorted(gmap.items())[int(rng.integers(len(gmap)))]

        def h(x, u=u, i=i):
            s = store.copy()
            s.params[u, i] = x
            return float(up @ reconstruct_row(grid, s, cfg))

        err = finite_diff_check(h, store.params[u, i], g, eps=1e-5)
        worst["reconstruct_backward"] = max(worst["reconstruct_backward"], err)

        C = int(rng.integers(2, 7))
        zt, zs, T = rng.normal(size=C), rng.normal(size=C), float(rng.uniform(0.5, 4.0))
        err = finite_diff_check(lambda z: D.kl_distill(zt, z, T), zs, D.kl_distill_grad(zt, zs, T), eps=1e-5)
        worst["kl_distill"] = max(worst["kl_distill"], err)
    return worst


def cmd_gradcheck(args) -> int:
    worst = gradcheck(args.seed, args.trials, args.inject_bug)
    ok = all(v <= GRADCHECK_LIMIT for v in worst.values())
    rows = [("gradient", "max_rel_err", "status")]
    rows += [(k, f"{v:.3e}", "pass" if v <= GRADCHECK_LIMIT else "FAIL") for k, v in worst.items()]
    _table(rows)
    return 0 if ok else 1


def _task(cfg: RunConfig) -> toy.SyntheticTask:
    kw = dict(cfg.task)
    kw.setdefault("o", cfg.student_o)
    return toy.gen_task(seed=cfg.seed, **kw)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _output_dir(cfg, args)
    task = _task(cfg)
    res = toy.train_teacher(task, d=cfg.toy_d, epochs=cfg.teacher_epochs, lr=cfg.teacher_lr,
                            seed=cfg.seed, batch=cfg.batch, momentum=cfg.momentum)
    _write_json(out / "config.json", {"config_hash": cfg.digest(), **cfg.to_dict()})
    with open(out / "teacher_metrics.tsv", "w", encoding="utf-8") as fh:
        _table([("epoch", "train_loss")] + [(e, repr(v)) for e, v in enumerate(res.losses)], fh)
        _table([("final_train_acc", repr(res.train_acc)), ("final_test_acc", repr(res.test_acc))], fh)
    write_container(out / "teacher.ckpt", "dense_model", {"config_hash": cfg.digest()},
                    {"table": res.model.table, "W": res.model.W, "b": res.model.b})
    print(f"# config_hash={cfg.digest()}")
    _table([("model", "train_acc", "test_acc"), ("teacher", f"{res.train_acc:.4f}", f"{res.test_acc:.4f}")])
    return 0


def run_distill(cfg: RunConfig):
    task = _task(cfg)
    teacher = toy.train_teacher(task, d=cfg.toy_d, epochs=cfg.teacher_epochs, lr=cfg.teacher_lr,
                                seed=cfg.seed, batch=cfg.batch, momentum=cfg.momentum)
    see_cfg = toy.student_config(task, d=cfg.toy_d, o=cfg.student_o, r=cfg.student_r,
                                 m=cfg.student_m, seed=cfg.seed, target_var=cfg.target_var)
    student = toy.train_student_see(task, teacher.model, see_cfg, cfg.weights(), cfg.stage_boundary,
                                    epochs=cfg.epochs, lr=cfg.lr, seed=cfg.seed, batch=cfg.batch,
                                    momentum=cfg.momentum, reverse_kl=cfg.reverse_kl)
    return task, teacher, student


def cmd_distill(args) -> int:
    cfg = _config(args)
    out = _output_dir(cfg, args)
    task, teacher, student = run_distill(cfg)
    scfg = student.model.cfg
    header = {"config_hash": cfg.digest(), "student_embedding_params": param_count(scfg),
              "teacher_embedding_params": int(teacher.model.table.size),
              "compression": student.compression, "train_token_coverage": task.train_coverage()}
    _write_json(out / "config.json", {**header, **cfg.to_dict()})
    with open(out / "losses.tsv", "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={cfg.digest()} student_embedding_params={param_count(scfg)}\n")
        _table([("epoch", "stage", "embedding_mse", "hidden_mse", "kl", "ce", "total")], fh)
        for e in student.trace:
            fh.write(e.report.line(e.epoch) + "\n")
    with open(out / "metrics.tsv", "w", encoding="utf-8") as fh:
        _table([("epoch", "stage", "embedding_mse_start", "train_acc", "test_acc")], fh)
        for e in student.trace:
            _table([(e.epoch, e.report.stage.value, repr(e.embedding_mse_start),
                     repr(e.train_acc), repr(e.test_acc))], fh)
    save_factor_store(out / "student_factors.bin", student.model.store)
    write_container(out / "student_head.ckpt", "student_head", config_meta(scfg),
                    {"W": student.model.W, "b": student.model.b})
    write_container(out / "teacher.ckpt", "dense_model", {"config_hash": cfg.digest()},
                    {"table": teacher.model.table, "W": teacher.model.W, "b": teacher.model.b})
    ratio = student.test_acc / teacher.test_acc if teacher.test_acc else float("inf")
    boundary = min(cfg.stage_boundary, len(student.trace))
    mse_drop = student.embedding_mse_at(boundary) < student.embedding_mse_at(0)
    print(f"# config_hash={cfg.digest()} student_embedding_params={param_count(scfg)}")
    _table([("model", "test_acc", "compression"),
            ("teacher", f"{teacher.test_acc:.4f}", "1.00"),
            ("student", f"{student.test_acc:.4f}", f"{student.compression:.2f}")])
    _table([("accuracy_ratio", f"{ratio:.4f}"), ("embedding_mse_dropped", mse_drop)])
    if args.check and not (ratio >= 0.9 and mse_drop):
        raise CheckFailed("student below 0.9x teacher accuracy or embedding MSE did not drop")
    return 0


def sweep_rows(cfg: RunConfig, axis: str, values: list[int], train: bool = False) -> list[tuple]:
    original = cfg.vocab_size * cfg.d
    header = ["value", "q", "see_params", "ratio", "morphte_params"]
    if train:
        header += ["student_test_acc"]
    rows = [tuple(header)]
    for v in values:
        o, r, m = cfg.o, cfg.r, cfg.m[0]
        if axis == "rank":
            r = v
        elif axis == "order":
            o = v
        elif axis == "m":
            m = v
        else:
            raise InputError(f"unknown sweep axis {axis!r}")
        see = SeeConfig(d=cfg.d, o=o, r=r, m=m, unit_count=cfg.unit_count)
        n = param_count(see)
        row = [v, see.q, n, _ratio(original, n),
               morphte_params(cfg.unit_count - 1, r, o, see.q, m)]
        if train:
            keys = {"rank": "student_r", "order": "student_o", "m": "student_m"}
            _, _, student = run_distill(replace(cfg, **{keys[axis]: v}))
            row.append(f"{student.test_acc:.4f}")
        rows.append(tuple(row))
    return rows


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = [int(v) for v in args.values.replace(",", " ").split()]
    if not values or any(v < 1 for v in values):
        raise InputError("sweep values must be positive integers")
    rows = sweep_rows(cfg, args.axis, values, args.train)
    print(f"# config_hash={cfg.digest()} axis={args.axis}")
    _table(rows)
    if args.train:
        with open(_output_dir(cfg, args) / f"sweep_{args.axis}.tsv", "w", encoding="utf-8") as fh:
            _table(rows, fh)
    return 0


# -- parser --------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--vocab-size", dest="vocab_size", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--o", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--m", type=int, nargs="+")
    p.add_argument("--unit-count", dest="unit_count", type=int,
                   help="unit vocabulary size including the two reserved units")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="see-embed", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a lexicon into a grid table")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--tokens", required=True)
    p.add_argument("--morphemes")
    p.add_argument("--r", type=int, default=5)
    p.add_argument("--o", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("init", help="write freshly initialised factors for a grid table")
    p.add_argument("--grids", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("count", help="parameter counts and ratios for SEE and baselines")
    _common(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("solve-ratio", help="largest m (and LRMF k) reaching a target ratio")
    _common(p)
    p.add_argument("--target", type=float, required=True)
    p.set_defaults(func=cmd_solve_ratio)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--inject-bug", action="store_true", help="scale one analytic gradient by 2")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("materialize", help="expand factors into a dense |V| x d table (.npy)")
    p.add_argument("--grids", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--d", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_materialize)

    for name, func, helptext in (("train", cmd_train, "train the dense teacher on the toy task"),
                                 ("distill", cmd_distill, "teacher + two-stage SEE student")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--stage-boundary", dest="stage_boundary", type=int)
        p.add_argument("--out")
        p.add_argument("--check", action="store_true", help="exit 1 unless the student passes")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="sweep rank, order or m")
    _common(p)
    p.add_argument("--axis", choices=("rank", "order", "m"), required=True)
    p.add_argument("--values", required=True, help="comma separated integers")
    p.add_argument("--train", action="store_true", help="also run the toy distillation per value")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--stage-boundary", dest="stage_boundary", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CheckFailed as e:
        print(f"check failed: {e}", file=sys.stderr)
        return 1
    except (InputError, ConfigError, LexiconError, FormatError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
