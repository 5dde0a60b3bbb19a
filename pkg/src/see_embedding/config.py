"""Run configuration: an INI file with fixed sections, validated up front.

Example::

    [run]
    seed = 0
    output_dir = runs/demo

    [model]
    vocab_size = 46272
    d = 512

    [see]
    o = 3
    r = 5
    m = 18, 9, 4, 2
    unit_count = 16326

    [baseline.lrmf]
    kind = matrix
    k = 50

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .baselines import KINDS, BaselineSpec
from .distill import LossWeights

_SCHEMA = {
    "run": {"seed": int, "output_dir": str},
    "lexicon": {"path": str, "tokens": str, "morphemes": str},
    "model": {"vocab_size": int, "d": int},
    "see": {"o": int, "r": int, "m": "intlist", "unit_count": int, "target_var": float},
    "distill": {"alpha": float, "beta": float, "gamma": float, "T": float,
                "stage_boundary": int, "reverse_kl": bool},
    "task": {"V": int, "num_sememes": int, "classes": int, "seq_len": int,
             "n_train": int, "n_test": int, "num_morphemes": int},
    "train": {"teacher_epochs": int, "teacher_lr": float, "epochs": int, "lr": float,
              "batch": int, "momentum": float, "d": int,
              "student_o": int, "student_r": int, "student_m": int},
}
_BASELINE_KEYS = {
    "matrix": {"k"},
    "tt": {"row_factors", "col_factors", "rank"},
    "word2ket": {"r", "o", "q"},
    "morphte": {"morph_vocab", "r", "o", "q", "copies"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "runs"
    lexicon: str | None = None
    tokens: str | None = None
    morphemes: str | None = None
    vocab_size: int = 46272
    d: int = 512
    o: int = 3
    r: int = 5
    m: tuple[int, ...] = (18, 9, 4, 2)
    unit_count: int = 16326
    target_var: float | None = None
    baselines: list[BaselineSpec] = field(default_factory=list)
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    T: float = 2.0
    stage_boundary: int = 2
    reverse_kl: bool = False
    task: dict = field(default_factory=dict)
    teacher_epochs: int = 30
    teacher_lr: float = 0.5
    epochs: int = 30
    lr: float = 0.1
    batch: int = 32
    momentum: float = 0.9
    toy_d: int = 64
    student_o: int = 2
    student_r: int = 3
    student_m: int = 2

    def validate(self) -> "RunConfig":
        for name in ("vocab_size", "d", "o", "r", "unit_count", "teacher_epochs", "epochs", "batch", "toy_d",
                     "student_o", "student_r", "student_m"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.m or any(v < 1 for v in self.m):
            raise ConfigError("every m must be >= 1")
        if self.unit_count < 2:
            raise ConfigError("unit_count must be >= 2")
        if self.stage_boundary < 0:
            raise ConfigError("stage_boundary must be >= 0")
        try:
            self.weights()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        return self

    def weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta, self.gamma, self.T)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["baselines"] = [{"kind": b.kind, **b.shape} for b in self.baselines]
        out["m"] = list(self.m)
        return out

    def digest(self) -> str:
        raw = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:12]

    def override(self, **values) -> "RunConfig":
        known = {f.name for f in fields(self)}
        clean = {k: v for k, v in values.items() if v is not None}
        bad = set(clean) - known
        if bad:
            raise ConfigError(f"unknown config keys {sorted(bad)}")
        return replace(self, **clean).validate()


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind == "intlist":
            return tuple(int(v) for v in raw.replace(",", " ").split())
        if kind is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _baseline(name: str, items: dict) -> BaselineSpec:
    kind = items.pop("kind", None)
    if kind not in KINDS:
        raise ConfigError(f"[baseline.{name}] kind must be one of {KINDS}")
    bad = set(items) - _BASELINE_KEYS[kind]
    if bad:
        raise ConfigError(f"[baseline.{name}] unknown keys {sorted(bad)}")
    shape = {}
    for k, v in items.items():
        if k in ("row_factors", "col_factors"):
            shape[k] = [int(x) for x in v.replace("x", " ").replace(",", " ").split()]
        else:
            shape[k] = _convert(f"baseline.{name}", k, v, int)
    return BaselineSpec(kind, shape)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    values: dict = {}
    baselines = []
    task = {}
    for section in parser.sections():
        items = dict(parser.items(section))
        if section.startswith("baseline."):
            baselines.append(_baseline(section.split(".", 1)[1], items))
            continue
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in items.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}")
            val = _convert(section, key, raw, _SCHEMA[section][key])
            if section == "task":
                task[key] = val
            elif section == "lexicon":
                values["lexicon" if key == "path" else key] = val
            elif section == "train" and key == "d":
                values["toy_d"] = val
            else:
                values[key] = val
    return RunConfig(**values, baselines=baselines, task=task).validate()
