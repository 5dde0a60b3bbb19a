"""Two-stage distillation losses and their gradients.

The initial stage only pulls the student's embedding table and hidden states
toward the teacher's (two MSE terms). The formal stage adds a temperature
softened KL term on the logits and the task cross-entropy::

    total = alpha * kl + beta * emb_mse + gamma * hidden_mse + ce
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

LOG_EPS = 1e-12


class Stage(str, Enum):
    INITIAL = "initial"
    FORMAL = "formal"


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    T: float = 2.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError("temperature T must be positive")


@dataclass(frozen=True)
class LossReport:
    embedding_mse: float
    hidden_mse: float
    kl: float
    ce: float
    total: float
    stage: Stage

    def line(self, step) -> str:
        """Tab-separated ``step stage emb hidden kl ce total``."""
        vals = (self.embedding_mse, self.hidden_mse, self.kl, self.ce, self.total)
        return "\t".join([str(step), self.stage.value] + [repr(float(v)) for v in vals])


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def embedding_mse(teacher_table, student_table) -> float:
    """Mean squared difference over all ``|V| * d`` entries."""
    t, s = _pair(teacher_table, student_table)
    return float(np.mean((t - s) ** 2))


def embedding_mse_grad(teacher_table, student_table) -> np.ndarray:
    t, s = _pair(teacher_table, student_table)
    return 2.0 * (s - t) / t.size


def hidden_mse(teacher_hiddens, student_hiddens) -> float:
    """Squared Euclidean distance per step, averaged over steps."""
    t, s = _pair(teacher_hiddens, student_hiddens)
    if t.ndim != 2 or t.shape[0] < 1:
        raise ValueError("hidden states must be (steps, d) with steps >= 1")
    return float(np.mean(np.sum((t - s) ** 2, axis=1)))


def hidden_mse_grad(teacher_hiddens, student_hiddens) -> np.ndarray:
    t, s = _pair(teacher_hiddens, student_hiddens)
    return 2.0 * (s - t) / t.shape[0]


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(np.asarray(z, dtype=np.float64)))


def _kl_parts(z_teacher, z_student, T):
    zt, zs = _pair(z_teacher, z_student)
    if zt.shape[-1] < 2:
        raise ValueError("need at least two logits")
    if not T > 0:
        raise ValueError("temperature must be positive")
    return log_softmax(zt / T), log_softmax(zs / T)


def kl_distill(z_teacher, z_student, T: float = 2.0, scale_T2: bool = False,
               reverse: bool = False) -> float:
    """``KL(softmax(z_t/T) || softmax(z_s/T))``; rows of 2-D input are averaged.

    ``reverse`` swaps the direction to ``KL(student || teacher)``.
    """
    lt, ls = _kl_parts(z_teacher, z_student, T)
    if reverse:
        lt, ls = ls, lt
    kl = np.sum(np.exp(lt) * (lt - ls), axis=-1)
    val = float(np.mean(kl))
    return val * T * T if scale_T2 else val


def kl_distill_grad(z_teacher, z_student, T: float = 2.0, scale_T2: bool = False,
                    reverse: bool = False) -> np.ndarray:
    """Gradient of :func:`kl_distill` with respect to the student logits."""
    lt, ls = _kl_parts(z_teacher, z_student, T)
    ps = np.exp(ls)
    if reverse:
        kl = np.sum(ps * (ls - lt), axis=-1, keepdims=True)
        g = ps * (ls - lt - kl) / T
    else:
        g = (ps - np.exp(lt)) / T
    if g.ndim == 2:
        g = g / g.shape[0]
    return g * T * T if scale_T2 else g


def cross_entropy(pred_probs, labels_onehot) -> float:
    """``-(1/N) sum_i sum_c y_ic log(p_ic)`` with the log clamped at 1e-12."""
    p, y = _pair(pred_probs, labels_onehot)
    if p.ndim != 2:
        raise ValueError("expected (N, C) arrays")
    if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("prediction rows must sum to 1")
    return float(-np.sum(y * np.log(np.maximum(p, LOG_EPS))) / p.shape[0])


def cross_entropy_logits_grad(logits, labels_onehot) -> np.ndarray:
    """Gradient of ``cross_entropy(softmax(logits), y)`` with respect to the logits."""
    z, y = _pair(logits, labels_onehot)
    return (softmax(z) - y) / z.shape[0]


def stage_of(epoch: int, boundary: int = 2) -> Stage:
    if epoch < 0 or boundary < 0:
        raise ValueError("epoch and boundary must be non-negative")
    return Stage.INITIAL if epoch < boundary else Stage.FORMAL


def stage_mask(stage: Stage | str) -> tuple[float, float, float, float]:
    """Multipliers applied to (kl, emb, hidden, ce) in the given stage."""
    stage = Stage(stage)
    return (0.0, 1.0, 1.0, 0.0) if stage is Stage.INITIAL else (1.0, 1.0, 1.0, 1.0)


def total_loss(embedding: float, hidden: float, kl: float, ce: float,
               w: LossWeights = LossWeights(), stage: Stage | str = Stage.FORMAL) -> LossReport:
    stage = Stage(stage)
    mk, me, mh, mc = stage_mask(stage)
    total = mk * w.alpha * kl + me * w.beta * embedding + mh * w.gamma * hidden + mc * ce
    return LossReport(float(embedding), float(hidden), float(kl), float(ce), float(total), stage)
