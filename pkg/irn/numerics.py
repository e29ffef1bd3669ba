"""Numeric kernels: stable softmax / cross-entropy, Adam, seeded RNG streams,
and a central-difference gradient oracle.

Everything here is float64 and deterministic. Tensors are plain numpy
arrays; the model is small enough that reproducibility matters more than
speed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

LOG_EPS = 1e-12
ADAM_EPS = 1e-8


class NumericsError(ValueError):
    """Raised on non-finite inputs or shape violations."""


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis (max-subtraction)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        raise NumericsError("softmax of empty vector")
    if not np.all(np.isfinite(logits)):
        raise NumericsError("softmax input contains NaN or infinity")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(gold: np.ndarray, pred: np.ndarray) -> float:
    """-ln(pred[j*] + eps) where j* is the index of the one-hot `gold`."""
    gold = np.asarray(gold, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if gold.shape != pred.shape:
        raise NumericsError(f"shape mismatch: gold {gold.shape} vs pred {pred.shape}")
    hot = np.flatnonzero(gold == 1.0)
    if hot.size != 1 or np.count_nonzero(gold) != 1:
        raise NumericsError("gold vector is not one-hot")
    return cross_entropy_index(int(hot[0]), pred)


def cross_entropy_index(gold_index: int, pred: np.ndarray) -> float:
    """Cross-entropy against an integer gold index (fast path).

    Clamped at zero so the epsilon guard cannot push a perfect prediction
    negative.
    """
    return max(0.0, float(-np.log(pred[gold_index] + LOG_EPS)))


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter tensor."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def like(cls, param: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param))


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = ADAM_EPS,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update, in place. Returns (param, state)."""
    if param.shape != grad.shape:
        raise NumericsError(f"shape mismatch: param {param.shape} vs grad {grad.shape}")
    if param.shape != state.m.shape:
        raise NumericsError("optimizer state does not match parameter shape")
    state.t += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * grad
    state.v *= beta2
    state.v += (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param, state


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, coordinate by coordinate.

    Used as the independent oracle for the hand-derived backward pass.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = grad.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        fp = f(x)
        flat_x[i] = orig - h
        fm = f(x)
        flat_x[i] = orig
        flat_g[i] = (fp - fm) / (2.0 * h)
    return grad


@dataclass
class Prng:
    """Seeded RNG with independent named streams.

    `stream(name)` derives a generator from (seed, sha256(name)); the same
    (seed, name) pair always yields the same stream, and distinct names
    give streams that do not coincide.
    """

    seed: int
    _cache: dict = field(default_factory=dict, repr=False)

    def stream(self, name: str) -> np.random.Generator:
        if name not in self._cache:
            digest = hashlib.sha256(name.encode("utf-8")).digest()
            words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
            self._cache[name] = np.random.default_rng(
                np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, *words])
            )
        return self._cache[name]


def xavier_uniform(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def normal_embedding(rows: int, cols: int, rng: np.random.Generator, sigma: float = 0.1) -> np.ndarray:
    return rng.normal(0.0, sigma, size=(rows, cols))
