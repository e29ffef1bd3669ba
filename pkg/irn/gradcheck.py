"""Finite-difference verification of the hand-derived backward pass.

Runs small random problems and compares every analytic parameter gradient
of the training loss against central differences. This is the load-bearing
correctness check for the whole forward/backward stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GoldTargets, MODE_IRN, ModelParams, PARAM_NAMES, backward, forward, init_params
from .numerics import Prng, finite_diff_grad


@dataclass
class GradCheckResult:
    ok: bool
    worst_error: float
    worst_tensor: str
    failures: list


def _random_problem(d, n_e, n_r, vocab_size, rng):
    hops = int(rng.integers(1, 4))
    token_ids = tuple(int(rng.integers(vocab_size)) for _ in range(int(rng.integers(3, 7))))
    subject = int(rng.integers(n_e))
    rels = tuple(int(rng.integers(n_r)) for _ in range(hops))
    ents = tuple(int(rng.integers(n_e)) for _ in range(hops))
    targets = GoldTargets(relation_targets=(*rels, n_r), entity_targets=ents)
    return token_ids, subject, targets


def run_gradcheck(seed: int, n_instances: int = 20, d: int = 8, n_e: int = 5,
                  n_r: int = 4, vocab_size: int = 6, lam: float = 1.0,
                  mode: str = MODE_IRN, rel_tol: float = 1e-4,
                  abs_floor: float = 1e-7, h: float = 1e-6) -> GradCheckResult:
    """Compare analytic and finite-difference gradients on random problems."""
    rng = Prng(seed).stream("gradcheck")
    worst = 0.0
    worst_tensor = ""
    failures = []
    for i in range(n_instances):
        params = init_params(d, vocab_size, n_e, n_r, seed + 1000 * (i + 1))
        token_ids, subject, targets = _random_problem(d, n_e, n_r, vocab_size, rng)

        def loss_fn(p: ModelParams) -> float:
            _, loss = forward(p, None, targets, lam=lam, mode=mode,
                              token_ids=token_ids, subject=subject)
            return loss

        trace, _ = forward(params, None, targets, lam=lam, mode=mode,
                           token_ids=token_ids, subject=subject)
        analytic = backward(params, trace, targets, lam=lam, mode=mode,
                            token_ids=token_ids, subject=subject)

        for name in PARAM_NAMES:
            tensor = getattr(params, name)

            def f(x):
                # x aliases the live tensor; forward sees mutations in place
                return loss_fn(params)

            numeric = finite_diff_grad(f, tensor, h=h)
            err = np.abs(analytic[name] - numeric)
            tol = abs_floor + rel_tol * np.abs(numeric)
            scaled = float((err / np.maximum(tol, 1e-300)).max())
            if scaled > worst:
                worst, worst_tensor = scaled, name
            if (err > tol).any():
                failures.append((i, name, float(err.max())))
    return GradCheckResult(ok=not failures, worst_error=worst,
                           worst_tensor=worst_tensor, failures=failures)
