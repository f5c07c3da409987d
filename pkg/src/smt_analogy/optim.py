"""Adam over named numpy arrays, and a finite-difference gradient check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def update(self, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        """One in-place Adam step with bias correction."""
        self.step += 1
        c1 = 1.0 - self.beta1**self.step
        c2 = 1.0 - self.beta2**self.step
        for name in sorted(grads):
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] = params[name] - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


ROUNDOFF_FACTOR = 8.0


@dataclass
class GradCheckResult:
    max_rel_error: float
    probes: int
    skipped: int  # probes discarded because f has a kink within the step
    worst_index: int | None = None
    below_noise: int = 0  # probes where both derivatives sat under the round-off floor

    def __float__(self) -> float:
        return self.max_rel_error


def grad_check(
    f: Callable[[np.ndarray], float],
    grad: np.ndarray,
    x: np.ndarray,
    probes: int = 100,
    eps: float = 1e-5,
    seed: int = 0,
    max_skips: int | None = None,
) -> GradCheckResult:
    """Compare ``grad`` (the analytic gradient of ``f`` at ``x``) with central differences.

    Relative error per probed coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``.
    A probe whose central differences at steps ``eps`` and ``2 * eps``
    disagree lies on a kink of ``f`` (a hinge or rectifier switching inside
    the step) and is redrawn, up to ``max_skips`` times.

    A central difference cannot resolve derivatives smaller than the
    round-off in ``f(x + eps) - f(x - eps)``, about ``machine_eps * |f| / eps``.
    When both derivatives lie under ``ROUNDOFF_FACTOR`` times that floor
    (e.g. a bias whose effect cancels exactly, with analytic gradient 0) the
    probe counts as agreeing.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != x.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match point shape {x.shape}")
    if not np.all(np.isfinite(grad)):
        raise ArithmeticError("analytic gradient contains non-finite values")
    flat = x.ravel()
    rng = np.random.default_rng(seed)
    max_skips = 10 * probes if max_skips is None else max_skips

    unit = np.finfo(np.float64).eps

    def shifted(i: int, h: float) -> float:
        y = flat.copy()
        y[i] += h
        val = float(f(y.reshape(x.shape)))
        if not np.isfinite(val):
            raise ArithmeticError(f"f is non-finite at coordinate {i} shifted by {h}")
        return val

    worst, worst_i, done, skipped, quiet = 0.0, None, 0, 0, 0
    while done < probes:
        i = int(rng.integers(flat.size))
        fp, fm = shifted(i, eps), shifted(i, -eps)
        c1 = (fp - fm) / (2 * eps)
        c2 = (shifted(i, 2 * eps) - shifted(i, -2 * eps)) / (4 * eps)
        floor = ROUNDOFF_FACTOR * unit * max(abs(fp), abs(fm), 1.0) / eps
        a = float(grad.ravel()[i])
        if max(abs(a), abs(c1), abs(c2)) <= floor:
            quiet += 1
            done += 1
            continue
        if abs(c1 - c2) > 1e-6 * max(abs(c1), abs(c2), 1e-3):
            skipped += 1
            if skipped > max_skips:
                raise ArithmeticError(f"more than {max_skips} probes landed on kinks")
            continue
        err = abs(a - c1) / max(abs(a), abs(c1), 1e-8)
        if err > worst:
            worst, worst_i = err, i
        done += 1
    return GradCheckResult(worst, probes, skipped, worst_i, quiet)
