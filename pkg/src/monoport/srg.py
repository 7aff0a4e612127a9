"""Sampled scaled relative graphs of operators on periodic signals.

Each input pair ``(u1, u2)`` with outputs ``(y1, y2)`` contributes the point
with modulus ``|y1 - y2| / |u1 - u2|`` and argument equal to the angle
between ``u1 - u2`` and ``y1 - y2``.  The smallest real part over the cloud
is a sample estimate of the monotonicity modulus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .elements import MonotonicityDescriptor
from .signal import PeriodicSignal

__all__ = ["SRGPoint", "SineFamily", "srg_sample", "monotonicity_estimate", "write_srg_csv", "format_srg_csv"]


@dataclass(frozen=True)
class SRGPoint:
    gain: float
    angle: float
    meta: Tuple = ()

    @property
    def re(self) -> float:
        return self.gain * math.cos(self.angle)

    @property
    def im(self) -> float:
        return self.gain * math.sin(self.angle)


@dataclass(frozen=True)
class SineFamily:
    """Inputs ``a sin(2 pi g t / T) + d`` with random ``(a, g, d)``.

    ``a`` is log-uniform on ``amplitude``, ``g`` uniform on the integers in
    ``cycles`` and ``d`` uniform on ``offset``.
    """

    amplitude: Tuple[float, float] = (0.1, 10.0)
    cycles: Tuple[int, int] = (1, 8)
    offset: Tuple[float, float] = (-50.0, 50.0)

    def __post_init__(self):
        lo, hi = self.amplitude
        if not 0 < lo <= hi:
            raise ValueError(f"amplitude range must be positive, got {self.amplitude}")
        if not 1 <= self.cycles[0] <= self.cycles[1]:
            raise ValueError(f"cycle range must be positive integers, got {self.cycles}")
        if not self.offset[0] <= self.offset[1]:
            raise ValueError(f"empty offset range {self.offset}")

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """``(count, 3)`` parameter rows ``(a, g, d)``."""
        a = np.exp(rng.uniform(math.log(self.amplitude[0]), math.log(self.amplitude[1]), count))
        g = rng.integers(self.cycles[0], self.cycles[1] + 1, count)
        d = rng.uniform(self.offset[0], self.offset[1], count)
        return np.column_stack([a, g, d])

    @staticmethod
    def signals(params: np.ndarray, tau: int, period: float) -> np.ndarray:
        t = np.arange(tau) * (period / tau)
        a, g, d = params[:, 0:1], params[:, 1:2], params[:, 2:3]
        return a * np.sin(2 * np.pi * g * t / period) + d


def _apply(op, U, period, failures):
    """Outputs for the rows of ``U``; rows whose evaluation fails become NaN."""
    batch = getattr(op, "apply_batch", None)
    if batch is not None:
        try:
            return np.asarray(batch(U, period), dtype=float)
        except Exception:  # fall back to per-row evaluation to isolate failures
            pass
    Y = np.full(U.shape, np.nan)
    call = op.forward if hasattr(op, "forward") else op
    for r in range(U.shape[0]):
        try:
            Y[r] = np.asarray(getattr(call(PeriodicSignal(U[r], period)), "values", None), dtype=float)
        except Exception as exc:
            if failures is not None:
                failures.append((r, repr(exc)))
    return Y


def srg_sample(
    op,
    family: Optional[SineFamily] = None,
    count: int = 2000,
    tau: int = 256,
    period: float = 1.0,
    seed: int = 0,
    failures: Optional[list] = None,
) -> List[SRGPoint]:
    """Sample ``count`` input pairs from ``family`` and return their SRG points.

    ``op`` maps a :class:`PeriodicSignal` to a :class:`PeriodicSignal`, either
    as a callable or through a ``forward`` method.  An ``apply_batch(U, T)``
    method, if present, is used to evaluate all inputs at once.  Pairs whose
    evaluation fails are appended to ``failures`` (if given) and skipped, as
    are degenerate pairs with zero input or output difference.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    family = family or SineFamily()
    rng = np.random.default_rng(seed)
    p1, p2 = family.draw(rng, count), family.draw(rng, count)
    U = np.vstack([family.signals(p1, tau, period), family.signals(p2, tau, period)])
    Y = _apply(op, U, period, failures)
    du = U[:count] - U[count:]
    dy = Y[:count] - Y[count:]
    nu = np.linalg.norm(du, axis=1)
    ny = np.linalg.norm(dy, axis=1)
    ip = np.einsum("ij,ij->i", du, dy)
    points = []
    for k in range(count):
        if not (np.isfinite(ny[k]) and nu[k] > 0 and ny[k] > 0):
            continue
        c = float(np.clip(ip[k] / (nu[k] * ny[k]), -1.0, 1.0))
        points.append(SRGPoint(float(ny[k] / nu[k]), math.acos(c), tuple(p1[k]) + tuple(p2[k])))
    return points


def monotonicity_estimate(points: Sequence[SRGPoint]) -> MonotonicityDescriptor:
    """Empirical ``(mu, lam)``: smallest real part and largest gain."""
    if not points:
        raise ValueError("no SRG points to estimate from")
    mu = min(p.re for p in points)
    lam = max(p.gain for p in points)
    return MonotonicityDescriptor(mu, lam, empirical=True)


def format_srg_csv(points: Sequence[SRGPoint]) -> str:
    """Columns ``re,im,gain,angle,alpha,gamma,delta`` then the second input's parameters."""
    lines = ["re,im,gain,angle,alpha,gamma,delta,alpha2,gamma2,delta2"]
    for p in points:
        meta = list(p.meta) + [math.nan] * (6 - len(p.meta))
        vals = [p.re, p.im, p.gain, p.angle] + meta[:6]
        lines.append(",".join(f"{v:.17g}" for v in vals))
    return "\n".join(lines) + "\n"


def write_srg_csv(path, points: Sequence[SRGPoint]) -> None:
    with open(Path(path), "w", newline="") as fh:
        fh.write(format_srg_csv(points))
