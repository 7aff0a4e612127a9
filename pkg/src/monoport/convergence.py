"""Contraction matrix for the nested forward/backward iteration.

Position ``p`` of the iteration obeys the increment bound::

    |du_p^+| <= g_p |du_p| + g_p a_p |du_{p-1}^+| + g_p a_p |du_{p+1}|

(with ``g_1 b_1 |du_1|`` replacing the first term at ``p = 1``).  Expanding the
already-updated ``du_{p-1}^+`` gives a nonnegative matrix ``A`` with
``|du^+| <= A |du|``; a spectral radius below one certifies convergence.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .elements import MonotonicityDescriptor
from .errors import NumericalError

__all__ = [
    "forward_step_factor",
    "resolvent_factor",
    "LadderDescriptors",
    "build_contraction_matrix",
    "spectral_radius",
    "ladder_descriptors",
    "tune_step_size",
    "observed_rate",
    "write_curve_csv",
]


def forward_step_factor(mu: float, lam: float, alpha: float, sqrt: bool = False) -> float:
    """Bound ``1 - 2 mu a + lam^2 a^2`` for the forward step ``I - a R0``.

    The expression bounds the *squared* gain of the forward step; pass
    ``sqrt=True`` for the gain itself.
    """
    val = 1.0 - 2.0 * mu * alpha + (lam * alpha) ** 2
    val = max(val, 0.0)  # negative only through rounding when mu <= lam
    return math.sqrt(val) if sqrt else val


def resolvent_factor(mu: float, alpha: float) -> float:
    """Lipschitz constant ``1 / (1 + a mu)`` of ``Res_{a E}`` for ``mu``-monotone ``E``."""
    if not math.isfinite(mu) or mu < 0:
        return 1.0
    return 1.0 / (1.0 + alpha * mu)


@dataclass(frozen=True)
class LadderDescriptors:
    beta1: float
    gammas: Tuple[float, ...]
    alphas: Tuple[float, ...]

    def __post_init__(self):
        g = tuple(float(x) for x in self.gammas)
        a = tuple(float(x) for x in self.alphas)
        if not g or len(g) != len(a):
            raise ValueError(f"need matching nonempty gammas and alphas, got {len(g)} and {len(a)}")
        if any(x < 0 for x in g) or any(x < 0 for x in a) or self.beta1 < 0:
            raise ValueError("contraction data must be nonnegative")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "alphas", a)

    @property
    def size(self) -> int:
        return len(self.gammas)


def build_contraction_matrix(d: LadderDescriptors) -> np.ndarray:
    """Row-recursive construction of the contraction matrix."""
    m = d.size
    g, a = d.gammas, d.alphas
    A = np.zeros((m, m))
    A[0, 0] = g[0] * d.beta1
    if m > 1:
        A[0, 1] = g[0] * a[0]
    for p in range(1, m):
        A[p] = g[p] * a[p] * A[p - 1]
        A[p, p] += g[p]
        if p + 1 < m:
            A[p, p + 1] += g[p] * a[p]
    return A


def spectral_radius(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(np.abs(ev)))


def ladder_descriptors(
    descriptors: Sequence[MonotonicityDescriptor], alphas: Sequence[float], sqrt: bool = False
) -> LadderDescriptors:
    """Contraction data from ``[R0, E_1, ..., E_m]`` descriptors and steps."""
    if len(descriptors) != len(alphas) + 1:
        raise ValueError(f"need {len(alphas) + 1} descriptors for {len(alphas)} step sizes")
    r0 = descriptors[0]
    if not (math.isfinite(r0.lam) and math.isfinite(r0.mu)):
        beta1 = math.inf
    else:
        beta1 = forward_step_factor(r0.mu, r0.lam, alphas[0], sqrt=sqrt)
    gammas = [resolvent_factor(e.mu, a) for e, a in zip(descriptors[1:], alphas)]
    return LadderDescriptors(beta1, tuple(gammas), tuple(alphas))


def tune_step_size(
    descriptors: Sequence[MonotonicityDescriptor], alpha_grid: Iterable[float], sqrt: bool = False
) -> Tuple[float, float, List[Tuple[float, float]]]:
    """Grid search for the common step size minimizing the spectral radius.

    Returns ``(alpha*, rho*, curve)`` with ``curve`` the ``(alpha, rho)`` pairs.
    ``alpha = 0`` is allowed and gives the identity (``rho = 1``).
    """
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise ValueError("the step-size grid is empty")
    m = len(descriptors) - 1
    if m < 1:
        raise ValueError("need descriptors for R0 and at least one backward element")
    curve = []
    for a in grid:
        if a < 0:
            raise ValueError(f"step sizes must be nonnegative, got {a}")
        d = ladder_descriptors(descriptors, [a] * m, sqrt=sqrt)
        rho = spectral_radius(build_contraction_matrix(d)) if math.isfinite(d.beta1) else math.inf
        curve.append((a, rho))
    best = min(curve, key=lambda c: c[1])
    return best[0], best[1], curve


def observed_rate(updates, tail: float = 0.5) -> float:
    """Geometric-mean ratio of successive update norms over the tail.

    ``tail`` is the fraction of the history used (at least two entries).
    Updates that have reached the rounding floor are ignored.
    """
    u = np.asarray(updates, dtype=float)
    u = u[u > 1e-300]
    if u.size < 2:
        return 0.0
    start = min(int(u.size * (1.0 - tail)), u.size - 2)
    seg = u[start:]
    return float((seg[-1] / seg[0]) ** (1.0 / (seg.size - 1)))


def write_curve_csv(path, curve) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "rho"])
        for a, r in curve:
            w.writerow([f"{a:.17g}", f"{r:.17g}"])
