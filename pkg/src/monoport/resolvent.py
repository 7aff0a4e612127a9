"""Resolvents ``(I + alpha S)^{-1}`` of element laws.

Linear laws are handled by LU factorizations that are cached per
``(element, alpha, tau, T)``; static nonlinear laws by a bracketed
(guarded) Newton iteration run on every sample at once.
"""

from __future__ import annotations

import math
import threading
import warnings
from collections import OrderedDict
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .elements import (
    Direction,
    Element,
    LinearResistor,
    Memristive,
    ShockleyDiode,
    element_forward,
    element_matrix,
    monotonicity_of,
)
from .errors import BracketError, IntegrationDomainError, NumericalError, SteadyStateError, UnsupportedElementError
from .signal import PeriodicSignal

__all__ = [
    "FactorizedResolvent",
    "linear_resolvent",
    "inverse_linear_resolvent",
    "guarded_newton_resolvent",
    "element_resolvent",
    "ElementOperator",
    "clear_cache",
]

_MAX_DOUBLINGS = 64


class FactorizedResolvent:
    """A reusable solver for one fixed linear resolvent.

    ``kind`` is ``"direct"`` for ``x = (I + alpha A)^{-1} z`` and
    ``"inverse"`` for ``x = (I + alpha A^{-1})^{-1} z``.
    """

    def __init__(self, A, alpha: float, kind: str = "direct"):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {A.shape}")
        if not alpha > 0:
            raise ValueError(f"step size must be positive, got {alpha!r}")
        n = A.shape[0]
        if kind == "direct":
            M = np.eye(n) + alpha * A
        elif kind == "inverse":
            M = A + alpha * np.eye(n)
        else:
            raise ValueError(f"unknown resolvent kind {kind!r}")
        self.kind = kind
        self.alpha = float(alpha)
        self.size = n
        self.lu, self.piv = _factor(M)

    def __call__(self, z):
        if isinstance(z, PeriodicSignal):
            return z.like(self(z.values))
        y = scipy.linalg.lu_solve((self.lu, self.piv), z, check_finite=False)
        if self.kind == "inverse":
            # A (A + aI)^{-1} z  ==  z - a (A + aI)^{-1} z
            return z - self.alpha * y
        return y


def _factor(M):
    with warnings.catch_warnings():
        # singularity is reported below with a condition estimate
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    d = np.abs(np.diag(lu))
    if d.min() <= np.finfo(float).eps * M.shape[0] * max(d.max(), 1e-300):
        cond = np.linalg.cond(M)
        raise NumericalError(f"singular factorization (condition number estimate {cond:.3g})")
    return lu, piv


def linear_resolvent(A, alpha: float) -> FactorizedResolvent:
    """Factor ``I + alpha A`` once; the result maps ``z`` to ``(I + alpha A)^{-1} z``."""
    return FactorizedResolvent(A, alpha, "direct")


def inverse_linear_resolvent(A, alpha: float) -> FactorizedResolvent:
    """Resolvent of ``A^{-1}`` from a single factorization of ``A + alpha I``."""
    return FactorizedResolvent(A, alpha, "inverse")


# ---------------------------------------------------------------------------
# Factorization cache
# ---------------------------------------------------------------------------

_CACHE_SIZE = 512
_cache: "OrderedDict[tuple, object]" = OrderedDict()
_cache_lock = threading.Lock()


def _cached(key, build):
    with _cache_lock:
        hit = _cache.get(key)
        if hit is not None:
            _cache.move_to_end(key)
            return hit
    value = build()
    with _cache_lock:
        _cache[key] = value
        while len(_cache) > _CACHE_SIZE:
            _cache.popitem(last=False)
    return value


def clear_cache() -> None:
    with _cache_lock:
        _cache.clear()


def _element_resolvent_solver(e, alpha, tau, period, invert):
    key = ("res", e, float(alpha), tau, period, bool(invert))

    def build():
        A = element_matrix(e, tau, period)
        return inverse_linear_resolvent(A, alpha) if invert else linear_resolvent(A, alpha)

    return _cached(key, build)


def cached_solve(e: Element, tau: int, period: float, z: np.ndarray) -> np.ndarray:
    """Solve ``A x = z`` for a linear element's matrix ``A`` (cached LU)."""
    key = ("solve", e, tau, period)
    lu_piv = _cached(key, lambda: _factor(np.asarray(element_matrix(e, tau, period))))
    return scipy.linalg.lu_solve(lu_piv, z, check_finite=False)


# ---------------------------------------------------------------------------
# Guarded Newton
# ---------------------------------------------------------------------------


def _bracketed_newton(g, dg, lo, hi, x, tol, max_iter=200, xtol=None):
    """Solve the increasing equations ``g(x) = 0`` elementwise.

    ``lo``/``hi`` must bracket the roots (``g(lo) <= 0 <= g(hi)``).  Newton
    steps that leave the current bracket are replaced by bisection.  A sample
    is done when ``|g| <= tol`` and, if ``xtol`` is given, the Newton step is
    below ``xtol * max(1, |x|)``.
    """
    lo, hi, x = lo.copy(), hi.copy(), x.copy()
    tol = np.broadcast_to(tol, x.shape)
    active = np.arange(x.size)
    for _ in range(max_iter):
        xa = x[active]
        ga = g(xa, active)
        done = np.abs(ga) <= tol[active]
        if xtol is not None:
            with np.errstate(all="ignore"):
                done &= np.abs(ga / dg(xa, active)) <= xtol * np.maximum(1.0, np.abs(xa))
        neg = ga < 0
        lo[active] = np.where(neg, xa, lo[active])
        hi[active] = np.where(neg, hi[active], xa)
        # bracket collapsed to adjacent floats: nothing left to improve
        done |= (hi[active] - lo[active]) <= 4 * np.spacing(np.maximum(np.abs(lo[active]), np.abs(hi[active])))
        active = active[~done]
        if active.size == 0:
            return x
        xa, ga = x[active], ga[~done]
        with np.errstate(all="ignore"):
            step = xa - ga / dg(xa, active)
        la, ha = lo[active], hi[active]
        bisect = ~((step > la) & (step < ha))
        x[active] = np.where(bisect, 0.5 * (la + ha), step)
    raise NumericalError(f"guarded Newton did not converge on {active.size} sample(s)")


def _solve_exp_linear(a, b, z, tol, y0=None):
    """Solve ``a expm1(y) + b y = z`` for ``y`` with ``a, b > 0``, elementwise.

    The left side is convex and increasing in ``y`` and has no domain
    boundary, which makes it the safe coordinate for the diode resolvent.
    """
    z = np.asarray(z, dtype=float)
    lo = (np.minimum(z, 0.0) - 1.0) / b
    hi = np.log1p(np.maximum(z, 0.0) / a) + 1.0

    def g(y, idx):
        return a * np.expm1(y) + b * y - z[idx]

    def dg(y, idx):
        return a * np.exp(y) + b

    start = hi.copy() if y0 is None else np.clip(y0, lo, hi)
    # a small residual alone is not enough when a and b are tiny
    return _bracketed_newton(g, dg, lo, hi, start, tol, xtol=1e-12)


def _default_tol(z):
    return 1e-12 * np.maximum(1.0, np.abs(z))


def _diode_resolvent(e: ShockleyDiode, alpha, z, invert, tol=None, y0=None):
    """Diode resolvent; also returns the log coordinate ``y`` for warm starts."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        return np.full_like(z, np.nan), None
    tol = _default_tol(z) if tol is None else tol
    if invert:
        # x + alpha I_s expm1(x / nV_T) = z, solved in y = x / nV_T
        y = _solve_exp_linear(alpha * e.I_s, e.nvt, z, tol, y0)
        return e.nvt * y, y
    # x + alpha nV_T ln(x / I_s + 1) = z, solved in y = ln(x / I_s + 1)
    y = _solve_exp_linear(e.I_s, alpha * e.nvt, z, tol, y0)
    return e.I_s * np.expm1(y), y


def guarded_newton_resolvent(
    f: Callable[[float], float],
    alpha: float,
    z: float,
    tol: Optional[float] = None,
    df: Optional[Callable[[float], float]] = None,
    lower: Optional[float] = None,
) -> float:
    """Solve ``x + alpha f(x) = z`` for a nondecreasing scalar law ``f``.

    The initial bracket ``[min(z, 0) - 1, max(z, 0) + 1]`` is widened by
    doubling until the residual changes sign.  If ``f`` is only defined for
    ``x > lower`` the lower end is pulled towards the boundary by halving
    the gap instead, so ``f`` is never evaluated outside its domain.
    ``df`` defaults to a one-sided difference quotient.
    """
    if not alpha > 0:
        raise ValueError(f"step size must be positive, got {alpha!r}")
    z = float(z)
    tol = float(_default_tol(z)) if tol is None else float(tol)

    def r(x):
        return x + alpha * f(x) - z

    hi = max(z, 0.0) + 1.0
    if lower is not None and hi <= lower:
        hi = lower + 1.0
    lo = min(z, 0.0) - 1.0
    if lower is not None and lo <= lower:
        lo = lower + 0.5 * (hi - lower)
    for _ in range(_MAX_DOUBLINGS):
        rl = r(lo)
        if rl <= 0:
            break
        if lower is not None:
            lo = lower + 0.5 * (lo - lower)
        else:
            lo -= hi - lo
    else:
        raise BracketError(f"no sign change below the root for z={z}")
    for _ in range(_MAX_DOUBLINGS):
        if r(hi) >= 0:
            break
        hi += hi - lo
    else:
        raise BracketError(f"no sign change above the root for z={z}")

    if df is None:
        def deriv(x):
            h = 1e-7 * max(1.0, abs(x))
            return (f(x + h) - f(x)) / h
    else:
        deriv = df

    def g(x, idx):
        return np.array([r(float(v)) for v in x])

    def dg(x, idx):
        return np.array([1.0 + alpha * deriv(float(v)) for v in x])

    x0 = np.array([0.5 * (lo + hi)])
    return float(_bracketed_newton(g, dg, np.array([lo]), np.array([hi]), x0, np.array([tol]))[0])


# ---------------------------------------------------------------------------
# Element dispatch
# ---------------------------------------------------------------------------


def _resolvent_values(e, alpha, z, tau, period, invert, tol=None):
    if not alpha > 0:
        raise ValueError(f"step size must be positive, got {alpha!r}")
    if isinstance(e, Memristive):
        raise UnsupportedElementError("resolvents of memristive elements are not provided")
    if isinstance(e, LinearResistor):
        r = 1.0 / e.R if invert else e.R
        return z / (1.0 + alpha * r)
    if isinstance(e, ShockleyDiode):
        return _diode_resolvent(e, alpha, z, invert, tol)[0]
    if e.linear:
        return _element_resolvent_solver(e, alpha, tau, period, invert)(z)
    raise UnsupportedElementError(f"no resolvent for {type(e).__name__}")


def element_resolvent(
    e: Element, alpha: float, z: PeriodicSignal, invert: bool = False, tol: Optional[float] = None
) -> PeriodicSignal:
    """``Res_{alpha E}(z)``, or ``Res_{alpha E^{-1}}(z)`` when ``invert`` is set."""
    return z.like(_resolvent_values(e, alpha, z.values, z.tau, z.period, invert, tol))


class ElementOperator:
    """An element used in a fixed orientation on a fixed signal grid.

    ``invert`` is true when the element's native direction is the opposite
    of the one its position in a circuit requires.  Instances expose
    ``forward`` and ``resolvent`` on raw sample arrays for the splitting loops.
    """

    def __init__(self, element: Element, tau: int, period: float = 1.0, invert: bool = False):
        self.element = element
        self.tau = int(tau)
        self.period = float(period)
        self.invert = bool(invert)
        self._warm = {}

    @classmethod
    def oriented(cls, element: Element, direction: Direction, tau: int, period: float = 1.0):
        return cls(element, tau, period, invert=element.direction is not direction)

    @property
    def direction(self) -> Direction:
        d = self.element.direction
        return d.flipped if self.invert else d

    @property
    def has_resolvent(self) -> bool:
        return not isinstance(self.element, Memristive)

    def forward(self, x: np.ndarray) -> np.ndarray:
        e = self.element
        if not np.all(np.isfinite(x)):
            return np.full_like(x, np.nan)
        if isinstance(e, Memristive):
            try:
                return element_forward(e, PeriodicSignal(x, self.period), self.invert).values
            except (SteadyStateError, IntegrationDomainError):
                # a diverging iterate drove the state model out of range
                return np.full_like(x, np.nan)
        if isinstance(e, LinearResistor):
            return x / e.R if self.invert else e.R * x
        if isinstance(e, ShockleyDiode):
            return e.inverse_law(x) if self.invert else e.law(x)
        if self.invert:
            return cached_solve(e, self.tau, self.period, x)
        return element_matrix(e, self.tau, self.period) @ x

    def resolvent(self, alpha: float, z: np.ndarray) -> np.ndarray:
        if isinstance(self.element, ShockleyDiode):
            # successive splitting iterates are close: start Newton at the last root
            y0 = self._warm.get(alpha)
            if y0 is not None and y0.shape != np.shape(z):
                y0 = None
            x, self._warm[alpha] = _diode_resolvent(self.element, alpha, z, self.invert, None, y0)
            return x
        return _resolvent_values(self.element, alpha, z, self.tau, self.period, self.invert)

    def descriptor(self):
        return monotonicity_of(self.element, self.tau, self.period, self.invert)

    def __repr__(self):
        inv = ", inverted" if self.invert else ""
        return f"ElementOperator({self.element!r}{inv})"
