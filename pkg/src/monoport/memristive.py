"""Memristive one-ports: contractive state dynamics read out through a port law.

A system ``x' = f(x, u, t)``, ``y = h(x, u, t)`` driven by a ``T``-periodic
input has a unique periodic orbit when its dynamics are contractive.  The
operator ``u -> y`` on one-period signals is realized by locating that orbit
(shooting on the period map) and reading out ``y`` along it.

All callables are vectorized over a leading batch axis: ``x`` has shape
``(B, state_dim)``, ``u`` has shape ``(B,)`` and ``t`` is a scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .elements import Direction, Memristive, MonotonicityDescriptor
from .errors import IntegrationDomainError, SteadyStateError
from .signal import PeriodicSignal

__all__ = [
    "MemristiveSystem",
    "integrate_period",
    "periodic_steady_state",
    "PotassiumConductance",
    "alpha_n",
    "beta_n",
    "potassium_forward",
]

_DOMAIN_SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class MemristiveSystem:
    """State-space description of a memristive one-port.

    Parameters
    ----------
    state_dim : int
    f : callable
        ``f(x, u, t)`` returning the state derivative, shape ``(B, state_dim)``.
    output : callable
        ``output(x, u, t)`` returning the port output, shape ``(B,)``.
    direction : Direction
        Which port variable is the input ``u``.
    lower, upper : float or array_like, optional
        Box that the state must stay in during integration.
    descriptor : MonotonicityDescriptor, optional
        Monotonicity data, e.g. an estimate from SRG sampling.
    affine : callable, optional
        For one-dimensional state with ``f = p(u, t) x + q(u, t)``, a function
        returning ``(p, q)``.  Enables an exact solve for the periodic orbit
        of the discretized period map.
    """

    state_dim: int
    f: Callable
    output: Callable
    direction: Direction = Direction.V_TO_I
    lower: Optional[object] = None
    upper: Optional[object] = None
    descriptor: Optional[MonotonicityDescriptor] = None
    affine: Optional[Callable] = None
    x0: Optional[object] = None

    def __post_init__(self):
        if int(self.state_dim) != self.state_dim or self.state_dim < 1:
            raise ValueError(f"state_dim must be a positive integer, got {self.state_dim!r}")
        if self.affine is not None and self.state_dim != 1:
            raise ValueError("the affine fast path needs a one-dimensional state")

    def initial_state(self, batch: int) -> np.ndarray:
        if self.x0 is not None:
            x = np.broadcast_to(np.asarray(self.x0, dtype=float), (self.state_dim,))
        elif self.lower is not None and self.upper is not None:
            x = 0.5 * (np.broadcast_to(self.lower, (self.state_dim,)) + np.broadcast_to(self.upper, (self.state_dim,)))
        else:
            x = np.zeros(self.state_dim)
        return np.tile(np.asarray(x, dtype=float), (batch, 1))

    def with_descriptor(self, d: MonotonicityDescriptor) -> "MemristiveSystem":
        from dataclasses import replace

        return replace(self, descriptor=d)

    def element(self) -> Memristive:
        return Memristive(self)

    def forward(self, u: PeriodicSignal) -> PeriodicSignal:
        return periodic_steady_state(self, u)

    def apply_batch(self, U, period: float = 1.0, tol: float = 1e-10) -> np.ndarray:
        """Steady-state outputs for each row of ``U`` (shape ``(B, tau)``)."""
        Y, _, _ = _steady_state(self, np.atleast_2d(np.asarray(U, dtype=float)), float(period), tol, 50, "newton")
        return Y


def _check_domain(sys, X, k):
    if sys.lower is not None and np.any(X < np.asarray(sys.lower) - _DOMAIN_SLACK):
        raise IntegrationDomainError(f"state fell below its lower bound at step {k}")
    if sys.upper is not None and np.any(X > np.asarray(sys.upper) + _DOMAIN_SLACK):
        raise IntegrationDomainError(f"state rose above its upper bound at step {k}")


def _rk4_period(sys, U, x0, period):
    """Classical RK4 over one period; returns outputs ``(B, tau)`` and ``x(T)``."""
    B, tau = U.shape
    h = period / tau
    Unext = np.roll(U, -1, axis=1)
    x = np.array(x0, dtype=float)
    Y = np.empty((B, tau))
    for k in range(tau):
        t = k * h
        u0, u1 = U[:, k], Unext[:, k]
        um = 0.5 * (u0 + u1)
        Y[:, k] = sys.output(x, u0, t)
        k1 = sys.f(x, u0, t)
        k2 = sys.f(x + 0.5 * h * k1, um, t + 0.5 * h)
        k3 = sys.f(x + 0.5 * h * k2, um, t + 0.5 * h)
        k4 = sys.f(x + h * k3, u1, t + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_domain(sys, x, k + 1)
    return Y, x


def _affine_maps(sys, U, period):
    """Per-step maps ``x_{k+1} = M_k x_k + c_k`` of RK4 on an affine scalar ODE."""
    B, tau = U.shape
    h = period / tau
    Unext = np.roll(U, -1, axis=1)
    t = np.arange(tau) * h
    p0, q0 = sys.affine(U, t)
    pm, qm = sys.affine(0.5 * (U + Unext), t + 0.5 * h)
    p1, q1 = sys.affine(Unext, t + h)
    M1, c1 = p0, q0
    M2, c2 = pm * (1 + 0.5 * h * M1), pm * (0.5 * h * c1) + qm
    M3, c3 = pm * (1 + 0.5 * h * M2), pm * (0.5 * h * c2) + qm
    M4, c4 = p1 * (1 + h * M3), p1 * (h * c3) + q1
    M = 1 + (h / 6.0) * (M1 + 2 * M2 + 2 * M3 + M4)
    c = (h / 6.0) * (c1 + 2 * c2 + 2 * c3 + c4)
    return M, c


def _affine_run(sys, U, M, c, x0):
    B, tau = U.shape
    X = np.empty((B, tau))
    x = x0
    for k in range(tau):
        X[:, k] = x
        x = M[:, k] * x + c[:, k]
    _check_domain(sys, X, "any")
    _check_domain(sys, x, tau)
    return X, x


def integrate_period(sys: MemristiveSystem, u: PeriodicSignal, x0) -> Tuple[PeriodicSignal, np.ndarray]:
    """Integrate one period from ``x0``; returns the sampled output and ``x(T)``."""
    U = u.values[None, :]
    x0 = np.asarray(x0, dtype=float).reshape(1, sys.state_dim)
    _check_domain(sys, x0, 0)
    Y, xT = _rk4_period(sys, U, x0, u.period)
    return u.like(Y[0]), xT[0]


def _steady_state(sys, U, period, tol, max_periods, method, x0=None):
    B = U.shape[0]
    x = sys.initial_state(B) if x0 is None else np.array(np.broadcast_to(x0, (B, sys.state_dim)), dtype=float)
    if sys.affine is not None and method != "picard":
        # overflow for extreme inputs shows up as a nonfinite gap below
        with np.errstate(over="ignore", invalid="ignore"):
            M, c = _affine_maps(sys, U, period)
            P = np.prod(M, axis=1)
            # C accumulates the affine offsets of the composed period map
            C = np.zeros(B)
            for k in range(U.shape[1]):
                C = M[:, k] * C + c[:, k]
            x0v = C / (1.0 - P)
            gap = math.inf
            if np.all(np.isfinite(x0v)):
                X, xT = _affine_run(sys, U, M, c, x0v)
                gap = float(np.max(np.abs(xT - x0v)))
        if not gap <= tol:
            raise SteadyStateError(f"periodic orbit solve left a gap of {gap:.3g}")
        tau = U.shape[1]
        t = np.tile(np.arange(tau) * (period / tau), B)
        Y = sys.output(X.reshape(-1, 1), U.reshape(-1), t).reshape(B, tau)
        return Y, x0v[:, None], 1

    history = []
    for n in range(1, max_periods + 1):
        Y, xT = _rk4_period(sys, U, x, period)
        F = xT - x
        gap = float(np.max(np.abs(F)))
        history.append(gap)
        if gap <= tol:
            return Y, x, n
        if method == "newton":
            x = _newton_step(sys, U, x, xT, period)
        else:
            x = xT
    raise SteadyStateError(
        f"period map did not settle in {max_periods} periods (last gap {history[-1]:.3g}); "
        "the dynamics may not be contractive"
    )


def _newton_step(sys, U, x, xT, period):
    """One shooting step ``x <- x - (J - I)^{-1} (phi(x) - x)`` with a difference Jacobian."""
    B, d = x.shape
    J = np.empty((B, d, d))
    for j in range(d):
        h = 1e-6 * np.maximum(1.0, np.abs(x[:, j]))
        xp = x.copy()
        # step towards the interior so the perturbed state stays in the box
        if sys.upper is not None:
            up = np.broadcast_to(sys.upper, (d,))[j]
            h = np.where(xp[:, j] + h > up, -h, h)
        xp[:, j] += h
        _, xTp = _rk4_period(sys, U, xp, period)
        J[:, :, j] = (xTp - xT) / h[:, None]
    F = xT - x
    Jm = J - np.eye(d)[None]
    try:
        dx = np.linalg.solve(Jm, F[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return xT
    xn = x - dx
    if sys.lower is not None:
        xn = np.maximum(xn, sys.lower)
    if sys.upper is not None:
        xn = np.minimum(xn, sys.upper)
    bad = ~np.all(np.isfinite(xn), axis=1)
    xn[bad] = xT[bad]
    return xn


def periodic_steady_state(
    sys: MemristiveSystem,
    u: PeriodicSignal,
    tol: float = 1e-10,
    max_periods: int = 200,
    method: str = "newton",
    x0=None,
) -> PeriodicSignal:
    """Output along the periodic orbit driven by ``u``.

    ``method="picard"`` iterates the period map ``x -> x(T)``; ``"newton"``
    accelerates it by shooting.  Either stops when ``|x(T) - x(0)|_inf <= tol``.
    """
    if method not in ("newton", "picard"):
        raise ValueError(f"method must be 'newton' or 'picard', got {method!r}")
    Y, _, _ = _steady_state(sys, u.values[None, :], u.period, tol, max_periods, method, x0)
    return u.like(Y[0])


# ---------------------------------------------------------------------------
# Potassium conductance
# ---------------------------------------------------------------------------


def alpha_n(v):
    """Opening rate ``0.01 (10 + v) / (exp(1 + v/10) - 1)`` with its limit at ``v = -10``."""
    v = np.asarray(v, dtype=float)
    x = 1.0 + v / 10.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = 0.1 * x / np.expm1(x)
    return np.where(np.abs(x) < 1e-4, 0.1 * (1.0 - x / 2.0 + x * x / 12.0), r)


def beta_n(v):
    with np.errstate(over="ignore"):
        return 0.125 * np.exp(np.asarray(v, dtype=float) / 80.0)


class PotassiumConductance(MemristiveSystem):
    """Gate ``n' = a(v)(1 - n) - b(v) n`` and current ``i = g n^4 (v - v_K)``.

    Voltages are in mV and the conductance in mmho/cm^2.
    """

    def __init__(self, g_K: float = 19.0, v_K: float = 12.0, descriptor: Optional[MonotonicityDescriptor] = None):
        if not g_K > 0:
            raise ValueError(f"g_K must be positive, got {g_K!r}")

        def f(x, v, t):
            a, b = alpha_n(v), beta_n(v)
            return (a * (1.0 - x[:, 0]) - b * x[:, 0])[:, None]

        def output(x, v, t):
            return g_K * x[:, 0] ** 4 * (v - v_K)

        def affine(v, t):
            a = alpha_n(v)
            return -(a + beta_n(v)), a

        super().__init__(
            state_dim=1,
            f=f,
            output=output,
            direction=Direction.V_TO_I,
            lower=0.0,
            upper=1.0,
            descriptor=descriptor,
            affine=affine,
        )
        object.__setattr__(self, "g_K", float(g_K))
        object.__setattr__(self, "v_K", float(v_K))

    def gate_equilibrium(self, v):
        a, b = alpha_n(v), beta_n(v)
        return a / (a + b)

    def with_descriptor(self, d):
        return PotassiumConductance(self.g_K, self.v_K, d)

    def __eq__(self, other):
        if not isinstance(other, PotassiumConductance):
            return NotImplemented
        return (self.g_K, self.v_K, self.descriptor) == (other.g_K, other.v_K, other.descriptor)

    def __hash__(self):
        return hash((PotassiumConductance, self.g_K, self.v_K))

    def __repr__(self):
        return f"PotassiumConductance(g_K={self.g_K}, v_K={self.v_K})"


def potassium_forward(v: PeriodicSignal, g_K: float = 19.0, v_K: float = 12.0) -> PeriodicSignal:
    """Steady-state potassium current for the periodic voltage ``v``."""
    return PotassiumConductance(g_K, v_K).forward(v)
