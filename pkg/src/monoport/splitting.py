"""Forward/backward, Douglas-Rachford and nested forward/backward iterations.

The solvers work on raw sample arrays.  Operators are duck typed: anything
with ``forward(x)`` can be used for a forward step and anything with
``resolvent(alpha, z)`` for a backward step
(:class:`monoport.resolvent.ElementOperator` provides both).  Failure to
converge is reported through :class:`SolveResult`, never raised.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .elements import MonotonicityDescriptor
from .errors import DomainError
from .signal import PeriodicSignal

__all__ = [
    "SplittingConfig",
    "SolveResult",
    "LinearOperator",
    "Offset",
    "forward_backward",
    "douglas_rachford",
    "nested_forward_backward",
    "StepRange",
    "fb_step_range",
    "dr_step_range",
    "write_trace_csv",
]

ALGORITHMS = ("fb", "dr", "nested")


@dataclass(frozen=True)
class SplittingConfig:
    """Algorithm choice and iteration controls.

    ``step_sizes`` holds one value for ``fb``/``dr``; for ``nested`` it holds
    one value per signal position, or a single value that is broadcast.
    """

    algorithm: str = "nested"
    step_sizes: Tuple[float, ...] = (1.0,)
    tol: float = 1e-6
    max_iter: int = 10_000
    record_trace: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        steps = (self.step_sizes,) if np.isscalar(self.step_sizes) else tuple(self.step_sizes)
        steps = tuple(float(a) for a in steps)
        if not steps:
            raise ValueError("at least one step size is required")
        if not all(a > 0 and math.isfinite(a) for a in steps):
            raise ValueError(f"step sizes must be positive and finite, got {steps}")
        if self.algorithm in ("fb", "dr") and len(steps) != 1:
            raise ValueError(f"{self.algorithm} takes exactly one step size, got {len(steps)}")
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        object.__setattr__(self, "step_sizes", steps)
        object.__setattr__(self, "max_iter", int(self.max_iter))

    def steps_for(self, m: int) -> Tuple[float, ...]:
        """Step sizes for ``m`` positions, broadcasting a single value."""
        if len(self.step_sizes) == 1:
            return self.step_sizes * m
        if len(self.step_sizes) != m:
            raise ValueError(f"expected 1 or {m} step sizes, got {len(self.step_sizes)}")
        return self.step_sizes


@dataclass
class SolveResult:
    """Outcome of a splitting iteration.

    ``final_residual`` is the last ``max_update``, the infinity norm of the
    change of the iterate(s) in the final iteration.  ``trace`` rows are
    ``(k, max_update, relative_update)``.
    """

    solution: PeriodicSignal
    internal_signals: List[PeriodicSignal]
    iterations: int
    final_residual: float
    converged: bool
    algorithm: str
    trace: Optional[List[Tuple[int, float, float]]] = None
    message: str = ""

    def update_history(self) -> np.ndarray:
        if self.trace is None:
            raise ValueError("the solve was run without record_trace")
        return np.array([row[1] for row in self.trace])


class LinearOperator:
    """A dense matrix used as a splitting operator."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        self._res = {}

    def forward(self, x):
        return self.matrix @ x

    def resolvent(self, alpha, z):
        from .resolvent import linear_resolvent

        r = self._res.get(alpha)
        if r is None:
            r = self._res[alpha] = linear_resolvent(self.matrix, alpha)
        return r(z)

    def descriptor(self) -> MonotonicityDescriptor:
        from .elements import linear_descriptor

        return linear_descriptor(self.matrix)


class Offset:
    """``x -> op(x) - b``.  The resolvent folds the shift into its argument."""

    def __init__(self, op, b):
        self.op = op
        self.b = np.asarray(b, dtype=float)

    def forward(self, x):
        return self.op.forward(x) - self.b

    def resolvent(self, alpha, z):
        return self.op.resolvent(alpha, z + alpha * self.b)


class _Zero:
    def forward(self, x):
        return np.zeros_like(x)

    def resolvent(self, alpha, z):
        return np.array(z, dtype=float)


ZERO = _Zero()


def _values(x) -> Tuple[np.ndarray, float]:
    if isinstance(x, PeriodicSignal):
        return np.array(x.values), x.period
    return np.array(x, dtype=float), 1.0


def _row(k, upd, x):
    return (k, upd, upd / max(1.0, float(np.max(np.abs(x)))))


def forward_backward(
    m1,
    m2,
    x0,
    alpha: float,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    record_trace: bool = False,
) -> SolveResult:
    """Iterate ``x <- Res_{alpha M2}(x - alpha M1(x))``.

    Stops when the infinity norm of the update is at most ``tol``.  Any
    offset (drive) belongs in ``m1``, e.g. via :class:`Offset`.
    """
    x, period = _values(x0)
    trace = [] if record_trace else None
    upd = math.inf
    k = 0
    for k in range(1, max_iter + 1):
        x_new = m2.resolvent(alpha, x - alpha * m1.forward(x))
        upd = float(np.max(np.abs(x_new - x)))
        x = x_new
        if trace is not None:
            trace.append(_row(k, upd, x))
        if not math.isfinite(upd):
            return _result(x, period, [], k, upd, False, "fb", trace, "iterate is not finite")
        if upd <= tol:
            return _result(x, period, [], k, upd, True, "fb", trace)
    return _result(x, period, [], k, upd, False, "fb", trace, f"no convergence in {max_iter} iterations")


def douglas_rachford(
    m1,
    m2,
    z0,
    alpha: float,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    record_trace: bool = False,
) -> SolveResult:
    """Iterate ``z <- (z + C1 C2 z) / 2`` with ``C = 2 Res - I``.

    The reported solution is ``x = Res_{alpha M2}(z)``; the internal signal
    is the final governing sequence ``z``.
    """
    z, period = _values(z0)
    trace = [] if record_trace else None
    upd = math.inf
    k = 0
    x = m2.resolvent(alpha, z)
    for k in range(1, max_iter + 1):
        c2 = 2.0 * x - z
        c1 = 2.0 * m1.resolvent(alpha, c2) - c2
        z_new = 0.5 * (z + c1)
        upd = float(np.max(np.abs(z_new - z)))
        z = z_new
        x = m2.resolvent(alpha, z)
        if trace is not None:
            trace.append(_row(k, upd, z))
        if not math.isfinite(upd):
            return _result(x, period, [z], k, upd, False, "dr", trace, "iterate is not finite")
        if upd <= tol:
            return _result(x, period, [z], k, upd, True, "dr", trace)
    return _result(x, period, [z], k, upd, False, "dr", trace, f"no convergence in {max_iter} iterations")


def nested_forward_backward(
    r0,
    elements: Sequence,
    drive,
    alphas: Sequence[float],
    tol: float = 1e-6,
    max_iter: int = 10_000,
    record_trace: bool = False,
    warm_start: Optional[Sequence[np.ndarray]] = None,
) -> SolveResult:
    """Nested forward/backward sweep over a ladder.

    With ``m`` backward elements ``E_1..E_m`` there are ``m`` unknown signals
    ``u_1..u_m``; ``u_{m+1}`` is the fixed drive.  One outer iteration is::

        u_1 <- Res_{a_1 E_1}(u_1 - a_1 R0(u_1) + a_1 u_2)
        u_p <- Res_{a_p E_p}(u_p - a_p u_{p-1} + a_p u_{p+1}),  p = 2..m

    where ``u_{p-1}`` is already updated.  Odd positions carry the signal
    that is the input of ``R0`` (a current for a series-innermost ladder).
    The solution is ``u_m``; the internal signals are ``u_1..u_m``.
    """
    m = len(elements)
    if m < 1:
        raise ValueError("a ladder needs at least one backward element")
    if len(alphas) != m:
        raise ValueError(f"expected {m} step sizes, got {len(alphas)}")
    d, period = _values(drive)
    tau = d.size
    if warm_start is None:
        u = [np.zeros(tau) for _ in range(m)]
    else:
        if len(warm_start) != m:
            raise ValueError(f"warm start needs {m} signals, got {len(warm_start)}")
        u = [_values(w)[0] for w in warm_start]
    u.append(d)
    trace = [] if record_trace else None
    upd = math.inf
    k = 0
    for k in range(1, max_iter + 1):
        upd = 0.0
        for p in range(m):
            a = alphas[p]
            try:
                if p == 0:
                    arg = u[0] - a * r0.forward(u[0]) + a * u[1]
                else:
                    arg = u[p] - a * u[p - 1] + a * u[p + 1]
                new = elements[p].resolvent(a, arg)
            except DomainError as exc:
                err = DomainError(f"{exc} (position {p + 1}, iteration {k})", index=exc.index)
                err.position, err.iteration = p + 1, k
                raise err from exc
            upd = max(upd, float(np.max(np.abs(new - u[p]))))
            u[p] = new
        if trace is not None:
            trace.append(_row(k, upd, u[m - 1]))
        if not math.isfinite(upd):
            return _result(u[m - 1], period, u[:m], k, upd, False, "nested", trace, "iterate is not finite")
        if upd <= tol:
            return _result(u[m - 1], period, u[:m], k, upd, True, "nested", trace)
    return _result(
        u[m - 1], period, u[:m], k, upd, False, "nested", trace, f"no convergence in {max_iter} iterations"
    )


def _result(x, period, internals, k, upd, converged, algorithm, trace, message=""):
    def sig(v):
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)):
            v = np.where(np.isfinite(v), v, 0.0)
            nonlocal message
            message = message or "non-finite samples replaced by 0"
        return PeriodicSignal(v, period)

    return SolveResult(
        solution=sig(x),
        internal_signals=[sig(v) for v in internals],
        iterations=k,
        final_residual=upd,
        converged=converged,
        algorithm=algorithm,
        trace=trace,
        message=message,
    )


def write_trace_csv(path, result: SolveResult) -> None:
    if result.trace is None:
        raise ValueError("the solve was run without record_trace")
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "max_update", "residual"])
        for k, upd, rel in result.trace:
            w.writerow([k, f"{upd:.17g}", f"{rel:.17g}"])


# ---------------------------------------------------------------------------
# Step-size ranges
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepRange:
    """The open interval ``(lo, hi)`` of admissible step sizes.

    ``case`` names the matching hypothesis; an empty range carries a
    ``diagnostic`` instead.
    """

    lo: float = 0.0
    hi: float = 0.0
    case: Optional[str] = None
    diagnostic: str = ""

    @property
    def empty(self) -> bool:
        return not self.hi > self.lo

    def __contains__(self, alpha) -> bool:
        return self.lo < alpha < self.hi


def _fb_cases(m1: MonotonicityDescriptor, m2: MonotonicityDescriptor):
    out, notes = [], []
    omega2 = max(0.0, -m2.mu)
    # M1 - mu1 I cocoercive, M2 hypomonotone
    if m1.mu >= 0 and math.isfinite(m1.lam):
        # beta = 0 means M1 = mu1 I, whose shifted part is zero
        beta = max(m1.lam - m1.mu, 0.0)
        if m1.mu >= omega2:
            out.append(("cocoercive-shifted", beta, m1.mu))
        else:
            notes.append(f"case 1 needs mu1={m1.mu:g} >= omega2={omega2:g}")
    else:
        notes.append("case 1 needs M1 monotone and Lipschitz")
    # M1 hypomonotone, M1 + omega I cocoercive, M2 strongly monotone
    if m1.mu < 0 and math.isfinite(m1.mu) and math.isfinite(m1.lam):
        omega1 = -m1.mu
        if m2.mu >= omega1:
            out.append(("hypomonotone-forward", m1.lam + omega1, m2.mu))
        else:
            notes.append(f"case 2 needs mu2={m2.mu:g} >= omega1={omega1:g}")
    else:
        notes.append("case 2 needs M1 hypomonotone with finite bounds")
    # M1 Lipschitz, M2 strongly monotone beyond it
    if math.isfinite(m1.lam) and m1.lam > 0:
        if m2.mu >= m1.lam:
            out.append(("lipschitz", m1.lam, m2.mu))
        else:
            notes.append(f"case 3 needs mu2={m2.mu:g} >= beta={m1.lam:g}")
    else:
        notes.append("case 3 needs M1 Lipschitz")
    return out, notes


def fb_step_range(m1: MonotonicityDescriptor, m2: MonotonicityDescriptor) -> StepRange:
    """Admissible forward/backward step sizes ``(0, 2 / (beta + 2 mu))``.

    ``m1`` describes the forward operator and ``m2`` the backward one.  The
    cocoercivity constant ``1/beta`` is taken from the Lipschitz bound of the
    shifted forward operator, which is exact for scalar static laws and
    symmetric linear maps.  The widest interval over the matching cases is
    returned.
    """
    cases, notes = _fb_cases(m1, m2)
    if not cases:
        return StepRange(diagnostic="; ".join(notes))
    hi = lambda c: 2.0 / (c[1] + 2.0 * c[2]) if c[1] + 2.0 * c[2] > 0 else math.inf
    best = max(cases, key=hi)
    return StepRange(0.0, hi(best), best[0])


def dr_step_range(m1: MonotonicityDescriptor, m2: MonotonicityDescriptor) -> StepRange:
    """Admissible Douglas-Rachford step sizes ``(0, (mu - w) / (2 mu w))``.

    One operator must be ``mu``-strongly monotone and the other
    ``(-w)``-monotone with ``mu > w >= 0``; both assignments are tried.
    """
    best = None
    notes = []
    for name, strong, weak in (("M2 strongly monotone", m2, m1), ("M1 strongly monotone", m1, m2)):
        mu = strong.mu
        if not math.isfinite(weak.mu):
            notes.append(f"{name}: the other operator has no monotonicity bound")
            continue
        omega = max(0.0, -weak.mu)
        if not mu > omega:
            notes.append(f"{name}: needs mu={mu:g} > omega={omega:g}")
            continue
        hi = math.inf if omega == 0 else (mu - omega) / (2.0 * mu * omega)
        if best is None or hi > best.hi:
            best = StepRange(0.0, hi, name)
    return best if best is not None else StepRange(diagnostic="; ".join(notes))
