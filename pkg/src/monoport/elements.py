"""One-port element laws on the periodic signal space.

Every element relates a port current ``i`` and a port voltage ``v``.  The
``direction`` attribute says which of the two is the input of the stored law
(``I_TO_V``: current controlled, ``V_TO_I``: voltage controlled).  Functions
that take ``invert=True`` evaluate the inverse relation instead.

Only laws the monotone theory covers are provided: nonlinear static resistors
(the Shockley diode), linear capacitors and inductors, periodically modulated
varcapacitors and varinductors, and memristive systems.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Any, ClassVar, Optional, Tuple, Union

import numpy as np

from .errors import DomainError, ShapeError, UnsupportedElementError
from .signal import PeriodicSignal, Sine, diff_operator, sample_waveform

__all__ = [
    "Direction",
    "MonotonicityDescriptor",
    "Element",
    "LinearResistor",
    "ShockleyDiode",
    "Capacitor",
    "Inductor",
    "VarCapacitor",
    "VarInductor",
    "RCAdmittance",
    "LinearNetwork",
    "Memristive",
    "element_forward",
    "element_matrix",
    "monotonicity_of",
    "static_graph_distance",
]


class Direction(enum.Enum):
    I_TO_V = "i->v"
    V_TO_I = "v->i"

    @property
    def flipped(self) -> "Direction":
        return Direction.V_TO_I if self is Direction.I_TO_V else Direction.I_TO_V

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class MonotonicityDescriptor:
    """Incremental bounds ``<du, dy> >= mu |du|^2`` and ``|dy| <= lam |du|``.

    A negative ``mu`` means hypomonotone; ``-inf`` means nothing is known.
    ``empirical`` marks bounds estimated from samples rather than derived.
    """

    mu: float
    lam: float = math.inf
    empirical: bool = False

    def __post_init__(self):
        if math.isnan(self.mu) or math.isnan(self.lam):
            raise ValueError("monotonicity bounds must not be NaN")
        if not self.lam >= 0:
            raise ValueError(f"Lipschitz constant must be nonnegative, got {self.lam}")
        if self.mu > 0 and self.mu > self.lam * (1 + 1e-9):
            raise ValueError(f"coercivity {self.mu} exceeds Lipschitz constant {self.lam}")

    @property
    def monotone(self) -> bool:
        return self.mu >= 0

    @property
    def coercive(self) -> bool:
        return self.mu > 0


class Element:
    """Base class of all element variants."""

    linear: ClassVar[bool] = False
    static: ClassVar[bool] = False
    direction: Direction

    @property
    def name(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class LinearResistor(Element):
    R: float
    direction: Direction = Direction.I_TO_V

    linear: ClassVar[bool] = True
    static: ClassVar[bool] = True

    def __post_init__(self):
        _positive(self, "R")


@dataclass(frozen=True)
class ShockleyDiode(Element):
    """``v = n V_T ln(i / I_s + 1)`` on the domain ``i > -I_s``."""

    I_s: float = 1e-14
    n: float = 1.0
    V_T: float = 0.02585
    direction: Direction = Direction.I_TO_V

    static: ClassVar[bool] = True

    def __post_init__(self):
        for name in ("I_s", "n", "V_T"):
            _positive(self, name)

    @property
    def nvt(self) -> float:
        return self.n * self.V_T

    def law(self, i):
        i = np.asarray(i, dtype=float)
        bad = np.flatnonzero(~(i > -self.I_s))
        if bad.size:
            k = int(bad[0])
            raise DomainError(
                f"diode current {i.flat[k]!r} at sample {k} is not above -I_s={self.I_s}", index=k
            )
        return self.nvt * np.log1p(i / self.I_s)

    def inverse_law(self, v):
        with np.errstate(over="ignore"):
            return self.I_s * np.expm1(np.asarray(v, dtype=float) / self.nvt)


@dataclass(frozen=True)
class Capacitor(Element):
    C: float
    direction: Direction = Direction.V_TO_I

    linear: ClassVar[bool] = True

    def __post_init__(self):
        _positive(self, "C")


@dataclass(frozen=True)
class Inductor(Element):
    L: float
    direction: Direction = Direction.I_TO_V

    linear: ClassVar[bool] = True

    def __post_init__(self):
        _positive(self, "L")


Modulation = Union[Sine, PeriodicSignal]


@dataclass(frozen=True)
class VarCapacitor(Element):
    """``i = c(t) d/dt (c(t) v)`` with a periodic modulation ``c``."""

    c: Modulation
    direction: Direction = Direction.V_TO_I

    linear: ClassVar[bool] = True


@dataclass(frozen=True)
class VarInductor(Element):
    """``v = l(t) d/dt (l(t) i)`` with a periodic modulation ``l``."""

    l: Modulation
    direction: Direction = Direction.I_TO_V

    linear: ClassVar[bool] = True


@dataclass(frozen=True)
class RCAdmittance(Element):
    """A resistor in parallel with a capacitor: ``i = C dv/dt + v / R``."""

    R: float
    C: float
    direction: Direction = Direction.V_TO_I

    linear: ClassVar[bool] = True

    def __post_init__(self):
        _positive(self, "R")
        _positive(self, "C")


@dataclass(frozen=True)
class LinearNetwork(Element):
    """Series (impedances add) or parallel (admittances add) linear parts."""

    kind: str
    parts: Tuple[Element, ...]

    linear: ClassVar[bool] = True

    def __post_init__(self):
        if self.kind not in ("series", "parallel"):
            raise ValueError(f"kind must be 'series' or 'parallel', got {self.kind!r}")
        if not self.parts:
            raise ValueError("a linear network needs at least one part")
        for p in self.parts:
            if not getattr(p, "linear", False):
                raise UnsupportedElementError(f"{p!r} is not linear")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def direction(self) -> Direction:
        return Direction.I_TO_V if self.kind == "series" else Direction.V_TO_I


@dataclass(frozen=True)
class Memristive(Element):
    """Wraps a memristive system (see ``monoport.memristive``).

    ``system`` must provide ``direction``, ``descriptor`` and ``forward(signal)``.
    """

    system: Any

    @property
    def direction(self) -> Direction:
        return self.system.direction


def _positive(obj, name):
    val = getattr(obj, name)
    if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
        raise ValueError(f"{type(obj).__name__}.{name} must be a positive number, got {val!r}")


# ---------------------------------------------------------------------------
# Matrices, forward evaluation and monotonicity data
# ---------------------------------------------------------------------------


def _modulation(m: Modulation, tau: int, period: float) -> np.ndarray:
    if isinstance(m, PeriodicSignal):
        if m.tau != tau or m.period != period:
            raise ShapeError(f"modulation has tau={m.tau}, T={m.period}; need tau={tau}, T={period}")
        return m.values
    return sample_waveform(m, tau, period).values


def element_matrix(e: Element, tau: int, period: float = 1.0) -> np.ndarray:
    """Dense matrix of a linear element's law in its native direction."""
    return _element_matrix(e, int(tau), float(period))


@functools.lru_cache(maxsize=256)
def _element_matrix(e, tau, period):
    if isinstance(e, LinearResistor):
        m = e.R * np.eye(tau)
    elif isinstance(e, Capacitor):
        m = e.C * diff_operator(tau, period)
    elif isinstance(e, Inductor):
        m = e.L * diff_operator(tau, period)
    elif isinstance(e, VarCapacitor):
        c = _modulation(e.c, tau, period)
        m = c[:, None] * diff_operator(tau, period) * c[None, :]
    elif isinstance(e, VarInductor):
        l = _modulation(e.l, tau, period)
        m = l[:, None] * diff_operator(tau, period) * l[None, :]
    elif isinstance(e, RCAdmittance):
        m = e.C * diff_operator(tau, period) + np.eye(tau) / e.R
    elif isinstance(e, LinearNetwork):
        target = e.direction
        m = np.zeros((tau, tau))
        for p in e.parts:
            pm = _element_matrix(p, tau, period)
            m = m + (pm if p.direction is target else np.linalg.inv(pm))
    else:
        raise UnsupportedElementError(f"{type(e).__name__} has no matrix representation")
    m.setflags(write=False)
    return m


def element_forward(e: Element, u: PeriodicSignal, invert: bool = False) -> PeriodicSignal:
    """Apply the element law (or its inverse) to ``u``."""
    tau, T = u.tau, u.period
    if isinstance(e, LinearResistor):
        return u.like(u.values / e.R if invert else e.R * u.values)
    if isinstance(e, ShockleyDiode):
        return u.like(e.inverse_law(u.values) if invert else e.law(u.values))
    if isinstance(e, Memristive):
        if invert:
            raise UnsupportedElementError("memristive elements are only evaluated forward")
        return e.system.forward(u)
    if e.linear:
        m = element_matrix(e, tau, T)
        if invert:
            from .resolvent import cached_solve

            return u.like(cached_solve(e, tau, T, u.values))
        return u.like(m @ u.values)
    raise UnsupportedElementError(f"cannot evaluate {type(e).__name__}")


def monotonicity_of(e: Element, tau: int, period: float = 1.0, invert: bool = False) -> MonotonicityDescriptor:
    """Coercivity and Lipschitz bounds of an element (or of its inverse).

    Linear elements are measured numerically on the assembled matrix: the
    smallest eigenvalue of the symmetric part and the largest singular value.
    """
    if isinstance(e, LinearResistor):
        r = 1.0 / e.R if invert else e.R
        return MonotonicityDescriptor(r, r)
    if isinstance(e, ShockleyDiode):
        return MonotonicityDescriptor(0.0, math.inf)
    if isinstance(e, Memristive):
        d = getattr(e.system, "descriptor", None)
        if d is None:
            return MonotonicityDescriptor(-math.inf, math.inf)
        return d
    if e.linear:
        return _linear_monotonicity(e, int(tau), float(period), bool(invert))
    raise UnsupportedElementError(f"no monotonicity data for {type(e).__name__}")


@functools.lru_cache(maxsize=256)
def _linear_monotonicity(e, tau, period, invert):
    m = element_matrix(e, tau, period)
    if invert:
        m = np.linalg.inv(m)
    return linear_descriptor(m)


def linear_descriptor(m: np.ndarray) -> MonotonicityDescriptor:
    mu = float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])
    lam = float(np.linalg.norm(m, 2))
    return MonotonicityDescriptor(min(mu, lam), lam)


def static_graph_distance(e: Element, x: np.ndarray, y: np.ndarray, invert: bool = False) -> np.ndarray:
    """Per-sample distance of the pairs ``(x, y)`` from a static law's graph.

    For each sample this is the smaller of the vertical gap ``|y - f(x)|`` and
    the horizontal gap ``|x - f^{-1}(y)|``.  Both are upper bounds on the true
    distance from the graph of a monotone curve, and at least one of them is
    well conditioned wherever the curve is very flat or very steep.
    """
    if not e.static:
        raise UnsupportedElementError(f"{type(e).__name__} is not a static law")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(e, LinearResistor):
        f, finv = (lambda a: a / e.R), (lambda b: b * e.R)
        if not invert:
            f, finv = finv, f
    else:
        f, finv = _diode_pair(e, invert)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        vert = np.abs(y - f(x))
        horiz = np.abs(x - finv(y))
    vert = np.where(np.isfinite(vert), vert, np.inf)
    horiz = np.where(np.isfinite(horiz), horiz, np.inf)
    return np.minimum(vert, horiz)


def _diode_pair(e: ShockleyDiode, invert):
    def law(i):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = e.nvt * np.log1p(i / e.I_s)
        return np.where(i > -e.I_s, out, -np.inf)

    if invert:
        return e.inverse_law, law
    return law, e.inverse_law
