"""Sampled periodic signals and the circulant difference operator.

A periodic signal is stored as one period of ``tau`` samples taken at
``t_k = k T / tau``.  The inner product is the plain sum over samples; it is
not scaled by the sample spacing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ShapeError

__all__ = [
    "PeriodicSignal",
    "inner_product",
    "diff_operator",
    "Sine",
    "Constant",
    "Samples",
    "WaveformSpec",
    "sample_waveform",
    "parse_waveform",
    "read_signal_csv",
    "write_signal_csv",
]


@dataclass(frozen=True, eq=False)
class PeriodicSignal:
    """One period of a sampled real trajectory.

    Parameters
    ----------
    values : array_like
        The ``tau >= 2`` samples.  They are copied and frozen.
    period : float
        Length ``T > 0`` of the period.
    """

    values: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1:
            raise ShapeError(f"signal values must be one-dimensional, got shape {vals.shape}")
        if vals.size < 2:
            raise ShapeError(f"a periodic signal needs at least 2 samples, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ShapeError(f"signal sample {bad} is not finite")
        period = float(self.period)
        if not (period > 0 and math.isfinite(period)):
            raise ShapeError(f"period must be positive and finite, got {self.period!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "period", period)

    @classmethod
    def zeros(cls, tau: int, period: float = 1.0) -> "PeriodicSignal":
        return cls(np.zeros(tau), period)

    @property
    def tau(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.tau) * (self.period / self.tau)

    def like(self, values) -> "PeriodicSignal":
        """A signal on the same grid with new sample values."""
        return PeriodicSignal(values, self.period)

    def check_compatible(self, other: "PeriodicSignal") -> None:
        if self.tau != other.tau or self.period != other.period:
            raise ShapeError(
                f"incompatible signals: tau={self.tau}, T={self.period} "
                f"vs tau={other.tau}, T={other.period}"
            )

    def norm(self) -> float:
        return math.sqrt(inner_product(self, self))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _operand(self, other):
        if isinstance(other, PeriodicSignal):
            self.check_compatible(other)
            return other.values
        if np.isscalar(other):
            return float(other)
        return NotImplemented

    def __add__(self, other):
        o = self._operand(other)
        if o is NotImplemented:
            return o
        return self.like(self.values + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._operand(other)
        if o is NotImplemented:
            return o
        return self.like(self.values - o)

    def __rsub__(self, other):
        o = self._operand(other)
        if o is NotImplemented:
            return o
        return self.like(o - self.values)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return self.like(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)

    def __len__(self):
        return self.tau

    def __repr__(self):
        return f"PeriodicSignal(tau={self.tau}, period={self.period})"


def inner_product(u: PeriodicSignal, y: PeriodicSignal) -> float:
    """Sum over samples of ``u(t) * y(t)``."""
    u.check_compatible(y)
    return float(np.dot(u.values, y.values))


def diff_operator(tau: int, period: float = 1.0) -> np.ndarray:
    """Backward-difference derivative on the periodic grid.

    Returns ``(tau / T) * D`` where ``D`` has ones on the diagonal, minus ones
    on the first subdiagonal and a minus one in the top-right corner, so that
    ``(D u)_k = u_k - u_{k-1}`` with indices taken modulo ``tau``.
    """
    if int(tau) != tau or tau < 2:
        raise ShapeError(f"tau must be an integer >= 2, got {tau!r}")
    if not period > 0:
        raise ShapeError(f"period must be positive, got {period!r}")
    tau = int(tau)
    d = np.eye(tau) - np.eye(tau, k=-1)
    d[0, -1] = -1.0
    return (tau / period) * d


# ---------------------------------------------------------------------------
# Waveform specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sine:
    """``offset + amplitude * sin(2 pi cycles t / T + phase)``."""

    amplitude: float = 1.0
    cycles: float = 1.0
    phase: float = 0.0
    offset: float = 0.0


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True, eq=False)
class Samples:
    """Explicit samples, e.g. the value column of a signal CSV file."""

    values: np.ndarray


WaveformSpec = Union[Sine, Constant, Samples]


def sample_waveform(spec: WaveformSpec, tau: int, period: float = 1.0) -> PeriodicSignal:
    """Sample ``spec`` at ``t_k = k T / tau`` for ``k = 0 .. tau-1``."""
    if int(tau) != tau or tau < 2:
        raise ShapeError(f"tau must be an integer >= 2, got {tau!r}")
    tau = int(tau)
    t = np.arange(tau) * (period / tau)
    if isinstance(spec, Sine):
        vals = spec.offset + spec.amplitude * np.sin(2 * np.pi * spec.cycles * t / period + spec.phase)
    elif isinstance(spec, Constant):
        vals = np.full(tau, float(spec.value))
    elif isinstance(spec, Samples):
        vals = np.asarray(spec.values, dtype=float)
        if vals.shape != (tau,):
            raise ShapeError(f"sample file has {vals.size} rows, expected tau={tau}")
    else:
        raise TypeError(f"unknown waveform spec {spec!r}")
    return PeriodicSignal(vals, period)


def parse_waveform(text: str) -> WaveformSpec:
    """Parse ``sine:amp,cycles,phase,offset``, ``const:c`` or ``csv:PATH``."""
    kind, sep, rest = text.partition(":")
    kind = kind.strip().lower()
    if not sep:
        raise ValueError(f"drive spec must look like KIND:ARGS, got {text!r}")
    if kind == "sine":
        parts = [p for p in rest.split(",") if p.strip()]
        if not 1 <= len(parts) <= 4:
            raise ValueError(f"sine drive takes 1 to 4 numbers, got {rest!r}")
        nums = [float(p) for p in parts]
        return Sine(*nums)
    if kind in ("const", "constant"):
        return Constant(float(rest))
    if kind == "csv":
        return Samples(read_signal_csv(rest))
    raise ValueError(f"unknown drive kind {kind!r}")


def read_signal_csv(path) -> np.ndarray:
    """Read the ``value`` column of a ``t,value`` CSV file."""
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["t", "value"]:
            raise ValueError(f"{path}: expected header 't,value', got {header!r}")
        vals = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: expected two columns")
            vals.append(float(row[1]))
    return np.array(vals)


def write_signal_csv(path, signal: PeriodicSignal) -> None:
    with open(Path(path), "w", newline="") as fh:
        fh.write("t,value\n")
        for t, v in zip(signal.times, signal.values):
            fh.write(f"{t:.17g},{v:.17g}\n")
