"""Series/parallel circuit trees, their netlist text form, and solver dispatch.

Netlist grammar (whitespace is insignificant, ``#`` starts a comment)::

    node     := element | "series(" node ("," node)+ ")" | "parallel(" node ("," node)+ ")"
    element  := NAME "(" [param ("," param)*] ")"
    param    := KEY "=" NUMBER

A tree is solved by first reducing it to a *ladder*: every composition level
holds exactly one element and one nested composite, except the innermost
level, which holds two elements.  The innermost level supplies the
forward-evaluated element ``R0`` and the first backward element ``E_1``;
each enclosing level adds the next backward element.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .convergence import build_contraction_matrix, ladder_descriptors, spectral_radius
from .elements import (
    Capacitor,
    Direction,
    Element,
    Inductor,
    LinearNetwork,
    LinearResistor,
    Memristive,
    MonotonicityDescriptor,
    RCAdmittance,
    ShockleyDiode,
    VarCapacitor,
    VarInductor,
    element_forward,
    element_matrix,
    monotonicity_of,
    static_graph_distance,
)
from .errors import ParseError, ShapeError, StructuralError, UnsupportedElementError
from .resolvent import ElementOperator
from .signal import PeriodicSignal, Sine
from .splitting import (
    Offset,
    SolveResult,
    SplittingConfig,
    douglas_rachford,
    dr_step_range,
    fb_step_range,
    forward_backward,
    nested_forward_backward,
)

__all__ = [
    "ElementNode",
    "Series",
    "Parallel",
    "CircuitNode",
    "parse_netlist",
    "to_netlist",
    "canonicalize",
    "Ladder",
    "TwoElement",
    "SingleElement",
    "NotLadder",
    "solve_periodic",
    "relation_residual",
    "ladder_residual",
    "port_matrix",
    "linear_port_solve",
    "ConvergenceAdvisory",
    "advisories",
]


# ---------------------------------------------------------------------------
# Tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ElementNode:
    element: Element
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Series:
    """Children share one current; their voltages add."""

    children: Tuple["CircuitNode", ...]
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)

    kind = "series"

    def __post_init__(self):
        _check_children(self)


@dataclass(frozen=True)
class Parallel:
    """Children share one voltage; their currents add."""

    children: Tuple["CircuitNode", ...]
    pos: Optional[Tuple[int, int]] = field(default=None, compare=False, repr=False)

    kind = "parallel"

    def __post_init__(self):
        _check_children(self)


CircuitNode = Union[ElementNode, Series, Parallel]
Composite = (Series, Parallel)


def _check_children(node):
    object.__setattr__(node, "children", tuple(node.children))
    if len(node.children) < 2:
        raise StructuralError(f"{node.kind} needs at least two children, got {len(node.children)}")


def _natural_direction(node) -> Direction:
    if isinstance(node, ElementNode):
        return node.element.direction
    return Direction.I_TO_V if isinstance(node, Series) else Direction.V_TO_I


# ---------------------------------------------------------------------------
# Netlist text
# ---------------------------------------------------------------------------

_REQUIRED = object()

# name -> (parameter names with defaults, builder)
_ELEMENTS = {
    "resistor": ((("R", _REQUIRED),), lambda p: LinearResistor(p["R"])),
    "diode": (
        (("Is", 1e-14), ("n", 1.0), ("VT", 0.02585)),
        lambda p: ShockleyDiode(p["Is"], p["n"], p["VT"]),
    ),
    "capacitor": ((("C", _REQUIRED),), lambda p: Capacitor(p["C"])),
    "inductor": ((("L", _REQUIRED),), lambda p: Inductor(p["L"])),
    "varcap": (
        (("c0", _REQUIRED), ("c1", 0.0), ("cycles", 1.0), ("phase", 0.0)),
        lambda p: VarCapacitor(_modulation(p)),
    ),
    "varind": (
        (("l0", _REQUIRED), ("l1", 0.0), ("cycles", 1.0), ("phase", 0.0)),
        lambda p: VarInductor(_modulation(p)),
    ),
    "rc": ((("R", _REQUIRED), ("C", _REQUIRED)), lambda p: RCAdmittance(p["R"], p["C"])),
    "memristor": ((("gK", 19.0), ("vK", 12.0)), lambda p: _potassium(p["gK"], p["vK"])),
}


def _modulation(p):
    base = p.get("c0", p.get("l0"))
    amp = p.get("c1", p.get("l1"))
    cyc = p["cycles"]
    if cyc != int(cyc) or cyc < 1:
        raise ValueError(f"cycles must be a positive integer for a periodic modulation, got {cyc!r}")
    return Sine(amplitude=amp, cycles=cyc, phase=p["phase"], offset=base)


def _potassium(g, v):
    from .memristive import PotassiumConductance

    return Memristive(PotassiumConductance(g, v))


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),=])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                toks.append(_Tok(kind, s, line, col))
            col += len(s)
        i = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, text=None, what=None):
        t = self.toks[self.i]
        if (kind and t.kind != kind) or (text and t.text != text):
            found = "end of input" if t.kind == "eof" else repr(t.text)
            raise ParseError(f"expected {what or text or kind}, found {found}", t.line, t.col)
        self.i += 1
        return t

    def parse(self):
        if self.peek().kind == "eof":
            t = self.peek()
            raise ParseError("empty netlist", t.line, t.col)
        node = self.node()
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(f"unexpected {t.text!r} after the circuit", t.line, t.col)
        return node

    def node(self):
        t = self.take("name", what="an element or composition name")
        if t.text not in _ELEMENTS and t.text not in ("series", "parallel"):
            raise ParseError(f"unknown element {t.text!r}", t.line, t.col)
        self.take("punct", "(", what="'('")
        if t.text in ("series", "parallel"):
            return self.composite(t)
        return self.element(t)

    def composite(self, head):
        if self.peek().text == ")":
            t = self.peek()
            raise ParseError(f"empty {head.text}()", t.line, t.col)
        children = [self.node()]
        while self.peek().text == ",":
            self.take()
            children.append(self.node())
        self.take("punct", ")", what="',' or ')'")
        if len(children) < 2:
            raise ParseError(f"{head.text} needs at least two children", head.line, head.col)
        cls = Series if head.text == "series" else Parallel
        return cls(tuple(children), pos=(head.line, head.col))

    def element(self, head):
        spec, build = _ELEMENTS[head.text]
        names = [k for k, _ in spec]
        given = {}
        if self.peek().text != ")":
            while True:
                key = self.take("name", what="a parameter name")
                if key.text not in names:
                    raise ParseError(
                        f"unknown parameter {key.text!r} for {head.text} (expected one of {', '.join(names)})",
                        key.line,
                        key.col,
                    )
                if key.text in given:
                    raise ParseError(f"duplicate parameter {key.text!r}", key.line, key.col)
                self.take("punct", "=", what="'='")
                num = self.take("number", what="a number")
                given[key.text] = (float(num.text), num)
                if self.peek().text != ",":
                    break
                self.take()
        self.take("punct", ")", what="',' or ')'")
        params = {}
        for k, default in spec:
            if k in given:
                params[k] = given[k][0]
            elif default is _REQUIRED:
                raise ParseError(f"{head.text} requires parameter {k!r}", head.line, head.col)
            else:
                params[k] = default
        try:
            e = build(params)
        except (ValueError, TypeError) as exc:
            bad = next((given[k][1] for k in given if k in str(exc)), head)
            raise ParseError(f"invalid parameter: {exc}", bad.line, bad.col) from None
        return ElementNode(e, pos=(head.line, head.col))


def parse_netlist(text: str) -> CircuitNode:
    """Parse netlist text into a circuit tree; errors carry line and column."""
    return _Parser(text).parse()


def _fmt(x) -> str:
    return repr(float(x))


def _element_text(e: Element) -> str:
    if isinstance(e, LinearResistor):
        return f"resistor(R={_fmt(e.R)})"
    if isinstance(e, ShockleyDiode):
        return f"diode(Is={_fmt(e.I_s)}, n={_fmt(e.n)}, VT={_fmt(e.V_T)})"
    if isinstance(e, Capacitor):
        return f"capacitor(C={_fmt(e.C)})"
    if isinstance(e, Inductor):
        return f"inductor(L={_fmt(e.L)})"
    if isinstance(e, RCAdmittance):
        return f"rc(R={_fmt(e.R)}, C={_fmt(e.C)})"
    if isinstance(e, (VarCapacitor, VarInductor)):
        m = e.c if isinstance(e, VarCapacitor) else e.l
        if not isinstance(m, Sine):
            raise ValueError("only sinusoidal modulations have a netlist form")
        name, p = ("varcap", "c") if isinstance(e, VarCapacitor) else ("varind", "l")
        return (
            f"{name}({p}0={_fmt(m.offset)}, {p}1={_fmt(m.amplitude)}, "
            f"cycles={_fmt(m.cycles)}, phase={_fmt(m.phase)})"
        )
    if isinstance(e, Memristive):
        from .memristive import PotassiumConductance

        if isinstance(e.system, PotassiumConductance):
            return f"memristor(gK={_fmt(e.system.g_K)}, vK={_fmt(e.system.v_K)})"
        raise ValueError("only the potassium conductance has a netlist form")
    if isinstance(e, LinearNetwork):
        inner = ", ".join(_element_text(p) for p in e.parts)
        return f"{e.kind}({inner})"
    raise ValueError(f"no netlist form for {type(e).__name__}")


def to_netlist(node: CircuitNode) -> str:
    """Canonical one-line text; ``parse_netlist(to_netlist(n)) == n``."""
    if isinstance(node, ElementNode):
        return _element_text(node.element)
    inner = ", ".join(to_netlist(c) for c in node.children)
    return f"{node.kind}({inner})"


# ---------------------------------------------------------------------------
# Canonical forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ladder:
    """A ladder ``R0, E_1..E_m`` with alternating orientations.

    ``inner_kind`` is the composition kind of the innermost level; it fixes
    the direction ``R0`` and the odd positions are used in.  The root level
    holds ``E_m`` and determines the port drive.
    """

    r0: Element
    elements: Tuple[Element, ...]
    inner_kind: str

    @property
    def m(self) -> int:
        return len(self.elements)

    @property
    def root_kind(self) -> str:
        if self.m % 2:
            return self.inner_kind
        return "parallel" if self.inner_kind == "series" else "series"

    @property
    def drive_kind(self) -> str:
        return "voltage" if self.root_kind == "series" else "current"

    @property
    def base_direction(self) -> Direction:
        return Direction.I_TO_V if self.inner_kind == "series" else Direction.V_TO_I

    def direction_at(self, p: int) -> Direction:
        """Orientation of ``E_p`` (``p >= 1``); ``p = 0`` is ``R0``."""
        d = self.base_direction
        return d if p == 0 or p % 2 == 1 else d.flipped

    def operators(self, tau: int, period: float = 1.0):
        r0 = ElementOperator.oriented(self.r0, self.direction_at(0), tau, period)
        ops = [ElementOperator.oriented(e, self.direction_at(p), tau, period) for p, e in enumerate(self.elements, 1)]
        return r0, ops

    def descriptors(self, tau: int, period: float = 1.0) -> List[MonotonicityDescriptor]:
        r0, ops = self.operators(tau, period)
        return [r0.descriptor()] + [op.descriptor() for op in ops]

    def contraction_radius(self, alphas, tau: int, period: float = 1.0, sqrt: bool = False) -> float:
        d = ladder_descriptors(self.descriptors(tau, period), alphas, sqrt=sqrt)
        if not math.isfinite(d.beta1):
            return math.inf
        return spectral_radius(build_contraction_matrix(d))

    def to_node(self) -> CircuitNode:
        """Rebuild a circuit tree with the same port relation."""
        kind = self.inner_kind
        node = _compose(kind, [ElementNode(self.elements[0]), ElementNode(self.r0)])
        for e in self.elements[1:]:
            kind = "parallel" if kind == "series" else "series"
            node = _compose(kind, [ElementNode(e), node])
        return node

    def describe(self) -> str:
        lines = [f"ladder with {self.m} backward element(s), {self.drive_kind} drive"]
        for p, e in enumerate((self.r0,) + tuple(self.elements)):
            name = "R0" if p == 0 else f"E{p}"
            inv = " inverted" if e.direction is not self.direction_at(p) else ""
            lines.append(f"  {name} ({self.direction_at(p)}{inv}): {_element_text_safe(e)}")
        return "\n".join(lines)


class TwoElement(Ladder):
    """A ladder with a single backward element, solvable by fb or dr."""


@dataclass(frozen=True)
class SingleElement:
    element: Element

    @property
    def drive_kind(self) -> Optional[str]:
        return None

    def describe(self) -> str:
        return f"single element: {_element_text_safe(self.element)}"


@dataclass(frozen=True)
class NotLadder:
    reason: str
    subtree: Optional[CircuitNode] = None

    def describe(self) -> str:
        where = f" in {to_netlist(self.subtree)}" if self.subtree is not None else ""
        return f"not a ladder: {self.reason}{where}"


def _element_text_safe(e):
    try:
        return _element_text(e)
    except ValueError:
        return repr(e)


def _compose(kind, children):
    return (Series if kind == "series" else Parallel)(tuple(children))


def _flatten(node):
    if isinstance(node, ElementNode):
        return node
    kids = []
    for c in node.children:
        c = _flatten(c)
        if type(c) is type(node):
            kids.extend(c.children)
        else:
            kids.append(c)
    out = type(node)(tuple(kids), pos=node.pos)
    # a resistor and a capacitor in parallel form a single RC admittance
    if isinstance(out, Parallel) and len(kids) == 2 and all(isinstance(k, ElementNode) for k in kids):
        es = [k.element for k in kids]
        r = next((e for e in es if isinstance(e, LinearResistor)), None)
        c = next((e for e in es if isinstance(e, Capacitor)), None)
        if r is not None and c is not None:
            return ElementNode(RCAdmittance(r.R, c.C), pos=node.pos)
    return out


def _rank(e):
    if isinstance(e, Memristive):
        return 0
    if e.linear and not e.static:
        return 1
    if e.linear:
        return 2
    return 3


def _merge(kind, elems):
    if len(elems) == 1:
        return elems[0]
    return LinearNetwork(kind, tuple(elems))


def canonicalize(node: CircuitNode) -> Union[Ladder, SingleElement, NotLadder]:
    """Reduce a tree to a ladder (``TwoElement`` when it has one backward element).

    Same-kind nesting is flattened, a parallel resistor/capacitor pair becomes
    an RC admittance, and surplus linear elements on one level are merged into
    a linear network.  ``R0`` is chosen from the innermost level preferring a
    memristive element, then a dynamic linear one, then a static linear one.
    """
    node = _flatten(node)
    if isinstance(node, ElementNode):
        return SingleElement(node.element)
    levels = []  # (kind, element), outermost first
    cur = node
    while True:
        elems = [c.element for c in cur.children if isinstance(c, ElementNode)]
        comps = [c for c in cur.children if not isinstance(c, ElementNode)]
        if len(comps) > 1:
            return NotLadder(f"{cur.kind} level has {len(comps)} composite children", cur)
        lin = [e for e in elems if e.linear]
        nonlin = [e for e in elems if not e.linear]
        if comps:
            if any(isinstance(e, Memristive) for e in elems):
                return NotLadder("a memristive element must sit on the innermost level", cur)
            if nonlin and (lin or len(nonlin) > 1):
                return NotLadder(f"{cur.kind} level has more than one non-mergeable element", cur)
            levels.append((cur.kind, nonlin[0] if nonlin else _merge(cur.kind, lin)))
            cur = comps[0]
            continue
        memr = [e for e in nonlin if isinstance(e, Memristive)]
        if len(memr) > 1:
            return NotLadder("more than one memristive element on the innermost level", cur)
        if len(nonlin) > 2 or (len(nonlin) == 2 and lin):
            return NotLadder(f"innermost {cur.kind} level has more than two non-mergeable elements", cur)
        if not nonlin:
            best = min(range(len(lin)), key=lambda k: _rank(lin[k]))
            r0, e1 = lin[best], _merge(cur.kind, lin[:best] + lin[best + 1 :])
        elif len(nonlin) == 1:
            if memr:
                r0, e1 = nonlin[0], _merge(cur.kind, lin)
            else:
                r0, e1 = _merge(cur.kind, lin), nonlin[0]
        else:
            a, b = sorted(nonlin, key=_rank)
            r0, e1 = a, b
        inner_kind = cur.kind
        break
    elements = (e1,) + tuple(e for _, e in reversed(levels))
    lad = (TwoElement if len(elements) == 1 else Ladder)(r0, elements, inner_kind)
    if isinstance(r0, Memristive) and r0.direction is not lad.direction_at(0):
        return NotLadder("the memristive element would have to be inverted", node)
    return lad


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------


class ConvergenceAdvisory(UserWarning):
    """The configuration is not covered by a convergence guarantee."""


def advisories(lad: Ladder, cfg: SplittingConfig, tau: int, period: float = 1.0) -> List[str]:
    """Reasons why the sufficient convergence conditions do not certify this run."""
    notes = []
    desc = lad.descriptors(tau, period)
    if cfg.algorithm == "fb":
        r = fb_step_range(desc[0], desc[1])
        if r.empty:
            notes.append(f"forward/backward: no step-size guarantee ({r.diagnostic})")
        elif cfg.step_sizes[0] not in r:
            notes.append(f"forward/backward: alpha={cfg.step_sizes[0]:g} outside ({r.lo:g}, {r.hi:g})")
    elif cfg.algorithm == "dr":
        r = dr_step_range(desc[1], desc[0])
        if r.empty:
            notes.append(f"Douglas-Rachford: no step-size guarantee ({r.diagnostic})")
        elif cfg.step_sizes[0] not in r:
            notes.append(f"Douglas-Rachford: alpha={cfg.step_sizes[0]:g} outside ({r.lo:g}, {r.hi:g})")
    else:
        r0 = desc[0]
        if not (r0.coercive and math.isfinite(r0.lam)):
            notes.append("nested: R0 is not known to be coercive and Lipschitz")
        else:
            rho = lad.contraction_radius(cfg.steps_for(lad.m), tau, period)
            if not rho < 1:
                notes.append(f"nested: contraction matrix has spectral radius {rho:.4g} >= 1")
    return notes


def _drive_values(drive):
    if not isinstance(drive, PeriodicSignal):
        raise TypeError("drive must be a PeriodicSignal")
    return drive


def solve_periodic(
    node: Union[CircuitNode, Ladder, SingleElement, NotLadder],
    drive: PeriodicSignal,
    drive_kind: str,
    cfg: SplittingConfig,
    warm_start=None,
    warn: bool = False,
) -> SolveResult:
    """Periodic response of a circuit to ``drive``.

    ``drive_kind`` must match the root: a series root takes a voltage, a
    parallel root a current.  Two-element circuits run ``fb`` or ``dr`` with
    the drive folded into the first operator; ladders run the nested
    iteration.  With ``warn=True`` configurations that are not certified by
    the sufficient conditions raise a :class:`ConvergenceAdvisory` warning.
    """
    drive = _drive_values(drive)
    if drive_kind not in ("voltage", "current"):
        raise ValueError(f"drive_kind must be 'voltage' or 'current', got {drive_kind!r}")
    canon = canonicalize(node) if isinstance(node, (ElementNode, Series, Parallel)) else node
    tau, T = drive.tau, drive.period
    if isinstance(canon, NotLadder):
        raise StructuralError(canon.describe())
    if isinstance(canon, SingleElement):
        e = canon.element
        want = Direction.V_TO_I if drive_kind == "voltage" else Direction.I_TO_V
        out = element_forward(e, drive, invert=e.direction is not want)
        return SolveResult(out, [out], 0, 0.0, True, "direct")
    if drive_kind != canon.drive_kind:
        raise ShapeError(f"this circuit's port takes a {canon.drive_kind} drive, got {drive_kind}")
    if warn:
        for note in advisories(canon, cfg, tau, T):
            warnings.warn(note, ConvergenceAdvisory, stacklevel=2)
    r0, ops = canon.operators(tau, T)
    b = drive.values
    if cfg.algorithm in ("fb", "dr"):
        if canon.m != 1:
            raise StructuralError(
                f"{cfg.algorithm} solves two-element circuits only; this ladder has {canon.m + 1} elements"
            )
        alpha = cfg.step_sizes[0]
        x0 = np.zeros(tau) if warm_start is None else np.asarray(warm_start, dtype=float)
        x0 = PeriodicSignal(x0, T)
        if cfg.algorithm == "fb":
            return forward_backward(Offset(r0, b), ops[0], x0, alpha, cfg.tol, cfg.max_iter, cfg.record_trace)
        if not r0.has_resolvent:
            raise StructuralError("Douglas-Rachford needs a resolvent for both elements")
        return douglas_rachford(Offset(ops[0], b), r0, x0, alpha, cfg.tol, cfg.max_iter, cfg.record_trace)
    return nested_forward_backward(
        r0, ops, drive, cfg.steps_for(canon.m), cfg.tol, cfg.max_iter, cfg.record_trace, warm_start
    )


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def _all_linear(node) -> bool:
    if isinstance(node, ElementNode):
        return node.element.linear
    return all(_all_linear(c) for c in node.children)


def port_matrix(node: CircuitNode, tau: int, period: float = 1.0) -> np.ndarray:
    """Dense matrix of an all-linear tree in its natural direction.

    Series nodes give an impedance (current to voltage), parallel nodes an
    admittance.  Raises :class:`UnsupportedElementError` on nonlinear parts.
    """
    if isinstance(node, ElementNode):
        return np.asarray(element_matrix(node.element, tau, period))
    target = _natural_direction(node)
    total = np.zeros((tau, tau))
    for c in node.children:
        m = port_matrix(c, tau, period)
        total += m if _natural_direction(c) is target else np.linalg.inv(m)
    return total


def linear_port_solve(node: CircuitNode, drive: PeriodicSignal, drive_kind: str) -> PeriodicSignal:
    """Direct solve of an all-linear circuit: the port output for ``drive``."""
    M = port_matrix(node, drive.tau, drive.period)
    takes = Direction.V_TO_I if drive_kind == "voltage" else Direction.I_TO_V
    if _natural_direction(node) is takes:
        return drive.like(M @ drive.values)
    return drive.like(np.linalg.solve(M, drive.values))


def _evaluate(node, x, direction, tau, period, tight):
    """Port output of ``node`` for input ``x`` taken in ``direction``."""
    sig = PeriodicSignal(x, period)
    if isinstance(node, ElementNode):
        e = node.element
        return element_forward(e, sig, invert=e.direction is not direction).values
    if _all_linear(node):
        M = port_matrix(node, tau, period)
        if _natural_direction(node) is direction:
            return M @ x
        return np.linalg.solve(M, x)
    if _natural_direction(node) is direction:
        return sum(_evaluate(c, x, direction, tau, period, tight) for c in node.children)
    # inverting a nonlinear subtree needs an inner solve
    kind = "voltage" if isinstance(node, Series) else "current"
    res = solve_periodic(node, sig, kind, tight)
    if not res.converged:
        warnings.warn(f"inner solve stopped at update {res.final_residual:.3g}", ConvergenceAdvisory)
    return res.solution.values


def _gap(node, x, y, direction, tau, period, tight):
    """Distance of the port pair ``(x -> y)`` (in ``direction``) from the node's relation."""
    if isinstance(node, ElementNode):
        e = node.element
        xin, yout = (x, y) if e.direction is direction else (y, x)
        if e.static:
            return float(np.max(static_graph_distance(e, xin, yout)))
        return float(np.max(np.abs(yout - element_forward(e, PeriodicSignal(xin, period)).values)))
    if _natural_direction(node) is not direction:
        return _gap(node, y, x, direction.flipped, tau, period, tight)
    slack = _slack_index(node, direction)
    rest = np.zeros_like(x)
    for k, c in enumerate(node.children):
        if k != slack:
            rest = rest + _evaluate(c, x, direction, tau, period, tight)
    return _gap(node.children[slack], x, y - rest, direction, tau, period, tight)


def _slack_index(node, direction):
    def score(c):
        if isinstance(c, ElementNode):
            e = c.element
            if isinstance(e, Memristive) and e.direction is not direction:
                return 0  # cannot be inverted, must absorb the residual
            if e.static and not e.linear:
                return 1
            return 2
        return 3

    scores = [score(c) for c in node.children]
    return int(np.argmin(scores))


_TIGHT = SplittingConfig("nested", (1.0,), tol=1e-12, max_iter=200_000)


def relation_residual(
    node: CircuitNode,
    drive: PeriodicSignal,
    output: PeriodicSignal,
    drive_kind: Optional[str] = None,
    tight: Optional[SplittingConfig] = None,
) -> float:
    """Distance of a claimed port solution from the circuit relation.

    The tree is evaluated from the output back towards the drive.  On each
    level one child (preferably a static nonlinear element) absorbs the
    difference between the drive and the other children's contributions, and
    the result is that child's distance from its own law.  Static laws use the
    smaller of the vertical and horizontal gaps to their graph so that flat
    and steep branches are both measured without cancellation.  Linear
    subtrees are inverted exactly; other inversions use a tight inner solve.
    """
    drive.check_compatible(output)
    tight = tight or _TIGHT
    if drive_kind is None:
        drive_kind = "voltage" if isinstance(node, Series) or (
            isinstance(node, ElementNode) and node.element.direction is Direction.I_TO_V
        ) else "current"
    # the output is the port variable that is not driven
    direction = Direction.I_TO_V if drive_kind == "voltage" else Direction.V_TO_I
    return _gap(node, output.values, drive.values, direction, drive.tau, drive.period, tight)


def ladder_residual(lad: Ladder, result: SolveResult, drive: PeriodicSignal) -> float:
    """Largest violation of the ladder relations by the internal signals.

    The relations are ``u_2 = E_1(u_1) + R0(u_1)`` and
    ``u_{p+1} = E_p(u_p) + u_{p-1}`` with ``u_{m+1}`` the drive.
    """
    u = [s.values for s in result.internal_signals]
    if len(u) != lad.m:
        raise ValueError(f"expected {lad.m} internal signals, got {len(u)}")
    u = u + [drive.values]
    tau, T = drive.tau, drive.period
    r0 = ElementNode(lad.r0)
    worst = 0.0
    for p, e in enumerate(lad.elements, 1):
        d = lad.direction_at(p)
        x = u[p - 1]
        if p == 1:
            other = _evaluate(r0, x, d, tau, T, _TIGHT)
        else:
            other = u[p - 2]
        worst = max(worst, _gap(ElementNode(e), x, u[p] - other, d, tau, T, _TIGHT))
    return worst
