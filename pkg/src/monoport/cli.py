"""Command-line front end.

Exit status: 0 on success, 2 when a solve did not converge (results are still
written), 3 for netlist or structural errors, 4 for I/O errors.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from typing import List, Optional

import numpy as np

from .circuit import (
    Ladder,
    NotLadder,
    SingleElement,
    advisories,
    canonicalize,
    parse_netlist,
    solve_periodic,
    to_netlist,
)
from .convergence import tune_step_size, write_curve_csv
from .elements import Direction, element_forward
from .errors import MonoportError, ParseError, ShapeError, StructuralError
from .signal import PeriodicSignal, parse_waveform, sample_waveform
from .splitting import SplittingConfig, dr_step_range, fb_step_range, write_trace_csv
from .srg import SineFamily, format_srg_csv, srg_sample

EXIT_OK, EXIT_NOCONV, EXIT_STRUCT, EXIT_IO = 0, 2, 3, 4


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(text: str) -> List[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
        if not step > 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(max(count, 0))]
    return _floats(text)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _pair(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return tuple(vals)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="monoport", description="Periodic steady states of monotone one-port circuits."
    )
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--netlist", required=True, help="netlist file")
    common.add_argument("--steps", type=_positive_int, default=256, help="samples per period (tau)")
    common.add_argument("--period", type=_positive_float, default=1.0, help="period length T")
    common.add_argument("--out", help="output CSV (default: standard output)")

    s = sub.add_parser("solve", parents=[common], help="compute the periodic response")
    s.add_argument("--drive", default="sine:1,1,0,0", help="sine:amp,cycles,phase,offset | const:c | csv:PATH")
    s.add_argument("--drive-kind", choices=("voltage", "current"), help="default: implied by the root")
    s.add_argument("--algorithm", choices=("fb", "dr", "nested"), default="nested")
    s.add_argument("--alpha", type=_floats, default=[1.0], help="step size(s), comma separated")
    s.add_argument("--tol", type=_positive_float, default=1e-6)
    s.add_argument("--max-iter", type=_positive_int, default=10_000)
    s.add_argument("--seed", type=int, default=0, help="unused by the deterministic solvers")
    s.add_argument("--trace", help="write per-iteration k,max_update,residual CSV")

    t = sub.add_parser("tune", parents=[common], help="sweep a common step size")
    t.add_argument("--alpha-grid", type=_grid, default=_grid("0:0.6:0.005"), help="start:stop:step or a list")
    t.add_argument("--sqrt", action="store_true", help="use the square-root forward-step factor")

    g = sub.add_parser("srg", parents=[common], help="sample the scaled relative graph")
    g.add_argument("--count", type=_positive_int, default=2000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--amplitude-range", type=_pair, default=(0.1, 10.0))
    g.add_argument("--cycles-range", type=_pair, default=(1, 8))
    g.add_argument("--offset-range", type=_pair, default=(-50.0, 50.0))

    c = sub.add_parser("check", parents=[common], help="print structure and convergence data")
    c.add_argument("--alpha", type=_floats, default=[1.0])
    c.add_argument("--algorithm", choices=("fb", "dr", "nested"), default="nested")
    return p


def _read_netlist(path):
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read())


def _emit(path, text):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(rows, header):
    lines = [header]
    lines += [",".join(f"{v:.17g}" for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def _cmd_solve(args):
    node = _read_netlist(args.netlist)
    canon = canonicalize(node)
    spec = parse_waveform(args.drive)
    drive = sample_waveform(spec, args.steps, args.period)
    kind = args.drive_kind or getattr(canon, "drive_kind", None) or "voltage"
    cfg = SplittingConfig(args.algorithm, tuple(args.alpha), args.tol, args.max_iter, record_trace=bool(args.trace))
    t0 = time.perf_counter()
    res = solve_periodic(canon, drive, kind, cfg)
    wall = time.perf_counter() - t0
    rows = zip(drive.times, drive.values, res.solution.values)
    _emit(args.out, _csv(rows, "t,input,output"))
    if args.trace:
        write_trace_csv(args.trace, res)
    status = "converged" if res.converged else "not converged"
    print(
        f"{status}: algorithm={res.algorithm} iterations={res.iterations} "
        f"residual={res.final_residual:.3e} wall_time={wall:.3f}s",
        file=sys.stderr,
    )
    if res.message:
        print(res.message, file=sys.stderr)
    return EXIT_OK if res.converged else EXIT_NOCONV


def _ladder_or_fail(node):
    canon = canonicalize(node)
    if isinstance(canon, NotLadder):
        raise StructuralError(canon.describe())
    if isinstance(canon, SingleElement):
        raise StructuralError("a single element has no splitting to tune")
    return canon


def _cmd_tune(args):
    lad = _ladder_or_fail(_read_netlist(args.netlist))
    desc = lad.descriptors(args.steps, args.period)
    alpha, rho, curve = tune_step_size(desc, args.alpha_grid, sqrt=args.sqrt)
    _emit(args.out, _csv(curve, "alpha,rho"))
    print(f"best alpha={alpha:.6g} rho={rho:.6g}", file=sys.stderr)
    return EXIT_OK


class _PortOperator:
    """The port relation of a circuit as an operator, in its natural direction."""

    def __init__(self, canon, tau, period):
        self.canon, self.tau, self.period = canon, tau, period

    def forward(self, u: PeriodicSignal) -> PeriodicSignal:
        if isinstance(self.canon, SingleElement):
            return element_forward(self.canon.element, u)
        cfg = SplittingConfig("nested", (1.0,), 1e-10, 100_000)
        return solve_periodic(self.canon, u, self.canon.drive_kind, cfg).solution

    def apply_batch(self, U, period):
        if isinstance(self.canon, SingleElement):
            system = getattr(self.canon.element, "system", None)
            if system is not None and hasattr(system, "apply_batch"):
                return system.apply_batch(U, period)
        return np.vstack([self.forward(PeriodicSignal(u, period)).values for u in U])


def _cmd_srg(args):
    canon = canonicalize(_read_netlist(args.netlist))
    if isinstance(canon, NotLadder):
        raise StructuralError(canon.describe())
    cyc = (int(args.cycles_range[0]), int(args.cycles_range[1]))
    family = SineFamily(tuple(args.amplitude_range), cyc, tuple(args.offset_range))
    failures = []
    pts = srg_sample(_PortOperator(canon, args.steps, args.period), family, args.count, args.steps, args.period, args.seed, failures)
    _emit(args.out, format_srg_csv(pts))
    if pts:
        mu = min(p.re for p in pts)
        lam = max(p.gain for p in pts)
        print(f"points={len(pts)} failures={len(failures)} mu_hat={mu:.6g} lambda_hat={lam:.6g}", file=sys.stderr)
    else:
        print(f"no usable points ({len(failures)} failures)", file=sys.stderr)
    return EXIT_OK


def _cmd_check(args):
    node = _read_netlist(args.netlist)
    canon = canonicalize(node)
    out = [f"netlist: {to_netlist(node)}", canon.describe()]
    if isinstance(canon, Ladder):
        desc = canon.descriptors(args.steps, args.period)
        names = ["R0"] + [f"E{p}" for p in range(1, canon.m + 1)]
        for name, d in zip(names, desc):
            out.append(f"  {name}: mu={d.mu:.6g} lambda={d.lam:.6g}")
        alphas = args.alpha if len(args.alpha) != 1 else args.alpha * canon.m
        if len(alphas) == canon.m:
            rho = canon.contraction_radius(alphas, args.steps, args.period)
            rho_s = canon.contraction_radius(alphas, args.steps, args.period, sqrt=True)
            out.append(f"contraction spectral radius: {rho:.6g} (square-root factor: {rho_s:.6g})")
        else:
            out.append(f"contraction spectral radius: need 1 or {canon.m} step sizes")
        if canon.m == 1:
            fb = fb_step_range(desc[0], desc[1])
            dr = dr_step_range(desc[1], desc[0])
            for name, r in (("fb", fb), ("dr", dr)):
                if r.empty:
                    out.append(f"{name} step range: empty ({r.diagnostic})")
                else:
                    out.append(f"{name} step range: ({r.lo:g}, {r.hi:g}) [{r.case}]")
        if len(args.alpha) in (1, canon.m) and (canon.m == 1 or args.algorithm == "nested"):
            cfg = SplittingConfig(args.algorithm, tuple(args.alpha) if args.algorithm == "nested" else (args.alpha[0],))
            for note in advisories(canon, cfg, args.steps, args.period):
                out.append(f"advisory: {note}")
    _emit(args.out, "\n".join(out) + "\n")
    return EXIT_OK


_COMMANDS = {"solve": _cmd_solve, "tune": _cmd_tune, "srg": _cmd_srg, "check": _cmd_check}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParseError, StructuralError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCT
    except (MonoportError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCT


if __name__ == "__main__":
    sys.exit(main())
