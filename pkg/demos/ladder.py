# %% [markdown]
# A ladder of diode/RC units solved by the nested forward/backward sweep,
# timed at a few sizes.

# %%
import time

from monoport.circuit import canonicalize, ladder_residual, parse_netlist, solve_periodic
from monoport.signal import Sine, sample_waveform
from monoport.splitting import SplittingConfig


def ladder_netlist(n):
    d, rc = "diode(Is=1e-14, n=1, VT=0.02585)", "rc(R=1, C=1)"
    node = f"series({d}, {rc})"
    for _ in range(n - 1):
        node = f"series({d}, parallel({rc}, {node}))"
    return node


v = sample_waveform(Sine(1, 1, 0, 1), 256)
cfg = SplittingConfig("nested", (1.5,), 1e-4, 100_000)

# %%
for n in (2, 5, 10, 20):
    lad = canonicalize(parse_netlist(ladder_netlist(n)))
    t0 = time.perf_counter()
    res = solve_periodic(lad, v, "voltage", cfg)
    wall = time.perf_counter() - t0
    print(f"n={n:3d} m={lad.m:3d}: converged={res.converged} iterations={res.iterations} "
          f"{wall * 1e3:7.1f} ms, ladder residual {ladder_residual(lad, res, v):.1e}")
