# %% [markdown]
# Envelope detector: a diode in series with a parallel RC filter, driven by
# a unit sine.  Forward/backward gives a tight reference; Douglas-Rachford
# with a small step shows how slowly it contracts on this circuit.

# %%
import time
from pathlib import Path

import numpy as np

from monoport.circuit import canonicalize, parse_netlist, relation_residual, solve_periodic
from monoport.signal import Sine, sample_waveform, write_signal_csv
from monoport.splitting import SplittingConfig

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)
node = parse_netlist("series(diode(Is=1e-14, n=1, VT=0.02585), parallel(resistor(R=1), capacitor(C=1)))")
print(canonicalize(node).describe())
v = sample_waveform(Sine(), 500)

# %%
for alg, alpha, tol in (("fb", 1.0, 1e-10), ("dr", 0.01, 1e-5)):
    t0 = time.perf_counter()
    res = solve_periodic(node, v, "voltage", SplittingConfig(alg, (alpha,), tol, 200_000))
    wall = time.perf_counter() - t0
    print(f"{alg}: {res.iterations} iterations, {wall:.2f} s, "
          f"relation residual {relation_residual(node, v, res.solution):.2e}")
    write_signal_csv(OUT / f"envelope_{alg}.csv", res.solution)

# %%
i = res.solution.values
print(f"peak current {i.max():.4f} at t={res.solution.times[i.argmax()]:.3f}, "
      f"conducting on {np.mean(i > 0.01 * i.max()):.0%} of the period")
