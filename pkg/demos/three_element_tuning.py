# %% [markdown]
# Step-size tuning for the three-element circuit: the contraction estimate
# against the rate the nested sweep actually achieves.

# %%
from pathlib import Path

import numpy as np

from monoport.circuit import canonicalize, parse_netlist, solve_periodic
from monoport.convergence import observed_rate, tune_step_size, write_curve_csv
from monoport.signal import Sine, sample_waveform
from monoport.splitting import SplittingConfig

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)
lad = canonicalize(parse_netlist("series(resistor(R=1), parallel(resistor(R=1), rc(R=1, C=0.001953125)))"))
desc = lad.descriptors(256)
for name, d in zip(["R0", "E1", "E2"], desc):
    print(f"{name}: mu={d.mu:.4f} lambda={d.lam:.4f}")

# %%
grid = np.arange(0, 121) * 0.005
best, rho, curve = tune_step_size(desc, grid)
write_curve_csv(OUT / "three_element_curve.csv", curve)
print(f"estimate minimised at alpha={best:.3f}, rho={rho:.4f}")

# %%
v = sample_waveform(Sine(), 256)
for alpha in (0.1, 0.2, best, 0.4):
    res = solve_periodic(lad, v, "voltage", SplittingConfig("nested", (alpha,), 1e-12, 10_000, record_trace=True))
    est = dict(curve).get(alpha, float("nan"))
    print(f"alpha={alpha:.3f}: estimate {est:.4f}, observed rate {observed_rate(res.update_history()):.4f}, "
          f"{res.iterations} iterations")
