# %% [markdown]
# Potassium conductance: sample its scaled relative graph, bound a
# forward/backward step from the sampled monotonicity, and solve the
# parallel circuit with a resistor for a sinusoidal current.

# %%
from pathlib import Path

from monoport.circuit import parse_netlist, solve_periodic
from monoport.elements import MonotonicityDescriptor
from monoport.memristive import PotassiumConductance
from monoport.signal import Sine, sample_waveform
from monoport.splitting import SplittingConfig, fb_step_range
from monoport.srg import monotonicity_estimate, srg_sample, write_srg_csv

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)
pts = srg_sample(PotassiumConductance(), count=2000, tau=256, seed=0)
est = monotonicity_estimate(pts)
write_srg_csv(OUT / "potassium_srg.csv", pts)
print(f"sampled mu={est.mu:.5f} lambda={est.lam:.3f}")

# %%
for R in (400, 500, 600):
    print(R, fb_step_range(est, MonotonicityDescriptor(1 / R, 1 / R)))

# %%
alpha = 0.9 * fb_step_range(est, MonotonicityDescriptor(1 / 500, 1 / 500)).hi
node = parse_netlist("parallel(resistor(R=500), memristor(gK=19, vK=12))")
i = sample_waveform(Sine(), 256)
res = solve_periodic(node, i, "current", SplittingConfig("fb", (alpha,), 1e-6, 20_000))
print(f"alpha={alpha:.4f}: converged={res.converged} after {res.iterations} iterations")
with open(OUT / "potassium_lissajous.csv", "w") as fh:
    fh.write("current,voltage\n")
    for a, b in zip(i.values, res.solution.values):
        fh.write(f"{a:.17g},{b:.17g}\n")
