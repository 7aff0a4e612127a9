"""Periodic steady states of monotone one-port circuits by operator splitting."""

from .circuit import (
    Ladder,
    NotLadder,
    Parallel,
    Series,
    SingleElement,
    TwoElement,
    ElementNode,
    canonicalize,
    ladder_residual,
    linear_port_solve,
    parse_netlist,
    port_matrix,
    relation_residual,
    solve_periodic,
    to_netlist,
)
from .convergence import (
    LadderDescriptors,
    build_contraction_matrix,
    forward_step_factor,
    resolvent_factor,
    spectral_radius,
    tune_step_size,
)
from .elements import (
    Capacitor,
    Direction,
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
)
from .memristive import MemristiveSystem, PotassiumConductance, periodic_steady_state
from .resolvent import ElementOperator, element_resolvent, guarded_newton_resolvent
from .signal import PeriodicSignal, Sine, diff_operator, inner_product, sample_waveform
from .splitting import SolveResult, SplittingConfig, dr_step_range, fb_step_range
from .srg import SineFamily, monotonicity_estimate, srg_sample

__version__ = "0.1.0"
