"""Replicator-mutator dynamics with Markov-switched mutation rates."""

from .analysis import (
    BasinLabel,
    Direction,
    HittingSpec,
    classify_basin,
    dynkin_check,
    estimate_hitting_time,
    moment_curve,
    occupation_measure,
)
from .ctmc import GeneratorQ, RegimePath, RngStream, sample_holding_time, simulate_chain, stationary
from .dynamics import (
    FixedPointSet,
    PayoffMatrix,
    TwoTypeGame,
    critical_mu,
    drift2,
    drift_n,
    drift_poly,
    fixed_points,
    mutation_matrix,
)
from .hybrid import SimConfig, SwitchedModel, ensemble, integrate_segment, simulate_hybrid
from .lyapunov import Family, LyapunovSpec, find_negative_drift_region, generator_LV, search_weights

__version__ = "0.1.0"
