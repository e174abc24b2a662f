"""Numerical lab for spectroscopy on noisy analog quantum simulators."""

from .complexity import ComplexityInputs, big_f, f_factor, sigma_omega, total_samples
from .experiment import ExperimentConfig, load_config, run_sweep, sample_pairs, write_outputs
from .lindblad import (
    BackendToleranceError,
    PairObservable,
    SpectroscopyConfig,
    evolve_series,
    liouvillian_matrix,
    perturbative_prediction,
)
from .mitigation import (
    ReshapeSet,
    RescaleConfig,
    rescale_first,
    rescale_second,
    richardson_series,
    run_reshaping,
    run_rescaling,
    run_richardson,
)
from .operators import (
    HamiltonianSpec,
    NoiseModel,
    PauliString,
    build_hamiltonian,
    build_noise,
    custom_noise,
    diagonalize,
)
from .signals import DampedMode, TimeSeries, synth_series
from .spectral import EstimatorConfig, RetrievalError, estimate_energy, matrix_pencil

__version__ = "0.1.0"
