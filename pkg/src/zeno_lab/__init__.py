"""Quantum Zeno / anti-Zeno dynamics of a qubit coupled to a Lorentzian bath."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DensityMatrix,
    HilbertConfig,
    ModelParams,
    OperatorSet,
    QubitState,
    Variant,
    build_operators,
    initial_state,
    qubit_expectations,
)
from .dynamics import (  # noqa: E402
    IntegratorConfig,
    SurvivalSeries,
    ZenoProtocol,
    evolve,
    lindblad_rhs,
    nonselective_measure,
    run_zeno,
    selective_measure,
)
from .analytic import (  # noqa: E402
    continuous_survival,
    continuous_w,
    kka_survival_finite_tau,
    kka_w_continuous,
    kka_w_finite_tau,
    rate_equation_run,
    rw_alpha,
    rw_first_interval_general,
    rw_survival_excited,
)
from .analysis import (  # noqa: E402
    RateSeries,
    SweepResult,
    rates_from_series,
    sweep_tau,
    total_average_rate,
    transition_times,
)
