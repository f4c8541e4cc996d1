"""Numerics for entanglement transmission over compound quantum channels at
small Hilbert-space dimension: channel algebra, coherent-information bounds,
decoupling and one-shot random-coding bounds, typical projections, and the
direct-part coding pipeline."""

__version__ = "0.1.0"

from . import capacity, channels, core, decoupling, fileio, typicality, verifier  # noqa: F401
from ._budget import BudgetExceededError, dim_budget  # noqa: F401
from .channels import (  # noqa: F401
    CompoundSet,
    KrausMap,
    OptimizerConfig,
    StinespringDilation,
    apply,
    average,
    choi,
    choi_to_kraus,
    coherent_information,
    complementary,
    compose,
    entanglement_fidelity,
    entropy_exchange,
    make_kraus,
    minimal_kraus,
    optimal_code_fidelity,
    stinespring,
    tensor_power,
    transpose_recovery,
    verify_kind,
)
from .decoupling import (  # noqa: F401
    DecouplingTriple,
    HaarSampler,
    OneShotBoundReport,
    decoupling_bound,
    decoupling_states,
    embed_unitary,
    haar_unitary,
    mc_code_fidelity,
    oneshot_bound_rhs,
)
from .capacity import (  # noqa: F401
    CapacityEstimate,
    DirectPartReport,
    bsst_sequence,
    direct_part_experiment,
    ic_gradient,
    maximin_coherent_info,
)
from .typicality import (  # noqa: F401
    ExponentBook,
    ReducedOperation,
    TypicalProjector,
    exponents,
    frequency_typical_projector,
    reduced_operation,
    typical_state,
)
from .verifier import SuiteReport, SuiteSizes, run_suite  # noqa: F401
