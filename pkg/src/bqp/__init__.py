"""Branching Markov chains on finite state spaces: samplers, spine
decompositions, potential theory of the intensity operator and branching
interlacements, with exact and Monte Carlo checks."""

__version__ = "0.1.0"

from .bmc import (
    DEFAULT_CAPS,
    SamplerCaps,
    SpinePath,
    batch_counts,
    colour,
    decorate,
    reweighted_biased_sampler,
    sample_biased_bmc,
    sample_bmc,
    sample_spine,
)
from .decorability import (
    DecorabilityReport,
    bar_mean,
    criteria_report,
    decorability_constant,
    hit_probability_bounds,
    hit_probability_exact,
)
from .errors import *  # noqa: F401,F403
from .forest import (
    BLUE,
    UNCOLOURED,
    WHITE,
    Forest,
    Individual,
    entrance_set,
    occupation_of,
    progeny,
    progeny_of_entrance,
    validate_forest,
)
from .interlacement import (
    InterlacementSample,
    InterlacementSampler,
    QuasiPath,
    death_b,
    progeny_occupation_check,
    sample_branching_interlacement,
    sample_hitting_quasi_process,
)
from .model import (
    Model,
    OffspringLaw,
    build_model,
    green_function,
    h_function,
    h_transform_kernel,
    intensity_operator,
    normed_model,
    reference_model,
    size_biased_law,
    spectral_radius,
)
from .potential import (
    EntranceFamily,
    KuznetsovPath,
    KuznetsovSampler,
    RieszPair,
    adjoint_kernel,
    entrance_family,
    entrance_family_check,
    entrance_measure,
    excessive_to_occupation,
    is_excessive,
    kuznetsov_sample,
    occupation_to_excessive,
    riesz_decomposition,
    taboo_return_kernel,
)
from .report import TestReport
from .rng import make_rng, run_chunks, stream
from .verify import (
    TreePmf,
    enumerate_truncated_biased,
    enumerate_truncated_bmc,
    interlacement_qp_test,
    spine_identity_test,
    tv_distance,
)
