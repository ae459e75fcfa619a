"""Exact self-affine carpets, grid measures, thinness certificates and adversarial ratio programs."""

from .adversary import (
    AdversarySolution,
    RatioProgram,
    build_program,
    decay_curve,
    solve_exact,
    solve_iterative,
)
from .certify import (
    lemma32_constant,
    level_masses,
    strip_constant,
    thinness_certificate,
)
from .errors import (
    ConfigError,
    DegenerateMass,
    DimensionMismatch,
    DisjointnessViolation,
    EnumerationBudget,
    InvalidFactor,
    InvalidParameter,
    InvalidSpec,
    NonConvergence,
    NotCongruent,
    ThinCarpetError,
)
from .geometry import (
    Box,
    ProductPartition,
    connect_congruent_boxes,
    dilate,
    overlap_fraction,
)
from .measures import (
    GridMeasure,
    SplitParams,
    doubling_constant,
    empirical_exponents,
    gen_split_measure_1d,
    isotropy_constant,
    lebesgue,
    mass,
    product_measure,
)
from .systems import (
    CarpetSpec,
    IntervalSpec,
    SpongeSpec,
    bedford_mcmullen,
    find_hole,
    harvest_schedule,
    level_set,
    moran_cover,
    sponge_depth,
)

__all__ = [
    "AdversarySolution",
    "Box",
    "CarpetSpec",
    "ConfigError",
    "DegenerateMass",
    "DimensionMismatch",
    "DisjointnessViolation",
    "EnumerationBudget",
    "GridMeasure",
    "IntervalSpec",
    "InvalidFactor",
    "InvalidParameter",
    "InvalidSpec",
    "NonConvergence",
    "NotCongruent",
    "ProductPartition",
    "RatioProgram",
    "SplitParams",
    "SpongeSpec",
    "ThinCarpetError",
    "bedford_mcmullen",
    "build_program",
    "connect_congruent_boxes",
    "decay_curve",
    "dilate",
    "doubling_constant",
    "empirical_exponents",
    "find_hole",
    "gen_split_measure_1d",
    "harvest_schedule",
    "isotropy_constant",
    "lebesgue",
    "lemma32_constant",
    "level_masses",
    "level_set",
    "mass",
    "moran_cover",
    "overlap_fraction",
    "product_measure",
    "solve_exact",
    "solve_iterative",
    "sponge_depth",
    "strip_constant",
    "thinness_certificate",
]
