"""Numerical ergodic theory for the alpha-continued fraction maps."""
from .mapcore import AlphaMap, Digit, DomainError, Expansion, GOLDEN, convergent, digit, expand, orbit, step
from .partition import BranchId, Cylinder, branch_interval, cylinders, image_count, inverse_branch, weight
from .transfer import (
    BKDeltaParams,
    ConvergenceError,
    GridFunction,
    UlamOperator,
    apply_transfer,
    bkdelta_norm,
    bv_inequalities_check,
    invariant_density,
    total_variation,
    ulam_matrix,
)
from .entropy import EntropyEstimate, SweepResult, birkhoff_entropy, holder_fit, rohlin_entropy, sweep_entropy
from .stochastics import (
    CLTSample,
    VarianceEstimate,
    birkhoff_samples,
    normality_test,
    perturbed_eigenvalue,
    sigma_sweep,
    variance_green_kubo,
    variance_mn,
)
from .continuity import (
    KellerCertificate,
    TranslatedMap,
    correlation_decay_fit,
    density_l1_modulus,
    keller_bound_curve,
    keller_construct,
    lasota_yorke_probe,
)

__version__ = "0.1.0"
