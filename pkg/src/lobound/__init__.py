"""Certified upper bounds on the best Lieb-Oxford constant.

Core objects: radial smearing measures, interaction-deficit kernels, the
grid-dual fixed-point solver with feasibility certificates, the exchange
(negative-correlation) constants, the classic majorant route, and an outer
optimizer over measure weights.
"""

from .measures import (
    RadialMeasure,
    coulomb_interaction_energy,
    coulomb_self_energy,
    make_ball,
    make_delta,
    make_sphere,
    scaled_potential,
)
from .kernels import (
    PsiMatrix,
    SphereTensor,
    TensorBudgetError,
    build_psi_matrix,
    build_psi_matrix_exact,
    build_tensor,
    exact_kernel,
    exact_self_energy,
    phi_quadrature_oracle,
    psi_ball_ball,
    psi_general,
    psi_sphere_sphere,
    tensor_required_bytes,
)
from .dual import (
    BoundReport,
    BoundVector,
    IterationResult,
    assemble_constant,
    certified_bound,
    g_vector,
    iterate_to_fixed_point,
    lp_oracle,
    objective,
    psi_transform,
    tail_correction,
    verify_feasible,
)
from .exchange import ExchangeReport, b_opt, compute_J, cubic_root_R, g_exchange, theta
from .classic import MajorantCurve, build_majorants, chi, classic_constant
from .optimizer import (
    OptimizationResult,
    OptimizerConfig,
    measures_from_logits,
    objective_from_logits,
    optimize,
)

__version__ = "0.1.0"
