"""Exact finite-volume Gibbs specifications on windows of Z^d, with entropy
functionals, diameters and specific free energy certificates."""
from .errors import (
    AmbiguityError, CapacityError, ConfigError, DomainError, LatticeSFEError,
    OptimizationError, ShapeError,
)
from .lattice import (
    Alphabet, Configuration, Window, all_states, block, closure, decode, edge_boundary,
    encode, make_box, set_guard, shift, shift_window, translate,
)
from .measures import (
    DensityTable, MeasureFamily, envelope, marginal, max_diameter, max_entropy, mixture,
    point_mass, product_measure, rel_entropy, total_variation, uniform,
)
from .cluster import (
    BondFrame, SiteFrame, UnionFind, cluster_hull, count_clusters, count_level_sets,
    is_frame_sufficient,
)
from .ising import ising_alpha, ising_decompose_check
from .models import (
    BoundaryCondition, Griffiths, LoopOn, Potential, PotentialSpec, RandomCluster,
    check_consistency, diam_B, diam_B_restricted, eps, griffiths_kernel_simplified,
    hamiltonian, ising_potential, kernel, kernels_batch, model_from_json, zero_potential,
)
from .free_energy import (
    ExplicitField, IsingChainField, ProductField, SfeReport, TableField, dlr_residual,
    finite_energy_check, griffiths_window_measure, heat_bath_sweep, minimize_mixture_kl,
    run_chains, sfe_inf_term, sfe_report, sfe_term, superadditivity_check,
)

__version__ = "0.1.0"
