"""Shape optimization of star-shaped planar domains in the Lipschitz topology.

Star-shaped domains are encoded by positive piecewise-linear radial functions
on the circle.  The steepest descent of a PDE-constrained shape functional
over Lipschitz-1 radial perturbations is computed through the optimal
transport dual of the balanced shape-derivative measure (log-domain Sinkhorn
with epsilon scaling), alongside p-Laplacian and viscosity relaxations for
comparison, with an Armijo outer loop under an area constraint.
"""

from .circle import (
    CircleGrid,
    P1Function,
    RadialFunction,
    geodesic_distance,
    interpolate,
    lipschitz_seminorm,
    square_radial,
    star_area,
    uniform_grid,
    weighted_mass_vector,
)
from .measures import (
    AtomicMeasure,
    BalancedMeasurePair,
    NodalFunctional,
    apply,
    balance_and_split,
    half_circle_step_functional,
    lambda_star,
    manufactured_atoms,
    nodal_restriction,
    pair_apply,
)
from .transport import (
    DualPotential,
    SinkhornResult,
    TransportPlan,
    cost_matrix,
    descent_direction,
    dual_from_scalings,
    exact_plan_cost,
    plan_cost,
    project_lip1,
    sinkhorn,
    sinkhorn_eps_scaling,
)
from .relax import (
    RelaxSolution,
    solve_lip1_exact_small,
    solve_plaplace,
    solve_viscosity,
)
from .fem2d import (
    DiskMesh,
    FemField,
    map_mesh,
    mesh_area,
    reference_disk_mesh,
    solve_adjoint,
    solve_state,
)
from .shapederiv import EnergySpec, assemble_derivative, energy, problem_spec
from .optimize import (
    IterateLog,
    OptimizerConfig,
    armijo_step,
    project_area,
    run,
)

__version__ = "0.1.0"
