"""Control-barrier-function safety filters that keep control-affine systems away from singular configurations."""
from .arm import ArmParameters, ArmScenario, arm_model, run_arm_scenario
from .cbf import (BarrierConstraint, ClassKFunction, CostSpec, EigenvalueBarrier, ObstacleBarrier,
                  assemble_distance_barrier, assemble_eigenvalue_barrier, build_cost, safety_filter)
from .config import ScenarioConfig, parse_config
from .dynamics import SimulatorConfig, SystemModel, mapping_matrix, step
from .errors import (ConfigurationError, ContractViolation, IntegrationBlowup, NondifferentiablePoint, QPInfeasible,
                     ScenarioFailed, SingularCost, UnsupportedParameters)
from .geometry import (BVH, MeshIndex, PointCloud, TriangleMesh, closest_point_on_mesh, extract_boundary_mesh,
                       scale_to_unit_cube)
from .harness import run_pair, run_scenario
from .magnetic import AgentParams, CoilConfig, MagneticRig, actuation_matrix
from .metrics import MetricsReport, compute_metrics
from .qp import QPProblem, QPSolution, solve_qp
from .singularity import eigen_spectrum, gram_matrix, sample_singular_set, smallest_singular_value
from .suture import map_singular_set, run_suturing_scenario
from .trajectory import TrajectoryLog

__version__ = "0.1.0"
