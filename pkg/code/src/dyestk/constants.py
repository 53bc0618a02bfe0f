import numpy as np

MACHINE_EPS = np.finfo(float).eps

# core numerics
SOLVE_PIVOT_RTOL = 1e-14
SOLVE_MAX_CONDITION = 1e12
SOLVE_RESIDUAL_RTOL = 1e-10
SYMMETRY_RTOL = 1e-10
FD_STEP_FACTOR = MACHINE_EPS ** (1.0 / 3.0)

# proximal subproblems
NEWTON_MAX_ITER = 200
NEWTON_GRAD_TOL = 1e-10
NEWTON_NEAR_TOL_FACTOR = 1e2
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
ARMIJO_MAX_HALVINGS = 60

# splitting driver
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100000
DEFAULT_ESCAPE_RADIUS = 1e12
DEFAULT_ALPHA_FRACTION = 0.9

# envelope and analysis
CRITICAL_RTOL = 1e-8
PHI_STATIONARY_RTOL = 1e-6
EIG_TOL = 1e-7
HESSIAN_SYMMETRY_TOL = 1e-8
EQUIVALENCE_RTOL = 1e-9
REDUCTION_TOL = 1e-12
JACOBIAN_FD_RTOL = 1e-5
UNSTABLE_EIG_TOL = 1e-9
CORRESPONDENCE_TOL = 1e-7
LOCAL_MIN_PROBE_RADIUS = 1e-3
LOCAL_MIN_PROBE_DIRECTIONS = 100
SANDWICH_SLACK = 1e-8

# saddle lab
DEFAULT_DELTA_SADDLE = 1e-4
DEFAULT_DELTA_MIN = 1e-4
MC_ESCAPE_RADIUS = 1e6
CLUSTER_RADIUS = 1e-5
DISCOVERY_RESIDUAL_TOL = 1e-10
DISCOVERY_POLISH_STEPS = 5

# output
CSV_FLOAT_FORMAT = "%.17g"
