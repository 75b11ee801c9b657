"""Trajectory optimization with state-triggered go/no-go decisions.

Discrete choices (thread the hoop or not, pass an obstacle left or
right) are embedded into a continuous optimal control problem through
compound state-triggered constraints, and the whole thing is solved by
successive convexification over second-order cone programs.  The
package ships the two benchmark scenarios it was built around, a
Monte-Carlo campaign harness, and a command line front end (see the
`stctraj` entry point and FORMATS.md).
"""
from .dynamics import (
    ControlConeSpec,
    ControlSetParams,
    DiscreteDynamics,
    QuadModel,
    build_control_cone,
    discretize_foh,
    propagate_dense,
)
from .harness import (
    CampaignResult,
    CampaignSpec,
    CaseResult,
    build_case,
    clipping_scenario1,
    clipping_scenario2,
    containment_violation,
    node_violations,
    run_campaign,
    run_case,
    sample_scenario1,
    sample_scenario2,
)
from .scenarios import (
    BeamSpec,
    BoundaryConditions,
    HoopSpec,
    NonconvexProblem,
    PayloadLink,
    assemble_problem,
    build_beam_stc,
    build_hoop_stc,
)
from .scvx import (
    ConvergenceReport,
    ScvxConfig,
    Trajectory,
    default_config,
    initialize,
    solve_scvx,
)
from .stc import (
    CompoundStc,
    ConstraintForm,
    ScalarStc,
    SmoothFn,
    TriggerMode,
    eval_compound,
    implication_holds,
    linearize_compound,
    logical_oracle,
    sigma_hat,
    slack_witness,
)

__version__ = "0.1.0"

__all__ = [
    "BeamSpec",
    "BoundaryConditions",
    "CampaignResult",
    "CampaignSpec",
    "CaseResult",
    "CompoundStc",
    "ConstraintForm",
    "ControlConeSpec",
    "ControlSetParams",
    "ConvergenceReport",
    "DiscreteDynamics",
    "HoopSpec",
    "NonconvexProblem",
    "PayloadLink",
    "QuadModel",
    "ScalarStc",
    "ScvxConfig",
    "SmoothFn",
    "Trajectory",
    "TriggerMode",
    "assemble_problem",
    "build_beam_stc",
    "build_case",
    "build_control_cone",
    "build_hoop_stc",
    "clipping_scenario1",
    "clipping_scenario2",
    "containment_violation",
    "default_config",
    "discretize_foh",
    "eval_compound",
    "implication_holds",
    "initialize",
    "linearize_compound",
    "logical_oracle",
    "node_violations",
    "propagate_dense",
    "run_campaign",
    "run_case",
    "sample_scenario1",
    "sample_scenario2",
    "sigma_hat",
    "slack_witness",
    "solve_scvx",
]
