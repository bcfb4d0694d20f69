from ._util import SingularityError, wrap_angle
from .aerial import (
    FixedWingParams,
    FixedWingState,
    InfeasibleCommandError,
    LinearAircraftModel,
    QuadrotorParams,
    QuadrotorState,
    aero_forces,
    example_linear_aircraft,
    fixedwing_derivative,
    fixedwing_level_kinematics,
    hover_motor_speed,
    level_trim,
    linear_aircraft_derivative,
    min_turn_radius,
    quadrotor_derivative,
    quadrotor_mix,
    quadrotor_unmix,
)
from .dynamics import (
    DdrDynParams,
    TomrDynParams,
    clamp_unit,
    ddr_dynamics_derivative,
    pure_integrator_derivative,
    rotation_z,
    tomr_dynamics_derivative,
)
from .integrate import IntegrationError, Trajectory, integrate, rollout
from .kinematics import (
    BicycleParams,
    CarLikeParams,
    DdrParams,
    Pose2D,
    TomrParams,
    bicycle_derivative,
    carlike_derivative,
    ddr_body_speeds,
    ddr_forward_kinematics,
    ddr_inverse_kinematics,
    tomr_forward_kinematics,
    tomr_inverse_kinematics,
    unicycle_derivative,
)
from .models import MotionModel
from . import models
