from .composite import CompositeChannel, channel_gain
from .fields import (
    FadingField,
    FadingProcess,
    Grid2D,
    OutsideFieldError,
    ShadowingField,
    jakes_correlation,
    sample_fading_field,
    sample_shadowing_field,
)
from .pathloss import (
    Breakpoint,
    BuildingLayout,
    Floor,
    PathLossParams,
    RangeError,
    Wall,
    path_loss_amplitude,
    path_loss_db,
    wall_floor_attenuation_db,
)
from .radiomap import RadioMap, RadioMapChannel
from .uav import (
    A2AParams,
    A2GParams,
    a2a_channel,
    a2g_gain_db,
    a2g_los_probability,
    a2g_mean_gain_db,
    elevation_deg,
    rician_pdf,
    sample_rician_amplitude,
)
