from .physics import (
    CARBON,
    PROTON,
    SPECIES,
    ParticleState,
    Species,
    Trajectory,
    lorentz_acceleration,
    make_state,
    momentum_from_kinetic,
    propagate_track,
    stopping_power,
    velocity_m_per_s,
)
from .generate import (
    CLASS_NAMES,
    DistSpec,
    GenerationError,
    KinematicsRanges,
    NoiseSpec,
    PointCloudEvent,
    SimConfig,
    add_noise,
    digitize,
    generate_dataset,
    generate_event,
    generate_other,
    passes_acceptance,
    sample_kinematics,
)
