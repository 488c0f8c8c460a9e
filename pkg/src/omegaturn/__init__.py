"""Two-wave turning gaits for limbless robots under quasi-static Coulomb drag."""

__version__ = "0.1.0"

from .chain import ChainGeometry, FeasibilitySpec  # noqa: E402
from .drag import BodyVelocity, FrictionModel, NonConvergence, solve_body_velocity  # noqa: E402
from .gaits import TwoWaveDesign, two_wave_rate, two_wave_shape  # noqa: E402
from .simulate import Trajectory, TurnMetrics, integrate_gait, turn_metrics  # noqa: E402

__all__ = [
    "BodyVelocity", "ChainGeometry", "FeasibilitySpec", "FrictionModel", "NonConvergence", "Trajectory",
    "TurnMetrics", "TwoWaveDesign", "integrate_gait", "solve_body_velocity", "turn_metrics",
    "two_wave_rate", "two_wave_shape",
]
