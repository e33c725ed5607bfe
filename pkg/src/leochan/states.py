"""Frame-tagged position/velocity states shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum

import numpy as np


class Frame(Enum):
    TEME = "TEME"    # true equator, mean equinox (propagator output)
    ECI = "ECI"      # J2000 mean equator/equinox, non-rotating
    ECEF = "ECEF"    # Earth-fixed, rotating
    LOCAL = "LOCAL"  # scene frame, +z = site zenith, origin at city anchor


class FrameMismatch(ValueError):
    """A transform was fed a state tagged with the wrong frame."""


@dataclass(frozen=True)
class StateVector:
    """Position (km) and velocity (km/s) in a named frame at a UTC instant."""

    frame: Frame
    t: datetime
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity",
                           np.asarray(self.velocity, dtype=float))

    def require(self, frame: Frame) -> None:
        if self.frame is not frame:
            raise FrameMismatch(
                f"expected a {frame.value} state, got {self.frame.value}")
