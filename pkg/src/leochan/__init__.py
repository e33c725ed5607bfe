"""Deterministic LEO satellite-to-ground multipath channel simulator.

Pipeline: two-line elements -> analytic orbit propagation (TEME) ->
inertial/Earth-fixed/local frame chain -> planar-wavefront ray bounce
through a procedural city -> per-path power, delay and Doppler over a
visibility pass.
"""

from .states import Frame, StateVector
from .tle import Tle, parse_tle, tle_checksum

__all__ = ["Frame", "StateVector", "Tle", "parse_tle", "tle_checksum"]

__version__ = "0.1.0"
