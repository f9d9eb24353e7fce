"""Link-level simulation of single- and multi-carrier waveforms for THz links."""

__version__ = "0.1.0"

from .core import (ComplexSignal, ConfigError, Domain, FrameGrid, InputShapeError,
                   LatticeSpec, QamConstellation, RandomStream, SingularityError, ThzWaveError,
                   UndefinedInputError)
from .waveforms import Mapping, Scheme, WaveformParams, modulate

__all__ = [
    "ComplexSignal", "ConfigError", "Domain", "FrameGrid", "InputShapeError", "LatticeSpec",
    "Mapping", "QamConstellation", "RandomStream", "Scheme", "SingularityError",
    "ThzWaveError", "UndefinedInputError", "WaveformParams", "modulate", "__version__",
]
