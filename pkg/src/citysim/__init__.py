"""City-scale human-behavior simulation engine.

Agents carry personas, needs, beliefs, goals, and memories; every open-ended
judgment is delegated to a pluggable decision oracle (deterministic stub,
HTTP-backed model, or recorded replay), so the mathematical core stays
deterministic and benchmarkable.
"""

__version__ = "0.1.0"

from citysim.errors import CitySimError

__all__ = ["CitySimError", "__version__"]
