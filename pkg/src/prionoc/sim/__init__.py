from .simulator import (SimConfig, SimReport, littles_law_check, measure_interarrival_cv, run)

__all__ = ["SimConfig", "SimReport", "run", "measure_interarrival_cv", "littles_law_check"]
