from .errors import ApplicabilityError, ConfigurationError, NumericalError, OracleError, SpeedLimitError
from .config import SolverConfig
from .execution import PipelineResult, execute_pipeline
