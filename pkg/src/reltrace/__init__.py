"""Heat-trace asymptotics for killed relativistic stable processes."""

from .errors import NumericalError, RelTraceError, ValidationError
from .params import ProcessParams

__version__ = "0.1.0"
__all__ = ["ProcessParams", "RelTraceError", "ValidationError", "NumericalError", "__version__"]
