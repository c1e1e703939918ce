from ._imtree import *  # noqa: F401,F403
from ._imtree import CapacityError, SingularMatrixError

__version__ = "0.1.0"
