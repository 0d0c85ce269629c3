from .core import process
from .core import transform as convert
from .sub.tools import *

__version__ = "1.0"
