from . import defaults
from . import utilities
