from . import utilities
from . import scenarios
from . import experiments
from . import verifiers
