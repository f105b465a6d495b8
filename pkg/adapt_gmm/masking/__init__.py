from . import hypotheses
from . import masking
from . import transforms
