from . import configuration
from . import masking
from . import classifier
from . import baselines
from . import engine
from . import workmodel
from . import simlab
from . import cli
