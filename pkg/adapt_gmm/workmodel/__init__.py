from . import data
from . import gmm
from . import selection
from . import policy
