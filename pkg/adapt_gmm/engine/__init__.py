from . import policies
from . import oracle
from . import engine
