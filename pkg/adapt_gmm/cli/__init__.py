from . import io
from . import config
from . import main
