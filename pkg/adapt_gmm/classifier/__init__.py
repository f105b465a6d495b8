from . import features
from . import models
