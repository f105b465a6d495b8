from . import fdr
