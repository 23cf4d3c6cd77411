"""
Ayrıştırılmış Ses-Görüntü Veri Kümesi Damıtma Motoru
"""

__version__ = '0.1.0'

# Alt modülleri kolayca import edilebilir yap
from . import core
from . import data
from . import models
from . import distill
from . import evaluation
