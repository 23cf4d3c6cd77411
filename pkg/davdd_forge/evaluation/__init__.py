"""
Alt görev değerlendirme protokolü ve ablasyon
"""

from .ablation import ABLATION_ROWS, ablation_suite
from .protocol import EvalReport, evaluate, linear_probe_accuracy, run_protocol, train_downstream
