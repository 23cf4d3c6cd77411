"""
Tensör çekirdeği: ters mod otomatik türev
"""

from .tensor import (
    GradientMap,
    Tape,
    Tensor,
    backward,
    bilinear_resize,
    concat,
    conv2d,
    l2_normalize,
    log_softmax,
    matmul,
    relu,
    take,
)
from .gradcheck import grad_check
from .serialization import load_tensor, save_tensor
