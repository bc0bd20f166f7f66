from pairorder.nn import autograd, layers
from pairorder.nn.autograd import Tensor, no_grad

__all__ = ["autograd", "layers", "Tensor", "no_grad"]
