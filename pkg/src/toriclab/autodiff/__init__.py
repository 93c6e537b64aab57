"""Small reverse-mode autodiff engine with the layers the decoder networks use."""
from . import functional
from .gradcheck import check_gradients
from .layers import BatchNorm, Conv, ConvTranspose2d, Linear, Module, ModuleList, SelfAttention
from .optim import AdamW, StepLR
from .serialize import load_state, save_state
from .tensor import Parameter, Tensor, concat, grad_enabled, no_grad, relu, sigmoid, softmax

__all__ = [
    "functional", "check_gradients",
    "Module", "ModuleList", "Conv", "ConvTranspose2d", "BatchNorm", "Linear", "SelfAttention",
    "AdamW", "StepLR", "load_state", "save_state",
    "Tensor", "Parameter", "concat", "grad_enabled", "no_grad", "relu", "sigmoid", "softmax",
]
