"""From-scratch tensor layers, U-Net assembly, loss and optimizer.

Activations are plain numpy arrays in (batch, channels, height, width)
order, float32 for training; every layer also accepts float64 so gradient
checks can run against central finite differences at full precision.
"""

from .layers import (batchnorm_backward, batchnorm_forward, conv2d_backward,
                     conv2d_forward, maxpool2_backward, maxpool2_forward,
                     msle_loss, relu_backward, relu_forward, upconv_backward,
                     upconv_forward, upsample2_adjoint, upsample2_forward)
from .unet import (UNetConfig, UNetParams, init_params, param_count,
                   unet_backward, unet_forward)
from .optim import TrainState, adam_step, init_train_state
from .checkpoint import load_params, save_params

__all__ = [
    "batchnorm_backward", "batchnorm_forward", "conv2d_backward", "conv2d_forward",
    "maxpool2_backward", "maxpool2_forward", "msle_loss", "relu_backward",
    "relu_forward", "upconv_backward", "upconv_forward", "upsample2_adjoint",
    "upsample2_forward", "UNetConfig", "UNetParams", "init_params", "param_count",
    "unet_backward", "unet_forward", "TrainState", "adam_step", "init_train_state",
    "load_params", "save_params",
]
