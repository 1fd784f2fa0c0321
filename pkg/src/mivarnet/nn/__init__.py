"""Reverse-mode autodiff and the layers needed to train the cascade."""

from .layers import Conv2d, Module, activation, avgpool2, conv2d, resample, upsample_nearest2
from .optim import Adam, adam_step
from .ssim import SsimParams, ssim, ssim_loss
from .tensor import Tensor, as_tensor

__all__ = [
    "Adam",
    "Conv2d",
    "Module",
    "SsimParams",
    "Tensor",
    "activation",
    "adam_step",
    "as_tensor",
    "avgpool2",
    "conv2d",
    "resample",
    "ssim",
    "ssim_loss",
    "upsample_nearest2",
]
