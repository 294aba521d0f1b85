"""Trainable blends of discrete transforms for feature extraction and token
mixing, plus a statevector model of their quantum counterpart."""

from .core import (
    GTParams,
    blend_kernel,
    gt_forward_1d,
    gt_forward_2d,
    gt_grad_input,
    gt_grad_params,
    make_nlp_params,
    make_vision_params,
)
from .kernels import KernelMatrix, TransformKind, apply_kernel, build_kernel, kernel_adjoint

__all__ = [
    "GTParams",
    "KernelMatrix",
    "TransformKind",
    "apply_kernel",
    "blend_kernel",
    "build_kernel",
    "gt_forward_1d",
    "gt_forward_2d",
    "gt_grad_input",
    "gt_grad_params",
    "kernel_adjoint",
    "make_nlp_params",
    "make_vision_params",
]
