"""Episodic few-shot action recognition over multimodal decoder token archives."""

from .tensor import Tensor, backward, no_grad, softmax_last_axis

__all__ = ["Tensor", "backward", "no_grad", "softmax_last_axis"]
__version__ = "0.1.0"
