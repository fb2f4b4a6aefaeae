"""Python bindings for the binarized early-exit encoder primitives."""

from ._core import (
    binarize,
    binarize_grad,
    clip,
    entropy,
    exit_decision,
    packed_matmul,
    position_encoding,
    sign,
    softmax,
)

__all__ = [
    "binarize",
    "binarize_grad",
    "clip",
    "entropy",
    "exit_decision",
    "packed_matmul",
    "position_encoding",
    "sign",
    "softmax",
]
