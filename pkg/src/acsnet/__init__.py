"""Adaptive-halting sequence transduction at desk scale.

An encoder-decoder model whose encoder-side halting layer accumulates
per-step confidence and emits one output symbol each time the running
sum crosses 1 - epsilon, giving online monotonic decoding in linear
time. Built on an in-package autodiff tape with compiled (Cython) or
pure-numpy kernels selected at import.
"""

from .kernels import available_backends, backend_name, use_backend

__version__ = "0.1.0"

__all__ = ["available_backends", "backend_name", "use_backend",
           "__version__"]
