"""Model-based planning toolkit: learned forward models, gradient-based
planning over relaxed discrete actions, MCTS baseline, and policy
distillation."""

__version__ = "0.1.0"

from .autodiff import Tensor

__all__ = ["Tensor", "__version__"]
