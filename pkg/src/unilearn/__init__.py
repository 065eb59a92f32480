"""Uniform-norm learning of ReLU networks: bounds, witnesses and attacks."""
from .kernels import BACKEND
from .nn import INF, GradientBatch, Mlp, NetworkClass, backprop_grad, coefficient_norm, forward, in_class
from .hats import HatSpec, hat_eval, hat_lp_bounds, hat_lp_norm_numeric, lambda_eval
from .witness import construct, construct_big_q, construct_small_q, verify_construction

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "INF",
    "GradientBatch",
    "HatSpec",
    "Mlp",
    "NetworkClass",
    "backprop_grad",
    "coefficient_norm",
    "construct",
    "construct_big_q",
    "construct_small_q",
    "forward",
    "hat_eval",
    "hat_lp_bounds",
    "hat_lp_norm_numeric",
    "in_class",
    "lambda_eval",
    "verify_construction",
]
