"""Glorot-normal initialization and the RMSprop update rule."""

import math

import numpy as np

from .errors import DivergenceError, ShapeError
from .graph import BATCHNORM, DENSE, INPUT_ID
from .numerics import normal_sample

# Trainable parameter names per node kind; batch-norm running statistics are
# state, not parameters, and are excluded from updates and gradient checks.
TRAINABLE = {DENSE: ("w", "b"), BATCHNORM: ("gamma", "beta")}


def glorot_normal_init(rng, fan_in, fan_out):
    """Weight matrix with entries ~ Normal(0, 2 / (fan_in + fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"fan_in and fan_out must be >= 1, got {fan_in}/{fan_out}")
    stddev = math.sqrt(2.0 / (fan_in + fan_out))
    return normal_sample(rng, 0.0, stddev, (fan_in, fan_out))


def init_params(net, rng, bn_eps=1e-5, bn_momentum=0.99):
    """Fresh parameter store for a topology.

    Dense: Glorot-normal weights, zero biases. Batch norm: gamma 1, beta 0,
    running mean 0, running variance 1, with eps/momentum recorded per node.
    Draws happen in topological node order, so one seed gives the same
    parameters to every architecture sharing the same layer stack.
    """
    params = {}
    for node in net.nodes:
        if node.kind == DENSE:
            fan_in = net.width_of(node.inputs[0])
            params[node.id] = {
                "w": glorot_normal_init(rng, fan_in, node.width),
                "b": np.zeros(node.width),
            }
        elif node.kind == BATCHNORM:
            params[node.id] = {
                "gamma": np.ones(node.width),
                "beta": np.zeros(node.width),
                "running_mean": np.zeros(node.width),
                "running_var": np.ones(node.width),
                "eps": float(bn_eps),
                "momentum": float(bn_momentum),
            }
    return params


def trainable_items(params):
    """Yield (node_id, name, array) for every trainable tensor, in the
    deterministic store order."""
    for node_id, entry in params.items():
        if "w" in entry:
            names = TRAINABLE[DENSE]
        elif "gamma" in entry:
            names = TRAINABLE[BATCHNORM]
        else:
            continue
        for name in names:
            yield node_id, name, entry[name]


class RmspropState:
    """Squared-gradient accumulators mirroring the trainable parameters."""

    def __init__(self, params, lr=1e-3, rho=0.9, eps=1e-8):
        if not 0.0 <= rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {rho}")
        if lr <= 0 or eps <= 0:
            raise ValueError(f"lr and eps must be positive, got {lr}/{eps}")
        self.lr = float(lr)
        self.rho = float(rho)
        self.eps = float(eps)
        self.step_count = 0
        self.square_avg = {}
        for node_id, name, p in trainable_items(params):
            self.square_avg.setdefault(node_id, {})[name] = np.zeros_like(p)


def rmsprop_step(params, grads, state):
    """One in-place RMSprop update over every trainable parameter.

    s <- rho * s + (1 - rho) * g^2, then p <- p - lr * g / (sqrt(s) + eps),
    elementwise. Any non-finite gradient aborts with DivergenceError before
    touching the parameters.
    """
    for node_id, name, p in trainable_items(params):
        g = grads[node_id][name]
        if g.shape != p.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter {node_id}.{name} {p.shape}"
            )
        if not np.isfinite(g).all():
            raise DivergenceError(f"non-finite gradient for {node_id}.{name}")
    for node_id, name, p in trainable_items(params):
        g = grads[node_id][name]
        s = state.square_avg[node_id][name]
        s *= state.rho
        s += (1.0 - state.rho) * g * g
        p -= state.lr * g / (np.sqrt(s) + state.eps)
    state.step_count += 1
