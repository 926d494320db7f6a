"""Central-difference gradient checking of whole networks, shared by the
graph tests and the acceptance suite."""

import numpy as np

from infoplane.graph import backward, forward
from infoplane.layers import TRAIN, softmax_cross_entropy
from infoplane.optim import trainable_items


def network_loss(net, params, x, labels):
    logits, _ = forward(net, params, x, mode=TRAIN, update_running=False)
    return softmax_cross_entropy(logits, labels)[0]


def max_grad_rel_error(net, params, x, labels, h=1e-5):
    """Worst relative error between reverse-mode and central-difference
    gradients over every trainable scalar."""
    logits, trace = forward(net, params, x, mode=TRAIN, update_running=False)
    grads = backward(net, params, trace, labels)
    worst = 0.0
    for node_id, name, p in trainable_items(params):
        analytic = grads[node_id][name]
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up = network_loss(net, params, x, labels)
            p[idx] = orig - h
            down = network_loss(net, params, x, labels)
            p[idx] = orig
            fd = (up - down) / (2.0 * h)
            a = analytic[idx]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
            worst = max(worst, rel)
    return worst
