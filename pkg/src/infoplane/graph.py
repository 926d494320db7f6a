"""Layer DAGs: node descriptors, validated topologies, and topological
forward/backward evaluation with gradient summation at fan-out nodes."""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import layers
from .errors import GraphError, ShapeError

DENSE = "dense"
BATCHNORM = "batchnorm"
TANH = "tanh"
ADD = "add"
SOFTMAX_XENT = "softmax_xent"
KINDS = (DENSE, BATCHNORM, TANH, ADD, SOFTMAX_XENT)

# Reserved id for the network input; usable in Node.inputs but never as a node id.
INPUT_ID = "input"


@dataclass(frozen=True)
class Node:
    """One layer node: its kind, upstream node ids, and output width."""

    id: str
    kind: str
    inputs: tuple
    width: int


class NetworkTopology:
    """A validated DAG of layer nodes with exactly one softmax sink.

    `nodes` is exposed in a deterministic topological order. `mi_nodes`
    optionally names the (first, last) activation nodes whose ensembles the
    harness compares.
    """

    def __init__(self, nodes, input_width, mi_nodes=None):
        nodes = tuple(nodes)
        if input_width < 1:
            raise GraphError(f"input width must be >= 1, got {input_width}")
        by_id = {}
        for node in nodes:
            if node.id == INPUT_ID:
                raise GraphError(f"node id {INPUT_ID!r} is reserved for the network input")
            if node.id in by_id:
                raise GraphError(f"duplicate node id {node.id!r}")
            if node.kind not in KINDS:
                raise GraphError(f"node {node.id!r}: unknown kind {node.kind!r}")
            arity = 2 if node.kind == ADD else 1
            if len(node.inputs) != arity:
                raise GraphError(
                    f"node {node.id!r} ({node.kind}) takes {arity} input(s), got {len(node.inputs)}"
                )
            by_id[node.id] = node
        for node in nodes:
            for upstream in node.inputs:
                if upstream != INPUT_ID and upstream not in by_id:
                    raise GraphError(f"node {node.id!r} references unknown input {upstream!r}")

        self.nodes = _toposort(nodes, by_id)
        self.by_id = by_id
        self.input_width = int(input_width)
        self._check_widths()

        sinks = [n for n in self.nodes if n.kind == SOFTMAX_XENT]
        if len(sinks) != 1:
            raise GraphError(f"expected exactly one softmax sink, found {len(sinks)}")
        self.sink = sinks[0]
        self.logits_id = self.sink.inputs[0]
        self._check_reachability()

        if mi_nodes is not None:
            for node_id in mi_nodes:
                if node_id not in by_id:
                    raise GraphError(f"mi_nodes references unknown node {mi_nodes!r}")
        self.mi_nodes = tuple(mi_nodes) if mi_nodes is not None else None

    def width_of(self, node_id):
        if node_id == INPUT_ID:
            return self.input_width
        return self.by_id[node_id].width

    def _check_widths(self):
        for node in self.nodes:
            in_widths = [self.width_of(i) for i in node.inputs]
            if node.kind == ADD:
                if in_widths[0] != in_widths[1] or node.width != in_widths[0]:
                    raise GraphError(
                        f"add node {node.id!r} requires equal widths, got inputs "
                        f"{node.inputs[0]!r}:{in_widths[0]} and {node.inputs[1]!r}:{in_widths[1]} "
                        f"for declared width {node.width}"
                    )
            elif node.kind in (BATCHNORM, TANH, SOFTMAX_XENT):
                if node.width != in_widths[0]:
                    raise GraphError(
                        f"node {node.id!r} ({node.kind}) declares width {node.width} but its "
                        f"input {node.inputs[0]!r} has width {in_widths[0]}"
                    )
            # dense: any fan-in to node.width is valid

    def _check_reachability(self):
        # every node must feed the sink, otherwise backward has no gradient for it
        reached = {self.sink.id}
        frontier = deque([self.sink])
        while frontier:
            node = frontier.popleft()
            for upstream in node.inputs:
                if upstream != INPUT_ID and upstream not in reached:
                    reached.add(upstream)
                    frontier.append(self.by_id[upstream])
        orphans = [n.id for n in self.nodes if n.id not in reached]
        if orphans:
            raise GraphError(f"nodes not on any path to the softmax sink: {orphans}")


def _toposort(nodes, by_id):
    consumers = {node.id: [] for node in nodes}
    indegree = {}
    for node in nodes:
        real_inputs = [i for i in node.inputs if i != INPUT_ID]
        indegree[node.id] = len(real_inputs)
        for upstream in real_inputs:
            consumers[upstream].append(node.id)
    ready = deque(node.id for node in nodes if indegree[node.id] == 0)
    order = []
    while ready:
        node_id = ready.popleft()
        order.append(by_id[node_id])
        for consumer in consumers[node_id]:
            indegree[consumer] -= 1
            if indegree[consumer] == 0:
                ready.append(consumer)
    if len(order) != len(nodes):
        stuck = sorted(set(by_id) - {n.id for n in order})
        raise GraphError(f"graph contains a cycle through {stuck}")
    return tuple(order)


@dataclass
class ForwardTrace:
    """Per-node activations (plus batch-norm caches) from one forward pass."""

    mode: str
    activations: dict
    bn: dict = field(default_factory=dict)


def forward(net, params, x, mode=layers.EVAL, update_running=True):
    """Evaluate the graph in topological order.

    Returns (logits, trace) where logits is the activation feeding the
    softmax sink. Train mode caches what backward needs and, unless
    update_running is false, updates batch-norm running statistics in place.
    Node-level failures re-raise as GraphError naming the node.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_width:
        raise ShapeError(f"input shape {x.shape} does not match input width {net.input_width}")
    activations = {INPUT_ID: x}
    bn_traces = {}
    for node in net.nodes:
        if node.kind == SOFTMAX_XENT:
            continue
        try:
            p = params.get(node.id, {})
            if node.kind == DENSE:
                out = layers.dense_forward(activations[node.inputs[0]], p["w"], p["b"])
            elif node.kind == BATCHNORM:
                out, tr = layers.batchnorm_forward(
                    activations[node.inputs[0]], p["gamma"], p["beta"],
                    eps=p["eps"], momentum=p["momentum"], mode=mode,
                    running_mean=p["running_mean"], running_var=p["running_var"],
                    update_running=update_running,
                )
                if tr is not None:
                    bn_traces[node.id] = tr
            elif node.kind == TANH:
                out = layers.tanh_forward(activations[node.inputs[0]])
            elif node.kind == ADD:
                out = layers.add_forward(activations[node.inputs[0]], activations[node.inputs[1]])
            else:  # pragma: no cover - kinds validated at construction
                raise GraphError(f"unhandled kind {node.kind!r}")
        except (ShapeError, ValueError, KeyError) as exc:
            raise GraphError(f"node {node.id!r} ({node.kind}): {exc}") from exc
        activations[node.id] = out
    return activations[net.logits_id], ForwardTrace(mode, activations, bn_traces)


def backward(net, params, trace, labels):
    """Reverse-mode gradients of the mean cross-entropy loss.

    Walks the trace in reverse topological order; where a node feeds several
    consumers its gradient is the sum of their contributions. Returns a
    store shaped like the trainable parameters: {node_id: {name: grad}}.
    """
    if trace.mode != layers.TRAIN:
        raise GraphError(f"backward requires a train-mode trace, got mode {trace.mode!r}")
    _, dlogits = layers.softmax_cross_entropy(trace.activations[net.logits_id], labels)

    grad_out = {net.logits_id: dlogits}

    def accumulate(node_id, grad):
        if node_id == INPUT_ID:
            return
        grad_out[node_id] = grad_out[node_id] + grad if node_id in grad_out else grad

    grads = {}
    for node in reversed(net.nodes):
        if node.kind == SOFTMAX_XENT:
            continue
        g = grad_out.pop(node.id)
        if node.kind == DENSE:
            x_in = trace.activations[node.inputs[0]]
            grads[node.id] = {"w": x_in.T @ g, "b": g.sum(axis=0)}
            if node.inputs[0] != INPUT_ID:
                # the network input needs no gradient; skip the largest GEMM
                accumulate(node.inputs[0], g @ params[node.id]["w"].T)
        elif node.kind == BATCHNORM:
            dx, dgamma, dbeta = layers.batchnorm_backward(trace.bn[node.id], g)
            grads[node.id] = {"gamma": dgamma, "beta": dbeta}
            accumulate(node.inputs[0], dx)
        elif node.kind == TANH:
            dx = layers.tanh_backward(trace.activations[node.id], g)
            accumulate(node.inputs[0], dx)
        elif node.kind == ADD:
            da, db_branch = layers.add_backward(g)
            accumulate(node.inputs[0], da)
            accumulate(node.inputs[1], db_branch)
    return grads
