"""Builders for the four dense architectures.

Every network is a stack of depth hidden blocks (dense -> batch norm ->
tanh) with the first and last hidden layers twice the interior width,
followed by a dense layer into a 10-way softmax. "shortcut" adds the first
and last hidden activations together and feeds the sum to the output layer;
"residual" sums the activations of alternating interior layers of equal
width; "shortcut-residual" applies both.
"""

from dataclasses import dataclass

from .errors import ConfigError
from .graph import ADD, BATCHNORM, DENSE, INPUT_ID, SOFTMAX_XENT, TANH, NetworkTopology, Node

MLP = "mlp"
SHORTCUT = "shortcut"
RESIDUAL = "residual"
SHORTCUT_RESIDUAL = "shortcut-residual"
ARCHITECTURES = (MLP, SHORTCUT, RESIDUAL, SHORTCUT_RESIDUAL)

_SHORTCUT_KINDS = (SHORTCUT, SHORTCUT_RESIDUAL)
_RESIDUAL_KINDS = (RESIDUAL, SHORTCUT_RESIDUAL)


@dataclass(frozen=True)
class ArchitectureSpec:
    """Architecture kind plus the sizes needed to build it.

    width is the interior hidden width W; the first and last hidden layers
    get 2W. depth counts hidden layers and must be >= 2 (>= 3 for residual
    kinds).
    """

    kind: str
    width: int
    depth: int
    input_width: int = 784
    classes: int = 10

    def __post_init__(self):
        if self.kind not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.kind!r}, expected one of {ARCHITECTURES}")
        if self.width < 1:
            raise ConfigError(f"width must be >= 1, got {self.width}")
        if self.depth < 2:
            raise ConfigError(f"depth must be >= 2, got {self.depth}")
        if self.kind in _RESIDUAL_KINDS and self.depth < 3:
            raise ConfigError(
                f"{self.kind!r} needs depth >= 3 so interior layers exist to pair, got {self.depth}"
            )
        if self.input_width < 1 or self.classes < 2:
            raise ConfigError(
                f"need input_width >= 1 and classes >= 2, got {self.input_width}/{self.classes}"
            )


def hidden_widths(spec):
    """Widths of the hidden layers: [2W, W, ..., W, 2W]."""
    twice = 2 * spec.width
    if spec.depth == 2:
        return [twice, twice]
    return [twice] + [spec.width] * (spec.depth - 2) + [twice]


def residual_pairs(spec):
    """Interior layer index pairs (i, i+2) whose activations are summed.

    Pairing starts at the second hidden layer and steps by two; both members
    must be interior (width W), so the double-width end layers never pair.
    The sum feeds hidden layer i+3. Depths 3 and 4 admit no pair and the
    residual graph degenerates to the plain stack.
    """
    pairs = []
    i = 2
    while i + 2 <= spec.depth - 1:
        pairs.append((i, i + 2))
        i += 2
    return pairs


def build(spec):
    """Construct the validated topology for an ArchitectureSpec.

    Node ids follow the layer index: dense<j>, bn<j>, act<j> for hidden
    layer j, add<i>_<i+2> for residual sums, shortcut_add for the
    first/last sum, logits for the output dense, loss for the sink.
    mi_nodes names (first hidden activation, signal entering the output
    dense): the two ensembles whose mutual information the harness tracks.
    """
    widths = hidden_widths(spec)
    receives_sum = {}
    if spec.kind in _RESIDUAL_KINDS:
        for i, j in residual_pairs(spec):
            receives_sum[i + 3] = f"add{i}_{j}"

    nodes = []
    for layer in range(1, spec.depth + 1):
        w = widths[layer - 1]
        if layer == 1:
            source = INPUT_ID
        else:
            source = receives_sum.get(layer, f"act{layer - 1}")
        nodes.append(Node(f"dense{layer}", DENSE, (source,), w))
        nodes.append(Node(f"bn{layer}", BATCHNORM, (f"dense{layer}",), w))
        nodes.append(Node(f"act{layer}", TANH, (f"bn{layer}",), w))

    if spec.kind in _RESIDUAL_KINDS:
        for i, j in residual_pairs(spec):
            nodes.append(Node(f"add{i}_{j}", ADD, (f"act{i}", f"act{j}"), widths[i - 1]))

    last_signal = f"act{spec.depth}"
    if spec.kind in _SHORTCUT_KINDS:
        nodes.append(Node("shortcut_add", ADD, ("act1", last_signal), widths[0]))
        last_signal = "shortcut_add"

    nodes.append(Node("logits", DENSE, (last_signal,), spec.classes))
    nodes.append(Node("loss", SOFTMAX_XENT, ("logits",), spec.classes))
    return NetworkTopology(nodes, input_width=spec.input_width, mi_nodes=("act1", last_signal))


def parameter_count(spec):
    """Total trainable scalars: dense weights and biases plus batch-norm
    scale/shift. Add nodes contribute nothing."""
    net = build(spec)
    total = 0
    for node in net.nodes:
        if node.kind == DENSE:
            fan_in = net.width_of(node.inputs[0])
            total += fan_in * node.width + node.width
        elif node.kind == BATCHNORM:
            total += 2 * node.width
    return total
