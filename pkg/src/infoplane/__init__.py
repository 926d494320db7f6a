"""Dense-net MNIST training with information-plane trajectory measurement."""

from ._accel import DEFAULT_BACKEND, NUMBA_AVAILABLE
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    GraphError,
    InfoplaneError,
    ShapeError,
)
from .graph import ForwardTrace, NetworkTopology, Node, backward, forward
from .harness import (
    CSV_HEADER,
    ExperimentConfig,
    TrajectoryRecord,
    capture_activations,
    emit_csv,
    emit_svg_infoplane,
    parse_csv,
    run_experiment,
    subsample_indices,
    sweep,
    trajectory_diverged,
)
from .knn import chebyshev_knn, ksg_counts, ksg_counts_numpy
from .layers import softmax, softmax_cross_entropy
from .mi import MIEstimate, ReductionReport, jitter, ksg_mi, reduction_report
from .mnist import Dataset, fetch, load_dataset, load_idx_images, load_idx_labels, test_error
from .numerics import SeededRng, digamma, matmul, normal_sample, uniform_sample
from .optim import RmspropState, glorot_normal_init, init_params, rmsprop_step
from .topology import (
    ARCHITECTURES,
    ArchitectureSpec,
    build,
    hidden_widths,
    parameter_count,
    residual_pairs,
)

__version__ = "0.1.0"
