"""Experiment orchestration.

One experiment = build a topology, initialize from the run seed, then per
epoch apply exactly one full-batch forward/backward/RMSprop update and log
(train loss, test error, MI between the first- and last-layer activation
ensembles). Epoch 0 is measured before any update so initialization claims
are testable. Runs are deterministic per (config, seed): the CSV bytes are
reproducible except for the wall_ms timing column.
"""

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from multiprocessing import get_context
from xml.sax.saxutils import escape

import numpy as np
from filelock import FileLock

from .errors import ConfigError, DivergenceError, GraphError
from .graph import backward, forward
from .layers import EVAL, TRAIN, softmax_cross_entropy
from .mi import jitter, ksg_mi
from .mnist import load_dataset, test_error
from .numerics import SeededRng
from .optim import RmspropState, init_params, rmsprop_step
from .topology import ARCHITECTURES, ArchitectureSpec, build


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; serializes losslessly to JSON."""

    arch: str = "mlp"
    width: int = 32
    depth: int = 4
    epochs: int = 500
    seed: int = 0
    lr: float = 1e-3
    rho: float = 0.9
    opt_eps: float = 1e-8
    bn_eps: float = 1e-5
    bn_momentum: float = 0.99
    k: int = 3
    mi_subsample: int = 2000
    jitter_amplitude: float = 1e-10
    data_dir: str = "data"
    out: str = ""

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch!r}, expected one of {ARCHITECTURES}")
        if self.width < 1 or self.depth < 2:
            raise ConfigError(f"need width >= 1 and depth >= 2, got {self.width}/{self.depth}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0 or not 0 <= self.rho < 1 or self.opt_eps <= 0:
            raise ConfigError(
                f"invalid optimizer settings lr={self.lr} rho={self.rho} eps={self.opt_eps}"
            )
        if self.bn_eps <= 0 or not 0 <= self.bn_momentum < 1:
            raise ConfigError(
                f"invalid batch-norm settings eps={self.bn_eps} momentum={self.bn_momentum}"
            )
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.mi_subsample < 0:
            raise ConfigError(f"mi_subsample must be >= 0 (0 = full ensemble), got {self.mi_subsample}")
        if self.jitter_amplitude < 0:
            raise ConfigError(f"jitter_amplitude must be >= 0, got {self.jitter_amplitude}")

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(values)

    def run_key(self):
        """Stable hash of the experiment-defining fields.

        Paths (data_dir, out) are excluded so the key matches across
        machines.
        """
        payload = asdict(self)
        payload.pop("data_dir")
        payload.pop("out")
        canonical = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    def label(self):
        return f"{self.arch} w{self.width} d{self.depth} s{self.seed}"


@dataclass(frozen=True)
class TrajectoryRecord:
    """One epoch's measurements; epoch 0 is the pre-training state."""

    epoch: int
    train_loss: float
    test_error: float
    mi_nats: float
    mi_bits: float
    wall_ms: float


CSV_HEADER = "epoch,train_loss,test_error,mi_nats,mi_bits,wall_ms"


def capture_activations(net, params, x, node_ids):
    """Eval-mode activations of the named nodes for the given input rows."""
    for node_id in node_ids:
        if node_id not in net.by_id:
            raise GraphError(f"unknown node id {node_id!r}")
    _, trace = forward(net, params, x, mode=EVAL)
    return {node_id: trace.activations[node_id] for node_id in node_ids}


def _measure(net, params, test_set, mi_indices, config, jitter_rng):
    """Eval-mode test error plus the MI estimate between the two mi_nodes
    ensembles on the subsampled validation rows.

    Raises DivergenceError when the network no longer produces finite
    activations (an overflowed update can leave params finite yet blow up
    the forward pass)."""
    logits, trace = forward(net, params, test_set.images, mode=EVAL)
    if not np.isfinite(logits).all():
        raise DivergenceError("non-finite logits during evaluation")
    err = test_error(logits, test_set.labels)
    first_id, last_id = net.mi_nodes
    ensemble_x = trace.activations[first_id][mi_indices]
    ensemble_y = trace.activations[last_id][mi_indices]
    if not (np.isfinite(ensemble_x).all() and np.isfinite(ensemble_y).all()):
        raise DivergenceError("non-finite activations at the MI nodes")
    ensemble_x = jitter(ensemble_x, jitter_rng, config.jitter_amplitude)
    ensemble_y = jitter(ensemble_y, jitter_rng, config.jitter_amplitude)
    estimate = ksg_mi(ensemble_x, ensemble_y, k=config.k)
    return err, estimate


def subsample_indices(rng, n, size):
    """Sorted distinct row indices; size 0 or >= n selects everything."""
    if size and 0 < size < n:
        return np.sort(rng.generator.choice(n, size=size, replace=False))
    return np.arange(n)


def run_experiment(config, data=None):
    """Run one experiment and return its trajectory.

    `data` may inject (train, test) Datasets; otherwise both are loaded from
    config.data_dir. The MI subsample rows are drawn once per run, so the MI
    trend is never resampling noise. On divergence (non-finite loss or
    gradient) the trajectory is truncated with a terminal marker row whose
    test_error and MI are NaN.
    """
    if data is not None:
        train_set, test_set = data
    else:
        train_set = load_dataset(config.data_dir, "train")
        test_set = load_dataset(config.data_dir, "test")

    spec = ArchitectureSpec(
        kind=config.arch,
        width=config.width,
        depth=config.depth,
        input_width=train_set.images.shape[1],
    )
    net = build(spec)
    init_rng = SeededRng(config.seed, stream=0)
    subsample_rng = SeededRng(config.seed, stream=1)
    jitter_rng = SeededRng(config.seed, stream=2)

    params = init_params(net, init_rng, bn_eps=config.bn_eps, bn_momentum=config.bn_momentum)
    state = RmspropState(params, lr=config.lr, rho=config.rho, eps=config.opt_eps)
    mi_indices = subsample_indices(subsample_rng, len(test_set), config.mi_subsample)

    records = []

    start = time.perf_counter()
    logits, _ = forward(net, params, train_set.images, mode=TRAIN, update_running=False)
    loss, _ = softmax_cross_entropy(logits, train_set.labels)
    err, estimate = _measure(net, params, test_set, mi_indices, config, jitter_rng)
    records.append(TrajectoryRecord(
        epoch=0, train_loss=loss, test_error=err,
        mi_nats=estimate.nats, mi_bits=estimate.bits,
        wall_ms=(time.perf_counter() - start) * 1e3,
    ))

    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        logits, trace = forward(net, params, train_set.images, mode=TRAIN)
        loss, _ = softmax_cross_entropy(logits, train_set.labels)
        if not np.isfinite(loss):
            records.append(_divergence_marker(epoch, loss, start))
            break
        grads = backward(net, params, trace, train_set.labels)
        del trace
        try:
            rmsprop_step(params, grads, state)
            err, estimate = _measure(net, params, test_set, mi_indices, config, jitter_rng)
        except DivergenceError:
            records.append(_divergence_marker(epoch, loss, start))
            break
        records.append(TrajectoryRecord(
            epoch=epoch, train_loss=loss, test_error=err,
            mi_nats=estimate.nats, mi_bits=estimate.bits,
            wall_ms=(time.perf_counter() - start) * 1e3,
        ))
    return records


def _divergence_marker(epoch, loss, start):
    nan = float("nan")
    return TrajectoryRecord(
        epoch=epoch, train_loss=float(loss), test_error=nan,
        mi_nats=nan, mi_bits=nan, wall_ms=(time.perf_counter() - start) * 1e3,
    )


def trajectory_diverged(records):
    """True when the trajectory ends in a divergence marker row."""
    return bool(records) and not np.isfinite(records[-1].mi_nats)


def _format_float(value):
    # repr() is the shortest string that round-trips the double exactly
    return repr(float(value))


def emit_csv(records, path):
    """Write a trajectory as CSV with the fixed header and lossless floats."""
    if not records:
        raise ValueError("cannot emit an empty trajectory")
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            str(r.epoch),
            _format_float(r.train_loss),
            _format_float(r.test_error),
            _format_float(r.mi_nats),
            _format_float(r.mi_bits),
            _format_float(r.wall_ms),
        ]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def parse_csv(path):
    """Inverse of emit_csv."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: expected header {CSV_HEADER!r}")
    records = []
    for line in lines[1:]:
        epoch, loss, err, nats, bits, wall = line.split(",")
        records.append(TrajectoryRecord(
            epoch=int(epoch), train_loss=float(loss), test_error=float(err),
            mi_nats=float(nats), mi_bits=float(bits), wall_ms=float(wall),
        ))
    return records


_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#17becf", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
)


def _ticks(lo, hi, target=5):
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    magnitude = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * magnitude
        if raw <= step:
            break
    first = np.ceil(lo / step) * step
    values = []
    v = first
    while v <= hi + 1e-12 * step:
        values.append(float(v))
        v += step
    return values or [lo]


def emit_svg_infoplane(trajectories, path, title=None):
    """Scatter of (MI nats, test error), one marker per epoch record.

    `trajectories` maps run labels to record lists. Points are joined in
    epoch order per run with an arrowhead on the final segment showing the
    direction of training; rows with non-finite values (divergence markers)
    are dropped.
    """
    series = []
    for label, records in trajectories.items():
        points = [
            (r.mi_nats, r.test_error)
            for r in records
            if np.isfinite(r.mi_nats) and np.isfinite(r.test_error)
        ]
        if points:
            series.append((label, points))
    if not series:
        raise ValueError("no finite records to plot")

    all_x = [p[0] for _, pts in series for p in pts]
    all_y = [p[1] for _, pts in series for p in pts]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    x_pad = (x_hi - x_lo) * 0.06 or max(abs(x_lo), 1.0) * 0.05
    y_pad = (y_hi - y_lo) * 0.06 or max(abs(y_lo), 1.0) * 0.05
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    width, height = 880, 620
    left, right, top, bottom = 80, 230, 50, 70
    plot_w, plot_h = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return top + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<defs>',
    ]
    for i, _ in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(
            f'<marker id="arrow{i}" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="7" '
            f'markerHeight="7" orient="auto-start-reverse">'
            f'<path d="M 0 0 L 10 5 L 0 10 z" fill="{color}"/></marker>'
        )
    parts.append('</defs>')
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    parts.append(
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333" stroke-width="1"/>'
    )

    for tick in _ticks(x_lo, x_hi):
        px = sx(tick)
        parts.append(f'<line x1="{px:.2f}" y1="{top + plot_h}" x2="{px:.2f}" '
                     f'y2="{top + plot_h + 6}" stroke="#333"/>')
        parts.append(f'<text x="{px:.2f}" y="{top + plot_h + 22}" font-size="12" '
                     f'text-anchor="middle" fill="#333">{tick:g}</text>')
    for tick in _ticks(y_lo, y_hi):
        py = sy(tick)
        parts.append(f'<line x1="{left - 6}" y1="{py:.2f}" x2="{left}" y2="{py:.2f}" stroke="#333"/>')
        parts.append(f'<text x="{left - 10}" y="{py + 4:.2f}" font-size="12" '
                     f'text-anchor="end" fill="#333">{tick:g}</text>')

    parts.append(f'<text x="{left + plot_w / 2}" y="{height - 20}" font-size="14" '
                 f'text-anchor="middle" fill="#111">mutual information (nats)</text>')
    parts.append(f'<text x="24" y="{top + plot_h / 2}" font-size="14" text-anchor="middle" '
                 f'fill="#111" transform="rotate(-90 24 {top + plot_h / 2})">test error</text>')
    if title:
        parts.append(f'<text x="{left + plot_w / 2}" y="28" font-size="15" '
                     f'text-anchor="middle" fill="#111">{escape(title)}</text>')

    for i, (label, points) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = [(sx(x), sy(y)) for x, y in points]
        if len(coords) > 1:
            joined = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords[:-1])
            parts.append(f'<polyline points="{joined}" fill="none" stroke="{color}" '
                         f'stroke-width="1" opacity="0.5"/>')
            (x1, y1), (x2, y2) = coords[-2], coords[-1]
            parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                         f'stroke="{color}" stroke-width="1.4" opacity="0.9" '
                         f'marker-end="url(#arrow{i})"/>')
        for x, y in coords:
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}" opacity="0.75"/>')
        ly = top + 16 + 18 * i
        lx = left + plot_w + 18
        parts.append(f'<rect x="{lx}" y="{ly - 9}" width="12" height="12" fill="{color}"/>')
        parts.append(f'<text x="{lx + 18}" y="{ly + 2}" font-size="12" fill="#111">'
                     f'{escape(str(label))}</text>')

    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def _sweep_worker(config_json, csv_path):
    config = ExperimentConfig.from_json(config_json)
    records = run_experiment(config)
    emit_csv(records, csv_path)
    return "diverged" if trajectory_diverged(records) else "done"


def _load_manifest(manifest_path):
    if os.path.exists(manifest_path):
        with open(manifest_path) as f:
            return json.load(f)
    return {}


def _store_manifest(manifest_path, manifest):
    tmp = manifest_path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    os.replace(tmp, manifest_path)


def sweep(configs, out_dir, parallelism=1):
    """Run a batch of experiments into out_dir with a resumable manifest.

    The manifest maps each config's run_key to its CSV and status; entries
    already marked done/diverged (with the CSV present) are skipped, so a
    killed sweep resumes where it stopped. Per-run failures are recorded and
    the sweep continues. Manifest updates happen under an exclusive file
    lock. Returns the manifest dict.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, "manifest.json")
    lock = FileLock(manifest_path + ".lock")

    unique = {}
    for config in configs:
        unique.setdefault(config.run_key(), config)

    with lock:
        manifest = _load_manifest(manifest_path)
    todo = []
    for key, config in unique.items():
        entry = manifest.get(key)
        if entry and entry.get("status") in ("done", "diverged"):
            if os.path.exists(os.path.join(out_dir, entry["csv"])):
                continue
        todo.append((key, config))

    def record(key, config, status, error=None):
        with lock:
            manifest = _load_manifest(manifest_path)
            entry = {"status": status, "csv": f"run_{key}.csv", "config": asdict(config)}
            if error:
                entry["error"] = error
            manifest[key] = entry
            _store_manifest(manifest_path, manifest)
        return manifest

    manifest = _load_manifest(manifest_path)
    if parallelism <= 1:
        for key, config in todo:
            csv_path = os.path.join(out_dir, f"run_{key}.csv")
            try:
                status = _sweep_worker(config.to_json(), csv_path)
                manifest = record(key, config, status)
            except Exception as exc:  # per-run isolation: the sweep continues
                manifest = record(key, config, "failed", error=f"{type(exc).__name__}: {exc}")
    else:
        # spawned workers inherit the environment; keep BLAS threads modest
        os.environ.setdefault("OMP_NUM_THREADS", str(max(1, (os.cpu_count() or 2) // parallelism)))
        ctx = get_context("spawn")
        with ProcessPoolExecutor(max_workers=parallelism, mp_context=ctx) as pool:
            futures = {}
            for key, config in todo:
                csv_path = os.path.join(out_dir, f"run_{key}.csv")
                futures[pool.submit(_sweep_worker, config.to_json(), csv_path)] = (key, config)
            for future, (key, config) in futures.items():
                try:
                    status = future.result()
                    manifest = record(key, config, status)
                except Exception as exc:
                    manifest = record(key, config, "failed", error=f"{type(exc).__name__}: {exc}")
    return manifest
