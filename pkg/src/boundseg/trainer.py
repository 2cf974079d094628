"""Training, evaluation metrics, checkpointing, and the routing benchmark."""

from __future__ import annotations

import dataclasses
import json
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tape
from .boundary import BoundaryThresholds
from .errors import BadLabel, EmptyMatrix, IoError, NumericError, SchemaError, VersionError
from .layers import expected_param_shapes, forward_from_plan, init_params, model_forward, prepare_plan
from .pcio import PointCloud
from .rng import SplitMix64

CHECKPOINT_VERSION = 1
# Keeps the shuffle stream decoupled from the parameter-init stream.
_SHUFFLE_SALT = 0xD1B54A32D192ED03


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    seed: int = 0
    lr0: float = 0.001
    halve_every: int = 40
    lr_floor: float = 1.0e-5
    batch_size: int = 16
    k_layer: int = 32
    k_est: int = 16
    k_pool: int = 16
    feat_dim: int = 256
    num_classes: int | None = None
    thresholds: BoundaryThresholds = field(default_factory=BoundaryThresholds)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not (self.lr0 >= self.lr_floor >= 0.0):
            raise ValueError("need lr0 >= lr_floor >= 0")
        if self.halve_every < 1:
            raise ValueError("halve_every must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if min(self.k_layer, self.k_est, self.k_pool) < 1:
            raise ValueError("neighbor counts must be >= 1")
        if self.feat_dim < 1:
            raise ValueError("feat_dim must be >= 1")


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    """Halving schedule, clamped at the floor."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return max(cfg.lr_floor, cfg.lr0 * 0.5 ** (epoch // cfg.halve_every))


def cross_entropy(logits, labels) -> ad.Tensor:
    """Mean per-point softmax cross entropy; labels must be within [0, C)."""
    logits = ad.as_tensor(logits)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    c = logits.data.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise BadLabel(f"labels must lie in [0, {c})")
    return ad.cross_entropy_with_logits(logits, labels)


class Adam:
    """Adam with bias correction; the schedule multiplies the base rate."""

    def __init__(self, store: ParamStore, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1.0e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self, store: ParamStore, lr: float) -> None:
        grads = store.grads()
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, param in store.items():
            g = grads[name]
            m = self._m[name] = self.beta1 * self._m[name] + (1.0 - self.beta1) * g
            v = self._v[name] = self.beta2 * self._v[name] + (1.0 - self.beta2) * (g * g)
            param.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass(frozen=True)
class Checkpoint:
    format_version: int
    config: TrainConfig
    params: dict[str, np.ndarray]


def checkpoint_from_store(cfg: TrainConfig, store: ParamStore) -> Checkpoint:
    return Checkpoint(
        format_version=CHECKPOINT_VERSION,
        config=cfg,
        params={name: t.data.copy() for name, t in store.items()},
    )


def store_from_checkpoint(ckpt: Checkpoint) -> ParamStore:
    store = ParamStore(seed=0)
    for name, values in ckpt.params.items():
        store.add_param(name, values)
    return store


def train(clouds: list[PointCloud], cfg: TrainConfig):
    """Minibatch Adam on the summed per-cloud cross entropy.

    Deterministic for a fixed seed: parameters initialize from the seed
    stream, epoch orders come from a salted shuffle stream, and batches
    run sequentially. Returns (checkpoint, per-epoch mean loss history).
    """
    if not clouds:
        raise ValueError("training needs at least one cloud")
    if any(c.labels is None for c in clouds):
        raise BadLabel("every training cloud must be labeled")
    classes = {c.num_classes for c in clouds}
    if len(classes) != 1:
        raise BadLabel(f"clouds disagree on num_classes: {sorted(classes)}")
    num_classes = clouds[0].num_classes
    k_need = max(cfg.k_layer, cfg.k_est, cfg.k_pool) + 1
    for i, c in enumerate(clouds):
        if c.n < k_need:
            raise ValueError(f"cloud {i} has {c.n} points; need >= {k_need}")
    cfg = dataclasses.replace(cfg, num_classes=num_classes)

    store = init_params(cfg.seed, cfg.feat_dim, num_classes)
    plans = [prepare_plan(c, cfg) for c in clouds]
    shuffler = SplitMix64(cfg.seed ^ _SHUFFLE_SALT)
    opt = Adam(store)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        lr = lr_at(cfg, epoch)
        order = shuffler.shuffled(len(clouds))
        total = 0.0
        for b0 in range(0, len(order), cfg.batch_size):
            batch = order[b0 : b0 + cfg.batch_size]
            store.zero_grads()
            try:
                for ci in batch:
                    with Tape() as tape:
                        logits = forward_from_plan(store, plans[ci], clouds[ci].points)
                        loss = cross_entropy(logits, clouds[ci].labels)
                    tape.backward(loss)
                    total += loss.item()
                opt.step(store, lr)
            except NumericError as exc:
                raise NumericError(
                    f"epoch {epoch} batch {b0 // cfg.batch_size}: {exc}") from exc
        history.append(total / len(clouds))
    return checkpoint_from_store(cfg, store), history


@dataclass
class ConfusionMatrix:
    """C x C counts; rows are ground truth, columns are predictions."""

    counts: np.ndarray

    @classmethod
    def empty(cls, num_classes: int) -> "ConfusionMatrix":
        return cls(counts=np.zeros((num_classes, num_classes), dtype=np.int64))

    def update(self, truth: np.ndarray, pred: np.ndarray) -> None:
        truth = np.asarray(truth, dtype=np.int64)
        pred = np.asarray(pred, dtype=np.int64)
        c = self.counts.shape[0]
        for arr in (truth, pred):
            if arr.size and (arr.min() < 0 or arr.max() >= c):
                raise BadLabel(f"class id out of range for {c} classes")
        np.add.at(self.counts, (truth, pred), 1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def per_class_iou(cm: ConfusionMatrix) -> list[float | None]:
    """IoU per class; None for classes absent from both truth and prediction."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    tp = np.diag(cm.counts).astype(np.float64)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp
    denom = tp + fp + fn
    return [float(tp[i] / denom[i]) if denom[i] > 0 else None
            for i in range(cm.counts.shape[0])]


def miou(cm: ConfusionMatrix) -> float:
    """Mean IoU over classes with a nonzero union."""
    ious = [v for v in per_class_iou(cm) if v is not None]
    return float(np.mean(ious))


def overall_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    return float(np.trace(cm.counts) / cm.total)


def evaluate(ckpt: Checkpoint, clouds: list[PointCloud]) -> dict:
    """Forward every labeled cloud, accumulate one confusion matrix, and
    time only the forward pass (monotonic clock, mean over clouds)."""
    if not clouds:
        raise EmptyMatrix("empty dataset")
    if any(c.labels is None for c in clouds):
        raise BadLabel("evaluation clouds must be labeled")
    cfg = ckpt.config
    if cfg.num_classes is None:
        raise SchemaError("checkpoint config lacks num_classes")
    store = store_from_checkpoint(ckpt)
    cm = ConfusionMatrix.empty(cfg.num_classes)
    times = []
    fractions = []
    for cloud in clouds:
        t0 = time.perf_counter()
        logits, plan = model_forward(store, cloud, cfg)
        elapsed = time.perf_counter() - t0
        pred = np.argmax(logits.data, axis=1)
        cm.update(cloud.labels, pred)
        times.append(elapsed * 1.0e3)
        fractions.append(plan.boundary_fraction)
    return {
        "miou": miou(cm),
        "oa": overall_accuracy(cm),
        "per_class_iou": per_class_iou(cm),
        "mean_infer_ms": float(np.mean(times)),
        "n_points": cm.total,
        "boundary_fraction": float(np.mean(fractions)),
    }


def predict_labels(ckpt: Checkpoint, cloud: PointCloud) -> np.ndarray:
    """Argmax class per point (ties to the lowest class id)."""
    store = store_from_checkpoint(ckpt)
    logits, _ = model_forward(store, cloud, ckpt.config)
    return np.argmax(logits.data, axis=1)


def bench_boundary_speedup(ckpt: Checkpoint, cloud: PointCloud, repeats: int) -> dict:
    """Median time of the boundary-aware forward versus routing every point
    through the attention path; both variants run the full pipeline."""
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    cfg = ckpt.config
    store = store_from_checkpoint(ckpt)
    # Untimed passes double as JIT/cache warmup and as the correctness
    # check that the two variants agree on boundary points.
    logits_aware, plan = model_forward(store, cloud, cfg, route="normal")
    logits_all, _ = model_forward(store, cloud, cfg, route="all_boundary")
    b_idx = plan.boundary_indices
    if b_idx.size:
        diff = float(np.abs(logits_aware.data[b_idx] - logits_all.data[b_idx]).max())
    else:
        diff = 0.0
    t_aware = []
    t_all = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        model_forward(store, cloud, cfg, route="normal")
        t_aware.append((time.perf_counter() - t0) * 1.0e3)
        t0 = time.perf_counter()
        model_forward(store, cloud, cfg, route="all_boundary")
        t_all.append((time.perf_counter() - t0) * 1.0e3)
    med_aware = statistics.median(t_aware)
    med_all = statistics.median(t_all)
    return {
        "boundary_fraction": plan.boundary_fraction,
        "t_boundary_aware_ms": med_aware,
        "t_all_graph_ms": med_all,
        "speedup": med_all / med_aware,
        "max_boundary_logit_diff": diff,
    }


def _config_to_dict(cfg: TrainConfig) -> dict:
    d = dataclasses.asdict(cfg)
    return d


def _config_from_dict(d: dict) -> TrainConfig:
    try:
        thr = BoundaryThresholds(**d.pop("thresholds"))
        return TrainConfig(thresholds=thr, **d)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad config block: {exc}") from exc


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Single JSON document; floats serialize via repr so values round-trip
    bit-exactly."""
    doc = {
        "format_version": ckpt.format_version,
        "config": _config_to_dict(ckpt.config),
        "params": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in ckpt.params.items()
        },
    }
    try:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(doc, fh)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a checkpoint document: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise SchemaError("missing format_version")
    if doc["format_version"] != CHECKPOINT_VERSION:
        raise VersionError(f"unsupported checkpoint version {doc['format_version']}")
    for key in ("config", "params"):
        if key not in doc:
            raise SchemaError(f"missing key {key!r}")
    cfg = _config_from_dict(dict(doc["config"]))
    if cfg.num_classes is None:
        raise SchemaError("config lacks num_classes")
    params: dict[str, np.ndarray] = {}
    for name, entry in doc["params"].items():
        if not isinstance(entry, dict) or "shape" not in entry or "data" not in entry:
            raise SchemaError(f"parameter {name!r} lacks shape/data")
        arr = np.asarray(entry["data"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if arr.size != int(np.prod(shape)):
            raise SchemaError(f"parameter {name!r} data does not match its shape")
        params[name] = arr.reshape(shape)
    expected = expected_param_shapes(cfg.feat_dim, cfg.num_classes)
    for name, shape in expected.items():
        if name not in params:
            raise SchemaError(f"missing parameter {name!r}")
        if params[name].shape != shape:
            raise SchemaError(
                f"parameter {name!r} has shape {params[name].shape}, expected {shape}")
    return Checkpoint(format_version=CHECKPOINT_VERSION, config=cfg, params=params)
