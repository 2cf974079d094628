"""Model forward passes.

Boundary points go through the graph-attention path: the fused center,
fused neighbors, and edge weights are lifted by three encoder MLPs, scored
per neighbor, softmax-normalized, and the encoded neighbors are combined
with the resulting attention coefficients. Interior points take a cheap
pointwise MLP over (coords, max relative neighbor offset). Every point's
feature is concatenated with one shared global feature from the pooling
layer, and a shared head emits per-point class logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .boundary import BoundaryMask, classify_boundary
from .errors import KTooLarge
from .graphs import FusedGraphs, build_graph, fuse_edge_vertex
from .pcio import PointCloud
from .spatial import SpatialIndex, build_index, estimate_normals, knn_all, neighborhood_stats

HIDDEN = 64                      # hidden width of the three encoders and the pointwise MLP
POOL_WIDTHS = (16, 64, 128, 512)
HEAD_HIDDEN = (256, 128)
LEAKY_SLOPE = 0.2

ROUTES = ("normal", "all_boundary", "all_interior")


def init_params(seed: int, feat_dim: int, num_classes: int) -> ParamStore:
    """Create all learnable tensors.

    Creation order fixes the initialization stream: center, neighbor, and
    edge encoders, score vector, pooling MLP, pointwise MLP, head. Each
    MLP contributes (w, b) pairs layer by layer.
    """
    store = ParamStore(seed)
    for prefix, in_dim in (("attn.center", 3), ("attn.neighbor", 3), ("attn.edge", 1)):
        store.glorot(f"{prefix}.w1", HIDDEN, in_dim)
        store.zeros(f"{prefix}.b1", HIDDEN)
        store.glorot(f"{prefix}.w2", feat_dim, HIDDEN)
        store.zeros(f"{prefix}.b2", feat_dim)
    store.glorot_vector("attn.score", feat_dim)
    prev = 3
    for i, width in enumerate(POOL_WIDTHS, start=1):
        store.glorot(f"pool.w{i}", width, prev)
        store.zeros(f"pool.b{i}", width)
        prev = width
    store.glorot("point.w1", HIDDEN, 6)
    store.zeros("point.b1", HIDDEN)
    store.glorot("point.w2", feat_dim, HIDDEN)
    store.zeros("point.b2", feat_dim)
    prev = feat_dim + POOL_WIDTHS[-1]
    for i, width in enumerate(HEAD_HIDDEN, start=1):
        store.glorot(f"head.w{i}", width, prev)
        store.zeros(f"head.b{i}", width)
        prev = width
    last = len(HEAD_HIDDEN) + 1
    store.glorot(f"head.w{last}", num_classes, prev)
    store.zeros(f"head.b{last}", num_classes)
    return store


def expected_param_shapes(feat_dim: int, num_classes: int) -> dict[str, tuple]:
    """Name -> shape map for a model of this size (checkpoint validation)."""
    return {name: t.data.shape for name, t in
            init_params(0, feat_dim, num_classes).items()}


def _mlp2(store: ParamStore, prefix: str, x: Tensor) -> Tensor:
    h = ad.leaky_relu(ad.linear(x, store[f"{prefix}.w1"], store[f"{prefix}.b1"]), LEAKY_SLOPE)
    return ad.linear(h, store[f"{prefix}.w2"], store[f"{prefix}.b2"])


def _pool_mlp(store: ParamStore, x: Tensor) -> Tensor:
    h = x
    for i in range(1, len(POOL_WIDTHS) + 1):
        h = ad.linear(h, store[f"pool.w{i}"], store[f"pool.b{i}"])
        if i < len(POOL_WIDTHS):
            h = ad.leaky_relu(h, LEAKY_SLOPE)
    return h


def _head_mlp(store: ParamStore, x: Tensor) -> Tensor:
    n_layers = len(HEAD_HIDDEN) + 1
    h = x
    for i in range(1, n_layers + 1):
        h = ad.linear(h, store[f"head.w{i}"], store[f"head.b{i}"])
        if i < n_layers:
            h = ad.leaky_relu(h, LEAKY_SLOPE)
    return h


@dataclass
class AttentionResult:
    """Per-boundary-point attention outputs (batched over B points)."""

    coefficients: Tensor  # (B, k), rows sum to 1
    feature: Tensor       # (B, D)
    scores: Tensor        # (B, k)


def graph_attention_forward(store: ParamStore, fused: FusedGraphs) -> AttentionResult:
    """Score every neighbor, normalize with softmax, and mix the encoded
    neighbors by the resulting coefficients."""
    b, k = fused.edge_weights.shape
    center = _mlp2(store, "attn.center", Tensor(fused.fused_centers))        # (B, D)
    nbr = _mlp2(store, "attn.neighbor", Tensor(fused.fused_neighbors))       # (B, k, D)
    d = center.data.shape[1]
    # the (B, k, D) intermediates are large; nest the chain so each one is
    # released as soon as its consumer has run
    scores = ad.sum_reduce(
        ad.multiply(
            ad.leaky_relu(
                ad.subtract(
                    ad.add(ad.reshape(center, (b, 1, d)), nbr),
                    _mlp2(store, "attn.edge", Tensor(fused.edge_weights[:, :, None])),
                ),
                LEAKY_SLOPE,
            ),
            store["attn.score"],
        ),
        axis=2,
    )  # (B, k)
    coeff = ad.softmax(scores, axis=1)
    feature = ad.sum_reduce(ad.multiply(ad.reshape(coeff, (b, k, 1)), nbr), axis=1)
    return AttentionResult(coefficients=coeff, feature=feature, scores=scores)


def _pool_from_indices(store: ParamStore, points: np.ndarray, idx: np.ndarray) -> Tensor:
    # The pooling MLP is pointwise, so it runs once per distinct point and
    # the rows are gathered into the (N, k, 512) arrangement afterwards;
    # this is exactly equivalent to lifting each gathered coordinate row.
    lifted = _pool_mlp(store, Tensor(points))                 # (N, 512)
    per_neighbor = ad.gathered_max_rows(lifted, idx)          # (k, 512) max over N
    return ad.max_reduce(per_neighbor, axis=0)                # (512,)


def attention_pool_forward(store: ParamStore, cloud: PointCloud,
                           index: SpatialIndex, k_pool: int,
                           neighbors=None) -> Tensor:
    """Global 512-vector: neighborhoods lifted pointwise through the pooling
    MLP, max over the cloud axis, then max over the neighbor axis."""
    if cloud.n < k_pool + 1:
        raise KTooLarge(f"attention pooling needs at least k_pool+1={k_pool + 1} points")
    idx = neighbors[0][:, :k_pool] if neighbors is not None else knn_all(index, k_pool)[0]
    return _pool_from_indices(store, cloud.points, idx)


def _pointwise_inputs(points: np.ndarray, interior_idx: np.ndarray,
                      nbr_idx: np.ndarray) -> np.ndarray:
    """(I, 6) rows: coordinates plus componentwise max of relative offsets."""
    centers = points[interior_idx]
    rel = points[nbr_idx] - centers[:, None, :]
    return np.concatenate([centers, rel.max(axis=1)], axis=1)


def pointwise_forward(store: ParamStore, cloud: PointCloud, index: SpatialIndex,
                      interior_indices: np.ndarray, k: int,
                      neighbors=None) -> Tensor:
    """Interior-point features; empty input yields an empty (0, D) result."""
    feat_dim = store["point.w2"].data.shape[0]
    interior_indices = np.ascontiguousarray(interior_indices, dtype=np.int64)
    if interior_indices.size == 0:
        return Tensor(np.zeros((0, feat_dim)))
    if neighbors is not None:
        nbr_idx = neighbors[0][interior_indices, :k]
    else:
        nbr_idx = knn_all(index, k, interior_indices)[0]
    inputs = _pointwise_inputs(cloud.points, interior_indices, nbr_idx)
    return _mlp2(store, "point", Tensor(inputs))


@dataclass
class ForwardPlan:
    """Geometry-only precomputation for one cloud; reusable across epochs."""

    mask: BoundaryMask
    boundary_indices: np.ndarray
    interior_indices: np.ndarray
    fused: FusedGraphs | None
    pointwise_input: np.ndarray  # (I, 6)
    pool_idx: np.ndarray         # (N, k_pool)
    restore_order: np.ndarray    # (N,) row gather restoring original point order
    n: int

    @property
    def boundary_fraction(self) -> float:
        return self.boundary_indices.size / self.n


def prepare_plan(cloud: PointCloud, cfg, route: str = "normal") -> ForwardPlan:
    """Run the geometric pipeline (KNN, normals, stats, mask, graphs) once.

    `route` overrides the boundary mask: "all_boundary" sends every point
    through the attention path, "all_interior" through the pointwise path.
    Detection statistics are computed in every route so the routed variants
    time the identical geometric pipeline.
    """
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}")
    index = build_index(cloud)
    k_max = max(cfg.k_layer, cfg.k_est, cfg.k_pool)
    nbr_idx, nbr_dist = knn_all(index, k_max)
    est = (nbr_idx[:, : cfg.k_est], nbr_dist[:, : cfg.k_est])
    normals = estimate_normals(cloud, index, cfg.k_est, neighbors=est)
    stats = neighborhood_stats(cloud, index, normals, cfg.k_est, neighbors=est)
    mask = classify_boundary(stats, cfg.thresholds)
    if route == "all_boundary":
        mask = BoundaryMask(flags=np.ones(cloud.n, dtype=bool))
    elif route == "all_interior":
        mask = BoundaryMask(flags=np.zeros(cloud.n, dtype=bool))
    b_idx = mask.boundary_indices
    i_idx = mask.interior_indices
    fused = None
    if b_idx.size:
        graphs = build_graph(cloud, index, b_idx, cfg.k_layer,
                             neighbors=(nbr_idx[:, : cfg.k_layer], nbr_dist[:, : cfg.k_layer]))
        fused = fuse_edge_vertex(graphs)
    if i_idx.size:
        pw_input = _pointwise_inputs(cloud.points, i_idx, nbr_idx[i_idx, : cfg.k_layer])
    else:
        pw_input = np.zeros((0, 6))
    order = np.concatenate([b_idx, i_idx])
    restore = np.empty(cloud.n, dtype=np.int64)
    restore[order] = np.arange(cloud.n, dtype=np.int64)
    return ForwardPlan(
        mask=mask,
        boundary_indices=b_idx,
        interior_indices=i_idx,
        fused=fused,
        pointwise_input=pw_input,
        pool_idx=nbr_idx[:, : cfg.k_pool],
        restore_order=restore,
        n=cloud.n,
    )


def forward_from_plan(store: ParamStore, plan: ForwardPlan,
                      points: np.ndarray) -> Tensor:
    """Per-point class logits (N, C) in original point order."""
    feat_dim = store["point.w2"].data.shape[0]
    parts = []
    if plan.fused is not None:
        parts.append(graph_attention_forward(store, plan.fused).feature)
    if plan.interior_indices.size:
        parts.append(_mlp2(store, "point", Tensor(plan.pointwise_input)))
    feats = parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
    feats = ad.gather_rows(feats, plan.restore_order)
    pooled = _pool_from_indices(store, points, plan.pool_idx)
    full = ad.concat([feats, ad.broadcast_rows(pooled, plan.n)], axis=1)
    return _head_mlp(store, full)


def model_forward(store: ParamStore, cloud: PointCloud, cfg,
                  route: str = "normal") -> tuple[Tensor, ForwardPlan]:
    """Full pipeline from raw cloud to logits; returns the plan alongside."""
    plan = prepare_plan(cloud, cfg, route)
    return forward_from_plan(store, plan, cloud.points), plan
