"""Vectorized numpy fallbacks for the spatial hot kernels.

Same contracts as the numba kernels: exact k-nearest-neighbor results
ordered by (squared distance, point index), PCA normals from a fixed-sweep
Jacobi eigensolver, and per-point neighborhood statistics. Squared
distances accumulate coordinate-wise in x, y, z order so both backends
compare identical values.
"""

from __future__ import annotations

import numpy as np

JACOBI_SWEEPS = 10
_CHUNK_FLOATS = 8_000_000  # ~64 MB of f64 per distance block


def knn_all(points: np.ndarray, tree, centers: np.ndarray, k: int):
    """Brute-force exact KNN; `tree` is accepted for API parity and unused."""
    n = points.shape[0]
    c = centers.shape[0]
    out_idx = np.empty((c, k), dtype=np.int64)
    out_d2 = np.empty((c, k))
    chunk = max(1, min(c, _CHUNK_FLOATS // n))
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    for s in range(0, c, chunk):
        cs = centers[s : s + chunk]
        m = cs.shape[0]
        dx = x[None, :] - points[cs, 0][:, None]
        d2 = dx * dx
        dy = y[None, :] - points[cs, 1][:, None]
        d2 += dy * dy
        dz = z[None, :] - points[cs, 2][:, None]
        d2 += dz * dz
        d2[np.arange(m), cs] = np.inf
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        mask = d2 <= kth[:, None]
        counts = mask.sum(axis=1)
        if (counts == k).all():
            # nonzero walks row-major, so candidate columns are already
            # ascending within each row; a stable sort on d2 then yields
            # (d2, index) order.
            cand = np.nonzero(mask)[1].reshape(m, k)
            cd2 = np.take_along_axis(d2, cand, axis=1)
            order = np.argsort(cd2, axis=1, kind="stable")
            out_idx[s : s + chunk] = np.take_along_axis(cand, order, axis=1)
            out_d2[s : s + chunk] = np.take_along_axis(cd2, order, axis=1)
        else:
            for r in range(m):
                cand = np.flatnonzero(mask[r])
                order = np.argsort(d2[r, cand], kind="stable")[:k]
                out_idx[s + r] = cand[order]
                out_d2[s + r] = d2[r, cand[order]]
    return out_idx, np.sqrt(out_d2)


def _jacobi3(a: np.ndarray):
    """Cyclic Jacobi on a batch of symmetric 3x3 matrices, fixed sweep count.

    Returns (eigenvalues ascending (n,3), eigenvector columns (n,3,3))
    matching the eigenvalue order.
    """
    a = a.copy()
    n = a.shape[0]
    v = np.zeros_like(a)
    v[:, (0, 1, 2), (0, 1, 2)] = 1.0
    for _ in range(JACOBI_SWEEPS):
        for p, q in ((0, 1), (0, 2), (1, 2)):
            r = 3 - p - q
            apq = a[:, p, q]
            nz = apq != 0.0
            app = a[:, p, p]
            aqq = a[:, q, q]
            # the huge-theta lanes overflow in the standard formula and are
            # repaired by the 1/(2*theta) branch, as in the scalar kernel
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                theta = (aqq - app) / np.where(nz, 2.0 * apq, 1.0)
                t = np.where(theta >= 0.0, 1.0, -1.0) / (
                    np.abs(theta) + np.sqrt(theta * theta + 1.0)
                )
                big = np.abs(theta) > 1.0e10
                if big.any():
                    t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
            cs = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * cs
            t = np.where(nz, t, 0.0)
            cs = np.where(nz, cs, 1.0)
            sn = np.where(nz, sn, 0.0)
            arp = a[:, r, p].copy()
            arq = a[:, r, q].copy()
            a[:, p, p] = app - t * apq
            a[:, q, q] = aqq + t * apq
            a[:, p, q] = 0.0
            a[:, q, p] = 0.0
            nrp = cs * arp - sn * arq
            nrq = sn * arp + cs * arq
            a[:, r, p] = nrp
            a[:, p, r] = nrp
            a[:, r, q] = nrq
            a[:, q, r] = nrq
            vp = v[:, :, p].copy()
            vq = v[:, :, q].copy()
            v[:, :, p] = cs[:, None] * vp - sn[:, None] * vq
            v[:, :, q] = sn[:, None] * vp + cs[:, None] * vq
    vals = a[:, (0, 1, 2), (0, 1, 2)]
    order = np.argsort(vals, axis=1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=1)
    vecs = np.take_along_axis(v, order[:, None, :], axis=2)
    return vals, vecs


def pca_normals(points: np.ndarray, nbr_idx: np.ndarray):
    """Unit normals from the smallest covariance eigenvector per point.

    The covariance sample set is the center point plus its k neighbors.
    Returns (normals (n,3), degenerate flags (n,)); degenerate rows (rank
    < 2 neighborhoods) get the fallback normal (0, 0, 1).
    """
    n, k = nbr_idx.shape
    group = np.concatenate([points[:, None, :], points[nbr_idx]], axis=1)
    mean = group.mean(axis=1)
    centered = group - mean[:, None, :]
    cov = np.einsum("nij,nik->njk", centered, centered) / (k + 1.0)
    vals, vecs = _jacobi3(cov)
    lam1 = np.maximum(vals[:, 1], 0.0)
    lam2 = np.maximum(vals[:, 2], 0.0)
    degenerate = lam1 <= 1.0e-12 * lam2
    normal = vecs[:, :, 0].copy()
    norm = np.sqrt((normal * normal).sum(axis=1))
    normal /= np.maximum(norm, 1.0e-300)[:, None]
    lead = np.take_along_axis(normal, np.argmax(np.abs(normal), axis=1)[:, None], axis=1)[:, 0]
    normal = np.where((lead < 0.0)[:, None], -normal, normal)
    normal[degenerate] = (0.0, 0.0, 1.0)
    return normal, degenerate


def neighbor_stats(points, nbr_idx, nbr_dist, normals):
    """Mean |angle| between each normal and its neighbors' normals, and the
    neighborhood centroid offset divided by the mean neighbor distance."""
    dots = np.abs(np.einsum("nd,nkd->nk", normals, normals[nbr_idx]))
    mean_angle = np.arccos(np.clip(dots, 0.0, 1.0)).mean(axis=1)
    diff = points[nbr_idx].mean(axis=1) - points
    off = np.sqrt((diff * diff).sum(axis=1))
    md = nbr_dist.mean(axis=1)
    ratio = np.where(md > 0.0, off / np.where(md > 0.0, md, 1.0), 0.0)
    return mean_angle, ratio
