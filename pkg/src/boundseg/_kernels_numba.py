"""JIT-compiled spatial kernels: kd-tree KNN, PCA normals, neighborhood stats.

Candidates are ranked by (squared distance, point index) everywhere, so
results are deterministic and identical to a brute-force scan. Squared
distances accumulate x, y, z in that order to match the numpy fallback
bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit

JACOBI_SWEEPS = 10


@njit(cache=True)
def _sift_down(heap_d, heap_i, size):
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        top = i
        if left < size and (
            heap_d[left] > heap_d[top]
            or (heap_d[left] == heap_d[top] and heap_i[left] > heap_i[top])
        ):
            top = left
        if right < size and (
            heap_d[right] > heap_d[top]
            or (heap_d[right] == heap_d[top] and heap_i[right] > heap_i[top])
        ):
            top = right
        if top == i:
            return
        heap_d[i], heap_d[top] = heap_d[top], heap_d[i]
        heap_i[i], heap_i[top] = heap_i[top], heap_i[i]
        i = top


@njit(cache=True)
def _heap_offer(heap_d, heap_i, size, d2, p):
    """Max-heap of the k best (d2, index) pairs; root is the current worst."""
    if size < heap_d.shape[0]:
        heap_d[size] = d2
        heap_i[size] = p
        size += 1
        i = size - 1
        while i > 0:
            par = (i - 1) // 2
            if heap_d[par] < heap_d[i] or (heap_d[par] == heap_d[i] and heap_i[par] < heap_i[i]):
                heap_d[par], heap_d[i] = heap_d[i], heap_d[par]
                heap_i[par], heap_i[i] = heap_i[i], heap_i[par]
                i = par
            else:
                break
        return size
    if d2 < heap_d[0] or (d2 == heap_d[0] and p < heap_i[0]):
        heap_d[0] = d2
        heap_i[0] = p
        _sift_down(heap_d, heap_i, size)
    return size


@njit(cache=True)
def kdtree_knn(points, perm, naxis, nsplit, nleft, nright, nstart, nend, centers, k, out_idx, out_dist):
    heap_d = np.empty(k, dtype=np.float64)
    heap_i = np.empty(k, dtype=np.int64)
    stack_node = np.empty(256, dtype=np.int64)
    stack_bound = np.empty(256, dtype=np.float64)
    for ci in range(centers.shape[0]):
        c = centers[ci]
        qx = points[c, 0]
        qy = points[c, 1]
        qz = points[c, 2]
        size = 0
        stack_node[0] = 0
        stack_bound[0] = 0.0
        top = 1
        while top > 0:
            top -= 1
            nd = stack_node[top]
            bnd = stack_bound[top]
            # a subtree whose region bound exceeds the current worst cannot
            # improve the result; an equal bound still can via a lower index
            if size == k and bnd > heap_d[0]:
                continue
            ax = naxis[nd]
            if ax < 0:
                for s in range(nstart[nd], nend[nd]):
                    p = perm[s]
                    if p == c:
                        continue
                    dx = points[p, 0] - qx
                    dy = points[p, 1] - qy
                    dz = points[p, 2] - qz
                    d2 = dx * dx + dy * dy + dz * dz
                    size = _heap_offer(heap_d, heap_i, size, d2, p)
            else:
                if ax == 0:
                    delta = qx - nsplit[nd]
                elif ax == 1:
                    delta = qy - nsplit[nd]
                else:
                    delta = qz - nsplit[nd]
                if delta < 0.0:
                    near = nleft[nd]
                    far = nright[nd]
                else:
                    near = nright[nd]
                    far = nleft[nd]
                fb = delta * delta
                if fb < bnd:
                    fb = bnd
                stack_node[top] = far
                stack_bound[top] = fb
                top += 1
                stack_node[top] = near
                stack_bound[top] = bnd
                top += 1
        for pos in range(size - 1, -1, -1):
            out_idx[ci, pos] = heap_i[0]
            out_dist[ci, pos] = np.sqrt(heap_d[0])
            size -= 1
            heap_d[0] = heap_d[size]
            heap_i[0] = heap_i[size]
            _sift_down(heap_d, heap_i, size)


@njit(cache=True)
def _jacobi3(a, v):
    """In-place cyclic Jacobi on one symmetric 3x3; v accumulates rotations."""
    for r0 in range(3):
        for c0 in range(3):
            v[r0, c0] = 1.0 if r0 == c0 else 0.0
    for _ in range(JACOBI_SWEEPS):
        for pq in range(3):
            if pq == 0:
                p, q = 0, 1
            elif pq == 1:
                p, q = 0, 2
            else:
                p, q = 1, 2
            r = 3 - p - q
            apq = a[p, q]
            if apq == 0.0:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            if abs(theta) > 1.0e10:
                t = 0.5 / theta
            else:
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
            cs = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * cs
            app = a[p, p]
            aqq = a[q, q]
            arp = a[r, p]
            arq = a[r, q]
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0
            nrp = cs * arp - sn * arq
            nrq = sn * arp + cs * arq
            a[r, p] = nrp
            a[p, r] = nrp
            a[r, q] = nrq
            a[q, r] = nrq
            for r0 in range(3):
                vp = v[r0, p]
                vq = v[r0, q]
                v[r0, p] = cs * vp - sn * vq
                v[r0, q] = sn * vp + cs * vq


@njit(cache=True)
def pca_normals(points, nbr_idx, out_normal, out_flag):
    n, k = nbr_idx.shape
    a = np.empty((3, 3))
    v = np.empty((3, 3))
    cnt = k + 1.0
    for i in range(n):
        mx = points[i, 0]
        my = points[i, 1]
        mz = points[i, 2]
        for j in range(k):
            p = nbr_idx[i, j]
            mx += points[p, 0]
            my += points[p, 1]
            mz += points[p, 2]
        mx /= cnt
        my /= cnt
        mz /= cnt
        cxx = 0.0
        cxy = 0.0
        cxz = 0.0
        cyy = 0.0
        cyz = 0.0
        czz = 0.0
        dx = points[i, 0] - mx
        dy = points[i, 1] - my
        dz = points[i, 2] - mz
        cxx += dx * dx
        cxy += dx * dy
        cxz += dx * dz
        cyy += dy * dy
        cyz += dy * dz
        czz += dz * dz
        for j in range(k):
            p = nbr_idx[i, j]
            dx = points[p, 0] - mx
            dy = points[p, 1] - my
            dz = points[p, 2] - mz
            cxx += dx * dx
            cxy += dx * dy
            cxz += dx * dz
            cyy += dy * dy
            cyz += dy * dz
            czz += dz * dz
        a[0, 0] = cxx / cnt
        a[0, 1] = cxy / cnt
        a[0, 2] = cxz / cnt
        a[1, 0] = cxy / cnt
        a[1, 1] = cyy / cnt
        a[1, 2] = cyz / cnt
        a[2, 0] = cxz / cnt
        a[2, 1] = cyz / cnt
        a[2, 2] = czz / cnt
        _jacobi3(a, v)
        i0, i1, i2 = 0, 1, 2
        if a[i0, i0] > a[i1, i1]:
            i0, i1 = i1, i0
        if a[i1, i1] > a[i2, i2]:
            i1, i2 = i2, i1
        if a[i0, i0] > a[i1, i1]:
            i0, i1 = i1, i0
        lam1 = a[i1, i1]
        lam2 = a[i2, i2]
        if lam1 < 0.0:
            lam1 = 0.0
        if lam2 < 0.0:
            lam2 = 0.0
        if lam1 <= 1.0e-12 * lam2:
            out_normal[i, 0] = 0.0
            out_normal[i, 1] = 0.0
            out_normal[i, 2] = 1.0
            out_flag[i] = True
            continue
        nx = v[0, i0]
        ny = v[1, i0]
        nz = v[2, i0]
        norm = np.sqrt(nx * nx + ny * ny + nz * nz)
        nx /= norm
        ny /= norm
        nz /= norm
        ax0 = abs(nx)
        ax1 = abs(ny)
        ax2 = abs(nz)
        lead = nx
        if ax1 > ax0:
            lead = ny
            ax0 = ax1
        if ax2 > ax0:
            lead = nz
        if lead < 0.0:
            nx = -nx
            ny = -ny
            nz = -nz
        out_normal[i, 0] = nx
        out_normal[i, 1] = ny
        out_normal[i, 2] = nz
        out_flag[i] = False


@njit(cache=True)
def neighbor_stats(points, nbr_idx, nbr_dist, normals, out_angle, out_ratio):
    n, k = nbr_idx.shape
    for i in range(n):
        acc = 0.0
        sx = 0.0
        sy = 0.0
        sz = 0.0
        sd = 0.0
        for j in range(k):
            p = nbr_idx[i, j]
            dot = (
                normals[i, 0] * normals[p, 0]
                + normals[i, 1] * normals[p, 1]
                + normals[i, 2] * normals[p, 2]
            )
            dot = abs(dot)
            if dot > 1.0:
                dot = 1.0
            acc += np.arccos(dot)
            sx += points[p, 0]
            sy += points[p, 1]
            sz += points[p, 2]
            sd += nbr_dist[i, j]
        out_angle[i] = acc / k
        ox = sx / k - points[i, 0]
        oy = sy / k - points[i, 1]
        oz = sz / k - points[i, 2]
        md = sd / k
        if md > 0.0:
            out_ratio[i] = np.sqrt(ox * ox + oy * oy + oz * oz) / md
        else:
            out_ratio[i] = 0.0
