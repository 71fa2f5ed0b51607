"""Epsilon-neighborhood kernel graphs and matrix-free graph Laplacians.

Weights are stored already scaled, W_ij = eps^(-d) * eta(dist/eps); the
Laplacian applies the extra 2/(n eps^2) factor at apply time.  Construction
uses a periodic cell grid of side >= eps so only 3^d neighboring cells are
scanned per cell.  Neighbor lists are sorted by index, which makes
floating-point sums reproducible.

For d = 1 with the indicator kernel the neighborhood of each point is a
contiguous window in sorted order, so `IntervalLaplacian` applies the same
operator in O(n) per product without storing any edges.  It is exactly
equivalent to the explicit graph (tested) and is what makes the large-n
sweeps fit in memory.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import INDICATOR, KernelProfile, PointCloud

DENSE_THRESHOLD = 500


def l2_mu_n(u):
    """Empirical root-mean-square norm sqrt((1/n) sum u_i^2)."""
    u = np.asarray(u, dtype=float)
    return float(np.sqrt(np.mean(u * u)))


def inner_mu_n(u, v):
    return float(np.mean(np.asarray(u) * np.asarray(v)))


@dataclass(frozen=True)
class KernelGraph:
    """Sparse symmetric weight structure in CSR layout (both directions stored)."""

    n: int
    d: int
    eps: float
    kernel: KernelProfile
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    degrees: np.ndarray

    @property
    def edge_count(self):
        """Number of undirected edges."""
        return self.indices.size // 2

    def neighbor_counts(self):
        return np.diff(self.indptr)

    def weight_matvec(self, u):
        """W @ u using the stored CSR structure."""
        w = sp.csr_matrix(
            (self.weights, self.indices, self.indptr), shape=(self.n, self.n)
        )
        return w @ u

    def apply(self, u):
        """(2/(n eps^2)) (D - W) u."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ValueError(f"signal length {u.shape} does not match n={self.n}")
        scale = 2.0 / (self.n * self.eps**2)
        return scale * (self.degrees * u - self.weight_matvec(u))


def _validate_eps(eps):
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if eps > 0.5:
        raise ValueError("eps must be <= 1/2 on the unit torus")


def build_graph(cloud: PointCloud, eps: float, kernel: KernelProfile = INDICATOR) -> KernelGraph:
    """Exact epsilon-graph: all and only pairs with torus distance < eps.

    Periodic cell grid with side >= eps; each unordered cell pair is visited
    once, so W is symmetric by construction.
    """
    _validate_eps(eps)
    pts = cloud.points
    n, d = pts.shape
    if n == 0:
        raise ValueError("cloud is empty")

    m = max(1, int(np.floor(1.0 / eps)))  # cells per axis, side 1/m >= eps
    cell_axes = np.minimum((pts * m).astype(np.int64), m - 1)
    strides = m ** np.arange(d - 1, -1, -1, dtype=np.int64)
    cell_id = cell_axes @ strides

    order = np.argsort(cell_id, kind="stable")
    sorted_ids = cell_id[order]
    occupied, starts = np.unique(sorted_ids, return_index=True)
    ends = np.append(starts[1:], n)
    members = {int(c): order[s:e] for c, s, e in zip(occupied, starts, ends)}

    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)
    rows, cols, vals = [], [], []

    def _edges_between(ia, ib, intra):
        diff = np.abs(pts[ia][:, None, :] - pts[ib][None, :, :])
        np.minimum(diff, 1.0 - diff, out=diff)
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        mask = dist < eps
        if intra:
            mask &= np.tri(ia.size, k=-1, dtype=bool)  # each pair once, no diagonal
        if not mask.any():
            return
        ai, bi = np.nonzero(mask)
        w = kernel.eval(dist[ai, bi] / eps) * eps ** (-d)
        keep = w > 0.0
        rows.append(ia[ai[keep]])
        cols.append(ib[bi[keep]])
        vals.append(w[keep])

    for c in occupied:
        axes = np.array(np.unravel_index(int(c), (m,) * d), dtype=np.int64)
        nbr_ids = np.unique(((axes + offsets) % m) @ strides)
        ia = members[int(c)]
        for nc in nbr_ids:
            if nc < c or int(nc) not in members:
                continue
            if nc == c:
                _edges_between(ia, ia, intra=True)
            else:
                _edges_between(ia, members[int(nc)], intra=False)

    if rows:
        i = np.concatenate(rows)
        j = np.concatenate(cols)
        w = np.concatenate(vals)
        coo = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(n, n),
        )
        csr = coo.tocsr()
        csr.sort_indices()
        indptr, indices, weights = csr.indptr, csr.indices, csr.data
    else:
        indptr = np.zeros(n + 1, dtype=np.int64)
        indices = np.zeros(0, dtype=np.int64)
        weights = np.zeros(0)

    degrees = np.zeros(n)
    np.add.at(degrees, np.repeat(np.arange(n), np.diff(indptr)), weights)

    return KernelGraph(n, d, float(eps), kernel, indptr, indices, weights, degrees)


def apply_laplacian(graph, u):
    """v_i = (2/(n eps^2)) sum_j W_ij (u_i - u_j).  Constants map to zero."""
    return graph.apply(u)


def apply_poly_laplacian(graph, u, s: int):
    """s-fold composition of the Laplacian; s = 0 returns u unchanged."""
    if s < 0:
        raise ValueError("s must be >= 0")
    v = np.asarray(u, dtype=float)
    for _ in range(s):
        v = graph.apply(v)
    return v


def dirichlet_energy(graph, u, s: int = 1) -> float:
    """<Delta^s u, u> in L2(mu_n), split symmetrically for numerical hygiene."""
    if s < 1:
        raise ValueError("s must be >= 1")
    hi = apply_poly_laplacian(graph, u, (s + 1) // 2)
    lo = apply_poly_laplacian(graph, u, s // 2)
    return inner_mu_n(hi, lo)


def operator_norm_estimate(graph, iters: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of the Laplacian."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    from .geometry import make_rng

    rng = make_rng(seed, 0x9E37)
    v = rng.standard_normal(graph.n)
    est = 0.0
    for _ in range(iters):
        av = graph.apply(v)
        nv = np.linalg.norm(av)
        if nv == 0.0:
            return est
        est = float(v @ av / (v @ v))
        v = av / nv
    return max(est, 0.0)


def dense_spectrum(graph: KernelGraph, threshold: int = DENSE_THRESHOLD):
    """Full eigendecomposition; eigenvectors orthonormal in L2(mu_n).

    Only for n <= threshold: beyond that use the matrix-free operations.
    """
    if graph.n > threshold:
        raise ValueError(
            f"n={graph.n} exceeds dense threshold {threshold}; use the matrix-free path"
        )
    w = sp.csr_matrix(
        (graph.weights, graph.indices, graph.indptr), shape=(graph.n, graph.n)
    ).toarray()
    scale = 2.0 / (graph.n * graph.eps**2)
    lap = scale * (np.diag(graph.degrees) - w)
    vals, vecs = np.linalg.eigh(lap)
    # eigh returns euclidean-orthonormal columns; rescale for the (1/n) inner product
    return vals, vecs * np.sqrt(graph.n)


def degree_statistics(graph):
    """(min, max) of normalized degrees (1/n) sum_j W_ij and max neighbor count."""
    norm_deg = graph.degrees / graph.n
    counts = graph.neighbor_counts()
    return float(norm_deg.min()), float(norm_deg.max()), int(counts.max())


class IntervalLaplacian:
    """Matrix-free d=1 indicator-kernel Laplacian on sorted points.

    Every neighborhood {j : torus_dist(x_i, x_j) < eps} is a cyclic window in
    sorted order, so W u reduces to windowed prefix sums.  Signals are indexed
    in sorted-coordinate order.
    """

    d = 1

    def __init__(self, points_1d, eps):
        _validate_eps(eps)
        x = np.sort(np.asarray(points_1d, dtype=float).reshape(-1))
        n = x.size
        if n == 0:
            raise ValueError("cloud is empty")
        # Conceptually the points are tripled to (x-1, x, x+1) and each window
        # (x_i - eps, x_i + eps) is located around the middle copy.  Since
        # eps <= 1/2 the window endpoints spill at most one period either way,
        # so the searches run on x itself with wrapped query values; only the
        # residue index (int32) and wrap count (int8) are kept, which is what
        # lets clouds of ~10^8 points fit in memory.
        v = x - eps
        below = v < 0.0
        v[below] += 1.0
        lo = np.searchsorted(x, v, side="right").astype(np.int32)
        lo_wraps = np.where(below, 0, 1).astype(np.int8)
        del v, below
        w = x + eps
        above = w >= 1.0
        w[above] -= 1.0
        hi = np.searchsorted(x, w, side="left").astype(np.int32)
        hi_wraps = np.where(above, 2, 1).astype(np.int8)
        del w, above

        self.n = n
        self.eps = float(eps)
        self.kernel = INDICATOR
        self.x = x
        self._lo_rem = lo
        self._hi_rem = hi
        self._wraps = (hi_wraps - lo_wraps).astype(np.int8)
        counts = (
            hi.astype(np.int64) - lo + self._wraps.astype(np.int64) * n - 1
        )  # window includes self once
        self.degrees = counts / eps  # sum_j W_ij with W = 1/eps per neighbor

    def _window_sums(self, u):
        cum = np.concatenate([[0.0], np.cumsum(u)])
        total = cum[-1]
        out = cum[self._hi_rem] - cum[self._lo_rem]
        out += self._wraps * total
        return out

    def neighbor_counts(self):
        return (
            self._hi_rem.astype(np.int64)
            - self._lo_rem
            + self._wraps.astype(np.int64) * self.n
            - 1
        )

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ValueError(f"signal length {u.shape} does not match n={self.n}")
        wsum = (self._window_sums(u) - u) / self.eps  # exclude self
        scale = 2.0 / (self.n * self.eps**2)
        return scale * (self.degrees * u - wsum)


def save_edgelist(graph: KernelGraph, path):
    """Plain-text export: header `n d eps kernel`, then `i j w` per edge."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{graph.n} {graph.d} {graph.eps!r} {graph.kernel.kind}\n")
        for i in range(graph.n):
            for p in range(graph.indptr[i], graph.indptr[i + 1]):
                j = graph.indices[p]
                if j > i:
                    f.write(f"{i} {j} {float(graph.weights[p])!r}\n")


def load_edgelist(path) -> KernelGraph:
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        n, d, eps, kind = int(header[0]), int(header[1]), float(header[2]), header[3]
        rows, cols, vals = [], [], []
        for line in f:
            a, b, w = line.split()
            rows.append(int(a))
            cols.append(int(b))
            vals.append(float(w))
    i = np.array(rows, dtype=np.int64)
    j = np.array(cols, dtype=np.int64)
    w = np.array(vals)
    coo = sp.coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(n, n),
    )
    csr = coo.tocsr()
    csr.sort_indices()
    degrees = np.asarray(csr.sum(axis=1)).reshape(-1)
    return KernelGraph(
        n, d, eps, KernelProfile(kind), csr.indptr, csr.indices, csr.data, degrees
    )
