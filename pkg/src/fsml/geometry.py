"""Neighbour graphs, shortest paths, tangent frames and unfolded geodesics.

Curves enter as an (n, G) value matrix together with the trapezoid weights of
their shared grid; every inner product is ``a @ (w * b)``.
"""

from __future__ import annotations

import heapq
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientDataError, ParameterError
from .fda import pairwise_l2

logger = logging.getLogger(__name__)

MIN_EDGE_WEIGHT = 1e-12


# ---------------------------------------------------------------------------
# graph


@dataclass
class NeighborGraph:
    """Undirected weighted graph stored as a dense weight matrix.

    Absent edges carry ``inf``. ``neighbors[i]`` lists the adjacent vertices of
    ``i`` in increasing order.
    """

    weights: np.ndarray
    neighbors: list = field(repr=False)
    mst_edges: tuple = ()

    @property
    def n(self):
        return self.weights.shape[0]

    @classmethod
    def from_weights(cls, weights, mst_edges=()):
        weights = np.asarray(weights, dtype=float)
        nbrs = [np.flatnonzero(np.isfinite(row)).tolist() for row in weights]
        for i, row in enumerate(nbrs):
            if i in row:
                raise ParameterError("self-loops are not allowed")
        return cls(weights, nbrs, tuple(mst_edges))

    def edges(self):
        """Sorted list of (i, j, w) with i < j."""
        i, j = np.nonzero(np.isfinite(self.weights) & np.triu(np.ones(self.weights.shape, dtype=bool), 1))
        return [(int(a), int(b), float(self.weights[a, b])) for a, b in zip(i, j)]

    def is_connected(self):
        return len(_components(self.neighbors)) == 1


def _components(neighbors):
    n = len(neighbors)
    label = [-1] * n
    comps = []
    for s in range(n):
        if label[s] >= 0:
            continue
        label[s] = len(comps)
        stack, comp = [s], [s]
        while stack:
            u = stack.pop()
            for v in neighbors[u]:
                if label[v] < 0:
                    label[v] = label[s]
                    stack.append(v)
                    comp.append(v)
        comps.append(sorted(comp))
    return comps


def minimum_spanning_tree(dist):
    """Prim's algorithm on a dense distance matrix; returns sorted (i, j, w) edges.

    Zero distances are legitimate edges here, unlike in sparse-graph MST
    routines that treat 0 as "no edge".
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    parent = np.full(n, -1)
    best[0] = 0.0
    edges = []
    for _ in range(n):
        cand = np.where(in_tree, np.inf, best)
        u = int(np.argmin(cand))
        in_tree[u] = True
        if parent[u] >= 0:
            a, b = sorted((int(parent[u]), u))
            edges.append((a, b, float(dist[a, b])))
        closer = (~in_tree) & (dist[u] < best)
        best[closer] = dist[u][closer]
        parent[closer] = u
    edges.sort(key=lambda e: (e[2], e[0], e[1]))
    return edges


def knn_indices(dist, k, include_self=False):
    """Indices of the k nearest rows for every row, ties broken by index."""
    dist = np.asarray(dist)
    order = np.argsort(dist, axis=1, kind="stable")
    if include_self:
        # put the point itself first even if a duplicate has equal distance
        n = dist.shape[0]
        out = np.empty((n, k), dtype=int)
        for i in range(n):
            row = order[i][order[i] != i]
            out[i, 0] = i
            out[i, 1:] = row[: k - 1]
        return out
    n = dist.shape[0]
    out = np.empty((n, k), dtype=int)
    for i in range(n):
        row = order[i][order[i] != i]
        out[i] = row[:k]
    return out


def build_graph(values, weights, k_graph, dist=None) -> NeighborGraph:
    """Symmetric k-NN graph under the L2 metric, made connected with MST edges.

    Parameters
    ----------
    values : ndarray, shape (n, G)
    weights : ndarray, shape (G,)
        Quadrature weights of the grid.
    k_graph : int
        Number of neighbours per vertex before symmetrisation.
    dist : ndarray, optional
        Precomputed pairwise L2 distances.
    """
    n = values.shape[0]
    if k_graph < 1:
        raise ParameterError(f"k_graph must be >= 1, got {k_graph}")
    if n < k_graph + 1:
        raise InsufficientDataError(f"need n >= k_graph + 1 = {k_graph + 1}, got n = {n}")
    if dist is None:
        dist = pairwise_l2(values, weights)
    floored = np.maximum(dist, MIN_EDGE_WEIGHT)
    if np.any(dist[~np.eye(n, dtype=bool)] < MIN_EDGE_WEIGHT):
        warnings.warn(
            f"duplicate curves found; zero-length edges floored at {MIN_EDGE_WEIGHT}",
            RuntimeWarning,
            stacklevel=2,
        )

    adj = np.zeros((n, n), dtype=bool)
    nn = knn_indices(dist, k_graph)
    adj[np.repeat(np.arange(n), k_graph), nn.ravel()] = True
    adj |= adj.T

    W = np.where(adj, floored, np.inf)
    graph = NeighborGraph.from_weights(W)
    comps = _components(graph.neighbors)
    added = []
    if len(comps) > 1:
        comp_of = np.empty(n, dtype=int)
        for c, members in enumerate(comps):
            comp_of[members] = c
        parent = list(range(len(comps)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j, _ in minimum_spanning_tree(dist):
            ri, rj = find(comp_of[i]), find(comp_of[j])
            if ri == rj:
                continue
            parent[ri] = rj
            W[i, j] = W[j, i] = floored[i, j]
            added.append((i, j))
            if len(added) == len(comps) - 1:
                break
        logger.debug("joined %d components with %d MST edges", len(comps), len(added))
        graph = NeighborGraph.from_weights(W, added)
    return graph


# ---------------------------------------------------------------------------
# shortest paths


@dataclass
class ShortestPathTree:
    source: int
    dist: np.ndarray
    pred: np.ndarray
    order: np.ndarray  # vertices in the order they were settled

    def path(self, target):
        """Vertices from the source to ``target``; empty when target is the source."""
        if target == self.source:
            return []
        if not np.isfinite(self.dist[target]):
            raise ParameterError(f"vertex {target} unreachable from {self.source}")
        out = [int(target)]
        while out[-1] != self.source:
            out.append(int(self.pred[out[-1]]))
        return out[::-1]


def dijkstra_all_paths(graph: NeighborGraph, source: int) -> ShortestPathTree:
    """Single-source Dijkstra; among equal-length routes the smaller predecessor wins."""
    n = graph.n
    W = graph.weights
    nbrs = graph.neighbors
    dist = [np.inf] * n
    pred = [-1] * n
    done = [False] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    order = []
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        order.append(u)
        row = W[u]
        for v in nbrs[u]:
            if done[v]:
                continue
            nd = d + row[v]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and u < pred[v]:
                pred[v] = u
    return ShortestPathTree(source, np.array(dist), np.array(pred), np.array(order))


def path_length(graph: NeighborGraph, vertices):
    return float(sum(graph.weights[a, b] for a, b in zip(vertices[:-1], vertices[1:])))


@dataclass
class GeodesicPath:
    """A graph path i = i_0, ..., i_m = j with its edge difference curves."""

    vertices: tuple
    edge_vectors: np.ndarray  # (m, G), row k-1 is X[i_{k-1}] - X[i_k]

    @classmethod
    def from_vertices(cls, vertices, values):
        v = tuple(int(i) for i in vertices)
        idx = np.asarray(v)
        edges = values[idx[:-1]] - values[idx[1:]] if len(v) > 1 else np.zeros((0, values.shape[1]))
        return cls(v, edges)


# ---------------------------------------------------------------------------
# tangent frames


@dataclass
class TangentFrame:
    """Orthonormal (under quadrature) basis of an estimated tangent space."""

    anchor: object
    basis: np.ndarray  # (d, G)
    local_mean: np.ndarray  # (G,)
    eigenvalues: np.ndarray  # local covariance spectrum, descending
    neighbors: np.ndarray

    @property
    def d(self):
        return self.basis.shape[0]

    def coordinates(self, vectors, weights):
        """Projection coordinates of one or many difference curves."""
        return np.asarray(vectors) @ (weights[:, None] * self.basis.T)


def _fix_signs(basis):
    # largest-|value| entry of each basis function is made positive
    idx = np.argmax(np.abs(basis), axis=-1)
    vals = np.take_along_axis(basis, idx[..., None], axis=-1)[..., 0]
    return basis * np.where(vals < 0, -1.0, 1.0)[..., None]


def _frame_from_neighbors(nb_values, weights, d):
    """Top-d eigenfunctions of the local covariance of the neighbour curves.

    The covariance operator is never formed: an SVD of the centred,
    quadrature-scaled neighbour matrix yields its eigenvalues s^2 / k and
    eigenfunctions v / sqrt(w), which are orthonormal under the trapezoid rule.
    """
    k = nb_values.shape[0]
    mean = nb_values.mean(axis=0)
    sw = np.sqrt(weights)
    C = (nb_values - mean) * sw / np.sqrt(k)
    _, s, vt = np.linalg.svd(C, full_matrices=False)
    basis = _fix_signs(vt[:d] / sw)
    return basis, mean, s**2


def local_pca(values, weights, anchor, k_pca, d, dist_row=None) -> TangentFrame:
    """Tangent frame at a training vertex (int) or an external curve (array).

    The neighbourhood is the ``k_pca`` nearest training curves under L2; for a
    vertex anchor the vertex itself counts as its own nearest neighbour.
    """
    n = values.shape[0]
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if k_pca < d + 1:
        raise ParameterError(f"k_pca must be >= d + 1 = {d + 1}, got {k_pca}")
    if k_pca > n:
        raise ParameterError(f"k_pca = {k_pca} exceeds the sample size {n}")
    if isinstance(anchor, (int, np.integer)):
        point = values[int(anchor)]
    else:
        point = np.asarray(getattr(anchor, "values", anchor), dtype=float)
    if dist_row is None:
        diff = values - point
        dist_row = np.sqrt((diff * diff) @ weights)
    if isinstance(anchor, (int, np.integer)):
        order = np.argsort(dist_row, kind="stable")
        order = np.concatenate([[int(anchor)], order[order != int(anchor)]])
    else:
        order = np.argsort(dist_row, kind="stable")
    nb = order[:k_pca]
    basis, mean, eig = _frame_from_neighbors(values[nb], weights, d)
    if len(eig) > d and abs(eig[d - 1] - eig[d]) < 1e-12:
        warnings.warn("tangent frame is not unique: eigenvalues d and d+1 coincide", RuntimeWarning, stacklevel=2)
    return TangentFrame(anchor, basis, mean, eig, nb)


def all_tangent_frames(values, weights, k_pca, d, dist=None):
    """Tangent bases at every training vertex, stacked as (n, d, G)."""
    n = values.shape[0]
    if k_pca < d + 1:
        raise ParameterError(f"k_pca must be >= d + 1 = {d + 1}, got {k_pca}")
    if k_pca > n:
        raise ParameterError(f"k_pca = {k_pca} exceeds the sample size {n}")
    if dist is None:
        dist = pairwise_l2(values, weights)
    nb = knn_indices(dist, k_pca, include_self=True)
    nbv = values[nb]  # (n, k, G)
    mean = nbv.mean(axis=1, keepdims=True)
    sw = np.sqrt(weights)
    C = (nbv - mean) * sw / np.sqrt(k_pca)
    _, _, vt = np.linalg.svd(C, full_matrices=False)
    return _fix_signs(vt[:, :d, :] / sw)


# ---------------------------------------------------------------------------
# intrinsic dimension


@dataclass
class DimensionEstimate:
    dimension: int
    raw: float
    ratios: np.ndarray  # mu_i for every point, nan where invalid
    kept: np.ndarray  # boolean mask of ratios used after trimming


def estimate_intrinsic_dim(values=None, weights=None, dist=None, trim=0.1, bounds=(1, 10)) -> DimensionEstimate:
    """Two-nearest-neighbour maximum-likelihood intrinsic dimension.

    For each point mu = r2 / r1 is the ratio of its second to first positive
    neighbour distance; log(mu) is exponential with rate d. The largest
    ``trim`` fraction of ratios is treated as censored at the largest kept
    value, which keeps the estimate unbiased:
    d = (r - 1) / (sum of the r kept log mu + (n' - r) * max kept log mu).
    """
    if dist is None:
        dist = pairwise_l2(values, weights)
    n = dist.shape[0]
    if n < 20:
        raise InsufficientDataError(f"intrinsic dimension needs n >= 20, got {n}")
    ratios = np.full(n, np.nan)
    for i in range(n):
        row = dist[i]
        pos = np.sort(row[row > 0])
        if len(pos) >= 2:
            ratios[i] = pos[1] / pos[0]
    valid = np.flatnonzero(np.isfinite(ratios))
    n_valid = len(valid)
    if n_valid < 10:
        raise InsufficientDataError(f"only {n_valid} points have two distinct neighbours; need 10")
    order = valid[np.argsort(ratios[valid], kind="stable")]
    r = n_valid - int(np.floor(trim * n_valid))
    kept_idx = order[:r]
    kept = np.zeros(n, dtype=bool)
    kept[kept_idx] = True
    logs = np.log(ratios[kept_idx])
    total = float(logs.sum() + (n_valid - r) * logs[-1])
    raw = (r - 1) / total if total > 0 else np.inf
    lo, hi = bounds
    dim = int(np.clip(np.round(raw), lo, hi)) if np.isfinite(raw) else hi
    return DimensionEstimate(dim, raw, ratios, kept)


# ---------------------------------------------------------------------------
# parallel transport and unfolding


def transport_operator(basis_i, basis_j, weights):
    """Orthogonal map from coordinates in frame i to coordinates in frame j.

    With Phi[k, s] = <phi_ik, phi_js> and Phi = U S V^T, the operator is V U^T.
    Accepts stacked bases of shape (..., d, G).
    """
    basis_i = getattr(basis_i, "basis", basis_i)
    basis_j = getattr(basis_j, "basis", basis_j)
    if basis_i.shape[-2] != basis_j.shape[-2]:
        raise ParameterError("frames must share the same dimension")
    phi = (basis_i * weights) @ np.swapaxes(basis_j, -1, -2)
    u, s, vt = np.linalg.svd(phi)
    if np.any(s < 1e-12):
        warnings.warn("rank-deficient frame overlap in transport operator", RuntimeWarning, stacklevel=2)
    return np.swapaxes(vt, -1, -2) @ np.swapaxes(u, -1, -2)


def unfolded_geodesic_distance(path: GeodesicPath, frames, weights) -> float:
    """Length of a path after transporting its projected edges to the endpoint.

    ``frames[v]`` must give the (d, G) basis (or a TangentFrame) at every
    vertex ``v`` on the path.
    """
    verts = path.vertices
    m = len(verts) - 1
    if m < 1:
        return 0.0

    def basis(v):
        return getattr(frames[v], "basis", frames[v])

    d = basis(verts[-1]).shape[0]
    total = np.zeros(d)
    # walk from the endpoint backwards, accumulating the transport chain
    chain = np.eye(d)
    for k in range(m, 0, -1):
        b = basis(verts[k])
        if k < m:
            chain = chain @ transport_operator(b, basis(verts[k + 1]), weights)
        coords = b @ (weights * path.edge_vectors[k - 1])
        total += chain @ coords
    return float(np.linalg.norm(total))


@dataclass
class GeodesicDistances:
    """Symmetric matrix of unfolded geodesic distances with zero diagonal."""

    matrix: np.ndarray
    path_lengths: Optional[np.ndarray] = None  # plain Dijkstra lengths, for diagnostics


def geodesic_distance_matrix(values, weights, graph: NeighborGraph, frames) -> GeodesicDistances:
    """Average of the i->j and j->i unfolded path norms for every pair.

    For each target j the shortest-path tree rooted at j gives every path
    i -> j at once. Walking the tree outwards, the aggregated vector of a vertex
    u with tree parent p is ``A[u] = P[p] @ proj_p(X_u - X_p) + A[p]`` and the
    chained transport is ``P[u] = P[p] @ R(u -> p)``; vertices at equal depth
    are updated together.
    """
    frames = np.asarray([getattr(f, "basis", f) for f in frames]) if not isinstance(frames, np.ndarray) else frames
    n, d, _ = frames.shape

    # per directed edge (p <- u): projection of X_u - X_p onto frame p and R(u -> p)
    src, dst = np.nonzero(np.isfinite(graph.weights))  # src = p, dst = u
    edge_id = np.full((n, n), -1, dtype=int)
    edge_id[src, dst] = np.arange(len(src))
    proj = np.einsum("edg,eg->ed", frames[src], (values[dst] - values[src]) * weights)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        R = transport_operator(frames[dst], frames[src], weights)

    unfolded = np.zeros((n, n))  # unfolded[i, j]: norm of aggregated i -> j in T_j
    lengths = np.zeros((n, n))
    eye = np.eye(d)
    for j in range(n):
        tree = dijkstra_all_paths(graph, j)
        lengths[:, j] = tree.dist
        order = tree.order
        pred = tree.pred
        depth = np.zeros(n, dtype=int)
        for u in order[1:]:
            depth[u] = depth[pred[u]] + 1
        A = np.zeros((n, d))
        P = np.empty((n, d, d))
        P[j] = eye
        maxdepth = depth.max()
        by_depth = np.argsort(depth, kind="stable")
        bounds = np.searchsorted(depth[by_depth], np.arange(maxdepth + 2))
        for lvl in range(1, maxdepth + 1):
            nodes = by_depth[bounds[lvl]: bounds[lvl + 1]]
            parents = pred[nodes]
            eid = edge_id[parents, nodes]
            A[nodes] = np.einsum("nab,nb->na", P[parents], proj[eid]) + A[parents]
            P[nodes] = P[parents] @ R[eid]
        unfolded[:, j] = np.linalg.norm(A, axis=1)

    mat = (unfolded + unfolded.T) / 2.0
    np.fill_diagonal(mat, 0.0)
    return GeodesicDistances(mat, (lengths + lengths.T) / 2.0)
