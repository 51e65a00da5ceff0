"""Label propagation graph over target superpixels and its swap-move solver.

Vertices are target superpixels. Inner edges join spatially adjacent
target superpixels and carry the smoothness weight ``||f_i - f_j||``.
Outer edges join each target superpixel to its ``q`` nearest superpixels
(in descriptor space) inside every reference image; their mean length is
the density ``rho(i, k)`` feeding the unary cost.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .maxflow import FlowNetwork, max_flow_min_cut

UNARY_MODES = ("affinity", "literal")


@dataclass(frozen=True, eq=False)
class PropagationGraph:
    features: np.ndarray      # (n_t, d) target descriptors
    inner_edges: np.ndarray   # (E, 2) with i < j
    inner_weights: np.ndarray  # (E,)
    outer_index: tuple        # per reference: (n_t, q_k) reference segment ids
    outer_dist: tuple         # per reference: (n_t, q_k) descriptor distances
    reference_indices: tuple  # database index of each reference
    reference_tags: tuple     # label set of each reference
    candidate_labels: tuple   # sorted union of reference tags

    @property
    def n_vertices(self):
        return self.features.shape[0]

    @property
    def n_references(self):
        return len(self.outer_index)

    def densities(self):
        """(n_t, n_refs) matrix of mean outer-edge lengths."""
        if not self.outer_dist:
            return np.zeros((self.n_vertices, 0))
        return np.stack([d.mean(axis=1) for d in self.outer_dist], axis=1)


@dataclass(frozen=True, eq=False)
class UnaryTable:
    cost: np.ndarray  # (n_t, n_labels)
    labels: tuple     # label id of each column

    def column(self, label):
        return self.labels.index(label)


@dataclass(frozen=True, eq=False)
class LabelAssignment:
    y: np.ndarray
    energies: tuple = ()  # accepted energies when produced by alpha_beta_swap

    @property
    def label_set(self):
        return frozenset(int(v) for v in np.unique(self.y))


def build_graph(target_features, inner_pairs, reference_features, reference_tags, q=20,
                reference_indices=None):
    """Assemble inner and outer edges.

    ``reference_features`` is a list of (n_k, d) descriptor matrices, one
    per selected reference, aligned with ``reference_tags``. Nearest-
    neighbour ties keep the lower segment index.
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    if not reference_features:
        raise ValueError("at least one reference is required")
    feats = np.asarray(target_features, dtype=np.float64)
    pairs = np.asarray(inner_pairs, dtype=np.int64).reshape(-1, 2)
    weights = np.linalg.norm(feats[pairs[:, 0]] - feats[pairs[:, 1]], axis=1)

    idx_list, dist_list = [], []
    for k, rf in enumerate(reference_features):
        rf = np.asarray(rf, dtype=np.float64)
        if rf.shape[0] == 0:
            raise ValueError(f"reference {k} has no segments")
        qk = min(q, rf.shape[0])
        dist = cdist(feats, rf)
        order = np.argsort(dist, axis=1, kind="stable")[:, :qk]
        idx_list.append(order)
        dist_list.append(np.take_along_axis(dist, order, axis=1))

    tags = tuple(frozenset(t) for t in reference_tags)
    if reference_indices is None:
        reference_indices = tuple(range(len(tags)))
    candidates = tuple(sorted(set().union(*tags)))
    return PropagationGraph(feats, pairs, weights, tuple(idx_list), tuple(dist_list),
                            tuple(int(i) for i in reference_indices), tags, candidates)


def density(vertex, reference, graph):
    """Mean outer-edge length from ``vertex`` into reference ``reference`` (graph order)."""
    return float(graph.outer_dist[reference][vertex].mean())


def unary_table(graph, weights, mode="affinity", kappa=1.0, tau=None):
    """Per-vertex, per-candidate-label cost from reference densities.

    ``weights`` holds one coefficient per graph reference, or a full
    database-length masked coefficient vector.

    literal:  cost(i, l) = sum_k w_k rho_ik [l in L_k]
    affinity: cost(i, l) = sum_k w_k (1 - exp(-rho_ik^2 / 2 tau^2)) [l in L_k]
                           + kappa sum_k w_k [l not in L_k]
    with ``tau`` defaulting to the median observed density.
    """
    if mode not in UNARY_MODES:
        raise ValueError(f"unknown unary mode {mode!r}")
    labels = graph.candidate_labels
    if not labels:
        raise ValueError("empty candidate label set")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[0] != graph.n_references:
        w = w[list(graph.reference_indices)]
    rho = graph.densities()
    member = np.array([[lab in tags for lab in labels] for tags in graph.reference_tags], dtype=np.float64)

    if mode == "literal":
        cost = (rho * w) @ member
    else:
        if tau is None:
            tau = float(np.median(rho)) if rho.size else 0.0
        if tau > 0:
            dissim = 1.0 - np.exp(-rho ** 2 / (2.0 * tau ** 2))
        else:
            dissim = (rho > 0).astype(np.float64)
        cost = (dissim * w) @ member + kappa * (w @ (1.0 - member))[None, :]
    return UnaryTable(cost, tuple(labels))


def pairwise(f_i, f_j, y_i, y_j):
    if y_i == y_j:
        return 0.0
    return float(np.linalg.norm(np.asarray(f_i) - np.asarray(f_j)))


def _columns(y, unary):
    pos = {lab: c for c, lab in enumerate(unary.labels)}
    try:
        return np.array([pos[int(v)] for v in np.asarray(y)], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]} is not a candidate label") from None


def _energy_cols(cols, cost, edges, weights):
    e = cost[np.arange(len(cols)), cols].sum()
    if len(edges):
        e += weights[cols[edges[:, 0]] != cols[edges[:, 1]]].sum()
    return float(e)


def total_energy(assignment, graph, unary):
    y = getattr(assignment, "y", assignment)
    return _energy_cols(_columns(y, unary), unary.cost, graph.inner_edges, graph.inner_weights)


def argmin_assignment(unary):
    """Per-vertex cheapest label; ties keep the lower label."""
    cols = np.argmin(unary.cost, axis=1)
    return LabelAssignment(np.asarray(unary.labels)[cols])


def _neighbour_lists(n, edges, weights):
    nbrs = [[] for _ in range(n)]
    for (i, j), w in zip(edges, weights):
        nbrs[i].append((int(j), float(w)))
        nbrs[j].append((int(i), float(w)))
    return nbrs


def swap_move(cols, a, b, cost, nbrs):
    """Optimal relabelling between columns ``a`` and ``b``; returns new columns."""
    members = np.flatnonzero((cols == a) | (cols == b))
    if members.size == 0:
        return cols
    local = {int(p): k for k, p in enumerate(members)}
    n = len(members)
    src, snk = n, n + 1
    net = FlowNetwork(n + 2)
    for k, p in enumerate(members):
        ca, cb = cost[p, a], cost[p, b]
        for q, w in nbrs[p]:
            if q not in local:
                yq = cols[q]
                ca += w * (yq != a)
                cb += w * (yq != b)
            elif local[q] > k:
                net.add_edge(k, local[q], w, w)
        # a common constant drops out of the cut
        base = min(ca, cb)
        if cb - base > 0:
            net.add_edge(src, k, cb - base)
        if ca - base > 0:
            net.add_edge(k, snk, ca - base)
    _, source_side = max_flow_min_cut(net, src, snk)
    out = cols.copy()
    for k, p in enumerate(members):
        out[p] = a if k in source_side else b
    return out


def alpha_beta_swap(graph, unary, initial=None, max_sweeps=100):
    """Minimise unary + Potts-weighted smoothness by alpha-beta swap moves.

    Sweeps over every label pair until a full sweep brings no strict
    improvement. The accepted energy sequence is kept on the result.
    """
    if not unary.labels:
        raise ValueError("empty candidate label set")
    cost = unary.cost
    edges, weights = graph.inner_edges, graph.inner_weights
    if initial is None:
        initial = argmin_assignment(unary)
    cols = _columns(getattr(initial, "y", initial), unary)
    nbrs = _neighbour_lists(len(cols), edges, weights)
    energy = _energy_cols(cols, cost, edges, weights)
    history = [energy]
    n_labels = len(unary.labels)
    for _ in range(max_sweeps):
        improved = False
        for a, b in itertools.combinations(range(n_labels), 2):
            cand = swap_move(cols, a, b, cost, nbrs)
            e = _energy_cols(cand, cost, edges, weights)
            if e < energy - 1e-12 * max(1.0, abs(energy)):
                cols, energy = cand, e
                history.append(energy)
                improved = True
        if not improved:
            break
    return LabelAssignment(np.asarray(unary.labels)[cols], tuple(history))
