"""Alternating retrieval / label-propagation loop and label transfer for annotation."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import mrf
from .features import DEFAULT_FEATURES, FeatureConfig, build_codebook, global_feature, region_features, to_lab
from .semantics import build_affinity, constraint_matrix, dissimilarity_diag
from .sparse_coder import CoderConfig, select_references, solve_code
from .superpixel import DEFAULT_COMPACTNESS, DEFAULT_TARGET_COUNT, adjacency, slic_segment

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    beta: float = 0.1
    gamma: float = 0.2
    lam: float = 1.0
    p: int = 10
    q: int = 20
    sigma: float = 1e-5
    max_iters: int = 1000
    superpixels: int = DEFAULT_TARGET_COUNT
    compactness: float = DEFAULT_COMPACTNESS
    unary_mode: str = "affinity"
    max_em_iters: int = 10
    threshold: float = 0.0
    kappa: float = 1.0
    annotate_k: int = 10
    annotate_n: int = 3
    exclude_self: bool = True

    def __post_init__(self):
        if self.max_em_iters < 1:
            raise ValueError("max_em_iters must be at least 1")
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must be at least 1")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.unary_mode not in mrf.UNARY_MODES:
            raise ValueError(f"unknown unary mode {self.unary_mode!r}")

    def coder(self):
        return CoderConfig(beta=self.beta, gamma=self.gamma, sigma=self.sigma, max_iters=self.max_iters)

    @classmethod
    def from_file(cls, path):
        raw = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self):
        return asdict(self)


@dataclass
class ParseResult:
    assignment: mrf.LabelAssignment
    decomposition: object
    label_set_history: list
    references_per_iter: list
    codes: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    swap_traces: list = field(default_factory=list)  # accepted swap energies per round
    em_iterations: int = 0
    converged: bool = False
    graph: object = None
    unary: object = None

    def pixel_labels(self):
        return self.assignment.y[self.decomposition.segment_map]


@dataclass
class AnnotationResult:
    z: np.ndarray
    ranked_labels: list
    top_n: list
    references: tuple = ()
    weights: tuple = ()
    short: bool = False  # fewer than K positive coefficients were available


class PreparedDatabase:
    """Database plus its codebook, semantic affinity and lazily built superpixels."""

    def __init__(self, database, config=RunConfig(), features=DEFAULT_FEATURES, codebook=None):
        self.database = database
        self.config = config
        self.features = features
        self.codebook = codebook if codebook is not None else build_codebook(database, features)
        self.affinity = build_affinity(database)
        self._regions = {}

    def __len__(self):
        return len(self.database)

    def regions(self, k):
        """(decomposition, region descriptors) of database image ``k``."""
        if k not in self._regions:
            im = self.database.images[k]
            dec = slic_segment(im.pixels, self.config.superpixels, self.config.compactness)
            self._regions[k] = (dec, region_features(im.pixels, dec, self.features))
        return self._regions[k]


def _prepare(database, config):
    if isinstance(database, PreparedDatabase):
        return database
    return PreparedDatabase(database, config)


def _exclusions(prepared, identifier, config):
    if identifier is None or not config.exclude_self:
        return ()
    k = prepared.database.index_of(identifier)
    return () if k is None else (k,)


def retrieve(target, database, config=RunConfig(), label_set=None, identifier=None, lam=None):
    """One retrieval step: sparse code of ``target`` and its reference set.

    ``label_set`` defaults to every database label.
    """
    prepared = _prepare(database, config)
    pixels = getattr(target, "pixels", target)
    F_t = global_feature(pixels, prepared.features)
    if label_set is None:
        label_set = frozenset(range(prepared.database.n_labels))
    d = dissimilarity_diag(label_set, prepared.database)
    Lam = constraint_matrix(prepared.affinity, d, config.lam if lam is None else lam)
    code = solve_code(F_t, prepared.codebook, Lam, config.coder())
    refs = select_references(code, config.p, config.threshold,
                             exclude=_exclusions(prepared, identifier, config))
    return code, refs


def infer_labels(target, database, config=RunConfig(), identifier=None):
    """Segment ``target`` by alternating reference retrieval and graph-cut labelling.

    Stops when the predicted label set repeats the previous one, when a
    set seen earlier recurs (the lowest-energy labelling is kept), or
    after ``config.max_em_iters`` rounds.
    """
    prepared = _prepare(database, config)
    db = prepared.database
    pixels = getattr(target, "pixels", target)
    if identifier is None:
        identifier = getattr(target, "identifier", None)

    F_t = global_feature(pixels, prepared.features)
    dec = slic_segment(pixels, config.superpixels, config.compactness)
    feats = region_features(pixels, dec, prepared.features, lab=to_lab(pixels))
    pairs = adjacency(dec)
    exclude = _exclusions(prepared, identifier, config)

    label_set = frozenset(range(db.n_labels))
    history = [label_set]
    seen = {label_set}
    result = ParseResult(None, dec, history, [])
    rounds = []
    for n in range(config.max_em_iters):
        d = dissimilarity_diag(label_set, db)
        Lam = constraint_matrix(prepared.affinity, d, config.lam)
        code = solve_code(F_t, prepared.codebook, Lam, config.coder())
        refs = select_references(code, config.p, config.threshold, exclude=exclude)

        ref_feats = [prepared.regions(k)[1] for k in refs.indices]
        ref_tags = [db.images[k].tags for k in refs.indices]
        graph = mrf.build_graph(feats, pairs, ref_feats, ref_tags, config.q, refs.indices)
        unary = mrf.unary_table(graph, refs.weights, config.unary_mode, config.kappa)
        assignment = mrf.alpha_beta_swap(graph, unary, mrf.argmin_assignment(unary))
        energy = mrf.total_energy(assignment, graph, unary)

        result.codes.append(code)
        result.references_per_iter.append(refs)
        result.energies.append(energy)
        result.swap_traces.append(assignment.energies)
        rounds.append((energy, assignment, graph, unary))
        new_set = assignment.label_set
        history.append(new_set)
        result.em_iterations = n + 1
        if new_set == label_set:
            result.converged = True
            break
        if new_set in seen:
            log.warning("label set oscillates; keeping the lowest-energy labelling")
            break
        seen.add(new_set)
        label_set = new_set
    else:
        log.warning("EM stopped after max_em_iters=%d without a fixed label set", config.max_em_iters)

    if result.converged:
        _, result.assignment, result.graph, result.unary = rounds[-1]
    else:
        best = min(range(len(rounds)), key=lambda i: rounds[i][0])
        _, result.assignment, result.graph, result.unary = rounds[best]
    return result


def label_scores(indices, weights, database, weighted=True):
    """z = sum_i pi_i * l_i over the given references' label indicators."""
    z = np.zeros(database.n_labels)
    for k, w in zip(indices, weights):
        for lab in database.images[k].tags:
            z[lab] += w if weighted else 1.0
    return z


def annotate(test_image, database, K=None, n=None, weighted=True, config=RunConfig(), identifier=None):
    """Rank database labels for ``test_image`` by coefficient-weighted transfer.

    Retrieval runs with the dissimilarity term switched off. When fewer
    than ``K`` coefficients are positive all positive ones are used and
    the result is flagged ``short``.
    """
    from .evaluation import rank_labels

    prepared = _prepare(database, config)
    K = config.annotate_k if K is None else K
    n = config.annotate_n if n is None else n
    if not 1 <= K <= len(prepared):
        raise ValueError(f"K must lie in 1..{len(prepared)}")
    if identifier is None:
        identifier = getattr(test_image, "identifier", None)
    annotate_cfg = replace(config, p=K)
    _, refs = retrieve(test_image, prepared, annotate_cfg, identifier=identifier, lam=0.0)
    short = len(refs) < K
    if short:
        log.info("only %d positive coefficients for K=%d", len(refs), K)
    z = label_scores(refs.indices, refs.weights, prepared.database, weighted)
    ranked = rank_labels(z)
    return AnnotationResult(z, ranked, ranked[:n], refs.indices, refs.weights, short)
