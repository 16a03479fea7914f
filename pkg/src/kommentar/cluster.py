"""Per-provision density clustering of keyword embeddings.

The pipeline groups records by semantic similarity of their keywords:
Euclidean distances on L2-normalized embeddings (monotone in cosine
distance) feed a density hierarchy built from mutual reachability, a
minimum spanning tree, and a condensed tree from which flat clusters are
extracted by excess-of-mass stability. Points that never join a cluster of
at least ``min_cluster_size`` members are noise and are not processed
further.

Everything here is deterministic: all ties (nearest neighbors, tree edges,
headline selection, cluster ordering) break by ascending index or record id,
and the input records are brought into canonical order first, so shuffling
the input changes nothing.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .enrich import Record
from .gateway import Embedding
from .provisions import ProvisionRef, parse_provision

logger = logging.getLogger(__name__)

N_HEADLINE_RECORDS = 5

# Density levels are 1/distance; coincident points would give infinite
# density, so levels are capped to keep stability sums finite.
_LAMBDA_CAP = 1e12


class ClusterParamError(ValueError):
    """Parameters inconsistent with the input size or each other."""


@dataclass(frozen=True)
class ClusterParams:
    """min_samples defaults to min_cluster_size; the metric is fixed."""

    min_cluster_size: int = 20
    min_samples: int | None = None
    metric: str = "euclidean-on-normalized"

    def __post_init__(self) -> None:
        if self.min_cluster_size < 2:
            raise ClusterParamError(
                f"min_cluster_size must be >= 2, got {self.min_cluster_size}")
        if self.min_samples is not None and self.min_samples < 1:
            raise ClusterParamError(
                f"min_samples must be >= 1, got {self.min_samples}")
        if self.metric != "euclidean-on-normalized":
            raise ClusterParamError(f"unsupported metric {self.metric!r}")

    def effective_min_samples(self) -> int:
        return self.min_samples if self.min_samples is not None else self.min_cluster_size

    def to_dict(self) -> dict:
        return {"min_cluster_size": self.min_cluster_size,
                "min_samples": self.min_samples, "metric": self.metric}

    @classmethod
    def from_dict(cls, data: dict) -> ClusterParams:
        return cls(min_cluster_size=int(data.get("min_cluster_size", 20)),
                   min_samples=(None if data.get("min_samples") is None
                                else int(data["min_samples"])),
                   metric=data.get("metric", "euclidean-on-normalized"))


@dataclass(frozen=True)
class Cluster:
    provision: ProvisionRef
    index: int
    member_record_ids: frozenset[str]
    centroid: Embedding
    headline_record_ids: tuple[str, ...]
    stability: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "member_record_ids": sorted(self.member_record_ids),
            "centroid": self.centroid.to_list(),
            "headline_record_ids": list(self.headline_record_ids),
            "stability": self.stability,
        }


@dataclass(frozen=True)
class ClusteringResult:
    provision: ProvisionRef
    clusters: tuple[Cluster, ...]
    noise_record_ids: frozenset[str]
    params: ClusterParams
    input_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "provision": self.provision.canonical(),
            "params": self.params.to_dict(),
            "input_digest": self.input_digest,
            "clusters": [c.to_dict() for c in self.clusters],
            "noise_record_ids": sorted(self.noise_record_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> ClusteringResult:
        provision = parse_provision(data["provision"])
        params = ClusterParams.from_dict(data["params"])
        clusters = tuple(
            Cluster(
                provision=provision,
                index=int(c["index"]),
                member_record_ids=frozenset(c["member_record_ids"]),
                centroid=Embedding(tuple(float(v) for v in c["centroid"]),
                                   normalized=True),
                headline_record_ids=tuple(c["headline_record_ids"]),
                stability=float(c["stability"]),
            )
            for c in data["clusters"])
        return cls(provision=provision, clusters=clusters,
                   noise_record_ids=frozenset(data["noise_record_ids"]),
                   params=params, input_digest=data.get("input_digest", ""))


def _as_matrix(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        out = np.asarray(points, dtype=np.float64)
    else:
        out = np.asarray([p.vector if isinstance(p, Embedding) else p
                          for p in points], dtype=np.float64)
    if out.ndim != 2:
        raise ClusterParamError(f"points must form an (n, d) matrix, got {out.shape}")
    return out


def _pairwise(matrix: np.ndarray) -> np.ndarray:
    d = cdist(matrix, matrix)
    np.fill_diagonal(d, 0.0)
    return d


def core_distances(points, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest neighbor, self excluded."""
    matrix = _as_matrix(points)
    n = matrix.shape[0]
    if k < 1:
        raise ClusterParamError(f"k must be >= 1, got {k}")
    if k > n - 1:
        raise ClusterParamError(f"k={k} needs at least {k + 1} points, got {n}")
    d = _pairwise(matrix)
    # Row-sorted distances carry the self distance 0 in column 0, so the
    # k-th neighbor sits at column k.
    return np.sort(d, axis=1)[:, k]


def mutual_reachability(points, core: np.ndarray) -> np.ndarray:
    """max(core(a), core(b), d(a, b)) off the diagonal, 0 on it."""
    matrix = _as_matrix(points)
    core = np.asarray(core, dtype=np.float64)
    d = _pairwise(matrix)
    m = np.maximum(d, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(m, 0.0)
    return m


def build_mst(matrix: np.ndarray) -> list[tuple[int, int, float]]:
    """Minimum spanning tree of a symmetric distance matrix (Prim, dense O(n^2)).

    Per-provision record counts stay in the low thousands, so a dense scan
    beats maintaining a spatial index. Ties resolve to the lowest index.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ClusterParamError(f"distance matrix must be square, got {matrix.shape}")
    if n < 2:
        raise ClusterParamError("minimum spanning tree needs at least 2 points")
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best_dist = matrix[0].copy()
    best_from = np.zeros(n, dtype=np.int64)
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        candidate = np.where(in_tree, np.inf, best_dist)
        j = int(np.argmin(candidate))
        edges.append((int(best_from[j]), j, float(best_dist[j])))
        in_tree[j] = True
        closer = (matrix[j] < best_dist) & ~in_tree
        best_dist[closer] = matrix[j][closer]
        best_from[closer] = j
    return edges


def _level(distance: float) -> float:
    if distance <= 0.0:
        return _LAMBDA_CAP
    return min(1.0 / distance, _LAMBDA_CAP)


@dataclass
class _CondensedCluster:
    birth: float
    children: list[int] = field(default_factory=list)
    exits: list[tuple[int, float]] = field(default_factory=list)

    def stability(self) -> float:
        return sum(lam - self.birth for _, lam in self.exits)


def condense_and_extract(
    mst_edges: list[tuple[int, int, float]],
    min_cluster_size: int,
    n: int,
) -> tuple[np.ndarray, dict[int, float]]:
    """Flat cluster labels from an MST over mutual-reachability distances.

    Builds the single-linkage hierarchy, condenses it by dropping splits
    whose smaller side has fewer than min_cluster_size points, and selects
    the set of non-overlapping condensed clusters maximizing total
    stability, where a cluster's stability accumulates, for each point, the
    density span between the cluster's birth level and the level at which
    the point leaves it. Points outside every selected cluster get label -1.

    Returns (labels, stability-per-label). Labels are arbitrary non-negative
    ids; callers re-index for presentation.
    """
    if n < 2 or len(mst_edges) != n - 1:
        raise ClusterParamError(f"expected {n - 1} MST edges for n={n}, "
                                f"got {len(mst_edges)}")

    # Single-linkage dendrogram via union-find over weight-sorted edges.
    edges = sorted(mst_edges, key=lambda e: (e[2], e[0], e[1]))
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    comp_node = list(range(n))
    comp_size = [1] * n
    left: list[int] = []
    right: list[int] = []
    dist: list[float] = []
    for a, b, w in edges:
        ra, rb = find(a), find(b)
        node = n + len(left)
        left.append(comp_node[ra])
        right.append(comp_node[rb])
        dist.append(w)
        parent[ra] = rb
        comp_node[rb] = node
        comp_size[rb] = comp_size[ra] + comp_size[rb]
    root = n + len(left) - 1

    # Dendrogram nodes are created children-first, so sizes fill in order.
    node_size_memo = [0] * len(left)
    for i in range(len(left)):
        lo, hi = left[i], right[i]
        node_size_memo[i] = ((1 if lo < n else node_size_memo[lo - n])
                             + (1 if hi < n else node_size_memo[hi - n]))

    def node_size(node: int) -> int:
        return 1 if node < n else node_size_memo[node - n]

    def points_under(node: int) -> list[int]:
        out: list[int] = []
        stack = [node]
        while stack:
            x = stack.pop()
            if x < n:
                out.append(x)
            else:
                stack.append(left[x - n])
                stack.append(right[x - n])
        return out

    clusters: list[_CondensedCluster] = [_CondensedCluster(birth=0.0)]
    stack: list[tuple[int, int]] = [(root, 0)]
    while stack:
        node, cid = stack.pop()
        lam = _level(dist[node - n])
        lo, hi = left[node - n], right[node - n]
        size_lo, size_hi = node_size(lo), node_size(hi)
        big_lo = size_lo >= min_cluster_size
        big_hi = size_hi >= min_cluster_size
        if big_lo and big_hi:
            # True split: every remaining member leaves this cluster here and
            # two new condensed clusters are born.
            clusters[cid].exits.extend((p, lam) for p in points_under(node))
            for child in (lo, hi):
                clusters.append(_CondensedCluster(birth=lam))
                clusters[cid].children.append(len(clusters) - 1)
                stack.append((child, len(clusters) - 1))
        elif big_lo or big_hi:
            # The cluster survives through the larger side; the runt falls out.
            runt, keep = (hi, lo) if big_lo else (lo, hi)
            clusters[cid].exits.extend((p, lam) for p in points_under(runt))
            stack.append((keep, cid))
        else:
            # Both sides are too small to continue: the cluster ends here.
            clusters[cid].exits.extend((p, lam) for p in points_under(node))

    # Excess-of-mass selection, children before parents; ties keep children.
    best: dict[int, float] = {}
    chosen: dict[int, set[int]] = {}
    for cid in range(len(clusters) - 1, -1, -1):
        cluster = clusters[cid]
        own = cluster.stability()
        if not cluster.children:
            best[cid], chosen[cid] = own, {cid}
            continue
        child_total = sum(best[ch] for ch in cluster.children)
        if own > child_total:
            best[cid], chosen[cid] = own, {cid}
        else:
            best[cid] = child_total
            chosen[cid] = set().union(*(chosen[ch] for ch in cluster.children))

    labels = np.full(n, -1, dtype=np.int64)
    stabilities: dict[int, float] = {}
    for cid in sorted(chosen[0]):
        for point, _ in clusters[cid].exits:
            labels[point] = cid
        stabilities[cid] = clusters[cid].stability()
    return labels, stabilities


def _headline_ids(member_ids: list[str], vectors: np.ndarray,
                  centroid: np.ndarray) -> tuple[str, ...]:
    dists = np.linalg.norm(vectors - centroid, axis=1)
    order = sorted(range(len(member_ids)), key=lambda i: (dists[i], member_ids[i]))
    return tuple(member_ids[i] for i in order[:N_HEADLINE_RECORDS])


def records_digest(records: list[Record]) -> str:
    """Digest of the clustering input, for staleness detection."""
    payload = [
        (r.record_id, r.keyword, list(r.embedding.vector) if r.embedding else None)
        for r in sorted(records, key=lambda r: r.record_id)
    ]
    return hashlib.sha256(
        json.dumps(payload, ensure_ascii=False).encode("utf-8")).hexdigest()


def run_clustering(records: list[Record], params: ClusterParams) -> ClusteringResult:
    """Cluster one provision's relevant records by keyword embedding.

    Fewer records than min_cluster_size yields an empty result with every
    record id in the noise set. Clusters come back ordered by descending
    member count, ties by ascending smallest member record id.
    """
    provisions = {r.provision for r in records}
    if len(provisions) > 1:
        raise ClusterParamError(
            f"records span several provisions: {sorted(p.canonical() for p in provisions)}")
    if not records:
        raise ClusterParamError("run_clustering needs at least one record")
    provision = next(iter(provisions))

    usable = sorted((r for r in records if r.relevant), key=lambda r: r.record_id)
    for r in usable:
        if r.embedding is None or not r.embedding.normalized:
            raise ClusterParamError(f"record {r.record_id} lacks a normalized embedding")
    dims = {r.embedding.dim for r in usable}
    if len(dims) > 1:
        raise ClusterParamError(f"mixed embedding dims: {sorted(dims)}")
    digest = records_digest(usable)

    n = len(usable)
    if n < params.min_cluster_size:
        logger.warning("%s: only %d records (< min_cluster_size %d); all noise",
                       provision.canonical(), n, params.min_cluster_size)
        return ClusteringResult(provision, (), frozenset(r.record_id for r in usable),
                                params, digest)

    matrix = _as_matrix([r.embedding for r in usable])
    k = min(params.effective_min_samples(), n - 1)
    core = core_distances(matrix, k)
    mreach = mutual_reachability(matrix, core)
    mst = build_mst(mreach)
    labels, stabilities = condense_and_extract(mst, params.min_cluster_size, n)

    grouped: dict[int, list[int]] = {}
    for i, label in enumerate(labels):
        if label >= 0:
            grouped.setdefault(int(label), []).append(i)

    raw_clusters = []
    for label, indices in grouped.items():
        member_ids = [usable[i].record_id for i in indices]
        if len(member_ids) < params.min_cluster_size:
            raise AssertionError(
                f"extracted cluster of size {len(member_ids)} violates the "
                f"min_cluster_size={params.min_cluster_size} floor")
        vectors = matrix[indices]
        centroid_vec = vectors.mean(axis=0)
        centroid = Embedding.from_raw(centroid_vec)
        headline = _headline_ids(member_ids, vectors,
                                 np.asarray(centroid.vector))
        raw_clusters.append((member_ids, centroid, headline,
                             stabilities.get(label, 0.0)))

    raw_clusters.sort(key=lambda c: (-len(c[0]), min(c[0])))
    clusters = tuple(
        Cluster(provision=provision, index=i, member_record_ids=frozenset(member_ids),
                centroid=centroid, headline_record_ids=headline, stability=stability)
        for i, (member_ids, centroid, headline, stability) in enumerate(raw_clusters))
    clustered = {rid for c in clusters for rid in c.member_record_ids}
    noise = frozenset(r.record_id for r in usable) - clustered
    return ClusteringResult(provision, clusters, frozenset(noise), params, digest)
