"""Approximate candidate pooling for large corpora.

PCA reduces embedding dimensionality, seeded k-means partitions the
reduced vectors, and query routing accumulates nearest clusters into a
bounded candidate pool. Routing distances live in the reduced space; the
selection kernels always score in the original space, so routing is the
only approximate step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import EmbeddingMatrix, read_demb, write_demb
from .errors import DataFormatError, ParameterError

DEFAULT_CLUSTER_CAP = 10_000
DEFAULT_REDUCED_DIM = 128


@dataclass
class PcaModel:
    mean: np.ndarray          # (d,)
    components: np.ndarray    # (d_reduced, d), orthonormal rows

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def d_reduced(self) -> int:
        return self.components.shape[0]


@dataclass
class KMeansModel:
    centroids: np.ndarray     # (k, d_reduced)
    assignments: np.ndarray   # (rows,) uint32
    inertia: float
    inertia_history: list[float] | None = None

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


@dataclass
class ClusterIndex:
    pca: PcaModel
    kmeans: KMeansModel
    members: list[np.ndarray]  # per-cluster corpus row indices, ascending
    cap: int = DEFAULT_CLUSTER_CAP
    seed: int = 0

    @property
    def n_rows(self) -> int:
        return int(self.kmeans.assignments.shape[0])


def choose_k(n_rows: int, cap: int = DEFAULT_CLUSTER_CAP) -> int:
    """Smallest cluster count keeping the average cluster below the cap."""
    if n_rows < 1:
        raise ParameterError(f"n_rows must be >= 1, got {n_rows}")
    if cap < 1:
        raise ParameterError(f"cap must be >= 1, got {cap}")
    return -(-n_rows // cap)


def _sign_normalize(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    return out


def pca_fit(X: EmbeddingMatrix | np.ndarray, d_reduced: int) -> PcaModel:
    """Top-d' principal axes of the centered data, sign-normalized.

    Components come out in descending eigenvalue order; each component's
    largest-magnitude coordinate is made positive so fits are deterministic.
    """
    A = X.vectors if isinstance(X, EmbeddingMatrix) else np.asarray(X)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 2:
        raise ParameterError("PCA needs a 2-D matrix with at least 2 rows")
    rows, dim = A.shape
    if not 1 <= d_reduced <= min(rows, dim):
        raise ParameterError(
            f"d_reduced must be in [1, {min(rows, dim)}], got {d_reduced}")
    mean = A.mean(axis=0)
    centered = A - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] <= 1e-12:
        raise ParameterError("zero-variance input: all rows identical")
    components = _sign_normalize(vt[:d_reduced])
    return PcaModel(mean=mean, components=components)


def pca_transform(model: PcaModel, X: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    """Project rows onto the principal axes; output is not re-normalized."""
    A = X.vectors if isinstance(X, EmbeddingMatrix) else np.asarray(X)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.shape[1] != model.dim:
        raise ParameterError(f"dim mismatch: {A.shape[1]} vs model {model.dim}")
    return (A - model.mean) @ model.components.T


def _assign(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels (ties to the lowest id) and squared distances."""
    x_sq = np.einsum("ij,ij->i", X, X)
    c_sq = np.einsum("ij,ij->i", centroids, centroids)
    d2 = x_sq[:, None] + c_sq[None, :] - 2.0 * (X @ centroids.T)
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)  # argmin returns the first (lowest) id
    return labels.astype(np.uint32), d2[np.arange(X.shape[0]), labels]


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    centroids[0] = X[int(rng.integers(n))]
    d2 = np.einsum("ij,ij->i", X - centroids[0], X - centroids[0])
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # All remaining mass sits on chosen points; spread uniformly.
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[c] = X[idx]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", X - centroids[c], X - centroids[c]))
    return centroids


def kmeans_fit(X: EmbeddingMatrix | np.ndarray, k: int, seed: int = 0,
               max_iter: int = 100, tol: float = 1e-7) -> KMeansModel:
    """Seeded k-means++ initialization followed by Lloyd iterations.

    Iterates until the relative inertia improvement drops below tol or
    max_iter is reached; inertia is non-increasing across iterations and
    the per-iteration values are kept on the model for verification.
    """
    A = X.vectors if isinstance(X, EmbeddingMatrix) else np.asarray(X)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1:
        raise ParameterError("k-means needs a non-empty 2-D matrix")
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(A, k, rng)
    history: list[float] = []
    labels, d2 = _assign(A, centroids)
    inertia = float(d2.sum())
    history.append(inertia)

    for _ in range(max_iter):
        new_centroids = centroids.copy()
        for c in range(k):
            mask = labels == c
            if mask.any():
                new_centroids[c] = A[mask].mean(axis=0)
        # Re-seat any empty cluster on the point farthest from its centroid.
        used = np.bincount(labels, minlength=k) > 0
        if not used.all():
            order = np.argsort(-d2, kind="stable")
            spare = iter(order)
            for c in np.flatnonzero(~used):
                new_centroids[c] = A[next(spare)]
        centroids = new_centroids
        labels, d2 = _assign(A, centroids)
        new_inertia = float(d2.sum())
        history.append(new_inertia)
        if inertia - new_inertia < tol * max(inertia, 1e-12):
            inertia = new_inertia
            break
        inertia = new_inertia

    return KMeansModel(centroids=centroids, assignments=labels,
                       inertia=inertia, inertia_history=history)


def _members_from_assignments(assignments: np.ndarray, k: int) -> list[np.ndarray]:
    return [np.flatnonzero(assignments == c).astype(np.int64) for c in range(k)]


def build_index(X: EmbeddingMatrix, cap: int = DEFAULT_CLUSTER_CAP,
                d_reduced: int = DEFAULT_REDUCED_DIM, seed: int = 0) -> ClusterIndex:
    """Fit PCA + k-means over a corpus matrix and bind the member lists."""
    d_eff = min(d_reduced, X.rows, X.dim)
    pca = pca_fit(X, d_eff)
    reduced = pca_transform(pca, X)
    k = choose_k(X.rows, cap)
    kmeans = kmeans_fit(reduced, k, seed=seed)
    members = _members_from_assignments(kmeans.assignments, k)
    return ClusterIndex(pca=pca, kmeans=kmeans, members=members, cap=cap, seed=seed)


def route_query(index: ClusterIndex, query, pool_target: int) -> list[int]:
    """Candidate pool for a query: nearest clusters until the target size.

    Clusters are visited in ascending centroid distance (reduced space),
    accumulating members until the pool reaches min(pool_target, corpus
    size). The union comes back in corpus row order.
    """
    if index.n_rows == 0:
        raise ParameterError("index is empty")
    if pool_target < 1:
        raise ParameterError(f"pool_target must be >= 1, got {pool_target}")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != index.pca.dim:
        raise ParameterError(
            f"query dim {q.shape[0]} does not match index dim {index.pca.dim}")
    q_red = pca_transform(index.pca, q.reshape(1, -1))[0]
    dists = np.linalg.norm(index.kmeans.centroids - q_red, axis=1)
    target = min(pool_target, index.n_rows)
    pool: list[np.ndarray] = []
    size = 0
    for c in np.argsort(dists, kind="stable"):
        pool.append(index.members[int(c)])
        size += len(index.members[int(c)])
        if size >= target:
            break
    merged = np.concatenate(pool) if pool else np.zeros(0, dtype=np.int64)
    return sorted(int(i) for i in merged)


def save_index(index: ClusterIndex, directory: str | Path) -> None:
    """Persist to a directory: pca.demb (mean as row 0), centroids.demb,
    assignments.u32, meta.json."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    pca_rows = np.vstack([index.pca.mean.reshape(1, -1), index.pca.components])
    write_demb(d / "pca.demb", pca_rows)
    write_demb(d / "centroids.demb", index.kmeans.centroids)
    (d / "assignments.u32").write_bytes(
        index.kmeans.assignments.astype("<u4").tobytes())
    meta = {
        "k": int(index.kmeans.k),
        "d_reduced": int(index.pca.d_reduced),
        "cap": int(index.cap),
        "seed": int(index.seed),
        "inertia": float(index.kmeans.inertia),
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_index(directory: str | Path) -> ClusterIndex:
    d = Path(directory)
    try:
        meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataFormatError(f"{d}: missing meta.json") from exc
    pca_rows = read_demb(d / "pca.demb").astype(np.float64)
    d_reduced = int(meta["d_reduced"])
    if pca_rows.shape[0] != d_reduced + 1:
        raise DataFormatError(
            f"{d}/pca.demb: expected {d_reduced + 1} rows, got {pca_rows.shape[0]}")
    pca = PcaModel(mean=pca_rows[0], components=pca_rows[1:])
    centroids = read_demb(d / "centroids.demb").astype(np.float64)
    if centroids.shape != (int(meta["k"]), d_reduced):
        raise DataFormatError(f"{d}/centroids.demb: shape mismatch with meta")
    raw = (d / "assignments.u32").read_bytes()
    assignments = np.frombuffer(raw, dtype="<u4")
    if (assignments >= meta["k"]).any():
        raise DataFormatError(f"{d}/assignments.u32: cluster id out of range")
    kmeans = KMeansModel(centroids=centroids,
                         assignments=assignments.astype(np.uint32),
                         inertia=float(meta.get("inertia", 0.0)))
    members = _members_from_assignments(kmeans.assignments, kmeans.k)
    return ClusterIndex(pca=pca, kmeans=kmeans, members=members,
                        cap=int(meta["cap"]), seed=int(meta["seed"]))
