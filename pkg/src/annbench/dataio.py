"""Dataset files: HDF5 container, synthetic generators, ground truth.

A dataset file holds four arrays (``train``, ``test``, ``neighbors``,
``distances``) plus string attributes, the same layout as the published
benchmark datasets so those can be imported unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import h5py
import numpy as np

from .core import (
    Metric,
    PointKind,
    as_bits,
    as_dense,
    as_metric,
    brute_force_knn,
    point_kind_for,
)
from .errors import FormatError, UsageError, ValidationError

ARRAY_NAMES = ("train", "test", "neighbors", "distances")

# Relative tolerance for checking stored distances against recomputation.
DIST_RTOL = 1e-6


@dataclass
class DatasetFile:
    """In-memory form of one dataset container."""

    name: str
    metric: Metric
    point_kind: PointKind
    train: np.ndarray
    test: np.ndarray
    neighbors: np.ndarray
    distances: np.ndarray
    attributes: dict[str, str] = field(default_factory=dict)

    @property
    def k_star(self) -> int:
        return int(self.neighbors.shape[1])

    def validate(self) -> None:
        """Check structural invariants; raise ValidationError on the first hit.

        Recomputes every stored neighbor distance from the raw points, so
        cost is O(m * k_star) distance evaluations.
        """
        n = self.train.shape[0]
        m = self.test.shape[0]
        if self.train.ndim != 2 or self.test.ndim != 2:
            raise ValidationError("train and test must be 2-d arrays")
        if self.train.shape[1] != self.test.shape[1]:
            raise ValidationError(
                f"dimension mismatch: train has d={self.train.shape[1]}, "
                f"test has d={self.test.shape[1]}")
        if self.neighbors.shape != self.distances.shape:
            raise ValidationError("neighbors and distances shapes differ")
        if self.neighbors.shape[0] != m:
            raise ValidationError(
                f"{self.neighbors.shape[0]} ground-truth rows for {m} queries")
        if point_kind_for(self.metric) is not self.point_kind:
            raise ValidationError(
                f"metric {self.metric.value} does not go with "
                f"point kind {self.point_kind.value}")

        nb = self.neighbors
        if nb.min(initial=0) < 0 or nb.max(initial=-1) >= n:
            raise ValidationError("neighbor id out of range")
        d = self.distances
        if np.any(np.diff(d, axis=1) < 0):
            row = int(np.where(np.any(np.diff(d, axis=1) < 0, axis=1))[0][0])
            raise ValidationError(f"distances not sorted in row {row}")

        from .core import ExactScanner

        scanner = ExactScanner(self.train, self.metric)
        for i in range(m):
            got = scanner.dists(self.test[i])[nb[i]]
            ok = np.isclose(d[i], got, rtol=DIST_RTOL, atol=1e-9)
            if not np.all(ok):
                j = int(np.where(~ok)[0][0])
                raise ValidationError(
                    f"stored distance {d[i, j]!r} for query {i} neighbor "
                    f"{int(nb[i, j])} disagrees with recomputed {got[j]!r}")


@dataclass
class GeneratorSpec:
    """Parameters for one synthetic dataset."""

    kind: str
    n: int
    m: int
    d: int
    k_star: int = 100
    seed: int = 0
    metric: Metric = Metric.EUCLIDEAN
    planted_range: tuple[float, float] = (0.1, 0.5)

    def __post_init__(self):
        self.metric = as_metric(self.metric)
        if self.kind not in ("random-uniform", "rand-euclidean"):
            raise UsageError(f"unknown generator kind: {self.kind!r}")
        for label, v in (("n", self.n), ("m", self.m), ("d", self.d),
                         ("k*", self.k_star)):
            if v <= 0:
                raise UsageError(f"{label} must be positive, got {v}")
        if self.k_star > self.n:
            raise UsageError(
                f"ground-truth depth k*={self.k_star} exceeds train size {self.n}")
        if self.kind == "rand-euclidean":
            if self.metric is not Metric.EUCLIDEAN:
                raise UsageError("rand-euclidean generates euclidean data only")
            if self.d % 2 != 0:
                raise UsageError(f"rand-euclidean needs even d, got {self.d}")
            if self.n <= self.k_star * self.m:
                raise UsageError(
                    f"rand-euclidean needs n > k*·m "
                    f"({self.n} <= {self.k_star}*{self.m})")


def write_dataset(ds: DatasetFile, path) -> None:
    ds.validate()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with h5py.File(path, "w") as f:
        for a in ARRAY_NAMES:
            f.create_dataset(a, data=getattr(ds, a))
        f.attrs["metric"] = ds.metric.value
        f.attrs["point_kind"] = ds.point_kind.value
        f.attrs["name"] = ds.name
        for k, v in ds.attributes.items():
            f.attrs[k] = str(v)


def _attr_str(v) -> str:
    return v.decode() if isinstance(v, bytes) else str(v)


def read_dataset(path) -> DatasetFile:
    try:
        f = h5py.File(path, "r")
    except OSError as e:
        raise FormatError(f"cannot open dataset file {path}: {e}") from e
    with f:
        for a in ARRAY_NAMES:
            if a not in f:
                raise FormatError(f"dataset file {path} is missing array {a!r}")
        attrs = {k: _attr_str(v) for k, v in f.attrs.items()}
        for a in ("metric", "point_kind"):
            if a not in attrs:
                raise FormatError(f"dataset file {path} is missing attribute {a!r}")
        metric = as_metric(attrs.pop("metric"))
        kind = PointKind(attrs.pop("point_kind"))
        if point_kind_for(metric) is not kind:
            raise ValidationError(
                f"{path}: metric {metric.value} does not go with "
                f"point kind {kind.value}")
        name = attrs.pop("name", "")
        return DatasetFile(
            name=name,
            metric=metric,
            point_kind=kind,
            train=f["train"][()],
            test=f["test"][()],
            neighbors=f["neighbors"][()],
            distances=f["distances"][()],
            attributes=attrs,
        )


def peek_dataset(path):
    """Header-only view: shapes and attributes without loading arrays."""
    try:
        f = h5py.File(path, "r")
    except OSError as e:
        raise FormatError(f"cannot open dataset file {path}: {e}") from e
    with f:
        for a in ARRAY_NAMES:
            if a not in f:
                raise FormatError(f"dataset file {path} is missing array {a!r}")
        attrs = {k: _attr_str(v) for k, v in f.attrs.items()}
        if "metric" not in attrs:
            raise FormatError(f"dataset file {path} is missing attribute 'metric'")
        n, d = f["train"].shape
        m = f["test"].shape[0]
        k_star = f["neighbors"].shape[1]
        return DatasetHeader(
            name=attrs.get("name", ""),
            metric=as_metric(attrs["metric"]),
            n=int(n), d=int(d), m=int(m), k_star=int(k_star),
        )


@dataclass
class DatasetHeader:
    name: str
    metric: Metric
    n: int
    d: int
    m: int
    k_star: int


def import_dataset(path, name: str | None = None) -> DatasetFile:
    """Read a published benchmark file, mapping its attribute names to ours.

    The upstream files label the metric ``distance`` and the point kind
    ``point_type``; everything else matches our layout.
    """
    try:
        f = h5py.File(path, "r")
    except OSError as e:
        raise FormatError(f"cannot open dataset file {path}: {e}") from e
    with f:
        for a in ARRAY_NAMES:
            if a not in f:
                raise FormatError(f"dataset file {path} is missing array {a!r}")
        attrs = {k: _attr_str(v) for k, v in f.attrs.items()}
        raw_metric = attrs.pop("distance", None) or attrs.pop("metric", None)
        if raw_metric is None:
            raise FormatError(
                f"dataset file {path} carries neither a 'distance' nor "
                f"a 'metric' attribute")
        metric = as_metric(raw_metric)
        raw_kind = attrs.pop("point_type", None) or attrs.pop("point_kind", None)
        kind = PointKind(raw_kind) if raw_kind else point_kind_for(metric)
        if point_kind_for(metric) is not kind:
            raise ValidationError(
                f"{path}: metric {metric.value} does not go with "
                f"point kind {kind.value}")
        train = f["train"][()]
        test = f["test"][()]
        if kind is PointKind.BIT:
            train = train.astype(np.uint8)
            test = test.astype(np.uint8)
        return DatasetFile(
            name=name or attrs.pop("name", "") or "imported",
            metric=metric,
            point_kind=kind,
            train=train,
            test=test,
            neighbors=f["neighbors"][()].astype(np.int64),
            distances=f["distances"][()].astype(np.float64),
            attributes=attrs,
        )


def split_train_test(points: np.ndarray, m: int, seed: int):
    """Hold out m query points; the rest keep their original relative order."""
    n = points.shape[0]
    if m >= n:
        raise UsageError(f"cannot hold out {m} of {n} points")
    rng = np.random.default_rng(seed)
    picked = rng.choice(n, size=m, replace=False)
    mask = np.ones(n, dtype=bool)
    mask[picked] = False
    return points[mask], points[picked]


def compute_ground_truth(train, test, k_star: int, metric) -> tuple[np.ndarray, np.ndarray]:
    metric = as_metric(metric)
    m = test.shape[0]
    neighbors = np.empty((m, k_star), dtype=np.int64)
    distances = np.empty((m, k_star), dtype=np.float64)
    for i in range(m):
        row = brute_force_knn(test[i], train, k_star, metric)
        neighbors[i] = row.ids
        distances[i] = row.distances
    return neighbors, distances


def _base_attrs(spec: GeneratorSpec) -> dict[str, str]:
    return {
        "generator": spec.kind,
        "seed": str(spec.seed),
        "k_star": str(spec.k_star),
        "prng": "numpy-pcg64",
    }


def _default_name(spec: GeneratorSpec) -> str:
    return f"{spec.kind}-{spec.metric.value}-{spec.d}-{spec.n}"


def gen_random_uniform(spec: GeneratorSpec, name: str | None = None) -> DatasetFile:
    """n+m i.i.d. points: uniform cube, unit sphere, or fair-coin bits."""
    if spec.kind != "random-uniform":
        raise UsageError(f"expected a random-uniform spec, got {spec.kind!r}")
    root = np.random.SeedSequence(spec.seed)
    gen_seq, split_seq = root.spawn(2)
    rng = np.random.default_rng(gen_seq)
    total = spec.n + spec.m
    if spec.metric is Metric.HAMMING:
        points = (rng.random((total, spec.d)) < 0.5).astype(np.uint8)
        points = as_bits(points)
    elif spec.metric is Metric.ANGULAR:
        points = rng.normal(size=(total, spec.d))
        norms = np.linalg.norm(points, axis=1, keepdims=True)
        points = as_dense(points / norms)
    else:
        points = as_dense(rng.random((total, spec.d)))
    train, test = split_train_test(points, spec.m, split_seq.generate_state(1)[0])
    neighbors, distances = compute_ground_truth(train, test, spec.k_star, spec.metric)
    return DatasetFile(
        name=name or _default_name(spec),
        metric=spec.metric,
        point_kind=point_kind_for(spec.metric),
        train=train,
        test=test,
        neighbors=neighbors,
        distances=distances,
        attributes=_base_attrs(spec),
    )


def _unit_rows(rng, count, dim):
    v = rng.normal(size=(count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def gen_rand_euclidean(spec: GeneratorSpec, name: str | None = None) -> DatasetFile:
    """Planted-neighbor construction with no global structure.

    Base points are (v, 0) for random unit v of dimension d/2. Each of the
    m queries copies one base point and replaces the zero half with a random
    vector of norm 1/sqrt(2), so every base point stays at least 1/sqrt(2)
    away from every query. The k* points planted per query sit at distances
    spaced linearly over planted_range, each along its own random direction.
    """
    if spec.kind != "rand-euclidean":
        raise UsageError(f"expected a rand-euclidean spec, got {spec.kind!r}")
    root = np.random.SeedSequence(spec.seed)
    rng = np.random.default_rng(root)
    half = spec.d // 2
    n_base = spec.n - spec.k_star * spec.m

    base = np.zeros((n_base, spec.d))
    base[:, :half] = _unit_rows(rng, n_base, half)

    template_ids = rng.choice(n_base, size=spec.m, replace=False)
    queries = base[template_ids].copy()
    queries[:, half:] = _unit_rows(rng, spec.m, half) / math.sqrt(2.0)

    lo, hi = spec.planted_range
    radii = np.linspace(lo, hi, spec.k_star)
    planted = np.empty((spec.m * spec.k_star, spec.d))
    for qi in range(spec.m):
        offsets = _unit_rows(rng, spec.k_star, spec.d) * radii[:, None]
        planted[qi * spec.k_star:(qi + 1) * spec.k_star] = queries[qi] + offsets

    train = as_dense(np.vstack([base, planted]))
    test = as_dense(queries)
    neighbors, distances = compute_ground_truth(train, test, spec.k_star, spec.metric)
    attrs = _base_attrs(spec)
    attrs["planted_range"] = f"{lo},{hi}"
    attrs["planted_directions"] = "independent-per-point"
    attrs["n_base"] = str(n_base)
    return DatasetFile(
        name=name or _default_name(spec),
        metric=Metric.EUCLIDEAN,
        point_kind=PointKind.DENSE,
        train=train,
        test=test,
        neighbors=neighbors,
        distances=distances,
        attributes=attrs,
    )


def generate(spec: GeneratorSpec, name: str | None = None) -> DatasetFile:
    if spec.kind == "rand-euclidean":
        return gen_rand_euclidean(spec, name)
    return gen_random_uniform(spec, name)
