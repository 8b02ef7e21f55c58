"""Bounded functions sampled on finite labeled domains, and distances between them.

The central objects are :class:`Domain` (an ordered collection of labeled
sample points, optionally carrying quadrature weights) and
:class:`DiscreteFunction` (finite real values attached to a domain).  Three
distances are provided:

* :func:`cross_sup_distance` -- largest absolute difference over all ordered
  point pairs ``(u, v)``.  It is nonzero on the diagonal for non-constant
  functions (``d(f, f)`` equals the range diameter of ``f``), so it is a
  dissimilarity rather than a metric.  :func:`check_metric_axioms` surveys
  exactly this behavior.
* :func:`uniform_distance` -- the usual sup distance over matching points.
* :func:`grid_l1_distance` -- quadrature-weighted L1 distance; the domain
  must carry weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import permutations
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "DomainPoint",
    "Domain",
    "DiscreteFunction",
    "MetricKind",
    "AxiomReport",
    "cross_sup_distance",
    "uniform_distance",
    "grid_l1_distance",
    "distance",
    "check_metric_axioms",
]


@dataclass(frozen=True)
class DomainPoint:
    """One labeled sample point; ``coordinate`` is the real location of the sample."""

    label: str
    coordinate: float

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ValueError("domain point label must be a non-empty string")
        coord = float(self.coordinate)
        if not math.isfinite(coord):
            raise ValueError(f"coordinate of point {self.label!r} must be finite, got {self.coordinate!r}")
        object.__setattr__(self, "coordinate", coord)


@dataclass(frozen=True)
class Domain:
    """Ordered tuple of points a function is sampled on.

    ``weights`` are optional per-point quadrature weights; they are required
    by the weighted L1 distance and ignored by the sup-type distances.
    """

    points: tuple[DomainPoint, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        points = tuple(self.points)
        if not points:
            raise ValueError("domain must contain at least one point")
        labels = [p.label for p in points]
        if len(set(labels)) != len(labels):
            seen = set()
            dup = next(l for l in labels if l in seen or seen.add(l))
            raise ValueError(f"domain labels must be unique, {dup!r} repeats")
        object.__setattr__(self, "points", points)
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            if len(weights) != len(points):
                raise ValueError(
                    f"domain has {len(points)} points but {len(weights)} weights"
                )
            if any(not math.isfinite(w) or w <= 0 for w in weights):
                raise ValueError("quadrature weights must be finite and positive")
            object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(p.label for p in self.points)

    @property
    def coordinates(self) -> np.ndarray:
        return np.array([p.coordinate for p in self.points], dtype=float)

    def weight_array(self) -> np.ndarray:
        if self.weights is None:
            raise ValueError(f"domain {self.describe()} carries no quadrature weights")
        return np.array(self.weights, dtype=float)

    def describe(self) -> str:
        first, last = self.points[0], self.points[-1]
        return (
            f"<{len(self.points)} points, {first.label}@{first.coordinate:g}"
            f" .. {last.label}@{last.coordinate:g}>"
        )

    @classmethod
    def from_coordinates(cls, coords: Iterable[float], weights=None, prefix: str = "u") -> "Domain":
        points = tuple(
            DomainPoint(f"{prefix}{i:04d}", float(c)) for i, c in enumerate(coords)
        )
        return cls(points, None if weights is None else tuple(weights))

    @classmethod
    def uniform_grid(cls, start: float, stop: float, n: int, weights: str | None = None) -> "Domain":
        """Evenly spaced ``n``-point grid on ``[start, stop]``.

        ``weights="trapezoid"`` attaches trapezoid quadrature weights (half
        weight on both edge points), which makes the weighted L1 distance a
        trapezoid approximation of the integral of ``|f - g|``.
        """
        if n < 2:
            raise ValueError("uniform grid needs at least 2 points")
        if stop <= start:
            raise ValueError("grid needs stop > start")
        coords = np.linspace(start, stop, n)
        if weights is None:
            w = None
        elif weights == "trapezoid":
            h = (stop - start) / (n - 1)
            warr = np.full(n, h)
            warr[0] = warr[-1] = h / 2.0
            w = tuple(float(x) for x in warr)
        else:
            raise ValueError(f"unknown weight rule {weights!r}, expected None or 'trapezoid'")
        return cls.from_coordinates(coords, w)


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """Real values attached point-by-point to a :class:`Domain`.

    Values are stored as a read-only float64 array.  Instances are immutable;
    operators return fresh functions on the same domain.
    """

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.ndim != 1:
            raise ValueError(f"function values must be one-dimensional, got shape {arr.shape}")
        if arr.size != len(self.domain):
            raise ValueError(
                f"domain {self.domain.describe()} has {len(self.domain)} points"
                f" but {arr.size} values were given"
            )
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            label = self.domain.points[bad].label
            raise ValueError(f"function value at point {label!r} is not finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_callable(cls, domain: Domain, fn: Callable[[float], float]) -> "DiscreteFunction":
        return cls(domain, [fn(p.coordinate) for p in domain.points])

    @classmethod
    def constant(cls, domain: Domain, value: float) -> "DiscreteFunction":
        return cls(domain, np.full(len(domain), float(value)))

    def isclose(self, other: "DiscreteFunction", tol: float = 1e-12) -> bool:
        return uniform_distance(self, other) <= tol

    def to_json_dict(self) -> dict:
        entries = []
        for i, p in enumerate(self.domain.points):
            e = {"label": p.label, "coordinate": p.coordinate}
            if self.domain.weights is not None:
                e["weight"] = self.domain.weights[i]
            entries.append(e)
        return {"domain": entries, "values": [float(v) for v in self.values]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DiscreteFunction":
        if not isinstance(obj, dict):
            raise ValueError("function JSON must be an object")
        for key in ("domain", "values"):
            if key not in obj:
                raise ValueError(f"function JSON is missing the {key!r} field")
        entries = obj["domain"]
        if not isinstance(entries, list) or not entries:
            raise ValueError("function JSON 'domain' must be a non-empty list")
        points, weights = [], []
        for i, e in enumerate(entries):
            if not isinstance(e, dict) or "label" not in e or "coordinate" not in e:
                raise ValueError(f"domain entry {i} must carry 'label' and 'coordinate'")
            points.append(DomainPoint(str(e["label"]), float(e["coordinate"])))
            if "weight" in e:
                weights.append(float(e["weight"]))
        if weights and len(weights) != len(points):
            raise ValueError("either every domain entry carries a weight or none does")
        domain = Domain(tuple(points), tuple(weights) if weights else None)
        return cls(domain, obj["values"])

    def write_csv(self, path) -> None:
        """Export as CSV with columns label,coordinate,value."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("label,coordinate,value\n")
            for p, v in zip(self.domain.points, self.values):
                fh.write(f"{p.label},{p.coordinate!r},{float(v)!r}\n")


class MetricKind(Enum):
    """Which distance the iteration and the checkers use."""

    CROSS_SUP = "cross_sup"
    UNIFORM = "uniform"
    GRID_L1 = "grid_l1"


def _require_same_domain(f: DiscreteFunction, g: DiscreteFunction) -> None:
    if f.domain is not g.domain and f.domain != g.domain:
        raise ValueError(
            f"functions live on different domains: {f.domain.describe()}"
            f" vs {g.domain.describe()}"
        )


def cross_sup_distance(f: DiscreteFunction, g: DiscreteFunction) -> float:
    """Largest absolute difference over all ordered point pairs.

    Parameters
    ----------
    f, g : DiscreteFunction
        Functions on the same domain.

    Returns
    -------
    float
        ``max |f(u) - g(v)|`` over every ordered pair ``(u, v)``.  The
        maximum is attained at range extremes, so this equals
        ``max(max(f) - min(g), max(g) - min(f))``; both candidates cannot
        be negative at once.

    Notes
    -----
    On the diagonal ``d(f, f) = max(f) - min(f)``, the range diameter, which
    vanishes only for constant functions.
    """
    _require_same_domain(f, g)
    fv, gv = f.values, g.values
    return float(max(fv.max() - gv.min(), gv.max() - fv.min()))


def uniform_distance(f: DiscreteFunction, g: DiscreteFunction) -> float:
    """Sup distance over matching points: ``max |f(u) - g(u)|``."""
    _require_same_domain(f, g)
    return float(np.max(np.abs(f.values - g.values)))


def grid_l1_distance(f: DiscreteFunction, g: DiscreteFunction) -> float:
    """Quadrature-weighted L1 distance ``sum w(u) |f(u) - g(u)|``.

    The shared domain must carry weights.  Accumulation uses exact float
    summation so the result does not depend on point order.
    """
    _require_same_domain(f, g)
    w = f.domain.weight_array()
    diffs = np.abs(f.values - g.values)
    return float(math.fsum(float(wi * di) for wi, di in zip(w, diffs)))


_DISPATCH = {
    MetricKind.CROSS_SUP: cross_sup_distance,
    MetricKind.UNIFORM: uniform_distance,
    MetricKind.GRID_L1: grid_l1_distance,
}


def distance(f: DiscreteFunction, g: DiscreteFunction, kind: MetricKind) -> float:
    """Evaluate the distance selected by ``kind``."""
    try:
        fn = _DISPATCH[kind]
    except KeyError:
        raise ValueError(f"unknown metric kind {kind!r}") from None
    return fn(f, g)


@dataclass(frozen=True)
class AxiomReport:
    """Outcome of a metric-axiom survey over a sample of functions.

    ``diagonal`` holds ``d(f, f)`` per sampled function; ``diagonal_all_zero``
    is the identity-of-indiscernibles flag that the cross-sup dissimilarity
    fails on non-constant samples.
    """

    metric: MetricKind
    nonnegative_ok: bool
    symmetric_ok: bool
    triangle_ok: bool
    diagonal: tuple[float, ...]
    diagonal_all_zero: bool
    witness: dict | None = None

    @property
    def all_metric_axioms_ok(self) -> bool:
        return (
            self.nonnegative_ok
            and self.symmetric_ok
            and self.triangle_ok
            and self.diagonal_all_zero
        )


def check_metric_axioms(
    metric: MetricKind,
    sample: Sequence[DiscreteFunction],
    slack: float = 0.0,
) -> AxiomReport:
    """Survey nonnegativity, symmetry, triangle inequality and the diagonal.

    Parameters
    ----------
    metric : MetricKind
        Distance to survey.
    sample : sequence of DiscreteFunction
        At least three functions on a shared domain.  The triangle
        inequality is checked over every ordered triple drawn from the
        sample.
    slack : float
        Absolute tolerance added to the right side of the triangle check.

    Returns
    -------
    AxiomReport
    """
    if len(sample) < 3:
        raise ValueError(f"axiom survey needs at least 3 functions, got {len(sample)}")
    for f in sample[1:]:
        _require_same_domain(sample[0], f)

    n = len(sample)
    d = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            d[i, j] = distance(sample[i], sample[j], metric)

    witness = None
    nonnegative_ok = bool(np.all(d >= 0.0))
    if not nonnegative_ok:
        i, j = map(int, np.argwhere(d < 0.0)[0])
        witness = {"axiom": "nonnegativity", "pair": (i, j), "value": float(d[i, j])}

    symmetric_ok = bool(np.array_equal(d, d.T))
    if not symmetric_ok and witness is None:
        i, j = map(int, np.argwhere(d != d.T)[0])
        witness = {
            "axiom": "symmetry",
            "pair": (i, j),
            "values": (float(d[i, j]), float(d[j, i])),
        }

    triangle_ok = True
    for i, k, j in permutations(range(n), 3):
        if d[i, j] > d[i, k] + d[k, j] + slack:
            triangle_ok = False
            if witness is None:
                witness = {
                    "axiom": "triangle",
                    "triple": (i, k, j),
                    "lhs": float(d[i, j]),
                    "rhs": float(d[i, k] + d[k, j]),
                }
            break

    diagonal = tuple(float(d[i, i]) for i in range(n))
    diagonal_all_zero = all(v == 0.0 for v in diagonal)
    if not diagonal_all_zero and witness is None:
        i = next(i for i, v in enumerate(diagonal) if v != 0.0)
        witness = {"axiom": "identity", "index": i, "value": diagonal[i]}

    return AxiomReport(
        metric=metric,
        nonnegative_ok=nonnegative_ok,
        symmetric_ok=symmetric_ok,
        triangle_ok=triangle_ok,
        diagonal=diagonal,
        diagonal_all_zero=diagonal_all_zero,
        witness=witness,
    )
