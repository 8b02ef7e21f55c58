"""Fluence map optimization by threshold splitting of the dose matrix.

The dose deposition matrix D is split by a threshold tau into a major part
D1 (coefficients strictly above tau) and a minor part D2 (the rest, ties
included).  The solver alternates

    x  <-  argmin_{x >= 0} || D1 x + delta - T ||^2      (projected gradient)
    delta  <-  D2 x

starting from x = 0, delta = 0, and stops when successive delta vectors
agree to the outer tolerance in the max norm.  A full-matrix solve of the
unsplit problem provides the reference the report's objective gap is
measured against.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseDoseMatrix",
    "VoxelLabels",
    "InnerParams",
    "OuterParams",
    "FmoProblem",
    "InnerResult",
    "FmoReport",
    "split_matrix",
    "inner_solve",
    "outer_update",
    "reference_solve",
    "fmo_solve",
    "dose_statistics",
    "write_matrix_csv",
    "read_matrix_csv",
    "problem_to_json_dict",
    "problem_from_json_dict",
    "save_problem",
    "load_problem",
]

# Entries at or below the split threshold go to the minor part.
_POWER_ITERS = 50


@dataclass(frozen=True, eq=False)
class SparseDoseMatrix:
    """Nonnegative dose deposition coefficients in row-compressed form.

    Rows index voxels, columns index beamlets.  Duplicate (voxel, beamlet)
    entries are rejected rather than summed; explicit zeros are allowed.
    """

    n_voxels: int
    n_beamlets: int
    _csr: sp.csr_matrix

    def __post_init__(self):
        if self.n_voxels < 1 or self.n_beamlets < 1:
            raise ValueError("matrix needs at least one voxel and one beamlet")
        if self._csr.shape != (self.n_voxels, self.n_beamlets):
            raise ValueError("internal storage shape mismatch")

    @classmethod
    def from_triplets(cls, n_voxels, n_beamlets, rows, cols, values) -> "SparseDoseMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ValueError("triplet arrays must be one-dimensional and equally long")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_voxels:
                raise ValueError(f"voxel index out of range [0, {n_voxels})")
            if cols.min() < 0 or cols.max() >= n_beamlets:
                raise ValueError(f"beamlet index out of range [0, {n_beamlets})")
            if not np.all(np.isfinite(values)) or values.min() < 0:
                raise ValueError("dose coefficients must be finite and nonnegative")
            keys = rows * np.int64(n_beamlets) + cols
            if np.unique(keys).size != keys.size:
                order = np.argsort(keys, kind="stable")
                dupat = np.flatnonzero(np.diff(keys[order]) == 0)[0]
                r, c = int(rows[order[dupat]]), int(cols[order[dupat]])
                raise ValueError(f"duplicate entry for voxel {r}, beamlet {c}")
        csr = sp.csr_matrix(
            (values, (rows, cols)), shape=(int(n_voxels), int(n_beamlets)), dtype=float
        )
        csr.sort_indices()
        csr.data.setflags(write=False)
        return cls(int(n_voxels), int(n_beamlets), csr)

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_beamlets,):
            raise ValueError(f"expected a vector of {self.n_beamlets} beamlet weights, got shape {x.shape}")
        return self._csr @ x

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_voxels,):
            raise ValueError(f"expected a vector of {self.n_voxels} voxel values, got shape {y.shape}")
        return self._csr.T @ y

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Entries in row-major order as (rows, cols, values)."""
        coo = self._csr.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()


@dataclass(frozen=True)
class VoxelLabels:
    """Per-voxel tissue tags, either target ("PTV") or healthy ("OAR")."""

    tags: tuple[str, ...]

    def __post_init__(self):
        tags = tuple(str(t) for t in self.tags)
        if not tags:
            raise ValueError("labels must cover at least one voxel")
        bad = next((t for t in tags if t not in ("PTV", "OAR")), None)
        if bad is not None:
            raise ValueError(f"unknown voxel tag {bad!r}, expected 'PTV' or 'OAR'")
        object.__setattr__(self, "tags", tags)

    def __len__(self) -> int:
        return len(self.tags)

    def mask(self, tag: str) -> np.ndarray:
        return np.array([t == tag for t in self.tags])


@dataclass(frozen=True)
class InnerParams:
    """Projected-gradient settings for the inner nonnegative least squares."""

    step_rule: str = "one_over_L"
    tol: float = 1e-8
    max_iters: int = 20000

    def __post_init__(self):
        if self.step_rule != "one_over_L":
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise ValueError(f"inner tol must be positive, got {self.tol!r}")
        if self.max_iters < 1:
            raise ValueError(f"inner max_iters must be at least 1, got {self.max_iters}")


@dataclass(frozen=True)
class OuterParams:
    tol: float = 1e-8
    max_iters: int = 200

    def __post_init__(self):
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise ValueError(f"outer tol must be positive, got {self.tol!r}")
        if self.max_iters < 1:
            raise ValueError(f"outer max_iters must be at least 1, got {self.max_iters}")


@dataclass(frozen=True, eq=False)
class FmoProblem:
    """One planning instance: matrix, prescription, labels and solver settings."""

    ddc: SparseDoseMatrix
    prescription: np.ndarray
    labels: VoxelLabels
    tau: float
    inner: InnerParams = field(default_factory=InnerParams)
    outer: OuterParams = field(default_factory=OuterParams)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        t = np.array(self.prescription, dtype=float, copy=True)
        if t.shape != (self.ddc.n_voxels,):
            raise ValueError(
                f"prescription must cover {self.ddc.n_voxels} voxels, got shape {t.shape}"
            )
        if not np.all(np.isfinite(t)) or t.min() < 0:
            raise ValueError("prescription doses must be finite and nonnegative")
        t.setflags(write=False)
        object.__setattr__(self, "prescription", t)
        if len(self.labels) != self.ddc.n_voxels:
            raise ValueError(
                f"labels cover {len(self.labels)} voxels, matrix has {self.ddc.n_voxels}"
            )
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise ValueError(f"split threshold must be finite and nonnegative, got {self.tau!r}")


@dataclass(frozen=True, eq=False)
class InnerResult:
    """Inner solve outcome; objective_trace holds ||D1 x + delta - T||^2 per step."""

    x: np.ndarray
    objective_trace: tuple[float, ...]
    iterations: int
    pg_norm: float
    lipschitz: float
    degenerate: bool = False

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


@dataclass(frozen=True, eq=False)
class FmoReport:
    """Solver outcome.

    ``delta_trace`` holds max-norm distances between successive scatter
    estimates; ``objective_trace`` the inner objective reached per outer
    round; ``reference_gap`` the relative objective excess over the
    full-matrix solve (small negative values only witness the reference's
    own tolerance).
    """

    fluence: np.ndarray
    dose: np.ndarray
    outer_iterations: int
    delta_trace: tuple[float, ...]
    objective_trace: tuple[float, ...]
    converged: bool
    reference_gap: float
    degenerate_inner: bool = False
    delta_ratios: tuple[float, ...] = ()
    inner_iterations: tuple[int, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "converged": self.converged,
            "degenerate_inner": self.degenerate_inner,
            "outer_iterations": self.outer_iterations,
            "reference_gap": self.reference_gap,
            "fluence": [float(v) for v in self.fluence],
            "dose": [float(v) for v in self.dose],
            "delta_trace": list(self.delta_trace),
            "objective_trace": list(self.objective_trace),
            "delta_ratios": list(self.delta_ratios),
            "inner_iterations": list(self.inner_iterations),
        }


def split_matrix(ddc: SparseDoseMatrix, tau: float) -> tuple[SparseDoseMatrix, SparseDoseMatrix]:
    """Route every stored entry to the major or minor part by threshold.

    Entries strictly above ``tau`` go to the major part, ties and smaller
    entries to the minor part.  Entries are routed, never recombined, so the
    two parts sum to the original matrix exactly and their supports are
    disjoint by construction.
    """
    if not (math.isfinite(tau) and tau >= 0):
        raise ValueError(f"split threshold must be finite and nonnegative, got {tau!r}")
    rows, cols, vals = ddc.triplets()
    major = vals > tau
    d1 = SparseDoseMatrix.from_triplets(
        ddc.n_voxels, ddc.n_beamlets, rows[major], cols[major], vals[major]
    )
    d2 = SparseDoseMatrix.from_triplets(
        ddc.n_voxels, ddc.n_beamlets, rows[~major], cols[~major], vals[~major]
    )
    return d1, d2


def _spectral_norm_sq(mat: SparseDoseMatrix) -> float:
    """Largest squared singular value, by power iteration from the ones vector.

    The start vector is fixed so repeated runs are bit-identical; nonnegative
    entries guarantee the dominant direction is not orthogonal to it.
    """
    if mat.nnz == 0:
        return 0.0
    v = np.ones(mat.n_beamlets)
    v /= np.linalg.norm(v)
    for _ in range(_POWER_ITERS):
        w = mat.rmatvec(mat.matvec(v))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    av = mat.matvec(v)
    return float(av @ av)


def inner_solve(
    d1: SparseDoseMatrix,
    delta: np.ndarray,
    prescription: np.ndarray,
    x_init: np.ndarray,
    params: InnerParams | None = None,
) -> InnerResult:
    """Minimize ||D1 x + delta - T||^2 over x >= 0 by projected gradient.

    Parameters
    ----------
    d1 : SparseDoseMatrix
        Major part of the split matrix.
    delta : ndarray
        Current scatter estimate, one value per voxel.
    prescription : ndarray
        Target dose T, one value per voxel.
    x_init : ndarray
        Nonnegative warm start, one value per beamlet.
    params : InnerParams, optional

    Returns
    -------
    InnerResult
        The step size is 1/L with L the squared spectral norm of D1, which
        makes the objective trace nonincreasing.  The loop stops when the
        max-norm of the projected gradient falls below ``params.tol`` or at
        the iteration cap.  An empty major part leaves the objective constant
        in x; the start vector is returned unchanged with the degenerate
        flag set.
    """
    params = params or InnerParams()
    delta = np.asarray(delta, dtype=float)
    target = np.asarray(prescription, dtype=float)
    x = np.array(x_init, dtype=float, copy=True)
    if x.shape != (d1.n_beamlets,):
        raise ValueError(f"x_init must have {d1.n_beamlets} entries, got shape {x.shape}")
    if delta.shape != target.shape or delta.shape != (d1.n_voxels,):
        raise ValueError("delta and prescription must both have one entry per voxel")
    if x.size and x.min() < 0:
        raise ValueError("x_init must be nonnegative")

    lipschitz = _spectral_norm_sq(d1)
    y = target - delta
    r = d1.matvec(x) - y
    trace = [float(r @ r)]
    if lipschitz == 0.0:
        return InnerResult(
            x=np.array(x_init, dtype=float),
            objective_trace=tuple(trace),
            iterations=0,
            pg_norm=0.0,
            lipschitz=0.0,
            degenerate=True,
        )

    step = 1.0 / lipschitz
    pg_norm = math.inf
    iters = 0
    for _ in range(params.max_iters):
        # gradient of the half objective; the 1/L step is tuned to it
        g = d1.rmatvec(r)
        pg = np.where(x > 0.0, g, np.minimum(g, 0.0))
        pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
        if pg_norm < params.tol:
            break
        x = np.maximum(x - step * g, 0.0)
        r = d1.matvec(x) - y
        trace.append(float(r @ r))
        iters += 1
    else:
        g = d1.rmatvec(r)
        pg = np.where(x > 0.0, g, np.minimum(g, 0.0))
        pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0

    return InnerResult(
        x=x,
        objective_trace=tuple(trace),
        iterations=iters,
        pg_norm=pg_norm,
        lipschitz=lipschitz,
    )


def outer_update(d2: SparseDoseMatrix, x: np.ndarray) -> np.ndarray:
    """Scatter estimate delta = D2 x for a nonnegative fluence."""
    x = np.asarray(x, dtype=float)
    if x.size and x.min() < 0:
        raise ValueError("fluence must be nonnegative")
    return d2.matvec(x)


def reference_solve(
    ddc: SparseDoseMatrix, prescription: np.ndarray, params: InnerParams | None = None
) -> np.ndarray:
    """Solve the unsplit problem min ||D x - T||^2, x >= 0, to high accuracy."""
    params = params or InnerParams(tol=1e-10, max_iters=100000)
    zeros = np.zeros(ddc.n_voxels)
    start = np.zeros(ddc.n_beamlets)
    return inner_solve(ddc, zeros, prescription, start, params).x


def fmo_solve(problem: FmoProblem) -> FmoReport:
    """Run the two-loop split solver and compare against the full-matrix solve.

    Outer convergence is declared when successive scatter estimates agree to
    ``problem.outer.tol`` in the max norm; the fluence is then re-solved once
    against the final scatter so the returned pair is mutually consistent at
    the stated tolerances.  An empty major part aborts with the degenerate
    flag (the inner problem no longer constrains the fluence).
    """
    d1, d2 = split_matrix(problem.ddc, problem.tau)
    target = problem.prescription
    n_b = problem.ddc.n_beamlets

    x = np.zeros(n_b)
    delta = np.zeros(problem.ddc.n_voxels)
    delta_trace: list[float] = []
    objective_trace: list[float] = []
    inner_iters: list[int] = []
    converged = False
    degenerate = d1.nnz == 0
    outer_count = 0

    if not degenerate:
        for _ in range(problem.outer.max_iters):
            outer_count += 1
            inner = inner_solve(d1, delta, target, x, problem.inner)
            x = inner.x
            objective_trace.append(inner.objective)
            inner_iters.append(inner.iterations)
            new_delta = outer_update(d2, x)
            dist = float(np.max(np.abs(new_delta - delta))) if new_delta.size else 0.0
            delta_trace.append(dist)
            delta = new_delta
            if not np.all(np.isfinite(delta)) or not np.all(np.isfinite(x)):
                raise RuntimeError("solver produced non-finite values; instance is ill-posed")
            if dist < problem.outer.tol:
                converged = True
                break
        if converged:
            # polish against the final scatter so x satisfies the inner
            # optimality test for the delta the report carries
            inner = inner_solve(d1, delta, target, x, problem.inner)
            x = inner.x
            objective_trace[-1] = inner.objective
            inner_iters[-1] += inner.iterations

    dose = problem.ddc.matvec(x)
    x_ref = reference_solve(problem.ddc, target)
    r = dose - target
    r_ref = problem.ddc.matvec(x_ref) - target
    obj = float(r @ r)
    obj_ref = float(r_ref @ r_ref)
    gap = (obj - obj_ref) / max(obj_ref, np.finfo(float).tiny)

    ratios = tuple(
        delta_trace[i + 1] / delta_trace[i]
        for i in range(len(delta_trace) - 1)
        if delta_trace[i] != 0.0
    )
    return FmoReport(
        fluence=x,
        dose=dose,
        outer_iterations=outer_count,
        delta_trace=tuple(delta_trace),
        objective_trace=tuple(objective_trace),
        converged=converged,
        reference_gap=float(gap),
        degenerate_inner=degenerate,
        delta_ratios=ratios,
        inner_iterations=tuple(inner_iters),
    )


def dose_statistics(dose: np.ndarray, labels: VoxelLabels) -> dict:
    """Min, mean and max dose per tissue tag; absent tags report nulls."""
    dose = np.asarray(dose, dtype=float)
    out = {}
    for tag in ("PTV", "OAR"):
        mask = labels.mask(tag)
        if mask.any():
            vals = dose[mask]
            out[tag] = {
                "min": float(vals.min()),
                "mean": float(vals.mean()),
                "max": float(vals.max()),
                "voxels": int(mask.sum()),
            }
        else:
            out[tag] = {"min": None, "mean": None, "max": None, "voxels": 0}
    return out


# ---------------------------------------------------------------------------
# file formats

_HEADER_RE = re.compile(r"^#\s*voxels=(\d+)\s+beamlets=(\d+)\s*$")


def write_matrix_csv(mat: SparseDoseMatrix, path) -> None:
    """Triplet CSV with a size header; values keep full precision."""
    rows, cols, vals = mat.triplets()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# voxels={mat.n_voxels} beamlets={mat.n_beamlets}\n")
        fh.write("row,col,value\n")
        for r, c, v in zip(rows, cols, vals):
            fh.write(f"{int(r)},{int(c)},{float(v)!r}\n")


def read_matrix_csv(path) -> SparseDoseMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        m = _HEADER_RE.match(header.strip())
        if not m:
            raise ValueError(
                f"{path}: first line must look like '# voxels=N beamlets=M', got {header.strip()!r}"
            )
        n_voxels, n_beamlets = int(m.group(1)), int(m.group(2))
        column_line = fh.readline().strip()
        if column_line != "row,col,value":
            raise ValueError(f"{path}: second line must be 'row,col,value', got {column_line!r}")
        rows, cols, vals = [], [], []
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'row,col,value', got {line!r}")
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
            vals.append(float(parts[2]))
    return SparseDoseMatrix.from_triplets(n_voxels, n_beamlets, rows, cols, vals)


def problem_to_json_dict(problem: FmoProblem, matrix_path: str) -> dict:
    return {
        "schema_version": 1,
        "matrix_path": str(matrix_path),
        "T": [float(v) for v in problem.prescription],
        "labels": list(problem.labels.tags),
        "tau": float(problem.tau),
        "inner": {
            "step_rule": problem.inner.step_rule,
            "tol": problem.inner.tol,
            "max_iters": problem.inner.max_iters,
        },
        "outer": {"tol": problem.outer.tol, "max_iters": problem.outer.max_iters},
        "warnings": list(problem.warnings),
    }


def problem_from_json_dict(obj: dict, base_dir) -> FmoProblem:
    if not isinstance(obj, dict):
        raise ValueError("problem JSON must be an object")
    for key in ("matrix_path", "T", "labels", "tau"):
        if key not in obj:
            raise ValueError(f"problem JSON is missing the {key!r} field")
    matrix_path = Path(base_dir) / str(obj["matrix_path"])
    ddc = read_matrix_csv(matrix_path)
    inner_obj = obj.get("inner", {})
    outer_obj = obj.get("outer", {})
    inner = InnerParams(
        step_rule=str(inner_obj.get("step_rule", "one_over_L")),
        tol=float(inner_obj.get("tol", 1e-8)),
        max_iters=int(inner_obj.get("max_iters", 20000)),
    )
    outer = OuterParams(
        tol=float(outer_obj.get("tol", 1e-8)),
        max_iters=int(outer_obj.get("max_iters", 200)),
    )
    return FmoProblem(
        ddc=ddc,
        prescription=np.asarray(obj["T"], dtype=float),
        labels=VoxelLabels(tuple(obj["labels"])),
        tau=float(obj["tau"]),
        inner=inner,
        outer=outer,
        warnings=tuple(obj.get("warnings", ())),
    )


def save_problem(problem: FmoProblem, problem_path, matrix_filename: str = "matrix.csv") -> None:
    """Write the problem JSON next to its matrix CSV."""
    import json

    problem_path = Path(problem_path)
    write_matrix_csv(problem.ddc, problem_path.parent / matrix_filename)
    with open(problem_path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_json_dict(problem, matrix_filename), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_problem(problem_path) -> FmoProblem:
    import json

    problem_path = Path(problem_path)
    with open(problem_path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return problem_from_json_dict(obj, problem_path.parent)
