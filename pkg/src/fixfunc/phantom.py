"""Synthetic planning phantoms with Gaussian pencil-beam kernels.

Beamlets are spread evenly across the first grid axis.  Each deposits a
Gaussian lateral profile (seeded amplitude jitter makes instances distinct
but reproducible); on 2D grids an exponential depth falloff multiplies the
profile.  Kernel values below the truncation threshold are dropped, which is
what makes the dose matrix sparse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fmo import FmoProblem, SparseDoseMatrix, VoxelLabels

__all__ = ["TRUNCATION_THRESHOLD", "PhantomSpec", "generate_phantom"]

TRUNCATION_THRESHOLD = 1e-6

# attenuation per depth voxel on 2D grids
_DEPTH_MU = 0.05


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry and prescription of a synthetic instance.

    ``grid`` is (n,) for a 1D voxel line or (nx, ny) for a 2D slab.
    ``ptv_region`` uses half-open index ranges: (lo, hi) in 1D,
    (x0, x1, y0, y1) in 2D.  Defaults describe the standard small case used
    across the test suite.
    """

    grid: tuple[int, ...] = (100,)
    n_beamlets: int = 10
    kernel_width: float = 3.0
    ptv_region: tuple[int, ...] = (40, 60)
    prescription_ptv: float = 60.0
    cap_oar: float = 20.0
    seed: int = 7

    def __post_init__(self):
        grid = tuple(int(g) for g in self.grid)
        if len(grid) not in (1, 2) or any(g < 1 for g in grid):
            raise ValueError(f"grid must be (n,) or (nx, ny) with positive sizes, got {self.grid!r}")
        object.__setattr__(self, "grid", grid)
        if self.n_beamlets < 1:
            raise ValueError(f"need at least one beamlet, got {self.n_beamlets}")
        if not (math.isfinite(self.kernel_width) and self.kernel_width > 0):
            raise ValueError(f"kernel width must be positive, got {self.kernel_width!r}")
        region = tuple(int(r) for r in self.ptv_region)
        if len(region) != 2 * len(grid):
            raise ValueError(
                f"ptv_region must have {2 * len(grid)} indices for a {len(grid)}D grid, got {self.ptv_region!r}"
            )
        for axis in range(len(grid)):
            lo, hi = region[2 * axis], region[2 * axis + 1]
            if not (0 <= lo < hi <= grid[axis]):
                raise ValueError(
                    f"ptv_region axis {axis} must satisfy 0 <= lo < hi <= {grid[axis]}, got ({lo}, {hi})"
                )
        object.__setattr__(self, "ptv_region", region)
        if not (math.isfinite(self.cap_oar) and self.cap_oar >= 0):
            raise ValueError(f"healthy-tissue cap must be nonnegative, got {self.cap_oar!r}")
        if not (math.isfinite(self.prescription_ptv) and self.prescription_ptv > self.cap_oar):
            raise ValueError(
                f"target prescription must exceed the healthy cap, got {self.prescription_ptv!r} <= {self.cap_oar!r}"
            )

    @property
    def n_voxels(self) -> int:
        n = 1
        for g in self.grid:
            n *= g
        return n

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "grid": list(self.grid),
            "n_beamlets": self.n_beamlets,
            "kernel_width": self.kernel_width,
            "ptv_region": list(self.ptv_region),
            "prescription_ptv": self.prescription_ptv,
            "cap_oar": self.cap_oar,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PhantomSpec":
        if not isinstance(obj, dict):
            raise ValueError("phantom JSON must be an object")
        for key in ("grid", "n_beamlets", "kernel_width", "ptv_region", "prescription_ptv", "cap_oar"):
            if key not in obj:
                raise ValueError(f"phantom JSON is missing the {key!r} field")
        return cls(
            grid=tuple(obj["grid"]),
            n_beamlets=int(obj["n_beamlets"]),
            kernel_width=float(obj["kernel_width"]),
            ptv_region=tuple(obj["ptv_region"]),
            prescription_ptv=float(obj["prescription_ptv"]),
            cap_oar=float(obj["cap_oar"]),
            seed=int(obj.get("seed", 0)),
        )


def _ptv_mask(spec: PhantomSpec) -> np.ndarray:
    if len(spec.grid) == 1:
        mask = np.zeros(spec.grid[0], dtype=bool)
        lo, hi = spec.ptv_region
        mask[lo:hi] = True
        return mask
    nx, ny = spec.grid
    x0, x1, y0, y1 = spec.ptv_region
    mask2d = np.zeros((nx, ny), dtype=bool)
    mask2d[x0:x1, y0:y1] = True
    return mask2d.reshape(-1)


def generate_phantom(spec: PhantomSpec, seed: int | None = None) -> FmoProblem:
    """Build the dose matrix, prescription and labels for a spec.

    ``seed`` overrides the spec's seed when given.  The same seed always
    produces bit-identical output; the only random draw is a per-beamlet
    amplitude jitter in [0.9, 1.1].
    """
    effective_seed = spec.seed if seed is None else int(seed)
    rng = np.random.default_rng(effective_seed)
    amps = rng.uniform(0.9, 1.1, spec.n_beamlets)

    width_sq = 2.0 * spec.kernel_width**2
    rows, cols, vals = [], [], []

    if len(spec.grid) == 1:
        n = spec.grid[0]
        positions = np.arange(n, dtype=float)
        for j in range(spec.n_beamlets):
            center = (j + 0.5) * n / spec.n_beamlets - 0.5
            profile = amps[j] * np.exp(-((positions - center) ** 2) / width_sq)
            keep = np.flatnonzero(profile >= TRUNCATION_THRESHOLD)
            rows.extend(int(i) for i in keep)
            cols.extend([j] * keep.size)
            vals.extend(float(v) for v in profile[keep])
    else:
        nx, ny = spec.grid
        lateral = np.arange(nx, dtype=float)
        depth_gain = np.exp(-_DEPTH_MU * np.arange(ny, dtype=float))
        for j in range(spec.n_beamlets):
            center = (j + 0.5) * nx / spec.n_beamlets - 0.5
            lat = amps[j] * np.exp(-((lateral - center) ** 2) / width_sq)
            kernel = lat[:, None] * depth_gain[None, :]
            ix, iy = np.nonzero(kernel >= TRUNCATION_THRESHOLD)
            rows.extend(int(a) * ny + int(b) for a, b in zip(ix, iy))
            cols.extend([j] * ix.size)
            vals.extend(float(v) for v in kernel[ix, iy])

    ddc = SparseDoseMatrix.from_triplets(spec.n_voxels, spec.n_beamlets, rows, cols, vals)

    mask = _ptv_mask(spec)
    target = np.where(mask, spec.prescription_ptv, spec.cap_oar)
    labels = VoxelLabels(tuple("PTV" if m else "OAR" for m in mask))

    warnings = []
    covered = np.zeros(spec.n_voxels, dtype=bool)
    covered[np.asarray(rows, dtype=int)] = True
    n_uncovered = int((~covered).sum())
    if n_uncovered:
        warnings.append(
            f"{n_uncovered} voxels receive zero dose from every beamlet (kernel too narrow)"
        )

    return FmoProblem(
        ddc=ddc,
        prescription=target,
        labels=labels,
        tau=0.0,
        warnings=tuple(warnings),
    )
