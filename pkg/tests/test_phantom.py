"""Synthetic phantom generator tests."""

import json
import math

import numpy as np
import pytest

from fixfunc import (
    TRUNCATION_THRESHOLD,
    PhantomSpec,
    fmo_solve,
    generate_phantom,
)


class TestSpecValidation:
    def test_defaults(self):
        spec = PhantomSpec()
        assert spec.grid == (100,)
        assert spec.n_voxels == 100

    def test_grid_dimensions(self):
        with pytest.raises(ValueError, match="grid"):
            PhantomSpec(grid=(4, 4, 4))
        with pytest.raises(ValueError, match="grid"):
            PhantomSpec(grid=(0,))

    def test_region_bounds(self):
        with pytest.raises(ValueError, match="ptv_region"):
            PhantomSpec(grid=(50,), ptv_region=(40, 60))
        with pytest.raises(ValueError, match="ptv_region"):
            PhantomSpec(grid=(50,), ptv_region=(20, 20))
        with pytest.raises(ValueError, match="ptv_region"):
            PhantomSpec(grid=(8, 8), ptv_region=(2, 4))  # needs 4 indices in 2D

    def test_prescription_must_exceed_cap(self):
        with pytest.raises(ValueError, match="exceed"):
            PhantomSpec(prescription_ptv=10.0, cap_oar=20.0)

    def test_beamlets_and_width(self):
        with pytest.raises(ValueError, match="beamlet"):
            PhantomSpec(n_beamlets=0)
        with pytest.raises(ValueError, match="width"):
            PhantomSpec(kernel_width=0.0)

    def test_json_round_trip(self):
        spec = PhantomSpec(grid=(12, 8), ptv_region=(3, 9, 2, 6), seed=11)
        back = PhantomSpec.from_json_dict(json.loads(json.dumps(spec.to_json_dict())))
        assert back == spec

    def test_json_missing_field(self):
        obj = PhantomSpec().to_json_dict()
        del obj["kernel_width"]
        with pytest.raises(ValueError, match="kernel_width"):
            PhantomSpec.from_json_dict(obj)


class TestGenerate:
    def test_deterministic_for_seed(self):
        spec = PhantomSpec()
        a = generate_phantom(spec)
        b = generate_phantom(spec)
        ra, ca, va = a.ddc.triplets()
        rb, cb, vb = b.ddc.triplets()
        assert np.array_equal(ra, rb)
        assert np.array_equal(ca, cb)
        assert np.array_equal(va, vb)

    def test_seed_override_changes_amplitudes(self):
        spec = PhantomSpec()
        a = generate_phantom(spec)
        b = generate_phantom(spec, seed=8)
        assert not np.array_equal(a.ddc.triplets()[2], b.ddc.triplets()[2])

    def test_truncation(self, default_phantom):
        vals = default_phantom.ddc.triplets()[2]
        assert vals.min() >= TRUNCATION_THRESHOLD

    def test_default_coverage(self, default_phantom):
        # width 3 kernels on 10-voxel spacing blanket the whole line
        assert default_phantom.warnings == ()
        dense = default_phantom.ddc.to_dense()
        assert np.all(dense.sum(axis=1) > 0)
        assert np.all(dense.sum(axis=0) > 0)

    def test_prescription_and_labels(self, default_phantom):
        t = default_phantom.prescription
        tags = default_phantom.labels.tags
        for i in range(100):
            if 40 <= i < 60:
                assert t[i] == 60.0 and tags[i] == "PTV"
            else:
                assert t[i] == 20.0 and tags[i] == "OAR"

    def test_amplitude_jitter_range(self, default_phantom):
        # centers sit half a voxel off the lattice, so each column peaks at
        # its jittered amplitude in [0.9, 1.1] times a fixed attenuation
        dense = default_phantom.ddc.to_dense()
        peaks = dense.max(axis=0)
        f = math.exp(-0.25 / 18.0)
        assert np.all(peaks >= 0.9 * f - 1e-12)
        assert np.all(peaks <= 1.1 * f + 1e-12)

    def test_narrow_kernel_warns(self):
        problem = generate_phantom(PhantomSpec(kernel_width=0.4))
        assert problem.ddc.nnz > 0
        assert len(problem.warnings) == 1
        assert "zero dose" in problem.warnings[0]

    def test_vanishing_kernel_covers_nothing(self):
        problem = generate_phantom(PhantomSpec(kernel_width=0.05))
        assert problem.ddc.nnz == 0
        assert "100 voxels" in problem.warnings[0]

    def test_2d_depth_falloff(self):
        spec = PhantomSpec(grid=(12, 8), n_beamlets=4, kernel_width=2.0,
                           ptv_region=(3, 9, 2, 6), seed=3)
        problem = generate_phantom(spec)
        assert problem.ddc.n_voxels == 96
        dense = problem.ddc.to_dense()
        # beamlet 0 is centered on lateral row 1; dose decays exponentially
        # along the depth axis
        surface = dense[1 * 8 + 0, 0]
        deep = dense[1 * 8 + 7, 0]
        assert surface > 0 and deep > 0
        assert surface / deep == pytest.approx(math.exp(0.05 * 7), rel=1e-12)

    def test_2d_labels_match_region(self):
        spec = PhantomSpec(grid=(6, 5), n_beamlets=3, kernel_width=1.5,
                           ptv_region=(1, 4, 2, 4))
        problem = generate_phantom(spec)
        tags = problem.labels.tags
        for ix in range(6):
            for iy in range(5):
                expect = "PTV" if (1 <= ix < 4 and 2 <= iy < 4) else "OAR"
                assert tags[ix * 5 + iy] == expect

    def test_default_instance_is_solvable(self, default_phantom):
        report = fmo_solve(default_phantom)
        assert report.converged
        assert report.reference_gap <= 1e-10
