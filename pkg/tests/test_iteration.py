"""Iteration engine tests.

Constant starting functions make pointwise iterations equivalent to scalar
orbits, so a plain Python loop over floats serves as the oracle for traces
and final values. Both should agree bit for bit because the vectorized path
performs the same arithmetic per point.
"""

import json
import math

import numpy as np
import pytest

from fixfunc import (
    DIVERGENCE_LIMIT,
    AffineMap,
    AlphaPsiMode,
    BanachMode,
    DiscreteFunction,
    Domain,
    IterationConfig,
    LinearPsi,
    MetricKind,
    NamedMap,
    ReichMode,
    WindowAlpha,
    alpha_psi_iterate,
    apriori_bound,
    apply,
    check_hypothesis_H,
    iterate,
    picard_iterate,
    reich_iterate,
    verify_fixed_function,
)


def scalar_orbit(update, y0, n):
    ys = [float(y0)]
    for _ in range(n):
        ys.append(float(update(ys[-1])))
    return ys


@pytest.fixture
def unit_grid():
    return Domain.uniform_grid(0.0, 1.0, 11)


# ---------------------------------------------------------------------------
# a-priori bound helper
# ---------------------------------------------------------------------------


class TestAprioriBound:
    def test_values(self):
        assert apriori_bound(0.5, 1.0, 0) == 2.0
        assert apriori_bound(0.5, 1.0, 3) == 0.25
        assert apriori_bound(2.0 / 3.0, 3.0, 1) == pytest.approx(6.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            apriori_bound(1.0, 1.0, 0)
        with pytest.raises(ValueError):
            apriori_bound(-0.1, 1.0, 0)
        with pytest.raises(ValueError):
            apriori_bound(0.5, -1.0, 0)


# ---------------------------------------------------------------------------
# plain iteration
# ---------------------------------------------------------------------------


class TestPicard:
    def test_quadratic_matches_scalar_orbit(self, unit_grid, quad_op):
        f0 = DiscreteFunction.constant(unit_grid, 1.5)
        cfg = IterationConfig(tol=1e-10, max_iters=100)
        rep = picard_iterate(quad_op, f0, cfg)
        assert rep.converged and not rep.diverged

        orbit = scalar_orbit(lambda y: y * y - 2.0 * y + 2.0, 1.5, rep.iterations)
        diffs = [abs(orbit[i + 1] - orbit[i]) for i in range(len(orbit) - 1)]
        assert list(rep.trace) == diffs
        assert float(rep.final.values[0]) == orbit[-1]
        # the orbit lands on the fixed point exactly once the squared error
        # underflows past double precision
        assert rep.final.values[0] == 1.0

    def test_residual_zero_at_fixed_function(self, unit_grid, quad_op):
        ones = DiscreteFunction.constant(unit_grid, 1.0)
        check = verify_fixed_function(quad_op, ones)
        assert check.is_fixed
        assert check.residual == 0.0
        assert bool(check)

    def test_residual_nonzero_off_fixed_function(self, unit_grid, quad_op):
        f = DiscreteFunction.constant(unit_grid, 1.5)
        check = verify_fixed_function(quad_op, f)
        assert not check.is_fixed
        assert check.residual == 0.25  # |T(1.5) - 1.5| = |1.25 - 1.5|

    def test_identity_converges_immediately(self, unit_grid):
        f0 = DiscreteFunction.from_callable(unit_grid, lambda u: u)
        rep = picard_iterate(NamedMap("identity"), f0, IterationConfig())
        assert rep.converged
        assert rep.iterations == 1
        assert rep.trace == (0.0,)

    def test_affine_rate_estimates(self, unit_grid):
        # Pure scaling toward the zero function: successive steps are exact
        # scalar multiples, so the measured ratios stay on the contraction
        # factor to machine precision.  An offset map would lose digits to
        # cancellation near its nonzero fixed point.
        op = AffineMap(scale=2.0 / 3.0, shift=0.0)
        f0 = DiscreteFunction.from_callable(unit_grid, lambda u: u)
        cfg = IterationConfig(tol=1e-9, max_iters=200, lambda_hint=2.0 / 3.0)
        rep = picard_iterate(op, f0, cfg)
        assert rep.converged
        for r in rep.rate_estimates:
            assert r == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_apriori_bounds_recorded(self, unit_grid):
        op = AffineMap(scale=0.5, shift=1.0)
        f0 = DiscreteFunction.constant(unit_grid, 0.0)
        cfg = IterationConfig(tol=1e-8, lambda_hint=0.5)
        rep = picard_iterate(op, f0, cfg)
        d01 = rep.trace[0]
        assert rep.apriori_bounds[0] == apriori_bound(0.5, d01, 0)
        assert rep.apriori_bounds[3] == apriori_bound(0.5, d01, 3)
        assert len(rep.apriori_bounds) == rep.iterations + 1

    def test_divergence_guard(self, unit_grid, quad_op):
        f0 = DiscreteFunction.constant(unit_grid, 3.0)
        rep = picard_iterate(quad_op, f0, IterationConfig(max_iters=1000))
        assert rep.diverged
        assert not rep.converged
        assert rep.iterations < 1000
        assert any("aborted" in n for n in rep.notes)

    def test_max_iters_exhaustion(self, unit_grid):
        op = AffineMap(scale=0.999, shift=1.0)
        f0 = DiscreteFunction.constant(unit_grid, 0.0)
        rep = picard_iterate(op, f0, IterationConfig(tol=1e-14, max_iters=5))
        assert not rep.converged and not rep.diverged
        assert rep.iterations == 5

    def test_mode_mismatch_rejected(self, unit_grid, quad_op):
        f0 = DiscreteFunction.constant(unit_grid, 1.5)
        cfg = IterationConfig(mode=ReichMode(0.2, 0.2, 0.2))
        with pytest.raises(ValueError):
            picard_iterate(quad_op, f0, cfg)

    def test_dispatcher_routes(self, unit_grid, quad_op):
        f0 = DiscreteFunction.constant(unit_grid, 1.5)
        rep = iterate(quad_op, f0, IterationConfig(mode=BanachMode()))
        assert rep.converged

    def test_determinism(self, unit_grid, quad_op):
        f0 = DiscreteFunction.constant(unit_grid, 1.25)
        a = picard_iterate(quad_op, f0, IterationConfig())
        b = picard_iterate(quad_op, f0, IterationConfig())
        assert a.trace == b.trace
        assert np.array_equal(a.final.values, b.final.values)

    def test_trace_metric_configurable(self, patient1, quad_op):
        # convergence is always declared on the uniform step even when the
        # recorded trace uses the cross-sup dissimilarity
        _, f1, _ = patient1
        cfg = IterationConfig(metric=MetricKind.CROSS_SUP, tol=1e-12, max_iters=50)
        rep = picard_iterate(quad_op, f1, cfg)
        assert rep.converged
        # cross-sup of the last step is at least the uniform step, and the
        # final function is the two-valued fixed profile
        assert set(np.round(rep.final.values, 12)) <= {1.0, 2.0}

    def test_report_json(self, unit_grid, quad_op):
        f0 = DiscreteFunction.constant(unit_grid, 1.5)
        rep = picard_iterate(quad_op, f0, IterationConfig(lambda_hint=0.5))
        obj = rep.to_json_dict()
        json.dumps(obj)
        assert obj["converged"] is True
        assert len(obj["trace"]) == obj["iterations"]


# ---------------------------------------------------------------------------
# three-term mode
# ---------------------------------------------------------------------------


class TestReich:
    def test_mode_validation(self):
        with pytest.raises(ValueError):
            ReichMode(0.5, 0.4, 0.2)
        with pytest.raises(ValueError):
            ReichMode(-0.1, 0.0, 0.0)
        assert ReichMode(0.2, 0.2, 0.5).effective_ratio == pytest.approx(0.875)

    def test_halving_run(self, unit_grid, halving_op):
        f0 = DiscreteFunction.constant(unit_grid, 0.0)
        cfg = IterationConfig(mode=ReichMode(0.2, 0.2, 0.5), tol=1e-10, max_iters=200)
        rep = reich_iterate(halving_op, f0, cfg)
        assert rep.converged
        assert rep.final.values[0] == pytest.approx(2.0, abs=1e-9)
        assert rep.effective_ratio == pytest.approx(0.875)
        # step ratio is exactly 1/2, well under every tested combination
        assert rep.reich_condition_held is True
        assert rep.reich_bound_ok is True

    def test_condition_fails_for_slow_map(self, unit_grid):
        # contraction factor 0.9 exceeds what a = b = c = 0.05 permits
        op = AffineMap(scale=0.9, shift=1.0)
        f0 = DiscreteFunction.constant(unit_grid, 0.0)
        cfg = IterationConfig(
            mode=ReichMode(0.05, 0.05, 0.05), tol=1e-6, max_iters=500
        )
        rep = reich_iterate(op, f0, cfg)
        assert rep.converged  # the map still contracts
        assert rep.reich_condition_held is False
        assert rep.reich_bound_ok is None


# ---------------------------------------------------------------------------
# gated mode
# ---------------------------------------------------------------------------


class TestAlphaPsi:
    def test_gate_violation_raises_with_point_labels(self, unit_grid):
        f0 = DiscreteFunction.constant(unit_grid, 5.0)
        mode = AlphaPsiMode(
            alpha=WindowAlpha(arg="first", lower=0.0, upper=1.0),
            psi=LinearPsi(0.5),
        )
        with pytest.raises(ValueError, match="u0000"):
            alpha_psi_iterate(NamedMap("identity"), f0, IterationConfig(mode=mode))

    def test_geometric_decay_tracks_psi_orbit(self, unit_grid):
        op = AffineMap(scale=0.5, shift=0.0)
        f0 = DiscreteFunction.constant(unit_grid, 1.0)
        mode = AlphaPsiMode(alpha=WindowAlpha.constant(1.0), psi=LinearPsi(0.5))
        cfg = IterationConfig(mode=mode, tol=1e-12, max_iters=100)
        rep = alpha_psi_iterate(op, f0, cfg)
        assert rep.converged
        assert rep.alpha_chain_held is True
        assert rep.psi_bound_ok is True
        # the step sizes are exactly the psi orbit of the first step
        assert len(rep.psi_bounds) >= rep.iterations
        for step, bound in zip(rep.trace, rep.psi_bounds):
            assert step <= bound + 1e-9

    def test_chain_break_noted(self, unit_grid):
        # iterates leave the window after one step, breaking the chain
        op = AffineMap(scale=1.0, shift=0.6)
        f0 = DiscreteFunction.constant(unit_grid, 0.2)
        mode = AlphaPsiMode(
            alpha=WindowAlpha(arg="first", lower=0.0, upper=1.0),
            psi=LinearPsi(0.9),
        )
        cfg = IterationConfig(mode=mode, tol=1e-10, max_iters=5)
        rep = alpha_psi_iterate(op, f0, cfg)
        assert rep.alpha_chain_held is False
        assert rep.psi_bound_ok is None
        assert any("chain" in n for n in rep.notes)


class TestHypothesisH:
    def test_constant_pool_satisfies(self, unit_grid):
        alpha = WindowAlpha(arg="second", lower=0.0, upper=float("inf"), open_lower=True)
        ones = DiscreteFunction.constant(unit_grid, 1.0)
        twos = DiscreteFunction.constant(unit_grid, 2.0)
        rep = check_hypothesis_H(alpha, [ones, twos], [ones])
        assert rep.satisfied

    def test_unsatisfiable_alpha(self, unit_grid):
        alpha = WindowAlpha.constant(0.0)
        ones = DiscreteFunction.constant(unit_grid, 1.0)
        rep = check_hypothesis_H(alpha, [ones], [ones])
        assert not rep.satisfied
        assert rep.witness is not None

    def test_empty_inputs_rejected(self, unit_grid):
        ones = DiscreteFunction.constant(unit_grid, 1.0)
        with pytest.raises(ValueError):
            check_hypothesis_H(WindowAlpha.constant(1.0), [], [ones])
        with pytest.raises(ValueError):
            check_hypothesis_H(WindowAlpha.constant(1.0), [ones], [])


class TestConfigValidation:
    def test_tol_positive(self):
        with pytest.raises(ValueError):
            IterationConfig(tol=0.0)

    def test_max_iters(self):
        with pytest.raises(ValueError):
            IterationConfig(max_iters=0)

    def test_lambda_hint_range(self):
        with pytest.raises(ValueError):
            IterationConfig(lambda_hint=1.0)
        IterationConfig(lambda_hint=0.0)  # zero is a legal degenerate hint
