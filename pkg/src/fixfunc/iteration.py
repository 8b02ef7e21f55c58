"""Successive-approximation engines for fixed functions of pointwise self-maps.

All three engines run the same loop, f_{n+1} = T f_n, and differ in which
hypothesis bookkeeping they attach to the trace.  Convergence is always
declared on the successive-iterate uniform distance; when a different metric
is configured its distances are what the trace records, so runs can reproduce
cross-sup or weighted-L1 numbers while the stop rule stays a metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from .function_space import (
    DiscreteFunction,
    MetricKind,
    distance,
    uniform_distance,
)
from .operators import (
    AlphaFunction,
    ConditionReport,
    OperatorSpec,
    PsiSpec,
)

__all__ = [
    "DIVERGENCE_LIMIT",
    "BanachMode",
    "ReichMode",
    "AlphaPsiMode",
    "IterationConfig",
    "IterationReport",
    "FixedFunctionCheck",
    "apriori_bound",
    "picard_iterate",
    "reich_iterate",
    "alpha_psi_iterate",
    "iterate",
    "verify_fixed_function",
    "check_hypothesis_H",
]

# Iterates whose values or steps pass this magnitude are declared divergent.
DIVERGENCE_LIMIT = 1e12

# Absolute slack for trace-consistency assertions; float rounding only.
_TRACE_SLACK = 1e-9


@dataclass(frozen=True)
class BanachMode:
    """Plain contraction iteration, no extra hypothesis bookkeeping."""


@dataclass(frozen=True)
class ReichMode:
    """Iteration under the three-coefficient condition with weights (a, b, c)."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        for name, v in (("a", self.a), ("b", self.b), ("c", self.c)):
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"coefficient {name} must be finite and nonnegative, got {v!r}")
        if self.a + self.b + self.c >= 1.0:
            raise ValueError(
                f"coefficients must satisfy a + b + c < 1, got {self.a + self.b + self.c!r}"
            )

    @property
    def effective_ratio(self) -> float:
        """Per-step decay factor (a + c) / (1 - b) implied by the condition."""
        return (self.a + self.c) / (1.0 - self.b)


@dataclass(frozen=True)
class AlphaPsiMode:
    """Iteration under the weighted comparison-map condition."""

    alpha: AlphaFunction
    psi: PsiSpec


@dataclass(frozen=True)
class IterationConfig:
    mode: BanachMode | ReichMode | AlphaPsiMode = field(default_factory=BanachMode)
    metric: MetricKind = MetricKind.UNIFORM
    tol: float = 1e-8
    max_iters: int = 1000
    record_trace: bool = True
    lambda_hint: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise ValueError(f"tol must be a positive real, got {self.tol!r}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.lambda_hint is not None and not (0.0 <= self.lambda_hint < 1.0):
            raise ValueError(f"lambda_hint must lie in [0, 1), got {self.lambda_hint!r}")


@dataclass(frozen=True)
class IterationReport:
    """Everything a run leaves behind.

    ``trace`` holds successive distances d(f_n, f_{n+1}) in the configured
    metric; ``rate_estimates`` their consecutive ratios (zero denominators
    skipped); ``apriori_bounds`` the geometric tail bounds
    lambda^q * d(f0, f1) / (1 - lambda) when a hint was given.  ``residual``
    is the uniform distance between the final iterate and its image.  Fields
    specific to one mode stay at their defaults elsewhere.
    """

    converged: bool
    iterations: int
    final: DiscreteFunction
    trace: tuple[float, ...]
    rate_estimates: tuple[float, ...]
    apriori_bounds: tuple[float, ...]
    residual: float
    diverged: bool = False
    effective_ratio: float | None = None
    reich_condition_held: bool | None = None
    reich_bound_ok: bool | None = None
    psi_bounds: tuple[float, ...] = ()
    alpha_chain_held: bool | None = None
    psi_bound_ok: bool | None = None
    notes: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "converged": self.converged,
            "diverged": self.diverged,
            "iterations": self.iterations,
            "residual": self.residual,
            "final": self.final.to_json_dict(),
            "trace": list(self.trace),
            "rate_estimates": list(self.rate_estimates),
            "apriori_bounds": list(self.apriori_bounds),
            "effective_ratio": self.effective_ratio,
            "reich_condition_held": self.reich_condition_held,
            "reich_bound_ok": self.reich_bound_ok,
            "psi_bounds": list(self.psi_bounds),
            "alpha_chain_held": self.alpha_chain_held,
            "psi_bound_ok": self.psi_bound_ok,
            "notes": list(self.notes),
        }


def apriori_bound(lam: float, d01: float, q: int) -> float:
    """Geometric tail bound lambda^q * d01 / (1 - lambda) on d(f_q, f*)."""
    if not (0.0 <= lam < 1.0):
        raise ValueError(f"contraction constant must lie in [0, 1), got {lam!r}")
    if not (math.isfinite(d01) and d01 >= 0):
        raise ValueError(f"first-step distance must be finite and nonnegative, got {d01!r}")
    if q < 0:
        raise ValueError(f"step index must be nonnegative, got {q}")
    return lam**q * d01 / (1.0 - lam)


def _safe_residual(op: OperatorSpec, f: DiscreteFunction) -> float:
    out = op.map_values(np.asarray(f.values, dtype=float))
    if not np.all(np.isfinite(out)):
        return math.inf
    return float(np.max(np.abs(out - f.values)))


def _run_loop(op: OperatorSpec, f0: DiscreteFunction, config: IterationConfig):
    """Shared loop; returns (converged, diverged, iterations, final, trace, per_step)."""
    current = f0
    trace: list[float] = []
    iterates: list[DiscreteFunction] = [f0]
    converged = diverged = False
    n = 0
    while n < config.max_iters:
        nxt_values = op.map_values(np.asarray(current.values, dtype=float))
        n += 1
        if not np.all(np.isfinite(nxt_values)) or float(np.max(np.abs(nxt_values))) > DIVERGENCE_LIMIT:
            diverged = True
            break
        nxt = DiscreteFunction(current.domain, nxt_values)
        d_conv = uniform_distance(current, nxt)
        d_rec = d_conv if config.metric is MetricKind.UNIFORM else distance(current, nxt, config.metric)
        trace.append(d_rec)
        iterates.append(nxt)
        current = nxt
        if d_conv > DIVERGENCE_LIMIT:
            diverged = True
            break
        if d_conv < config.tol:
            converged = True
            break
    return converged, diverged, n, current, trace, iterates


def _assemble_report(op, config, converged, diverged, n, final, trace, **extra) -> IterationReport:
    rate_estimates: tuple[float, ...] = ()
    apriori: tuple[float, ...] = ()
    recorded: tuple[float, ...] = ()
    if config.record_trace and trace:
        recorded = tuple(trace)
        rate_estimates = tuple(
            trace[i + 1] / trace[i] for i in range(len(trace) - 1) if trace[i] != 0.0
        )
        if config.lambda_hint is not None:
            apriori = tuple(
                apriori_bound(config.lambda_hint, trace[0], q) for q in range(len(trace) + 1)
            )
    notes = list(extra.pop("notes", ()))
    if diverged:
        notes.append(f"iterate magnitude or step passed {DIVERGENCE_LIMIT:g}, run aborted")
    return IterationReport(
        converged=converged,
        iterations=n,
        final=final,
        trace=recorded,
        rate_estimates=rate_estimates,
        apriori_bounds=apriori,
        residual=_safe_residual(op, final),
        diverged=diverged,
        notes=tuple(notes),
        **extra,
    )


def picard_iterate(op: OperatorSpec, f0: DiscreteFunction, config: IterationConfig) -> IterationReport:
    """Iterate f_{n+1} = T f_n until the uniform step falls below ``config.tol``.

    Parameters
    ----------
    op : OperatorSpec
        Pointwise self-map.
    f0 : DiscreteFunction
        Starting function.
    config : IterationConfig
        Mode must be :class:`BanachMode`.

    Returns
    -------
    IterationReport
        ``iterations`` counts operator applications, so a starting function
        that is already fixed converges after exactly one application with
        step distance zero.  A run whose values or steps pass
        ``DIVERGENCE_LIMIT`` stops with ``diverged=True`` instead of raising.
    """
    if not isinstance(config.mode, BanachMode):
        raise ValueError(f"picard_iterate expects BanachMode, got {type(config.mode).__name__}")
    converged, diverged, n, final, trace, _ = _run_loop(op, f0, config)
    return _assemble_report(op, config, converged, diverged, n, final, trace)


def reich_iterate(op: OperatorSpec, f0: DiscreteFunction, config: IterationConfig) -> IterationReport:
    """Picard loop plus bookkeeping for the three-coefficient condition.

    Each trace step is tested against the sampled condition on the pair
    (f_{n-1}, f_n); when the condition held on every tested pair, the trace
    must decay with the effective ratio (a + c) / (1 - b) up to float slack,
    and the report records both facts.
    """
    if not isinstance(config.mode, ReichMode):
        raise ValueError(f"reich_iterate expects ReichMode, got {type(config.mode).__name__}")
    mode = config.mode
    converged, diverged, n, final, trace, _ = _run_loop(op, f0, config)
    r = mode.effective_ratio
    condition_held = True
    bound_ok = True
    # On trace pairs the condition reads
    #   d_n <= a*d_{n-1} + b*d_n + c*d_{n-1}
    # because d(f, Tf) and d(g, Tg) are themselves consecutive steps.
    for prev, cur in zip(trace, trace[1:]):
        if not cur <= mode.a * prev + mode.b * cur + mode.c * prev + _TRACE_SLACK:
            condition_held = False
        if not cur <= r * prev + _TRACE_SLACK:
            bound_ok = False
    return _assemble_report(
        op,
        config,
        converged,
        diverged,
        n,
        final,
        trace,
        effective_ratio=r,
        reich_condition_held=condition_held,
        reich_bound_ok=bound_ok if condition_held else None,
    )


def alpha_psi_iterate(op: OperatorSpec, f0: DiscreteFunction, config: IterationConfig) -> IterationReport:
    """Picard loop for the weighted comparison-map condition.

    The starting function must put weight at least 1 on every ordered point
    pair against its own image; a violation is rejected up front with the
    offending point pair.  Along the run the chain condition
    alpha(f_n(u), f_{n+1}(v)) >= 1 is tracked, and while it holds the trace is
    compared against the comparison-map orbit psi^n(d(f0, f1)); the outcome is
    recorded, never fatal, because the weight is only sampled.
    """
    if not isinstance(config.mode, AlphaPsiMode):
        raise ValueError(f"alpha_psi_iterate expects AlphaPsiMode, got {type(config.mode).__name__}")
    mode = config.mode

    first_values = op.map_values(np.asarray(f0.values, dtype=float))
    if not np.all(np.isfinite(first_values)):
        bad = int(np.flatnonzero(~np.isfinite(first_values))[0])
        raise ValueError(
            f"operator produced a non-finite value at point {f0.domain.points[bad].label!r}"
        )
    gate = mode.alpha.pair_matrix(f0.values, first_values)
    if gate.min() < 1.0:
        i, j = map(int, np.unravel_index(int(np.argmin(gate)), gate.shape))
        raise ValueError(
            "starting condition fails: alpha(f0(u), (Tf0)(v)) ="
            f" {gate[i, j]:g} < 1 at point pair"
            f" ({f0.domain.points[i].label!r}, {f0.domain.points[j].label!r})"
        )

    converged, diverged, n, final, trace, iterates = _run_loop(op, f0, config)

    chain_held = True
    for prev, cur in zip(iterates, iterates[1:]):
        if mode.alpha.pair_matrix(prev.values, cur.values).min() < 1.0:
            chain_held = False
            break

    psi_bounds: tuple[float, ...] = ()
    psi_bound_ok = None
    if trace:
        orbit = mode.psi.orbit(trace[0], len(trace) - 1)
        psi_bounds = tuple(orbit)
        if chain_held:
            psi_bound_ok = all(
                d <= b + _TRACE_SLACK for d, b in zip(trace, psi_bounds)
            )
    notes = ()
    if not chain_held:
        notes = ("alpha chain condition broke along the trace; comparison bound not assessed",)
    return _assemble_report(
        op,
        config,
        converged,
        diverged,
        n,
        final,
        trace,
        psi_bounds=psi_bounds if config.record_trace else (),
        alpha_chain_held=chain_held,
        psi_bound_ok=psi_bound_ok,
        notes=notes,
    )


def iterate(op: OperatorSpec, f0: DiscreteFunction, config: IterationConfig) -> IterationReport:
    """Dispatch on the configured mode."""
    if isinstance(config.mode, BanachMode):
        return picard_iterate(op, f0, config)
    if isinstance(config.mode, ReichMode):
        return reich_iterate(op, f0, config)
    return alpha_psi_iterate(op, f0, config)


@dataclass(frozen=True)
class FixedFunctionCheck:
    """Boolean verdict plus the residual it was decided on.

    The verdict always uses the uniform residual max |(Tf)(u) - f(u)|; the
    distance in the requested metric is recorded alongside for reporting.
    Truthiness follows the verdict.
    """

    is_fixed: bool
    residual: float
    metric_residual: float
    tol: float

    def __bool__(self) -> bool:
        return self.is_fixed


def verify_fixed_function(
    op: OperatorSpec,
    f: DiscreteFunction,
    tol: float = 1e-10,
    metric: MetricKind = MetricKind.UNIFORM,
) -> FixedFunctionCheck:
    """Decide whether f is fixed under the map, up to ``tol``.

    The decision is made on the uniform residual regardless of ``metric``;
    a cross-sup residual is nonzero for every non-constant function and would
    misreport genuine fixed functions.
    """
    if not (math.isfinite(tol) and tol >= 0):
        raise ValueError(f"tol must be finite and nonnegative, got {tol!r}")
    from .operators import apply as _apply

    image = _apply(op, f)
    residual = uniform_distance(image, f)
    metric_residual = residual if metric is MetricKind.UNIFORM else distance(image, f, metric)
    return FixedFunctionCheck(residual <= tol, residual, metric_residual, tol)


def check_hypothesis_H(
    alpha: AlphaFunction,
    candidates: Sequence[DiscreteFunction],
    pool: Sequence[DiscreteFunction],
) -> ConditionReport:
    """For every candidate pair, look for a pool member weighted >= 1 against both.

    The uniqueness argument needs, for all f and g, some h with
    alpha(f(u), h(v)) >= 1 and alpha(g(u), h(v)) >= 1 at every ordered point
    pair.  The search is exhaustive over the finite pool.
    """
    if not candidates:
        raise ValueError("hypothesis check needs at least one candidate function")
    if not pool:
        raise ValueError("hypothesis check needs a non-empty pool of mediating functions")

    def dominated(f: DiscreteFunction, h: DiscreteFunction) -> bool:
        return bool(alpha.pair_matrix(f.values, h.values).min() >= 1.0)

    checked = 0
    witness = None
    for i, j in combinations_with_replacement(range(len(candidates)), 2):
        checked += 1
        f, g = candidates[i], candidates[j]
        if not any(dominated(f, h) and dominated(g, h) for h in pool):
            witness = {"pair": (i, j)}
            break
    return ConditionReport(
        check="hypothesis_H",
        satisfied=witness is None,
        witness=witness,
        details={"pairs_checked": checked, "pool_size": len(pool)},
    )
