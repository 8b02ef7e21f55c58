"""Command line front end.

Four subcommands: ``iterate`` runs one of the iteration engines from a JSON
config, ``verify`` evaluates hypothesis checkers, ``fmo`` solves a planning
instance, ``phantom`` materializes a synthetic one.  Exit codes: 0 on
success, 1 for input or validation problems, 2 when the algorithm ran but
did not succeed (non-convergence, failed check, excessive gap).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import fmo as fmo_mod
from .function_space import (
    DiscreteFunction,
    Domain,
    MetricKind,
    check_metric_axioms,
)
from .iteration import (
    AlphaPsiMode,
    BanachMode,
    IterationConfig,
    ReichMode,
    check_hypothesis_H,
    iterate,
)
from .operators import (
    AlphaFunction,
    OperatorSpec,
    PsiSpec,
    check_alpha_admissible,
    check_alpha_psi_contractive,
    check_psi_family,
    check_reich_condition,
    estimate_contraction_constant,
)
from .phantom import PhantomSpec, generate_phantom

SCHEMA_VERSION = 1

_METRICS = {
    "uniform": MetricKind.UNIFORM,
    "cross_sup": MetricKind.CROSS_SUP,
    "grid_l1": MetricKind.GRID_L1,
}


class ConfigError(ValueError):
    """Validation failure, tagged with a JSON-pointer-ish path."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


def _load_json(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("/", f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"not valid JSON ({exc})")
    if not isinstance(obj, dict):
        raise ConfigError("/", "top level must be a JSON object")
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("/schema_version", f"unsupported schema version {version!r}")
    return obj


def _get(obj: dict, key: str, pointer: str, required: bool = True, default=None):
    if key not in obj:
        if required:
            raise ConfigError(f"{pointer}/{key}", "missing required field")
        return default
    return obj[key]


def _parse_metric(name, pointer: str) -> MetricKind:
    if name not in _METRICS:
        raise ConfigError(pointer, f"unknown metric {name!r}, expected one of {sorted(_METRICS)}")
    return _METRICS[name]


def _parse_function(obj, pointer: str) -> DiscreteFunction:
    if not isinstance(obj, dict):
        raise ConfigError(pointer, "must be an object")
    if "grid" in obj:
        grid = obj["grid"]
        for key in ("start", "stop", "n"):
            if key not in grid:
                raise ConfigError(f"{pointer}/grid/{key}", "missing required field")
        try:
            domain = Domain.uniform_grid(
                float(grid["start"]), float(grid["stop"]), int(grid["n"]),
                weights=grid.get("weights"),
            )
        except ValueError as exc:
            raise ConfigError(f"{pointer}/grid", str(exc))
        init = _get(obj, "init", pointer)
        if init == "coordinate":
            return DiscreteFunction(domain, domain.coordinates)
        if isinstance(init, dict) and "constant" in init:
            return DiscreteFunction.constant(domain, float(init["constant"]))
        raise ConfigError(f"{pointer}/init", "expected 'coordinate' or {'constant': value}")
    try:
        return DiscreteFunction.from_json_dict(obj)
    except ValueError as exc:
        raise ConfigError(pointer, str(exc))


def _parse_operator(obj, pointer: str) -> OperatorSpec:
    try:
        return OperatorSpec.from_json_dict(obj)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(pointer, str(exc))


def _parse_alpha(obj, pointer: str) -> AlphaFunction:
    try:
        return AlphaFunction.from_json_dict(obj)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(pointer, str(exc))


def _parse_psi(obj, pointer: str) -> PsiSpec:
    try:
        return PsiSpec.from_json_dict(obj)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(pointer, str(exc))


def _parse_pairs(obj, pointer: str) -> list[tuple[DiscreteFunction, DiscreteFunction]]:
    if not isinstance(obj, list) or not obj:
        raise ConfigError(pointer, "must be a non-empty list of [f, g] pairs")
    pairs = []
    for i, entry in enumerate(obj):
        if not isinstance(entry, list) or len(entry) != 2:
            raise ConfigError(f"{pointer}/{i}", "each pair must be a two-element list")
        pairs.append(
            (
                _parse_function(entry[0], f"{pointer}/{i}/0"),
                _parse_function(entry[1], f"{pointer}/{i}/1"),
            )
        )
    return pairs


def _write_json(out_dir: Path, name: str, payload: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_iterate(config_path: Path, out_dir: Path, fmt: str) -> int:
    cfg = _load_json(config_path)
    mode_name = _get(cfg, "mode", "", required=False, default="banach")
    op = _parse_operator(_get(cfg, "operator", ""), "/operator")
    f0 = _parse_function(_get(cfg, "f0", ""), "/f0")
    metric = _parse_metric(_get(cfg, "metric", "", required=False, default="uniform"), "/metric")

    if mode_name == "banach":
        mode = BanachMode()
    elif mode_name == "reich":
        coeffs = _get(cfg, "reich", "")
        if not isinstance(coeffs, dict):
            raise ConfigError("/reich", "must be an object with fields a, b, c")
        try:
            mode = ReichMode(
                float(_get(coeffs, "a", "/reich")),
                float(_get(coeffs, "b", "/reich")),
                float(_get(coeffs, "c", "/reich")),
            )
        except ValueError as exc:
            raise ConfigError("/reich", str(exc))
    elif mode_name == "alpha_psi":
        mode = AlphaPsiMode(
            alpha=_parse_alpha(_get(cfg, "alpha", ""), "/alpha"),
            psi=_parse_psi(_get(cfg, "psi", ""), "/psi"),
        )
    else:
        raise ConfigError("/mode", f"unknown mode {mode_name!r}, expected banach, reich or alpha_psi")

    try:
        config = IterationConfig(
            mode=mode,
            metric=metric,
            tol=float(_get(cfg, "tol", "", required=False, default=1e-8)),
            max_iters=int(_get(cfg, "max_iters", "", required=False, default=1000)),
            record_trace=bool(_get(cfg, "record_trace", "", required=False, default=True)),
            lambda_hint=(
                None
                if cfg.get("lambda_hint") is None
                else float(cfg["lambda_hint"])
            ),
        )
    except ValueError as exc:
        raise ConfigError("/", str(exc))

    try:
        report = iterate(op, f0, config)
    except ValueError as exc:
        # precondition failures (e.g. the starting weight gate) are input problems
        print(f"error: {exc}", file=sys.stderr)
        return 1

    payload = {"schema_version": SCHEMA_VERSION, "report": report.to_json_dict()}
    path = _write_json(out_dir, "iteration_report.json", payload)
    if fmt == "csv":
        trace_path = out_dir / "trace.csv"
        with open(trace_path, "w", encoding="utf-8") as fh:
            fh.write("iter,distance,bound\n")
            bounds = report.apriori_bounds
            for i, d in enumerate(report.trace):
                bound = repr(bounds[i]) if i < len(bounds) else ""
                fh.write(f"{i},{d!r},{bound}\n")
    print(f"wrote {path}")
    return 0 if report.converged else 2


def _run_check(entry: dict, pointer: str):
    kind = _get(entry, "check", pointer)
    if kind == "contraction":
        return estimate_contraction_constant(
            _parse_operator(_get(entry, "operator", pointer), f"{pointer}/operator"),
            _parse_metric(_get(entry, "metric", pointer), f"{pointer}/metric"),
            _parse_pairs(_get(entry, "pairs", pointer), f"{pointer}/pairs"),
        )
    if kind == "reich":
        try:
            return check_reich_condition(
                _parse_operator(_get(entry, "operator", pointer), f"{pointer}/operator"),
                _parse_metric(_get(entry, "metric", pointer), f"{pointer}/metric"),
                float(_get(entry, "a", pointer)),
                float(_get(entry, "b", pointer)),
                float(_get(entry, "c", pointer)),
                _parse_pairs(_get(entry, "pairs", pointer), f"{pointer}/pairs"),
            )
        except ValueError as exc:
            raise ConfigError(pointer, str(exc))
    if kind == "alpha_admissible":
        return check_alpha_admissible(
            _parse_operator(_get(entry, "operator", pointer), f"{pointer}/operator"),
            _parse_alpha(_get(entry, "alpha", pointer), f"{pointer}/alpha"),
            _parse_pairs(_get(entry, "pairs", pointer), f"{pointer}/pairs"),
        )
    if kind == "psi_family":
        try:
            return check_psi_family(
                _parse_psi(_get(entry, "psi", pointer), f"{pointer}/psi"),
                [float(t) for t in _get(entry, "t_samples", pointer)],
                n_max=int(_get(entry, "n_max", pointer, required=False, default=60)),
                tail_tol=float(_get(entry, "tail_tol", pointer, required=False, default=1e-12)),
            )
        except ValueError as exc:
            raise ConfigError(pointer, str(exc))
    if kind == "alpha_psi":
        return check_alpha_psi_contractive(
            _parse_operator(_get(entry, "operator", pointer), f"{pointer}/operator"),
            _parse_alpha(_get(entry, "alpha", pointer), f"{pointer}/alpha"),
            _parse_psi(_get(entry, "psi", pointer), f"{pointer}/psi"),
            _parse_metric(_get(entry, "metric", pointer), f"{pointer}/metric"),
            _parse_pairs(_get(entry, "pairs", pointer), f"{pointer}/pairs"),
        )
    if kind == "metric_axioms":
        sample = [
            _parse_function(f, f"{pointer}/functions/{i}")
            for i, f in enumerate(_get(entry, "functions", pointer))
        ]
        try:
            report = check_metric_axioms(
                _parse_metric(_get(entry, "metric", pointer), f"{pointer}/metric"), sample
            )
        except ValueError as exc:
            raise ConfigError(pointer, str(exc))
        return report
    if kind == "hypothesis_h":
        alpha = _parse_alpha(_get(entry, "alpha", pointer), f"{pointer}/alpha")
        candidates = [
            _parse_function(f, f"{pointer}/candidates/{i}")
            for i, f in enumerate(_get(entry, "candidates", pointer))
        ]
        pool = [
            _parse_function(f, f"{pointer}/pool/{i}")
            for i, f in enumerate(_get(entry, "pool", pointer))
        ]
        try:
            return check_hypothesis_H(alpha, candidates, pool)
        except ValueError as exc:
            raise ConfigError(pointer, str(exc))
    raise ConfigError(f"{pointer}/check", f"unknown check kind {kind!r}")


def cmd_verify(config_path: Path, out_dir: Path) -> int:
    cfg = _load_json(config_path)
    checks = _get(cfg, "checks", "")
    if not isinstance(checks, list) or not checks:
        raise ConfigError("/checks", "must be a non-empty list")
    results = []
    all_ok = True
    for i, entry in enumerate(checks):
        if not isinstance(entry, dict):
            raise ConfigError(f"/checks/{i}", "must be an object")
        try:
            outcome = _run_check(entry, f"/checks/{i}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"/checks/{i}", str(exc))
        if hasattr(outcome, "to_json_dict"):
            payload = outcome.to_json_dict()
            ok = outcome.satisfied
        else:  # AxiomReport
            ok = outcome.all_metric_axioms_ok
            payload = {
                "check": "metric_axioms",
                "satisfied": ok,
                "nonnegative_ok": outcome.nonnegative_ok,
                "symmetric_ok": outcome.symmetric_ok,
                "triangle_ok": outcome.triangle_ok,
                "diagonal": list(outcome.diagonal),
                "diagonal_all_zero": outcome.diagonal_all_zero,
                "witness": outcome.witness,
            }
        if "name" in entry:
            payload["name"] = entry["name"]
        results.append(payload)
        all_ok = all_ok and ok
    path = _write_json(
        out_dir,
        "verify_report.json",
        {"schema_version": SCHEMA_VERSION, "all_satisfied": all_ok, "results": results},
    )
    print(f"wrote {path}")
    return 0 if all_ok else 2


def cmd_fmo(config_path: Path, out_dir: Path) -> int:
    cfg = _load_json(config_path)
    gap_bound = float(cfg.get("gap_bound", 1e-2))
    try:
        problem = fmo_mod.problem_from_json_dict(cfg, config_path.parent)
    except FileNotFoundError as exc:
        raise ConfigError("/matrix_path", str(exc))
    except ValueError as exc:
        raise ConfigError("/", str(exc))
    try:
        report = fmo_mod.fmo_solve(problem)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    payload = {
        "schema_version": SCHEMA_VERSION,
        "report": report.to_json_dict(),
        "dose_statistics": fmo_mod.dose_statistics(report.dose, problem.labels),
        "gap_bound": gap_bound,
        "warnings": list(problem.warnings),
    }
    path = _write_json(out_dir, "fmo_report.json", payload)
    print(f"wrote {path}")
    ok = report.converged and report.reference_gap <= gap_bound
    return 0 if ok else 2


def cmd_phantom(config_path: Path, out_dir: Path, seed: int | None) -> int:
    cfg = _load_json(config_path)
    try:
        spec = PhantomSpec.from_json_dict(cfg)
        problem = generate_phantom(spec, seed=seed)
    except ValueError as exc:
        raise ConfigError("/", str(exc))
    if "tau" in cfg:
        problem = dataclasses.replace(problem, tau=float(cfg["tau"]))
    out_dir.mkdir(parents=True, exist_ok=True)
    fmo_mod.write_matrix_csv(problem.ddc, out_dir / "phantom_matrix.csv")
    payload = fmo_mod.problem_to_json_dict(problem, "phantom_matrix.csv")
    path = _write_json(out_dir, "phantom_problem.json", payload)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fixfunc",
        description="Fixed-function iteration and threshold-split fluence map optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, with_format=False, with_seed=False):
        p.add_argument("--config", required=True, type=Path, help="JSON config file")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        if with_format:
            p.add_argument("--format", choices=("json", "csv"), default="json")
        if with_seed:
            p.add_argument("--seed", type=int, default=None, help="override the spec seed")

    add_common(sub.add_parser("iterate", help="run an iteration engine"), with_format=True)
    add_common(sub.add_parser("verify", help="evaluate hypothesis checkers"))
    add_common(sub.add_parser("fmo", help="solve a planning instance"))
    add_common(sub.add_parser("phantom", help="materialize a synthetic instance"), with_seed=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "iterate":
            return cmd_iterate(args.config, args.out, args.format)
        if args.command == "verify":
            return cmd_verify(args.config, args.out)
        if args.command == "fmo":
            return cmd_fmo(args.config, args.out)
        if args.command == "phantom":
            return cmd_phantom(args.config, args.out, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
