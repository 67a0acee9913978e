"""Scenario runner: JSON config in, CSV trajectories and JSON summaries out.

Subcommands: ``single-firm``, ``two-firm``, ``nash``, ``best-response``,
``verify``, ``simulate``.  Exit codes: 0 success, 1 validation error,
2 numerical or I/O failure; failures print a machine-readable JSON object on
stderr.  All outputs are pure functions of (config, seed): rerunning a
scenario reproduces every file byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import mc, nash, riccati, verify
from .errors import ConfigMismatch, MissingField, NumericalError, ValidationError
from .model import Kind, ModelParams, validate_params

SCENARIO_KINDS = {
    "single-firm": Kind.SINGLE_FIRM,
    "two-firm": Kind.TWO_FIRM_REGULATED,
    "nash": Kind.TWO_FIRM_NASH,
    "best-response": Kind.TWO_FIRM_NASH,
}

RICCATI_HEADER = ("t", "A11", "A12", "A22", "B1", "B2", "C")
BR_HEADER = ("t",) + nash.BR_COLUMNS
NASH_HEADER = ("t",) + nash.NASH_COLUMNS


def emit_csv(trajectory, header, path) -> None:
    """Write rectangular float data as UTF-8 CSV with round-trip formatting."""
    rows = np.atleast_2d(np.asarray(trajectory, dtype=float))
    if rows.size == 0:
        rows = rows.reshape(0, len(header))
    if rows.shape[1] != len(header):
        raise ValueError(f"data has {rows.shape[1]} columns, header has {len(header)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


class _Run:
    """One parsed scenario invocation."""

    def __init__(self, scenario: str, config: dict, out_dir: Path):
        self.scenario = scenario
        self.config = config
        self.out_dir = out_dir
        numerics = config.get("numerics", {})
        if not isinstance(numerics, dict):
            raise ConfigMismatch("'numerics' must be an object")
        self.numerics = numerics
        model_cfg = config.get("model")
        if model_cfg is None:
            raise MissingField("model")
        self.params: ModelParams = validate_params(model_cfg)
        expected = SCENARIO_KINDS.get(scenario)
        if expected is not None and self.params.kind is not expected:
            raise ConfigMismatch(
                f"scenario '{scenario}' needs model kind '{expected.value}', "
                f"got '{self.params.kind.value}'")

    @property
    def n_nodes(self) -> int:
        return int(self.numerics.get("n_nodes", 1001))

    def sim_config(self) -> mc.SimConfig:
        n = self.numerics
        y0 = n.get("y0", 0.0)
        return mc.SimConfig(
            n_paths=int(n.get("n_paths", 100_000)),
            dt=float(n.get("dt", 1e-3)),
            seed=int(n.get("seed", 0)),
            x0=tuple(float(v) for v in n.get("x0", (0.0, 0.0))),
            y0=tuple(float(v) for v in y0) if isinstance(y0, (list, tuple)) else float(y0),
            antithetic=bool(n.get("antithetic", True)),
        )

    def grid_spec(self) -> verify.GridSpec:
        g = self.numerics.get("grid", {})
        return verify.GridSpec(
            x_min=float(g.get("x_min", -2.0)),
            x_max=float(g.get("x_max", 2.0)),
            n_points=int(g.get("n_points", 21)),
            n_time_slices=int(g.get("n_time_slices", 5)),
        )

    def summary_base(self) -> dict:
        return {
            "scenario": self.scenario,
            "model": dict(self.config.get("model", {})),
            "numerics": dict(self.numerics),
        }


def _run_principal(run: _Run) -> dict:
    v = riccati.solve_principal(run.params, run.n_nodes)
    csv_path = run.out_dir / "riccati_coeffs.csv"
    emit_csv(riccati.coefficient_table(v), RICCATI_HEADER, csv_path)
    summary = run.summary_base()
    summary.update({
        "value_at_origin": v.C[0],
        "A0": v.A[0].tolist(),
        "B0": v.B[0].tolist(),
        "outputs": [csv_path.name],
    })
    return summary


def _run_nash(run: _Run) -> dict:
    coeffs = nash.solve_nash(run.params, run.n_nodes)
    csv_path = run.out_dir / "nash_coeffs.csv"
    emit_csv(np.column_stack([coeffs.grid.nodes, coeffs.values]), NASH_HEADER, csv_path)
    summary = run.summary_base()
    summary.update({
        "coefficients_at_0": {name: coeffs.column(name)[0] for name in nash.NASH_COLUMNS},
        "outputs": [csv_path.name],
    })
    return summary


def _opponent_spec(run: _Run) -> tuple[int, object]:
    spec = run.config.get("opponent")
    if spec is None:
        raise MissingField("opponent", "best-response needs an 'opponent' object")
    firm = int(spec.get("firm", 1))
    if "flow" not in spec:
        raise MissingField("opponent.flow")
    return firm, spec["flow"]


def _run_best_response(run: _Run) -> dict:
    firm, flow = _opponent_spec(run)
    coeffs = nash.best_response(run.params, firm, flow, run.n_nodes)
    csv_path = run.out_dir / "best_response_coeffs.csv"
    emit_csv(np.column_stack([coeffs.grid.nodes, coeffs.values]), BR_HEADER, csv_path)
    summary = run.summary_base()
    summary.update({
        "firm": firm,
        "coefficients_at_0": {name: coeffs.column(name)[0] for name in nash.BR_COLUMNS},
        "outputs": [csv_path.name],
    })
    return summary


def _run_verify(run: _Run) -> dict:
    grid = run.grid_spec()
    if run.params.has_principal:
        v = riccati.solve_principal(run.params, run.n_nodes)
        reports = [verify.hjb_residual_principal(v, run.params, grid)]
    else:
        coeffs = nash.solve_nash(run.params, run.n_nodes)
        r1, r2 = verify.hjb_residual_nash(coeffs, run.params, grid)
        reports = [r1, r2]
        ode_max = nash.ode_residual(coeffs, run.params)
        reports_extra = {"ode_max_residual": ode_max}
    residuals = {"reports": [r.to_dict() for r in reports]}
    if not run.params.has_principal:
        residuals.update(reports_extra)
    _write_json(residuals, run.out_dir / "residuals.json")
    summary = run.summary_base()
    summary.update({
        "max_residuals": {r.label: r.max_residual for r in reports},
        "outputs": ["residuals.json"],
    })
    return summary


def _dump_paths(run: _Run, cfg: mc.SimConfig, labels, payoff_columns) -> str:
    if cfg.n_paths > 100_000:
        print(f"warning: dumping {cfg.n_paths} paths to paths.csv", file=sys.stderr)
    table = np.column_stack([np.arange(cfg.n_paths, dtype=float), *payoff_columns])
    emit_csv(table, ("path", *labels), run.out_dir / "paths.csv")
    return "paths.csv"


def _run_simulate(run: _Run) -> dict:
    cfg = run.sim_config()
    dump = bool(run.numerics.get("dump_paths", False))
    summary = run.summary_base()
    outputs: list[str] = []
    if run.params.has_principal:
        v = riccati.solve_principal(run.params, run.n_nodes)
        pay_p, pays_a = mc.principal_path_payoffs(run.params, v, cfg)
        principal, agents = mc.principal_estimates_from_payoffs(run.params, cfg, pay_p, pays_a)
        x0 = np.asarray(cfg.x0, dtype=float)
        y0 = mc._agent_y0(run.params, cfg)
        targets = {"principal": -float(np.exp(-run.params.eta_p * (v.value(0.0, x0) - sum(y0))))}
        for est, eta, y in zip(agents, run.params.agent_aversions(), y0):
            targets[est.label] = -float(np.exp(-eta * y))
        estimates = [principal, *agents]
        if dump:
            outputs.append(_dump_paths(run, cfg, ("principal", *mc.agent_labels(run.params)),
                                       (pay_p, *pays_a)))
    else:
        coeffs = nash.solve_nash(run.params, run.n_nodes)
        strategies = nash.feedback_strategies(coeffs, run.params)
        dev_spec = run.config.get("deviation")
        deviation = None
        if dev_spec is not None:
            deviation = mc.Deviation(
                firm=int(dev_spec.get("firm", 1)),
                scale=float(dev_spec.get("scale", 1.0)),
                shift=float(dev_spec.get("shift", 0.0)),
            )
            summary["deviation"] = dev_spec
        z1, z2 = mc.nash_path_payoffs(run.params, strategies, cfg, deviation)
        e1, e2 = mc.nash_estimates_from_payoffs(run.params, cfg, z1, z2)
        x0 = cfg.x0
        targets = {
            "firm1": -float(np.exp(run.params.eta1
                                   * nash.certainty_surface(coeffs, 1, 0.0, x0[0], x0[1]))),
            "firm2": -float(np.exp(run.params.eta2
                                   * nash.certainty_surface(coeffs, 2, 0.0, x0[0], x0[1]))),
        }
        estimates = [e1, e2]
        if dump:
            outputs.append(_dump_paths(run, cfg, ("firm1", "firm2"), (z1, z2)))
    summary.update({
        "estimates": [e.to_dict() for e in estimates],
        "targets": targets,
        "outputs": outputs,
    })
    return summary


_RUNNERS = {
    "single-firm": _run_principal,
    "two-firm": _run_principal,
    "nash": _run_nash,
    "best-response": _run_best_response,
    "verify": _run_verify,
    "simulate": _run_simulate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decarb", description=__doc__)
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the scenario JSON config")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override numerics.seed")
        p.add_argument("--literal-signs", action="store_true",
                       help="use the single-firm model's alternate sign conventions")
    return parser


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    field = getattr(exc, "field", None)
    if field is not None:
        payload["field"] = field
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def run(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise ConfigMismatch("top-level config must be a JSON object")
        if args.seed is not None:
            config.setdefault("numerics", {})["seed"] = args.seed
        if args.literal_signs:
            config.setdefault("model", {})["literal_signs"] = True
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        runner = _Run(args.scenario, config, out_dir)
        summary = _RUNNERS[args.scenario](runner)
        _write_json(summary, out_dir / "summary.json")
        return 0
    except (ValidationError, json.JSONDecodeError, FileNotFoundError, KeyError,
            TypeError, ValueError) as exc:
        return _fail(exc, 1)
    except (NumericalError, OSError) as exc:
        return _fail(exc, 2)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
