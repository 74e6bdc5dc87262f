"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 degenerate filter (all returns
extreme), 4 model-file error, 5 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig, resolve_config
from .data import load_layout, load_panel
from .engine import simulate_scenarios, write_scenarios_csv
from .errors import InputError, ScengenError, ValidationFailure
from .model import load_model, save_model
from .oracle import (
    CheckResult,
    check_covariance_identity,
    check_coverage,
    check_jump_frequency,
    check_time_change_mean,
    format_table,
)
from .pipeline import calibrate
from .risk import backtest, default_portfolio, histogram_export, parse_portfolio

log = logging.getLogger("scengen")

_FLAG_KEYS = {
    "seed": "seed",
    "out": "out",
    "scenarios": "n_scenarios",
    "eta": "eta",
    "violations": "violations",
    "jump_rate": "jump_rate",
    "confidence": "confidence",
    "panel": "panel",
    "layout": "layout",
    "model": "model_file",
    "workers": "workers",
    "portfolio": "portfolio",
    "factors": "report_factors",
}


def _load_inputs(cfg: RunConfig):
    for key in ("panel", "layout"):
        if getattr(cfg, key) is None:
            raise InputError(f"no {key} path given (use --{key} or '{key} = ...' in the config file)")
        if not Path(getattr(cfg, key)).is_file():
            raise InputError(f"{key} file not found: {getattr(cfg, key)}")
    layout, delta = load_layout(cfg.layout)
    return load_panel(cfg.panel, layout, delta)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _portfolio(cfg: RunConfig, layout):
    return parse_portfolio(cfg.portfolio) if cfg.portfolio else default_portfolio(layout)


def cmd_calibrate(cfg: RunConfig) -> int:
    panel = _load_inputs(cfg)
    cal = calibrate(panel, cfg.filter, cfg.model)
    out = _out_dir(cfg)
    path = Path(cfg.model_file) if cfg.model_file else out / "model.json"
    save_model(cal.model, path, cfg.to_dict())
    summary = cal.summary()
    summary["model_file"] = str(path)
    (out / "calibration_summary.json").write_text(json.dumps({"summary": summary, "config": cfg.to_dict()}, indent=1, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=1))
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    path = Path(cfg.model_file) if cfg.model_file else out / "model.json"
    model = load_model(path)
    sims = simulate_scenarios(model, cfg.simulation)
    target = out / "scenarios.csv"
    write_scenarios_csv(sims, target, cfg.to_dict())
    audit = {
        "scenarios": len(sims),
        "total_jumps": int(sims.n_jumps.sum()),
        "mean_tau_days": float(sims.tau_days.mean()),
        "output": str(target),
    }
    print(json.dumps(audit, indent=1))
    return 0


def cmd_backtest(cfg: RunConfig) -> int:
    panel = _load_inputs(cfg)
    report = backtest(
        panel,
        _portfolio(cfg, panel.layout),
        cfg.risk.window_days,
        risk=cfg.risk,
        filt=cfg.filter,
        mcfg=cfg.model,
        seed=cfg.simulation.seed,
    )
    target = _out_dir(cfg) / "backtest.csv"
    report.write_csv(target, cfg.to_dict())
    print(json.dumps(report.totals(), indent=1))
    return 0


def run_validation(cfg: RunConfig, scale_fault: float = 1.0) -> list[CheckResult]:
    panel = _load_inputs(cfg)
    model = calibrate(panel, cfg.filter, cfg.model).model
    if scale_fault != 1.0:
        model = model.replace(scale=model.scale * scale_fault)
    seed = cfg.simulation.seed
    results = [
        check_covariance_identity(model, cfg.validate_scenarios, seed, workers=cfg.simulation.workers),
        check_time_change_mean(model.time_change, seed=seed, target=model.time_change.mean()),
        check_jump_frequency(model, 5000, seed),
    ]
    window = min(cfg.risk.window_days, panel.K - cfg.risk.history)
    if window > 0:
        report = backtest(panel, _portfolio(cfg, panel.layout), window, risk=cfg.risk, filt=cfg.filter, mcfg=cfg.model, seed=seed)
        results.append(check_coverage(report))
    else:
        results.append(CheckResult("backtest_coverage", float("nan"), "skipped", True, "panel shorter than history + 1 day"))
    return results


def cmd_validate(cfg: RunConfig, scale_fault: float = 1.0) -> int:
    results = run_validation(cfg, scale_fault)
    table = format_table(results)
    target = _out_dir(cfg) / "validation.csv"
    target.write_text("# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n" + table + "\n")
    print(table)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise ValidationFailure(f"validation failed: {', '.join(failed)}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    panel = _load_inputs(cfg)
    cal = calibrate(panel, cfg.filter, cfg.model)
    sims = simulate_scenarios(cal.model, cfg.simulation)
    names = panel.layout.column_names
    factors = cfg.report_factors or names
    out = _out_dir(cfg)
    echo = cfg.to_dict()
    written = []
    for name in factors:
        j = panel.layout.index_of(name)
        target = out / f"hist_{name}.csv"
        histogram_export(
            cal.filtered.values[:, j],
            cfg.n_bins,
            target,
            label="historical_filtered",
            config_echo=echo,
            simulated=sims.increments[:, j],
        )
        written.append(str(target))
    print(json.dumps({"histograms": written}, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--panel", help="panel CSV path")
    common.add_argument("--layout", help="layout file path")
    common.add_argument("--model", help="model file path (default <out>/model.json)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--scenarios", type=int, help="number of scenarios")
    common.add_argument("--eta", type=float, help="extreme-event level")
    common.add_argument("--violations", type=int, help="violations M for an extreme event")
    common.add_argument("--jump-rate", type=float)
    common.add_argument("--confidence", type=float)
    common.add_argument("--workers", type=int)
    common.add_argument("--portfolio", help="e.g. 'ZCB:EUR:2:100, FX:USD:1000'")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="scengen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="calibrate and write a model file")
    sub.add_parser("simulate", parents=[common], help="simulate scenarios from a model file")
    sub.add_parser("backtest", parents=[common], help="rolling VaR/ES backtest")
    p = sub.add_parser("validate", parents=[common], help="run the statistical oracle checks")
    p.add_argument("--scale-fault", type=float, default=1.0, help=argparse.SUPPRESS)
    p = sub.add_parser("report", parents=[common], help="histogram tables, historical vs simulated")
    p.add_argument("--factors", help="comma-separated factor names (default: all)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = {key: getattr(args, flag, None) for flag, key in _FLAG_KEYS.items()}
    try:
        cfg = resolve_config(args.config, overrides)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "backtest":
            return cmd_backtest(cfg)
        if args.command == "validate":
            return cmd_validate(cfg, args.scale_fault)
        return cmd_report(cfg)
    except ScengenError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
