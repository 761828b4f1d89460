"""Command-line interface.

Subcommands: estimate-het, estimate-semi, ci, test-linearity, select,
simulate, mc.  Reports are JSON (CSV for summary tables); every report
embeds the package version, the fully resolved configuration, the seed and
a grid description, so a run can be reproduced exactly.  Progress goes to
stderr, data to stdout or files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .cce import UnitFit
from .dgp import DgpConfig, simulate
from .errors import PanelThreshError
from .linearity import linearity_test_pooled, linearity_test_unit
from .lr import lr_confidence_set, lr_critical_value
from .panel import (
    PanelDataset,
    PanelSchema,
    Projector,
    RegimeDirection,
    cross_sectional_average,
    load_panel,
    make_projector,
)
from .selection import mbic_heterogeneous, mbic_semi, select_model
from .threshold import (
    GammaGrid,
    build_grid,
    build_pooled_grid,
    fit_all_units,
    fit_pooled_threshold,
    unit_rss_profile,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARTIAL = 3


# ---------------------------------------------------------------------------
# serialisation helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _fmt(v) -> str:
    # repr round-trips doubles; identical digits in JSON and CSV output
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit_json(report: dict, out: str | None) -> None:
    text = json.dumps(_jsonable(report), indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_csv(header: list[str], rows: list[list], out: str | None) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(c) for c in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _summary_stats(values) -> dict:
    arr = np.asarray(values, dtype=float)
    return {
        "mean": float(arr.mean()),
        "st_dev": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
        "q1": float(np.percentile(arr, 25)),
        "q2": float(np.percentile(arr, 50)),
        "q3": float(np.percentile(arr, 75)),
        "min": float(arr.min()),
        "max": float(arr.max()),
    }


_SUMMARY_COLS = ["mean", "st_dev", "q1", "q2", "q3", "min", "max"]


# ---------------------------------------------------------------------------
# configuration plumbing


_CONFIG_KEYS = {
    "data", "unit_col", "time_col", "y_col", "x_cols", "q_col", "threshold_cols",
    "constant_col", "delimiter", "direction", "quantile_q", "trim", "vcov",
    "bandwidth", "level", "boot", "seed", "intercept_factor", "out", "format",
    "jobs", "max_grid_points", "lags", "q_col_semi",
}


def _read_config_file(path: str) -> dict:
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise PanelThreshError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise PanelThreshError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = val
    return values


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill arguments still unset from the config file; flags always win."""
    if not getattr(args, "schema", None):
        return
    file_values = _read_config_file(args.schema)
    casts = {
        "trim": float, "level": float, "bandwidth": int, "boot": int, "seed": int,
        "jobs": int, "max_grid_points": int, "lags": int,
    }
    for key, raw in file_values.items():
        if getattr(args, key, None) is not None:
            continue
        if key in ("quantile_q", "intercept_factor"):
            low = raw.lower()
            if low in _BOOL_TRUE:
                setattr(args, key, True)
            elif low in _BOOL_FALSE:
                setattr(args, key, False)
            else:
                raise PanelThreshError(f"config key {key} must be boolean, got {raw!r}")
        elif key in casts:
            setattr(args, key, casts[key](raw))
        else:
            setattr(args, key, raw)


def _defaults(args: argparse.Namespace) -> None:
    pairs = {
        "trim": 0.10, "vcov": "hc", "level": 0.05, "boot": 299,
        "direction": "leq", "format": "json",
        "quantile_q": False, "intercept_factor": False,
    }
    for key, val in pairs.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, val)


def _schema_from_args(args) -> PanelSchema:
    needed = {"unit_col": args.unit_col, "time_col": args.time_col,
              "y_col": args.y_col, "x_cols": args.x_cols, "q_col": args.q_col}
    missing = [k for k, v in needed.items() if not v]
    if missing:
        raise PanelThreshError(f"missing required schema settings: {missing}")
    x_cols = [c.strip() for c in args.x_cols.split(",") if c.strip()]
    thr = args.threshold_cols
    thr_cols = [c.strip() for c in thr.split(",") if c.strip()] if thr else list(x_cols)
    return PanelSchema(
        unit_col=args.unit_col,
        time_col=args.time_col,
        y_col=args.y_col,
        x_cols=x_cols,
        q_col=args.q_col,
        threshold_cols=thr_cols,
        direction=RegimeDirection(args.direction),
        delimiter=args.delimiter or ",",
        constant_col=args.constant_col,
        quantile_q=bool(args.quantile_q),
    )


def _resolved_config(args, extra: dict | None = None) -> dict:
    skip = {"func"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    if extra:
        cfg.update(extra)
    return _jsonable(cfg)


def _load_panel(args) -> tuple[PanelDataset, dict]:
    if not args.data:
        raise PanelThreshError("--data is required")
    schema = _schema_from_args(args)
    panel, ingest = load_panel(args.data, schema)
    _progress(
        f"loaded panel: N={ingest.n_units} T={ingest.n_periods} "
        f"K={ingest.n_regressors} r={ingest.n_threshold}"
    )
    return panel, {
        "n_units": ingest.n_units,
        "n_periods": ingest.n_periods,
        "n_regressors": ingest.n_regressors,
        "n_threshold": ingest.n_threshold,
    }


def _projector_for(panel: PanelDataset, intercept_factor: bool) -> Projector:
    basis = cross_sectional_average(panel, include_intercept=intercept_factor)
    return make_projector(basis)


def _grid_info(grid: GammaGrid) -> dict:
    return {
        "kind": grid.source.value,
        "trim_lo": grid.trim_lo,
        "trim_hi": grid.trim_hi,
        "n_points": len(grid),
        "min": float(grid.values[0]),
        "max": float(grid.values[-1]),
    }


def _unit_record(label: str, fit: UnitFit, x_names: list[str], w_names: list[str]) -> dict:
    se = fit.std_errors
    k = fit.n_regressors
    return {
        "unit": label,
        "gamma": fit.gamma,
        "beta": dict(zip(x_names, fit.beta.tolist())),
        "delta": dict(zip(w_names, fit.delta.tolist())),
        "se_beta": dict(zip(x_names, se[:k].tolist())),
        "se_delta": dict(zip(w_names, se[k:].tolist())),
        "rss": fit.rss,
        "sigma2_eps": fit.sigma2_eps,
        "n_low": fit.n_low,
        "n_high": fit.n_high,
    }


def _coef_names(args_or_panel, panel: PanelDataset) -> tuple[list[str], list[str]]:
    k = panel.n_regressors
    x_names = [f"x{j + 1}" for j in range(k)]
    if getattr(args_or_panel, "x_cols", None):
        x_names = [c.strip() for c in args_or_panel.x_cols.split(",") if c.strip()]
    w_names = [x_names[j] for j in range(k) if panel.selection[j]]
    return x_names, [f"delta_{w}" for w in w_names]


# ---------------------------------------------------------------------------
# subcommands


def _cmd_estimate_het(args) -> int:
    panel, dims = _load_panel(args)
    proj = _projector_for(panel, args.intercept_factor)
    het = fit_all_units(
        panel, proj, trim=args.trim, vcov=args.vcov, bandwidth=args.bandwidth,
        max_points=args.max_grid_points, n_jobs=args.jobs,
    )
    x_names, w_names = _coef_names(args, panel)
    units = []
    for i, fit in enumerate(het.unit_fits):
        if fit is not None:
            units.append(_unit_record(panel.unit_labels[i], fit, x_names, w_names))
    ok_fits = [f for f in het.unit_fits if f is not None]
    if not ok_fits:
        raise PanelThreshError(
            "every unit failed to fit: " + "; ".join(sorted(het.errors.values()))
        )
    summary = {}
    if ok_fits:
        k = panel.n_regressors
        for j, name in enumerate(x_names):
            summary[f"beta_{name}"] = _summary_stats([f.theta[j] for f in ok_fits])
        for j, name in enumerate(w_names):
            summary[name] = _summary_stats([f.theta[k + j] for f in ok_fits])
        summary["gamma"] = _summary_stats([f.gamma for f in ok_fits])

    grids = [g for g in het.grids if g is not None]
    report = {
        "version": __version__,
        "command": "estimate-het",
        "config": _resolved_config(args),
        "seed": args.seed,
        "grid": {
            "kind": "per_unit",
            "trim": args.trim,
            "sizes": [len(g) for g in grids],
        },
        **dims,
        "units": units,
        "failures": {str(i): msg for i, msg in sorted(het.errors.items())},
        "summary": summary,
    }
    if args.format == "csv":
        rows = [[name] + [stats[c] for c in _SUMMARY_COLS] for name, stats in summary.items()]
        _emit_csv(["coefficient"] + _SUMMARY_COLS, rows, args.out)
    else:
        _emit_json(report, args.out)
    if het.errors:
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_estimate_semi(args) -> int:
    panel, dims = _load_panel(args)
    proj = _projector_for(panel, args.intercept_factor)
    grid = build_pooled_grid(panel, trim=args.trim, max_points=args.max_grid_points)
    pooled = fit_pooled_threshold(panel, proj, grid, vcov=args.vcov, bandwidth=args.bandwidth)
    x_names, w_names = _coef_names(args, panel)
    theta_names = [f"beta_{n}" for n in x_names] + w_names
    units = [
        _unit_record(panel.unit_labels[i], fit, x_names, w_names)
        for i, fit in enumerate(pooled.unit_fits)
    ]
    report = {
        "version": __version__,
        "command": "estimate-semi",
        "config": _resolved_config(args),
        "seed": args.seed,
        "grid": _grid_info(grid),
        **dims,
        "gamma": pooled.gamma,
        "theta_mg": dict(zip(theta_names, pooled.theta_mg.tolist())),
        "mg_se": dict(zip(theta_names, pooled.mg_std_errors.tolist())),
        "sigma2_eps": pooled.sigma2_eps,
        "total_rss": pooled.total_rss,
        "n_grid_skipped": int(pooled.skipped.sum()),
        "units": units,
    }
    _require_json(args)
    _emit_json(report, args.out)
    return EXIT_OK


def _cmd_ci(args) -> int:
    panel, dims = _load_panel(args)
    proj = _projector_for(panel, args.intercept_factor)
    level = args.level
    report = {
        "version": __version__,
        "command": "ci",
        "config": _resolved_config(args),
        "seed": args.seed,
        **dims,
        "level": level,
        "critical_value": lr_critical_value(level),
        "eta2": args.eta2,
    }
    if args.model == "semi":
        grid = build_pooled_grid(panel, trim=args.trim, max_points=args.max_grid_points)
        pooled = fit_pooled_threshold(panel, proj, grid)
        profile = lr_confidence_set(
            grid, pooled.pooled_rss, pooled.sigma2_eps, level=level, eta2=args.eta2
        )
        report["grid"] = _grid_info(grid)
        report["pooled"] = {
            "gamma": profile.gamma_hat,
            "lr_values": profile.lr_values,
            "grid_values": grid.values,
            "confidence_set": profile.confidence_set,
        }
    else:
        entries = []
        failures = {}
        for i in range(panel.n_units):
            x_i, y_i, q_i = panel.unit(i)
            try:
                grid = build_grid(q_i, trim=args.trim, max_points=args.max_grid_points, unit=i)
                prof = unit_rss_profile(
                    x_i, y_i, q_i, proj, grid.values, panel.selection, panel.direction
                )
                best = prof.argmin()
                sigma2 = float(prof.rss[best]) / panel.n_periods
                lrp = lr_confidence_set(grid, prof.rss, sigma2, level=level, eta2=args.eta2)
                entries.append({
                    "unit": panel.unit_labels[i],
                    "gamma": lrp.gamma_hat,
                    "grid_values": grid.values,
                    "lr_values": lrp.lr_values,
                    "confidence_set": lrp.confidence_set,
                })
            except PanelThreshError as exc:
                failures[str(i)] = str(exc)
        report["grid"] = {"kind": "per_unit", "trim": args.trim}
        report["units"] = entries
        report["failures"] = failures
        if failures and entries:
            _require_json(args)
            _emit_json(report, args.out)
            return EXIT_PARTIAL
        if failures:
            raise PanelThreshError("confidence sets failed for every unit")
    _require_json(args)
    _emit_json(report, args.out)
    return EXIT_OK


def _cmd_test_linearity(args) -> int:
    panel, dims = _load_panel(args)
    proj = _projector_for(panel, args.intercept_factor)
    level = args.level
    report = {
        "version": __version__,
        "command": "test-linearity",
        "config": _resolved_config(args),
        "seed": args.seed,
        **dims,
        "level": level,
        "n_boot": args.boot,
        "grid": {"trim": args.trim, "max_points": args.max_grid_points},
    }
    scope = args.scope
    if scope in ("pooled", "both"):
        grid = build_pooled_grid(panel, trim=args.trim, max_points=args.max_grid_points)
        _progress(f"pooled sup-Wald over {len(grid)} grid points, B={args.boot}")
        rep = linearity_test_pooled(panel, proj, grid, n_boot=args.boot, seed=args.seed)
        report["pooled"] = {
            "statistic": rep.statistic,
            "p_value": rep.p_value,
            "reject": bool(rep.p_value <= level),
            "n_boot": rep.n_boot,
            "n_dropped": rep.n_dropped,
            "status": rep.status,
            "grid": _grid_info(grid),
        }
    if scope in ("units", "both"):
        entries = []
        failures = {}
        for i in range(panel.n_units):
            x_i, y_i, q_i = panel.unit(i)
            try:
                grid = build_grid(q_i, trim=args.trim, max_points=args.max_grid_points, unit=i)
                rep = linearity_test_unit(
                    x_i, y_i, q_i, proj, grid, panel.selection, panel.direction,
                    n_boot=args.boot, seed=args.seed + i, lag_trunc=args.lags, unit=i,
                )
                entries.append({
                    "unit": panel.unit_labels[i],
                    "statistic": rep.statistic,
                    "p_value": rep.p_value,
                    "reject": bool(rep.p_value <= level),
                    "n_boot": rep.n_boot,
                    "n_dropped": rep.n_dropped,
                    "status": rep.status,
                })
            except PanelThreshError as exc:
                failures[str(i)] = str(exc)
        rejections = [e["reject"] for e in entries]
        report["units"] = entries
        report["failures"] = failures
        report["rejection_rate"] = float(np.mean(rejections)) if rejections else None
        if failures and not entries:
            raise PanelThreshError("linearity test failed for every unit")
        if failures:
            _require_json(args)
            _emit_json(report, args.out)
            return EXIT_PARTIAL
    _require_json(args)
    _emit_json(report, args.out)
    return EXIT_OK


def _cmd_select(args) -> int:
    panel, dims = _load_panel(args)
    proj = _projector_for(panel, args.intercept_factor)
    het = fit_all_units(
        panel, proj, trim=args.trim, max_points=args.max_grid_points, n_jobs=args.jobs
    )
    fits = het.require_complete()
    score_het = mbic_heterogeneous(
        fits, panel.n_units, panel.n_periods, panel.n_regressors, panel.n_threshold
    )

    semi_panel = panel
    if args.q_col_semi:
        x_cols = [c.strip() for c in args.x_cols.split(",")]
        schema = _schema_from_args(args)
        semi_schema = PanelSchema(
            unit_col=schema.unit_col, time_col=schema.time_col, y_col=schema.y_col,
            x_cols=x_cols, q_col=args.q_col_semi, threshold_cols=schema.threshold_cols,
            direction=schema.direction, delimiter=schema.delimiter,
            constant_col=schema.constant_col, quantile_q=schema.quantile_q,
        )
        semi_panel, _ = load_panel(args.data, semi_schema)
    grid = build_pooled_grid(semi_panel, trim=args.trim, max_points=args.max_grid_points)
    pooled = fit_pooled_threshold(semi_panel, proj, grid)
    score_semi = mbic_semi(
        pooled, panel.n_units, panel.n_periods, panel.n_regressors, panel.n_threshold
    )
    result = select_model(score_het, score_semi)
    report = {
        "version": __version__,
        "command": "select",
        "config": _resolved_config(args),
        "seed": args.seed,
        **dims,
        "grid": {"het": {"trim": args.trim}, "semi": _grid_info(grid)},
        "mbic_heterogeneous": vars(score_het),
        "mbic_semi_homogeneous": vars(score_semi),
        "choice": result.choice.value,
        "margin": result.margin,
        "tie": result.tie,
    }
    _require_json(args)
    _emit_json(report, args.out)
    return EXIT_OK


def _dgp_config_from_args(args, seed: int) -> DgpConfig:
    beta = tuple(float(v) for v in args.beta.split(",")) if "," in args.beta else float(args.beta)
    return DgpConfig(
        n_units=args.n_units,
        n_periods=args.n_periods,
        k_regressors=args.k,
        m_factors=args.m,
        beta_mean=beta,
        beta_dispersion=args.beta_dispersion,
        c0=args.c0,
        c_dispersion=args.c_dispersion,
        alpha=args.alpha,
        gamma_true=args.gamma,
        sigma_eps=args.sigma_eps,
        ar1_rho=args.rho,
        threshold_source=args.threshold_source,
        seed=seed,
    )


def _cmd_simulate(args) -> int:
    config = _dgp_config_from_args(args, args.seed)
    panel, truth = simulate(config)
    header = ["unit", "time", "y"] + [f"x{j + 1}" for j in range(panel.n_regressors)]
    rows = []
    for i in range(panel.n_units):
        for t in range(panel.n_periods):
            rows.append(
                [panel.unit_labels[i], panel.time_labels[t], float(panel.y[t, i])]
                + [float(v) for v in panel.x[i, t]]
            )
    _emit_csv(header, rows, args.out)
    sidecar = {
        "version": __version__,
        "command": "simulate",
        "config": _resolved_config(args),
        "seed": args.seed,
        "grid": None,
        "q_column": f"x{args.threshold_source + 1}",
        "truth": truth.as_dict(),
    }
    truth_path = args.truth_out or ((args.out or "panel") + ".truth.json")
    _emit_json(sidecar, truth_path)
    _progress(f"wrote panel CSV ({len(rows)} rows) and truth sidecar {truth_path}")
    return EXIT_OK


def _cmd_mc(args) -> int:
    level = args.level
    if args.max_grid_points is None:
        # bootstrap workspaces hold per-gamma projections; keep the grid modest
        args.max_grid_points = 60
    rows = []
    for rep in range(args.reps):
        rep_seed = int(np.random.SeedSequence((args.seed, rep)).generate_state(1, np.uint64)[0])
        config = _dgp_config_from_args(args, rep_seed)
        panel, truth = simulate(config)
        proj = _projector_for(panel, args.intercept_factor)
        grid = build_pooled_grid(panel, trim=args.trim, max_points=args.max_grid_points)
        pooled = fit_pooled_threshold(panel, proj, grid)
        gamma_true = float(truth.gamma[0])
        profile = lr_confidence_set(
            grid, pooled.pooled_rss, pooled.sigma2_eps, level=level, eta2=1.0
        )
        covered = profile.covers(gamma_true)
        test = linearity_test_pooled(panel, proj, grid, n_boot=args.boot, seed=rep_seed)
        rows.append([
            rep, rep_seed, pooled.gamma, gamma_true, pooled.gamma - gamma_true,
            abs(pooled.gamma - gamma_true), int(covered),
            int(test.p_value <= level), test.p_value, test.statistic,
        ])
        _progress(f"mc rep {rep + 1}/{args.reps}: gamma_hat={pooled.gamma:.4f} p={test.p_value:.3f}")
    header = [
        "rep", "seed", "gamma_hat", "gamma_true", "bias", "abs_error",
        "ci_covered", "reject", "p_value", "sup_wald",
    ]
    if args.format == "json":
        report = {
            "version": __version__,
            "command": "mc",
            "config": _resolved_config(args),
            "seed": args.seed,
            "grid": {"trim": args.trim, "max_points": args.max_grid_points},
            "columns": header,
            "rows": rows,
        }
        _emit_json(report, args.out)
    else:
        _emit_csv(header, rows, args.out)
    return EXIT_OK


def _require_json(args) -> None:
    if getattr(args, "format", "json") == "csv":
        raise PanelThreshError(
            "csv output is only available for summary tables (estimate-het, mc)"
        )


# ---------------------------------------------------------------------------
# argument parsing


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="input CSV path")
    p.add_argument("--schema", help="key=value config file; flags take precedence")
    p.add_argument("--unit-col", dest="unit_col")
    p.add_argument("--time-col", dest="time_col")
    p.add_argument("--y-col", dest="y_col")
    p.add_argument("--x-cols", dest="x_cols", help="comma-separated regressor columns")
    p.add_argument("--q-col", dest="q_col", help="threshold-variable column")
    p.add_argument(
        "--threshold-cols", dest="threshold_cols",
        help="comma-separated regressors with regime-switching coefficients "
             "(default: all regressors)",
    )
    p.add_argument("--constant-col", dest="constant_col",
                   help="regressor column that is a constant (observed factor)")
    p.add_argument("--delimiter", default=None)
    p.add_argument("--direction", choices=["leq", "geq"], default=None,
                   help="regime with the extra coefficient: q<=gamma or q>=gamma")
    p.add_argument("--quantile-q", dest="quantile_q", action="store_const", const=True,
                   default=None, help="replace q by its within-unit percentile (0-100]")


def _add_estimation_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trim", type=float, default=None, help="grid trim fraction per side")
    p.add_argument("--vcov", choices=["hc", "hac"], default=None)
    p.add_argument("--bandwidth", type=int, default=None, help="HAC bandwidth (default T^(1/4))")
    p.add_argument("--intercept-factor", dest="intercept_factor", action="store_const",
                   const=True, default=None,
                   help="prepend an intercept column to the projection basis")
    p.add_argument("--max-grid-points", dest="max_grid_points", type=int, default=None,
                   help="thin the threshold grid to at most this many points")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker threads for per-unit fits")


def _add_dgp_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-units", dest="n_units", type=int, required=True)
    p.add_argument("--n-periods", dest="n_periods", type=int, required=True)
    p.add_argument("--k", type=int, default=1, help="number of regressors")
    p.add_argument("--m", type=int, default=1, help="number of common factors")
    p.add_argument("--beta", default="1.0", help="slope mean(s), comma-separated for K>1")
    p.add_argument("--beta-dispersion", dest="beta_dispersion", type=float, default=0.0)
    p.add_argument("--c0", type=float, default=1.0, help="threshold-effect scale")
    p.add_argument("--c-dispersion", dest="c_dispersion", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.0, help="shrink exponent in [0, 0.5)")
    p.add_argument("--gamma", type=float, default=0.0, help="true threshold")
    p.add_argument("--sigma-eps", dest="sigma_eps", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.0, help="AR(1) coefficient of the noise")
    p.add_argument("--threshold-source", dest="threshold_source", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panelthresh",
        description="Panel threshold regression with cross-section-average factor projection",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-het", help="per-unit thresholds and slopes")
    _add_data_args(p); _add_estimation_args(p); _add_output_args(p)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_estimate_het)

    p = sub.add_parser("estimate-semi", help="common threshold with mean-group slopes")
    _add_data_args(p); _add_estimation_args(p); _add_output_args(p)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_estimate_semi)

    p = sub.add_parser("ci", help="likelihood-ratio confidence sets for thresholds")
    _add_data_args(p); _add_estimation_args(p); _add_output_args(p)
    p.add_argument("--model", choices=["het", "semi"], default="het")
    p.add_argument("--level", type=float, default=None, help="significance level a")
    p.add_argument("--eta2", type=float, default=1.0,
                   help="heteroskedasticity scale (1 = homoskedastic)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_ci)

    p = sub.add_parser("test-linearity", help="sup-Wald no-threshold tests with bootstrap")
    _add_data_args(p); _add_estimation_args(p); _add_output_args(p)
    p.add_argument("--scope", choices=["units", "pooled", "both"], default="both")
    p.add_argument("--level", type=float, default=None)
    p.add_argument("--boot", type=int, default=None, help="bootstrap replicates")
    p.add_argument("--lags", type=int, default=None, help="kernel lag truncation (default T^(1/4))")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_test_linearity)

    p = sub.add_parser("select", help="information criterion: per-unit vs common threshold")
    _add_data_args(p); _add_estimation_args(p); _add_output_args(p)
    p.add_argument("--q-col-semi", dest="q_col_semi", default=None,
                   help="alternative threshold column for the common-threshold model")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("simulate", help="draw one synthetic panel with a truth sidecar")
    _add_dgp_args(p); _add_output_args(p)
    p.add_argument("--truth-out", dest="truth_out", help="truth JSON path")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("mc", help="replication study: bias, CI coverage, test rejections")
    _add_dgp_args(p); _add_estimation_args(p); _add_output_args(p)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--level", type=float, default=None)
    p.add_argument("--boot", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_mc)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        _defaults(args)
        if getattr(args, "jobs", None) in (None, 0):
            args.jobs = os.cpu_count() or 1
        return args.func(args)
    except PanelThreshError as exc:
        _emit_json({"error": {"type": type(exc).__name__, "message": str(exc)}}, None)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
