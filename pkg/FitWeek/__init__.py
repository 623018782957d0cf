import json
import os
import sys

import numpy as np
import structlog

from shared.config import cli_overrides, load_config
from shared.data_io import write_json, write_report
from shared.data_model import Unit
from shared.errors import NowcastError
from shared.models import assemble_history, build_training_design, fit_week, nowcast
from shared.orchestration_logic import atomic_output_dir, load_dataset, resolve_week
from shared.solver import check_kkt
from shared.transforms import log_search, percent_to_logit

logger = structlog.get_logger()


def fit_report(config, label: str):
    """Fit the single week `label` and describe the fit; returns (payload, cv_table)."""
    dataset = load_dataset(config)
    spec = config.model
    t = resolve_week(label, dataset.finalized)
    history, filled = assemble_history(dataset, t, spec.span, config.vintage_mode)
    y_logit = history.with_values(percent_to_logit(history.values, spec.transform), Unit.FREE)
    week_fit = fit_week(y_logit, dataset.panel, t, spec, config.threads)
    result, table = week_fit.fit, week_fit.cv_table

    design = build_training_design(y_logit, dataset.panel, t, spec)
    kkt = check_kkt(design, result)
    x_t = log_search(dataset.panel.row_at(t), spec.transform) if dataset.panel is not None else np.empty(0)
    estimate = nowcast(result, y_logit.values[::-1][:spec.n_lags], x_t)
    flags = table.one_se_flags()

    payload = {
        "week": str(t),
        "end_date": t.end_date.isoformat(),
        "vintage_mode": config.vintage_mode.value,
        "nowcast_percent": 100.0 * estimate,
        "intercept": result.intercept,
        "coefficients": dict(zip(result.column_names, result.coefficients.tolist())),
        "active_set_size": result.active_set_size,
        "penalty": result.spec.as_dict(),
        "objective": result.objective_value,
        "iterations": result.n_iter,
        "kkt": {"ok": kkt.ok, "max_violation": kkt.max_violation, "violating_columns": list(kkt.violating_columns)},
        "cv": {
            "best_position": table.best_position,
            "best_error": table.best.mean_error,
            "threshold": table.threshold,
            "strongest_within_one_se": bool(flags[0]),
            "weakest_within_one_se": bool(flags[-1]),
        },
        "filled_weeks": [str(w) for w in filled],
    }
    if not kkt.ok:
        logger.warning("Fit fails the optimality check", week=str(t), max_violation=kkt.max_violation)
    return payload, table


def main(args) -> int:
    """Fit one target week and dump its coefficients, penalty and cross-validation table."""
    logger.info("FitWeek command executing", week=args.week)
    try:
        config = load_config(args.config, cli_overrides(args))
        payload, table = fit_report(config, args.week)
        if config.output_dir:
            with atomic_output_dir(config.output_dir) as scratch:
                write_json(payload, os.path.join(scratch, "fit.json"))
                write_report(table.to_frame(), os.path.join(scratch, "cv_table.csv"), digits=None)
        else:
            print(json.dumps(payload, indent=2, sort_keys=True))
    except NowcastError as e:
        logger.error("Week fit failed", error=str(e), exit_code=e.exit_code)
        print(f"fit-week: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected error fitting week", error=str(e))
        print(f"fit-week: unexpected error: {e}", file=sys.stderr)
        return 1

    logger.info("Week fit complete", week=payload["week"], nowcast_percent=payload["nowcast_percent"])
    return 0
