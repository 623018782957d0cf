import glob
import os
import sys
from typing import List

import pandas as pd
import structlog

from shared.config import cli_overrides, load_config
from shared.data_io import read_panel_csv, write_json, write_report
from shared.data_model import SearchPanel
from shared.errors import ConfigError, MismatchedPanelError, NowcastError
from shared.orchestration_logic import atomic_output_dir, run_evaluation

logger = structlog.get_logger()


def check_versions(panels: List[SearchPanel], paths: List[str]):
    reference = panels[0]
    for panel, path in zip(panels[1:], paths[1:]):
        if panel.terms != reference.terms:
            raise MismatchedPanelError(f"{path}: terms differ from {paths[0]}")
        if panel.start != reference.start or len(panel) != len(reference):
            raise MismatchedPanelError(f"{path}: weeks {panel.start}..{panel.end} differ from {paths[0]}")


def summarize(frames: List[pd.DataFrame]) -> pd.DataFrame:
    """Mean and sample standard deviation of every metric value across versions."""
    stacked = pd.concat(frames, ignore_index=True)
    grouped = stacked.groupby(["period", "metric", "method"], sort=False)["value"]
    summary = grouped.agg(["mean", "std"]).reset_index()
    summary["versions"] = len(frames)
    return summary


def main(args) -> int:
    """Evaluate once per search panel version and report the spread of every metric."""
    logger.info("MultiVersion command executing", panels=args.panels)
    try:
        config = load_config(args.config, cli_overrides(args))
        if not config.output_dir:
            raise ConfigError("an output directory is required (--out or ARGO_OUTPUT_DIR)")
        paths = sorted(glob.glob(args.panels))
        if len(paths) < 2:
            raise ConfigError(f"need at least two panel files matching {args.panels}, found {len(paths)}")
        panels = [read_panel_csv(p, config.panel_source) for p in paths]
        check_versions(panels, paths)

        frames = []
        metadata = None
        for index, (path, panel) in enumerate(zip(paths, panels)):
            logger.info("Evaluating panel version", version=index, path=path)
            result = run_evaluation(config, panel=panel, with_bootstrap=False)
            frames.append(result.metrics.frame.assign(version=index))
            metadata = metadata or result.metadata
        summary = summarize(frames)

        metadata = dict(metadata, versions=[os.path.abspath(p) for p in paths])
        with atomic_output_dir(config.output_dir) as scratch:
            write_report(summary, os.path.join(scratch, "multiversion.csv"))
            write_report(pd.concat(frames, ignore_index=True), os.path.join(scratch, "metrics_by_version.csv"))
            write_json(metadata, os.path.join(scratch, "run_meta.json"))
    except NowcastError as e:
        logger.error("Multi-version evaluation failed", error=str(e), exit_code=e.exit_code)
        print(f"multiversion: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected error during multi-version evaluation", error=str(e))
        print(f"multiversion: unexpected error: {e}", file=sys.stderr)
        return 1

    logger.info("Multi-version evaluation complete", versions=len(paths), out=config.output_dir)
    return 0
