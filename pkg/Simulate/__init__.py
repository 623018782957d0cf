import json
import os
import sys

import structlog

from shared.config import get_settings
from shared.data_io import write_ili_csv, write_json, write_panel_csv, write_vintage_csv
from shared.errors import ConfigError, NowcastError
from shared.orchestration_logic import atomic_output_dir
from shared.synthetic import SyntheticSpec, generate_synthetic

logger = structlog.get_logger()


def _load_spec(args) -> SyntheticSpec:
    payload = {}
    if args.spec:
        if not os.path.isfile(args.spec):
            raise ConfigError(f"synthetic spec file not found: {args.spec}")
        with open(args.spec, encoding="utf-8") as f:
            try:
                payload = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{args.spec}: malformed JSON: {e}") from e
    seed = args.seed if args.seed is not None else get_settings().get("seed", payload.get("seed"))
    if seed is None:
        raise ConfigError("a seed is required (--seed, ARGO_SEED or 'seed' in the spec file)")
    payload["seed"] = int(seed)
    return SyntheticSpec.from_dict(payload)


def run_config(spec: SyntheticSpec) -> dict:
    """An evaluate config pointing at the simulated files."""
    return {
        "inputs": {"ili": "ili.csv", "vintages": "vintages.csv", "panel": "panel.csv", "panel_source": "scaled"},
        "model": {"n_lags": spec.n_lags, "delta": spec.delta},
        "seed": spec.seed,
    }


def main(args) -> int:
    """Write a synthetic ILI file, revision file, search panel, truth record and run config."""
    logger.info("Simulate command executing")
    try:
        spec = _load_spec(args)
        out_dir = args.out or get_settings().get("output_dir")
        if not out_dir:
            raise ConfigError("an output directory is required (--out or ARGO_OUTPUT_DIR)")
        data = generate_synthetic(spec)
        with atomic_output_dir(out_dir) as scratch:
            write_ili_csv(data.vintages.finalized, os.path.join(scratch, "ili.csv"))
            write_vintage_csv(data.vintages, os.path.join(scratch, "vintages.csv"))
            write_panel_csv(data.panel, os.path.join(scratch, "panel.csv"))
            write_json(data.truth, os.path.join(scratch, "truth.json"))
            write_json(run_config(spec), os.path.join(scratch, "config.json"))
    except NowcastError as e:
        logger.error("Simulation failed", error=str(e), exit_code=e.exit_code)
        print(f"simulate: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected error during simulation", error=str(e))
        print(f"simulate: unexpected error: {e}", file=sys.stderr)
        return 1

    logger.info("Simulation complete", out=out_dir, weeks=spec.n_weeks, seed=spec.seed)
    return 0
