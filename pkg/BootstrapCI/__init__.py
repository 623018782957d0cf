import json
import os
import sys

import structlog

from shared.bootstrap import stationary_bootstrap_ci
from shared.config import BootstrapSettings, get_settings, load_config
from shared.data_io import read_errors_csv, write_report
from shared.errors import ConfigError, DataError, NowcastError
from shared.orchestration_logic import atomic_output_dir, efficiency_frame

logger = structlog.get_logger()


def _settings(args):
    """Block length, replicates, level, seed and threads, with flags over config over defaults."""
    if args.config:
        config = load_config(args.config, {"seed": args.seed, "threads": args.threads})
        defaults, seed, threads = config.bootstrap, config.seed, config.threads
    else:
        env = get_settings()
        defaults = BootstrapSettings()
        seed = args.seed if args.seed is not None else env.get("seed")
        threads = args.threads or int(env.get("threads", 1))
        if seed is None:
            raise ConfigError("a seed is required (--seed, ARGO_SEED or --config)")
    return (
        args.block_length if args.block_length is not None else defaults.mean_block_length,
        args.replicates if args.replicates is not None else defaults.replicates,
        args.level if args.level is not None else defaults.level,
        int(seed),
        threads,
    )


def main(args) -> int:
    """
    Relative efficiency of two methods from their error files, with a stationary
    bootstrap interval. Printed as JSON, and written to --out when given.
    """
    logger.info("BootstrapCI command executing", errors1=args.errors1, errors2=args.errors2)
    try:
        block_length, replicates, level, seed, threads = _settings(args)
        errors1 = read_errors_csv(args.errors1)
        errors2 = read_errors_csv(args.errors2)
        if errors1.shape != errors2.shape:
            raise DataError(f"error files differ in length: {errors1.size} vs {errors2.size}")
        estimate = stationary_bootstrap_ci(errors1, errors2, block_length, replicates, level, seed, threads)
        if args.out:
            with atomic_output_dir(args.out) as scratch:
                write_report(efficiency_frame({os.path.splitext(os.path.basename(args.errors2))[0]: estimate}), os.path.join(scratch, "efficiency.csv"))
        print(json.dumps(estimate.as_dict(), sort_keys=True))
    except NowcastError as e:
        logger.error("Bootstrap interval failed", error=str(e), exit_code=e.exit_code)
        print(f"bootstrap-ci: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected error during bootstrap", error=str(e))
        print(f"bootstrap-ci: unexpected error: {e}", file=sys.stderr)
        return 1

    logger.info("Bootstrap interval complete", point=estimate.point, ci_low=estimate.ci_low, ci_high=estimate.ci_high)
    return 0
