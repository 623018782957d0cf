import sys

import structlog

from shared.config import cli_overrides, load_config
from shared.errors import ConfigError, NowcastError
from shared.orchestration_logic import run_evaluation, write_evaluation

logger = structlog.get_logger()


def main(args) -> int:
    """
    Run the retrospective evaluation and write estimates, metrics, efficiencies,
    coefficient trajectories and run metadata to the output directory.
    """
    logger.info("Evaluate command executing")
    try:
        config = load_config(args.config, cli_overrides(args))
        if not config.output_dir:
            raise ConfigError("an output directory is required (--out or ARGO_OUTPUT_DIR)")
        result = run_evaluation(config)
        write_evaluation(result, config.output_dir)
    except NowcastError as e:
        logger.error("Evaluation failed", error=str(e), exit_code=e.exit_code)
        print(f"evaluate: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected error during evaluation", error=str(e))
        print(f"evaluate: unexpected error: {e}", file=sys.stderr)
        return 1

    logger.info("Evaluation complete", out=config.output_dir, weeks=len(result.target))
    return 0
