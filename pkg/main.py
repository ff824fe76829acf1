"""
DANO simulator and classifier harness - command-line entry point

    python main.py prep-data mnist --images ... --labels ... --out data/mnist.csv
    python main.py train --dataset data/mnist.csv --mode dano --k 4 --epochs 50
    python main.py rescue --dataset data/mnist.csv --checkpoint runs/vqc-L6-s0/checkpoints/epoch_0030.json
    python main.py eval --dataset data/mnist.csv --checkpoint runs/dano-k4-L6-s0/checkpoints/best.json
    python main.py verify --seed 0
    python main.py bench --n 8 10 12 --k 2 4 --out runs/bench.csv
"""
import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from app.models.config_models import LossKind, MeasurementMode
from cli.commands import cmd_bench, cmd_eval, cmd_prep_data, cmd_rescue, cmd_train, cmd_verify
from services.verification import SUITES
from utils.errors import ConfigError, DanoError
from utils.logging_config import setup_logging
from utils.settings import get_settings

load_dotenv()

logger = logging.getLogger(__name__)

EXIT_ERROR = 2


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--json-logs", action="store_true", default=None, help="one JSON object per log line")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    return common


def _run_parser() -> argparse.ArgumentParser:
    """Flags that feed RunConfig; each one overrides the --config file"""
    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--config", default=None, help="key=value file, overridden by flags")
    run.add_argument("--mode", choices=[mode.value for mode in MeasurementMode], default=None)
    run.add_argument("--n", type=int, default=None, help="qubits")
    run.add_argument("--k", type=int, default=None, help="observable locality")
    run.add_argument("--depth", type=int, default=None, help="variational layers")
    run.add_argument("--m", type=int, default=None, help="readout windows (default n)")
    run.add_argument("--classes", type=int, default=None)
    run.add_argument("--epochs", type=int, default=None)
    run.add_argument("--batch", type=int, default=None)
    run.add_argument("--lr", type=float, default=None)
    run.add_argument("--beta1", type=float, default=None)
    run.add_argument("--beta2", type=float, default=None)
    run.add_argument("--eps", type=float, default=None)
    run.add_argument("--loss", choices=[kind.value for kind in LossKind], default=None)
    run.add_argument("--dataset", default=None, help="feature-set cache written by prep-data")
    run.add_argument("--out", default=None, help="run root directory")
    run.add_argument("--run-id", dest="run_id", default=None)
    run.add_argument("--switch-epoch", dest="switch_epoch", type=int, default=None)
    run.add_argument("--checkpoint", default=None)
    run.add_argument("--no-wall-time", dest="no_wall_time", action="store_true",
                     help="leave wall_seconds empty so metrics files are reproducible")
    return run


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    run = _run_parser()
    parser = argparse.ArgumentParser(prog="dano", description="DANO statevector simulator and classifier harness")
    sub = parser.add_subparsers(dest="command", required=True)

    prep = sub.add_parser("prep-data", help="build a feature-set cache")
    prep_sources = prep.add_subparsers(dest="source", required=True)
    mnist = prep_sources.add_parser("mnist", parents=[common])
    mnist.add_argument("--images", required=True)
    mnist.add_argument("--labels", required=True)
    mnist.add_argument("--limit", type=int, default=10000)
    mnist.add_argument("--test-count", dest="test_count", type=int, default=1000)
    mnist.add_argument("--out", required=True)
    yale = prep_sources.add_parser("yaleb", parents=[common])
    yale.add_argument("--root", required=True, help="directory of Yale-B PGM files")
    yale.add_argument("--subjects-count", dest="subjects_count", type=int, default=10)
    yale.add_argument("--subjects", type=int, nargs="+", default=None, help="explicit subject ids")
    yale.add_argument("--components", type=int, default=16)
    yale.add_argument("--max-azimuth", dest="max_azimuth", type=int, default=25)
    yale.add_argument("--reconstruct", type=int, default=0, help="write N PCA reconstructions")
    yale.add_argument("--out", required=True)
    prep.set_defaults(handler=cmd_prep_data)

    sub.add_parser("train", parents=[common, run], help="train or resume a classifier").set_defaults(
        handler=cmd_train)
    sub.add_parser("rescue", parents=[common, run], help="branch a VQC checkpoint into DANO").set_defaults(
        handler=cmd_rescue)

    evaluate = sub.add_parser("eval", parents=[common], help="accuracy of a checkpoint")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--dataset", required=True)
    evaluate.set_defaults(handler=cmd_eval)

    verify = sub.add_parser("verify", parents=[common], help="randomized self-checks")
    verify.add_argument("--suite", action="append", choices=sorted(SUITES), default=None)
    verify.add_argument("--cases", type=int, default=None)
    verify.add_argument("--inject-fault", dest="inject_fault", action="store_true")
    verify.add_argument("--report", default=None, help="write the JSON report here")
    verify.set_defaults(handler=cmd_verify)

    bench = sub.add_parser("bench", parents=[common], help="measurement cost benchmark")
    bench.add_argument("--n", type=int, nargs="+", default=[8, 10, 12])
    bench.add_argument("--k", type=int, nargs="+", default=[2, 4])
    bench.add_argument("--repeats", type=int, default=3)
    bench.add_argument("--states", type=int, default=1)
    bench.add_argument("--out", default=None)
    bench.add_argument("--gradients", action="store_true", help="also time adjoint vs parameter shift")
    bench.add_argument("--depth", type=int, default=6)
    bench.set_defaults(handler=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    setup_logging(
        level=args.log_level or settings.log_level,
        json_logs=settings.json_logs if args.json_logs is None else args.json_logs,
        log_file=settings.log_file,
    )
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_ERROR
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_ERROR
    except DanoError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_ERROR
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
