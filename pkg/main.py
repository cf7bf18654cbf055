import argparse
import logging
import sys

from pydantic import ValidationError

from config.general import settings
from src.cli.commands import COMMANDS
from src.exceptions import SedError, UsageError

logger = logging.getLogger(__name__)


def add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run config; flags override its values")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--max-epochs", dest="max_epochs", type=int, help="early-stopping epoch cap")
    parser.add_argument("--progress", action="store_true", help="show epoch progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sedil",
        description="Incremental sound event detection with a neural adapter.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", help="generate synthetic soundscape datasets")
    add_run_options(gen)
    gen.add_argument("--classes", help="comma separated class names")
    gen.add_argument("--preset", help="dcase16, us-sed or us-8k")
    gen.add_argument("--full", action="store_true", help="use the preset's full split sizes")
    gen.add_argument("--regime", choices=["clean", "noisy"])
    gen.add_argument("--counts", help="train,val,test soundscape counts")
    gen.add_argument("--annotations", action="store_true", help="also export event annotations as CSV")
    gen.add_argument("--out", help="output directory for the dataset files")

    source = commands.add_parser("train-source", help="train the source model")
    add_run_options(source)
    source.add_argument("--data", required=True, help="dataset directory")
    source.add_argument("--classes", help="comma separated subset of the dataset classes")
    source.add_argument("--out", help="checkpoint path")
    source.add_argument("--log", help="training log CSV path")

    incremental = commands.add_parser("train-incremental", help="learn one new class")
    add_run_options(incremental)
    incremental.add_argument("--source", required=True, help="source checkpoint")
    incremental.add_argument("--method", choices=["simple", "adapter"], default="adapter")
    incremental.add_argument("--new-class", dest="new_class", required=True)
    incremental.add_argument("--data", required=True, help="dataset directory")
    incremental.add_argument("--out", help="checkpoint path")
    incremental.add_argument("--log", help="training log CSV path")

    evaluate = commands.add_parser("evaluate", help="segment F1 of a model on a test split")
    evaluate.add_argument("--model", required=True)
    evaluate.add_argument("--data", required=True, help="dataset directory or file")
    evaluate.add_argument(
        "--classes",
        choices=["all", "ds", "new"],
        default="all",
        help="class subset; ds is every class but the last, new is the last (the class added by migration)",
    )
    evaluate.add_argument("--threshold", type=float, default=0.5)
    evaluate.add_argument("--report", help="CSV report path")

    ablation = commands.add_parser("ablation", help="score outputs A, B and C of a composite")
    ablation.add_argument("--composite", required=True)
    ablation.add_argument("--data", required=True, help="dataset directory or file")
    ablation.add_argument("--threshold", type=float, default=0.5)
    ablation.add_argument("--report", help="JSON report path")

    matrix = commands.add_parser("run-matrix", help="run the leave-one-out experiment matrix")
    add_run_options(matrix)
    matrix.add_argument("--classes", help="comma separated class names")
    matrix.add_argument("--preset", help="dcase16, us-sed or us-8k")
    matrix.add_argument("--full", action="store_true", help="use the preset's full split sizes")
    matrix.add_argument("--regime", help="comma separated regimes (clean, noisy)")
    matrix.add_argument("--counts", help="train,val,test soundscape counts")
    matrix.add_argument("--workers", type=int, help="scenarios trained in parallel")
    matrix.add_argument("--out", help="run directory")

    inspect = commands.add_parser("inspect", help="describe a checkpoint")
    inspect.add_argument("--model", required=True)

    extract = commands.add_parser("extract-target", help="save the target branch of a composite")
    extract.add_argument("--composite", required=True)
    extract.add_argument("--out", help="checkpoint path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=settings.log_level)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as error:
        print(f"error: invalid configuration: {error}", file=sys.stderr)
        return UsageError.exit_code
    except SedError as error:
        print(f"error: {error.detail}", file=sys.stderr)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
