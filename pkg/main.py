import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from src.cli import cmd_eval_x, cmd_oracle, cmd_solve, cmd_verify

load_dotenv()


def configure_logging(level=None):
    """
    Logs go to stderr (StreamHandler) and, when FRACDELAY_LOG_FILE is set, to that file.
    Level: --log-level, then FRACDELAY_LOG_LEVEL, then INFO.
    """
    level = (level or os.getenv("FRACDELAY_LOG_LEVEL") or "INFO").upper()
    handlers = [logging.StreamHandler()]
    log_file = os.getenv("FRACDELAY_LOG_FILE")
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def build_parser():
    default_config = os.getenv("FRACDELAY_CONFIG", "config.json")
    parser = argparse.ArgumentParser(
        prog="fracdelay",
        description="Delayed perturbation of Mittag-Leffler matrix functions and explicit solutions "
                    "of linear fractional delay equations.")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    eval_x = sub.add_parser("eval-x", help="Evaluate X_{h,alpha,beta}(t) at a list of times")
    eval_x.add_argument("--config", default=default_config)
    eval_x.add_argument("--times", required=True, help="Comma separated times, e.g. 0,0.5,1.25")
    eval_x.add_argument("--out", default=None)
    eval_x.add_argument("--tol", type=float, default=None)

    solve = sub.add_parser("solve", help="Explicit solution trajectory as CSV")
    solve.add_argument("--config", default=default_config)
    solve.add_argument("--out", default=None)
    solve.add_argument("--tol", type=float, default=None)
    solve.add_argument("--mesh", type=float, default=None)

    oracle = sub.add_parser("oracle", help="L1 time-stepping trajectory as CSV")
    oracle.add_argument("--config", default=default_config)
    oracle.add_argument("--out", default=None)

    verify = sub.add_parser("verify", help="Run the verification suite")
    verify.add_argument("--config", default=default_config)
    verify.add_argument("--strict", action="store_true", help="Treat skipped checks as failures")
    verify.add_argument("--tol", type=float, default=None)
    verify.add_argument("--mesh", type=float, default=None)
    verify.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    logger = logging.getLogger(__name__)
    logger.info(f"Running {args.command} with config {args.config}")

    if args.command == "eval-x":
        return cmd_eval_x(args.config, args.times, out=args.out, tol=args.tol)
    if args.command == "solve":
        return cmd_solve(args.config, out=args.out, tol=args.tol, mesh=args.mesh)
    if args.command == "oracle":
        return cmd_oracle(args.config, out=args.out)
    return cmd_verify(args.config, strict=args.strict, tol=args.tol, mesh=args.mesh, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
