import argparse
import sys
from typing import List, Optional

import qctl
from qctl.bangbang import CPU_COUNT
from qctl.pauli import ALL_BACKEND, DEFAULT_BACKEND

COMMANDS = ("synth", "controllability", "ft-analyze", "simulate", "pulse")


def get_parser() -> argparse.ArgumentParser:
  parser = argparse.ArgumentParser(
    prog="qctl", description="Quantum control synthesis and analysis."
  )
  parser.add_argument(
    "-v", "--version", action="store_true", help="show the version and exit"
  )
  parser.add_argument(
    "--check-backend",
    action="store_true",
    help="print all available Pauli backends",
  )

  job = argparse.ArgumentParser(add_help=False)
  job.add_argument("--config", type=str, required=True, help="job config JSON")
  job.add_argument("--out", type=str, required=True, help="output directory")
  job.add_argument(
    "--seed", type=int, default=None, help="override every seed in the config"
  )
  job.add_argument(
    "-b",
    "--backend",
    type=str,
    choices=ALL_BACKEND,
    default=DEFAULT_BACKEND,
    help="backend for Pauli expansions",
  )
  job.add_argument(
    "-c",
    "--cpu",
    type=int,
    default=CPU_COUNT,
    help="number of CPU used for independent restarts",
  )

  sub = parser.add_subparsers(dest="command", metavar="command")
  helps = {
    "synth": "bang-bang gate synthesis",
    "controllability": "Lie-closure controllability report",
    "ft-analyze": "Pauli-weight error analysis of a realized gate",
    "simulate": "Lindblad and stochastic master equation runs",
    "pulse": "GRAPE nuclear-flip pulse optimization",
  }
  for name in COMMANDS:
    sub.add_parser(name, parents=[job], help=helps[name])
  return parser


def get_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
  parser = get_parser()
  args = parser.parse_args(argv)
  if args.version:
    print(qctl.__version__)
    sys.exit(0)
  if args.check_backend:
    print(ALL_BACKEND)
    sys.exit(0)
  if args.command is None:
    parser.error(f"choose a command from {list(COMMANDS)}")
  if args.cpu < 1:
    parser.error("--cpu must be at least 1")
  return args
