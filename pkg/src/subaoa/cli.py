"""``subaoa`` command line: run, sweep, bench, simulate, spectrum.

Exit status is 0 on success, 1 for configuration errors and 2 for failures
while running.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subaoa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, algorithms=True, seed=True, jobs=True):
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", required=True, metavar="DIR")
        if seed:
            sp.add_argument("--seed", type=int, default=None)
        if jobs:
            sp.add_argument("--jobs", type=int, default=1, metavar="N")
        if algorithms:
            sp.add_argument("--algorithms", default=None, help="comma list of subaoa,music,gcc,das")

    r = sub.add_parser("run", help="evaluate scenarios, write result and spectrum CSVs")
    common(r)
    r.add_argument("--record-runtime", action="store_true",
                   help="fill runtime_ms in results.csv (makes it non-reproducible)")
    common(sub.add_parser("sweep", help="error statistics over an SNR/separation/length sweep"))
    common(sub.add_parser("bench", help="median runtime table"), jobs=False)
    common(sub.add_parser("simulate", help="render scenarios to WAV plus truth JSON"),
           algorithms=False, jobs=False)
    s = sub.add_parser("spectrum", help="per-iteration spectra for one recording")
    common(s, seed=False, jobs=False)
    s.add_argument("--wav", required=True, metavar="PATH")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            harness.cmd_run(args.config, args.out, args.seed, args.jobs, args.algorithms,
                            args.record_runtime)
        elif args.command == "sweep":
            harness.cmd_sweep(args.config, args.out, args.seed, args.jobs, args.algorithms)
        elif args.command == "bench":
            harness.cmd_bench(args.config, args.out, args.seed, args.algorithms)
        elif args.command == "simulate":
            harness.cmd_simulate(args.config, args.out, args.seed)
        elif args.command == "spectrum":
            harness.cmd_spectrum(args.config, args.wav, args.out, args.algorithms)
    except harness.ConfigError as exc:
        print(f"subaoa: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # estimator or I/O failure
        print(f"subaoa: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
