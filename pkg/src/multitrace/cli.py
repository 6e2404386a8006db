"""Command line entry point ``mtf``.

Exit codes: 0 success, 2 validation failure, 3 numerical failure,
4 I/O failure.
"""

import argparse
import json
import sys

from .experiments import (
    ConfigError,
    load_config,
    preset_config,
    run,
    run_identity_suite,
)
from .geometry import GeometryError
from .mtf import NumericalError

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _parser():
    p = argparse.ArgumentParser(prog="mtf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every task of a config file")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--parallel", type=int, default=1, help="concurrent grid points")

    s = sub.add_parser("preset", help="run a named preset (fig2, fig3a, ..., fig5)")
    s.add_argument("name")
    s.add_argument("--out", default=None)
    s.add_argument("--parallel", type=int, default=1)
    s.add_argument("--print", action="store_true", help="print the preset config and exit")

    v = sub.add_parser("verify", help="run the identity suite of a config file")
    v.add_argument("config")
    v.add_argument("--out", default=None, help="write the report here instead of stdout")
    return p


def _log(msg):
    print(msg, file=sys.stderr)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "preset":
            raw = preset_config(args.name)
            if args.print:
                print(json.dumps(raw, indent=2))
                return 0
            cfg = load_config(raw)
            out = args.out or f"mtf-{args.name}"
            run(cfg, out, args.parallel, _log)
            print(f"{out}/manifest.json")
            return 0
        cfg = load_config(args.config)
        if args.command == "run":
            out = args.out or cfg.out
            run(cfg, out, args.parallel, _log)
            print(f"{out}/manifest.json")
            return 0
        reports = [run_identity_suite(cfg, g) for g in cfg.geometries]
        text = json.dumps(reports, indent=2, sort_keys=True)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        failed = [r["identity"] for rep in reports for r in rep["records"]
                  if r["status"] == "fail"]
        if failed:
            _log(f"failed identities: {', '.join(failed)}")
            return EXIT_NUMERICAL
        return 0
    except (ConfigError, GeometryError) as exc:
        _log(f"validation error: {exc}")
        return EXIT_VALIDATION
    except NumericalError as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except OSError as exc:
        _log(f"I/O error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
