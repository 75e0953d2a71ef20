"""Command-line entry point.

Runs one scenario from a TOML config file, either in-process (default) or
against a running service instance (--server).  Exit status: 0 success,
2 configuration/validation error, 3 numerical failure.
"""

import argparse
import json
import os
import sys


def _parser():
    p = argparse.ArgumentParser(
        prog="platelab",
        description="Plate-model scenario runner: energy, minimization, "
                    "rigidity, identities, counterexamples, blow-up, "
                    "convex weight.")
    p.add_argument("--config", required=True, help="path to a TOML run config")
    p.add_argument("--out", default=None,
                   help="output directory for manifest.json/report.json/CSVs "
                        "(overrides the config)")
    p.add_argument("--threads", type=int, default=1,
                   help="BLAS/OpenMP thread count (default 1 for "
                        "bit-reproducible runs)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--task", default=None, help="override the config task")
    p.add_argument("--server", default=None,
                   help="base URL of a running service; when given, the "
                        "scenario is posted to it instead of running "
                        "in-process")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(args.threads)

    # heavy imports happen after the thread environment is pinned
    from .runner import (ConfigError, NumericalError, load_config, run,
                         write_artifacts)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
        if args.task is not None:
            from .runner import parse_config

            data = json.loads(cfg.model_dump_json())
            data["task"] = args.task
            cfg = parse_config(data)
        if args.out is not None:
            cfg = cfg.model_copy(update={"out": args.out})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.server:
        return _run_remote(args.server, cfg)

    try:
        report, manifest, artifacts = run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if cfg.out:
        write_artifacts(cfg.out, report, manifest, artifacts)
    print(json.dumps(report, indent=2, default=float))
    return 0


def _run_remote(server, cfg):
    import httpx

    url = server.rstrip("/") + "/run"
    try:
        resp = httpx.post(url, json=json.loads(cfg.model_dump_json()),
                          timeout=600.0)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service at {url}: {exc}", file=sys.stderr)
        return 3
    if resp.status_code == 422:
        print(f"error: {resp.json().get('detail', resp.text)}", file=sys.stderr)
        return 2
    if resp.status_code != 200:
        print(f"numerical failure: {resp.json().get('detail', resp.text)}",
              file=sys.stderr)
        return 3
    body = resp.json()
    if cfg.out:
        from .runner import write_artifacts

        artifacts = {name: (a["header"], a["rows"])
                     for name, a in body.get("artifacts", {}).items()}
        write_artifacts(cfg.out, body["report"], body["manifest"], artifacts)
    print(json.dumps(body["report"], indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
