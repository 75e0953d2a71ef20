"""HTTP service wrapping the scenario runner.

POST /run takes a run configuration as JSON (same schema as the TOML
config file), executes the task in-process, and returns the report,
manifest, and CSV artifacts.  Artifacts are also written to the config's
output directory when one is given.
"""

from fastapi import FastAPI, HTTPException

from . import __version__
from .runner import ConfigError, NumericalError, parse_config, run, write_artifacts

app = FastAPI(title="platelab", version=__version__)


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/run")
def run_task(config: dict):
    try:
        cfg = parse_config(config)
        report, manifest, artifacts = run(cfg)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except NumericalError as exc:
        raise HTTPException(status_code=500, detail=str(exc))
    if cfg.out:
        write_artifacts(cfg.out, report, manifest, artifacts)
    return {"report": report, "manifest": manifest,
            "artifacts": {name: {"header": list(header),
                                 "rows": [list(r) for r in rows]}
                          for name, (header, rows) in artifacts.items()}}
