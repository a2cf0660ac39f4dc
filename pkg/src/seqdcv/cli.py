"""Command-line client for the seqdcv service.

Requests go to the app in-process unless ``--server URL`` (or SEQDCV_SERVER)
points at a running instance.  SEQDCV_WORKERS sets the worker count for
permutations and Monte Carlo trials; results do not depend on it.

Exit status: 0 success, 2 input error, 3 numerical failure, 1 anything else.
"""
from __future__ import annotations

import json
import sys
import warnings
from pathlib import Path
from typing import Optional

import click

from . import harness

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
SERVER_ENV = "SEQDCV_SERVER"


class _Client:
    def __init__(self, server: Optional[str]):
        if server:
            import httpx

            self._http = httpx.Client(base_url=server, timeout=None)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .api import app

            self._http = TestClient(app, raise_server_exceptions=False)

    def post(self, path: str, payload: dict):
        try:
            resp = self._http.post(path, json=payload)
        except Exception as err:  # noqa: BLE001 - transport failures
            click.echo(f"error: cannot reach service: {err}", err=True)
            sys.exit(1)
        if resp.status_code == 200:
            return resp
        try:
            body = resp.json()
            kind, detail = body.get("kind"), body.get("detail", resp.text)
        except ValueError:
            kind, detail = None, resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit({"input": EXIT_INPUT, "numerical": EXIT_NUMERICAL}.get(kind, 1))


def _emit(text: str, output: Optional[str]):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as err:
        click.echo(f"error: cannot read report {path}: {err}", err=True)
        sys.exit(EXIT_INPUT)


@click.group()
@click.option("--server", envvar=SERVER_ENV, default=None,
              help="Base URL of a running service (default: in-process).")
@click.pass_context
def main(ctx, server):
    """Sequential double cross-validation for added predictive ability."""
    ctx.obj = _Client(server)


_cv_options = [
    click.option("--alpha", type=float, default=0.0, show_default=True,
                 help="Penalty mix: 0 ridge, 1 lasso."),
    click.option("--strategy", type=click.Choice(["double", "single"]), default="double",
                 show_default=True),
    click.option("--rule", type=click.Choice(["opt", "one_se"]), default="opt",
                 show_default=True),
    click.option("--J", "J", type=int, default=5, show_default=True, help="Outer folds."),
    click.option("--K", "K", type=int, default=5, show_default=True, help="Inner folds."),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--x1", required=True, type=click.Path(dir_okay=False)),
    click.option("--x2", required=True, type=click.Path(dir_okay=False)),
    click.option("--y", "y", required=True, type=click.Path(dir_okay=False)),
    click.option("--log-y", is_flag=True, help="Natural log of the outcome."),
    click.option("-o", "--output", default=None, help="Write the report here."),
]


def cv_options(fn):
    for opt in reversed(_cv_options):
        fn = opt(fn)
    return fn


@main.command()
@click.option("--scenario", required=True,
              type=click.Choice(["1a", "1b", "1c", "1d", "2a", "2b", "2c"]))
@click.option("--n", type=int, default=None)
@click.option("--p", type=int, default=None)
@click.option("--q", type=int, default=None)
@click.option("--noise-sd", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, help="Directory for X1.csv, X2.csv, y.csv.")
@click.option("--precision", type=int, default=None,
              help="Significant digits (default: exact round trip).")
@click.pass_obj
def simulate(client, scenario, n, p, q, noise_sd, seed, out, precision):
    """Simulate a scenario and export it as CSV files."""
    payload = dict(scenario=scenario, n=n, p=p, q=q, noise_sd=noise_sd, seed=seed,
                   out=out, precision=precision)
    _emit(_dumps(client.post("/simulate", payload).json()), None)


def _assess(client, perms, **kw):
    output = kw.pop("output")
    payload = dict(kw, perms=perms)
    _emit(_dumps(client.post("/assess", payload).json()), output)


@main.command()
@cv_options
@click.option("--alpha2", type=float, default=None, help="Stage-2 alpha (default: --alpha).")
@click.option("--perms", type=int, default=0, show_default=True,
              help="Permutations; 0 skips the test.")
@click.option("--reverse", is_flag=True, help="Use X2 as the primary block.")
@click.option("--statistic", type=click.Choice(["q2_cond", "gain"]), default="q2_cond",
              show_default=True)
@click.option("--smooth", is_flag=True, help="Use (1 + #)/(1 + M) p-values.")
@click.pass_obj
def assess(client, perms, **kw):
    """Sequential assessment of X2 on top of X1."""
    _assess(client, perms, **kw)


@main.command()
@cv_options
@click.option("--alpha2", type=float, default=None)
@click.option("--perms", type=int, default=1000, show_default=True)
@click.option("--reverse", is_flag=True)
@click.option("--statistic", type=click.Choice(["q2_cond", "gain"]), default="q2_cond",
              show_default=True)
@click.option("--smooth", is_flag=True)
@click.pass_obj
def permtest(client, perms, **kw):
    """Like assess, with the permutation test switched on."""
    if perms < 1:
        click.echo("error: --perms must be at least 1", err=True)
        sys.exit(EXIT_INPUT)
    _assess(client, perms, **kw)


@main.command("stack-assess")
@cv_options
@click.option("--scale/--no-scale", default=True, show_default=True,
              help="Standardize every column over the full sample before stacking.")
@click.pass_obj
def stack_assess(client, output, **kw):
    """Q^2 of one model on the stacked blocks next to each block alone."""
    _emit(_dumps(client.post("/stack-assess", kw).json()), output)


@main.command()
@click.option("--scenario", required=True,
              type=click.Choice(["1a", "1b", "1c", "1d", "2a", "2b", "2c"]))
@click.option("--trials", type=int, default=harness.DESK_TRIALS, show_default=True)
@click.option("--perms", type=int, default=harness.DESK_PERMUTATIONS, show_default=True)
@click.option("--alpha", type=float, default=0.0, show_default=True)
@click.option("--strategies", "strategies", multiple=True,
              type=click.Choice(sorted(harness.STRATEGIES)),
              help="Repeatable; default CV_D/lambda_opt.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n", type=int, default=None)
@click.option("--p", type=int, default=None)
@click.option("--q", type=int, default=None)
@click.option("--noise-sd", type=float, default=None)
@click.option("--full-scale", is_flag=True, help="500 trials and 200 permutations.")
@click.option("-o", "--output", default=None)
@click.pass_obj
def montecarlo(client, output, strategies, **kw):
    """Monte Carlo trials of one scenario under one or more strategies."""
    payload = dict(kw, strategies=list(strategies) or ["CV_D/lambda_opt"])
    _emit(_dumps(client.post("/montecarlo", payload).json()), output)


@main.command()
@click.option("--input", "inputs", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Montecarlo report; repeatable.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json",
              show_default=True)
@click.option("-o", "--output", default=None)
@click.pass_obj
def report(client, inputs, fmt, output):
    """Summary table from one or more montecarlo reports."""
    payload = {"reports": [_read_json(p) for p in inputs], "format": fmt}
    _emit(client.post("/report", payload).text, output)


@main.command()
@click.argument("previous", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", default=None)
@click.pass_obj
def rerun(client, previous, output):
    """Repeat the run recorded in a report."""
    _emit(_dumps(client.post("/rerun", {"report": _read_json(previous)}).json()), output)


if __name__ == "__main__":
    main()
