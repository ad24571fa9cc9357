"""Command-line client for the experiment service.

By default commands run against an in-process application instance; pass
--server to target a running HTTP deployment instead. Exit codes: 0 success,
1 validation error, 2 runtime failure, 3 gradient-check failure.
"""

from __future__ import annotations

import json
import sys
import warnings

import click
import httpx


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    with warnings.catch_warnings():
        # the bundled test client warns about its httpx backing on import
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import create_app
    return TestClient(create_app(), raise_server_exceptions=False)


def _load_config_dict(config_path: str | None, **overrides) -> dict:
    raw: dict = {}
    if config_path:
        try:
            with open(config_path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"validation error: cannot read config {config_path}: {exc}",
                       err=True)
            sys.exit(1)
        if not isinstance(raw, dict):
            click.echo(f"validation error: config {config_path} must hold a "
                       "JSON object", err=True)
            sys.exit(1)
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    return raw


def _post(server: str | None, path: str, body: dict) -> dict:
    try:
        with _client(server) as client:
            resp = client.post(path, json=body)
    except httpx.HTTPError as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(2)
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail", resp.text)
    except json.JSONDecodeError:
        detail = resp.text
    if resp.status_code in (400, 422):
        click.echo(f"validation error: {detail}", err=True)
        sys.exit(1)
    click.echo(f"runtime failure: {detail}", err=True)
    sys.exit(2)


config_opt = click.option("--config", "config_path", type=str, default=None,
                          help="JSON run-config file.")
seed_opt = click.option("--seed", type=int, default=None, help="Global seed.")
out_opt = click.option("--out", type=str, default=None, help="Output directory.")
threshold_opt = click.option("--threshold", type=float, default=None,
                             help="Classification threshold.")


@click.group()
@click.option("--server", type=str, default=None,
              help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx, server):
    """Mortality-model experiment harness."""
    ctx.obj = server


@main.command()
@config_opt
@seed_opt
@out_opt
@click.pass_obj
def synth(server, config_path, seed, out):
    """Generate a synthetic cohort on disk."""
    cfg = _load_config_dict(config_path, seed=seed, out=out)
    body = _post(server, "/synth", {"config": cfg})
    click.echo(f"wrote {body['n_patients']} patients "
               f"({body['n_positive']} positive) to {body['out']}")


@main.command()
@config_opt
@seed_opt
@out_opt
@click.pass_obj
def preprocess(server, config_path, seed, out):
    """Impute, encode, and normalize a cohort to a matrix file."""
    cfg = _load_config_dict(config_path, seed=seed, out=out)
    body = _post(server, "/preprocess", {"config": cfg})
    click.echo(f"matrix shape {tuple(body['shape'])} "
               f"({body['n_positive']} positive) at {body['out']}")


@main.command()
@config_opt
@seed_opt
@out_opt
@threshold_opt
@click.pass_obj
def train(server, config_path, seed, out, threshold):
    """Train one model on the full cohort."""
    cfg = _load_config_dict(config_path, seed=seed, out=out, threshold=threshold)
    body = _post(server, "/train", {"config": cfg})
    m = body["train_metrics"]
    click.echo(f"checkpoint {body['checkpoint']}")
    click.echo(f"train auroc {m['auroc']:.4f}  accuracy {m['accuracy']:.4f}")


@main.command("cross-validate")
@config_opt
@seed_opt
@out_opt
@threshold_opt
@click.option("--parallel", is_flag=True, default=False,
              help="Run folds in worker threads.")
@click.option("--ablation", is_flag=True, default=False,
              help="Run the four-arm regularizer comparison.")
@click.pass_obj
def cross_validate(server, config_path, seed, out, threshold, parallel, ablation):
    """Stratified k-fold cross-validation with a mean ± std report."""
    cfg = _load_config_dict(config_path, seed=seed, out=out, threshold=threshold,
                            parallel=True if parallel else None)
    body = _post(server, "/cross-validate", {"config": cfg, "ablation": ablation})
    click.echo(body["table"], nl=False)


@main.command()
@config_opt
@out_opt
@threshold_opt
@click.option("--checkpoint", type=str, required=True,
              help="Trained checkpoint (.npz) to score with.")
@click.pass_obj
def evaluate(server, config_path, out, threshold, checkpoint):
    """Score a cohort with a trained checkpoint."""
    cfg = _load_config_dict(config_path, out=out, threshold=threshold)
    body = _post(server, "/evaluate", {"config": cfg, "checkpoint": checkpoint})
    m = body["eval"]
    click.echo(f"n={m['TP'] + m['FP'] + m['TN'] + m['FN']}  "
               f"TP {m['TP']}  FP {m['FP']}  TN {m['TN']}  FN {m['FN']}")
    for name in ("sensitivity", "specificity", "accuracy", "auroc"):
        val = m[name]
        click.echo(f"{name:<11}  " + ("undefined" if val is None else f"{val:.4f}"))


@main.command()
@config_opt
@seed_opt
@out_opt
@click.option("--seeds", type=int, default=20, help="Seeds per check.")
@click.option("--corrupt", type=str, default=None, hidden=True)
@click.pass_obj
def gradcheck(server, config_path, seed, out, seeds, corrupt):
    """Finite-difference audit of every differentiable path."""
    cfg = _load_config_dict(config_path, seed=seed, out=out)
    body = _post(server, "/gradcheck",
                 {"config": cfg, "seeds": seeds, "corrupt": corrupt})
    click.echo(body["summary"], nl=False)
    if not body["passed"]:
        sys.exit(3)


if __name__ == "__main__":
    main()
