"""Thin command-line client for the estimation service.

Every subcommand builds a request, posts it to the service, and writes the
response.  By default the service app is driven in-process through an ASGI
transport (no server needed); ``--url`` targets a running instance instead.
"""

from __future__ import annotations

import json
import sys

import click
import httpx


def _post(url: str | None, path: str, payload: dict) -> dict:
    if url:
        with httpx.Client(base_url=url, timeout=None) as client:
            resp = client.post(path, json=payload)
    else:
        # drive the ASGI app in-process; no running server required
        import asyncio

        from .service.app import create_app

        async def _call():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://tmle2.local", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(_call())
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        raise click.ClickException(f"{path} failed ({resp.status_code}): {detail}")
    return resp.json()


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _emit(payload: dict, fmt: str, out: str | None) -> None:
    if fmt == "csv":
        _write(payload["csv"], out)
    else:
        body = {k: v for k, v in payload.items() if k != "csv"}
        _write(json.dumps(body, indent=2, sort_keys=True) + "\n", out)


@click.group()
@click.option("--url", default=None, help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx: click.Context, url: str | None) -> None:
    """Second-order TMLE estimation and simulation client."""
    ctx.obj = url


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("tmle2.service.app:app", host=host, port=port)


@main.group()
def density2() -> None:
    """Integrated square of a discrete density."""


@density2.command("simulate")
@click.option("--n", default=500, show_default=True)
@click.option("--reps", default=200, show_default=True)
@click.option("--mixture-components", "-k", default=4, show_default=True)
@click.option("--bias-mass", default=0.06, show_default=True)
@click.option("--bias-mode", type=click.Choice(["random", "all"]), default="random", show_default=True)
@click.option("--estimators", default=None, help="Comma list; default reg/emp 1st/2nd.")
@click.option("--folds", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--threads", default=1, show_default=True)
@click.option("--out", default=None, help="Output path (default stdout).")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.pass_obj
def density_simulate(url, n, reps, mixture_components, bias_mass, bias_mode, estimators, folds, seed, threads, out, fmt):
    """Monte-Carlo study of the density estimators."""
    payload = {
        "n": n,
        "reps": reps,
        "mixture_components": mixture_components,
        "bias_mass": bias_mass,
        "bias_mode": bias_mode,
        "folds": folds,
        "seed": seed,
        "threads": threads,
    }
    if estimators:
        payload["estimators"] = [e.strip() for e in estimators.split(",") if e.strip()]
    _emit(_post(url, "/density/simulate", payload), fmt, out)


@density2.command("track")
@click.option("--n", default=500, show_default=True)
@click.option("--mixture-components", "-k", default=4, show_default=True)
@click.option("--bias-mass", default=0.06, show_default=True)
@click.option("--bias-mode", type=click.Choice(["all", "random"]), default="all", show_default=True)
@click.option("--folds", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--step", default=0.01, show_default=True)
@click.option("--out", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.pass_obj
def density_track(url, n, mixture_components, bias_mass, bias_mode, folds, seed, step, out, fmt):
    """Total-remainder trajectory along the second-order path."""
    payload = {
        "n": n,
        "mixture_components": mixture_components,
        "bias_mass": bias_mass,
        "bias_mode": bias_mode,
        "folds": folds,
        "seed": seed,
        "step": step,
    }
    _emit(_post(url, "/density/track", payload), fmt, out)


@main.group()
def tsm() -> None:
    """Treatment-specific mean."""


@tsm.command("simulate")
@click.option("--variant", default=1, show_default=True)
@click.option("--n", "n_list", multiple=True, type=int, help="Sample size (repeatable).")
@click.option("--reps", default=200, show_default=True)
@click.option("--folds", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--threads", default=1, show_default=True)
@click.option("--undersmooth-offset", default=None, type=int, help="Override the variant's HAL offset.")
@click.option("--out", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.pass_obj
def tsm_simulate(url, variant, n_list, reps, folds, seed, threads, undersmooth_offset, out, fmt):
    """Monte-Carlo study of the treatment-specific-mean estimators."""
    payload = {
        "variant": variant,
        "n_list": list(n_list) or [400, 1000, 2500],
        "reps": reps,
        "folds": folds,
        "seed": seed,
        "threads": threads,
        "undersmooth_offset": undersmooth_offset,
    }
    _emit(_post(url, "/tsm/simulate", payload), fmt, out)


@tsm.command("estimate")
@click.argument("input_csv", type=click.Path(exists=True, dir_okay=False, allow_dash=True))
@click.option("--undersmooth-offset", default=10, show_default=True)
@click.option("--folds", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--level", default=0.95, show_default=True)
@click.option("--out", default=None)
@click.pass_obj
def tsm_estimate(url, input_csv, undersmooth_offset, folds, seed, level, out):
    """Estimate from a W,A,Y dataset; prints estimate and CIs as JSON."""
    fh = sys.stdin if input_csv == "-" else open(input_csv)
    try:
        header = fh.readline().strip()
        if header.split(",") != ["W", "A", "Y"]:
            raise click.ClickException("input must have header W,A,Y")
        w, a, y = [], [], []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise click.ClickException(f"line {line_no}: expected 3 fields")
            w.append(float(parts[0]))
            a.append(int(float(parts[1])))
            y.append(float(parts[2]))
    finally:
        if fh is not sys.stdin:
            fh.close()
    payload = {
        "w": w,
        "a": a,
        "y": y,
        "undersmooth_offset": undersmooth_offset,
        "folds": folds,
        "seed": seed,
        "level": level,
    }
    result = _post(url, "/tsm/estimate", payload)
    _write(json.dumps(result, indent=2, sort_keys=True) + "\n", out)


if __name__ == "__main__":
    main()
