"""Command-line harness: generate, train, eval-omnigap, bench-bir, repro.

Exit codes: 0 success, 1 failed check or run error, 2 usage error, 3 I/O error.
"""

import csv
import json
import os
import sys
import time

import click
import numpy as np

from .bir import BIRInstance, solve_bir, solve_bir_reference
from .data_io import DataFormatError, gen_agnostic, gen_realizable, load_dataset_csv, philox, PRESETS, save_dataset_csv
from .evalgap import build_grid, omnigap_table
from .learners import (MultiIndexModel, StreamExhaustedError, TrainConfig, ideal_omnitron_fit, isotron_fit,
                       isotron_preset, omnitron_fit, split_for_omnitron, stochastic_preset)
from .links import affine_link, clipped_relu_link, logistic_link
from .pav import StepPredictor, pav_fit
from .repro import TARGETS

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
WEIGHT_STREAM = 7


def fmt(x):
    return f"{x:.12g}"


class IOFailure(Exception):
    pass


def _out_dir(ctx):
    out = ctx.obj["out"]
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _load_data(path):
    try:
        return load_dataset_csv(path)
    except (OSError, DataFormatError) as exc:
        raise IOFailure(f"cannot read dataset {path}: {exc}") from exc


def _load_model(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IOFailure(f"cannot read model {path}: {exc}") from exc
    if "heads" in obj:
        return MultiIndexModel.from_dict(obj)
    if "direction" in obj:
        return StepPredictor.from_dict(obj)
    raise IOFailure(f"{path}: not a model file")


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for every random stream.")
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True, help="Output directory.")
@click.pass_context
def cli(ctx, seed, out):
    """Bounded isotonic regression and omnipredictor experiments."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, out=out)


LINKS = {
    "logistic": lambda lr: logistic_link(lr, scale=4.0),
    "affine": affine_link,
    "relu": lambda lr: clipped_relu_link(lr, slope=1.0),
}


@cli.command()
@click.option("--model", "kind", type=click.Choice(["realizable", "agnostic"]), default="realizable", show_default=True)
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default="flip10", show_default=True)
@click.option("--d", type=click.IntRange(min=1), required=True)
@click.option("--n", type=click.IntRange(min=1), required=True)
@click.option("--L", "L", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@click.option("--link", type=click.Choice(sorted(LINKS)), default="logistic", show_default=True)
@click.option("--label-mode", type=click.Choice(["expected", "bernoulli"]), default="expected", show_default=True)
@click.option("--name", default="data", show_default=True, help="File stem for the CSV and sidecar.")
@click.pass_context
def generate(ctx, kind, preset, d, n, L, link, label_mode, name):
    """Write a synthetic dataset as CSV plus a JSON sidecar."""
    seed = ctx.obj["seed"]
    if kind == "realizable":
        w = philox(seed, WEIGHT_STREAM).standard_normal(d)
        w /= np.linalg.norm(w)
        data = gen_realizable(d, n, LINKS[link](L), w, seed, label_mode, L=L)
    else:
        if preset == "xor2d" and d < 2:
            raise click.UsageError("preset xor2d needs --d >= 2")
        data = gen_agnostic(d, n, seed, preset, L=L)
    path = os.path.join(_out_dir(ctx), f"{name}.csv")
    try:
        save_dataset_csv(data, path)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    click.echo(f"wrote {path} ({data.n} rows, d = {data.d})")


@cli.command()
@click.option("--algo", type=click.Choice(["isotron", "ideal-omnitron", "omnitron", "pav"]), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--T", "T", type=click.IntRange(min=0), default=None, help="Iterations (default from --eps).")
@click.option("--eta", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--beta", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@click.option("--R", "R", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@click.option("--eps", type=click.FloatRange(min=0, min_open=True), default=0.1, show_default=True)
@click.option("--alpha-smooth", type=click.FloatRange(min=0), default=None)
@click.pass_context
def train(ctx, algo, data_path, T, eta, beta, R, eps, alpha_smooth):
    """Fit a model; writes model.json and trace.csv."""
    data = _load_data(data_path)
    cfg = TrainConfig(T=T, eta=eta, beta=beta, R=R, eps=eps, alpha_smooth=alpha_smooth, seed=ctx.obj["seed"])
    out = _out_dir(ctx)
    if algo == "pav":
        if data.d != 1:
            raise click.UsageError(f"pav needs one feature, data has d = {data.d}")
        model = pav_fit(data.features[:, 0], data.labels)
        p = model.predict(data.features[:, 0])
        rows = [(0, float(np.mean((p - data.labels) ** 2)), 0.0)]
    elif algo == "isotron":
        trace = isotron_fit(data, isotron_preset(cfg, data.L))
        best = min(trace, key=lambda s: s.sq_loss)
        model = MultiIndexModel([(best.link, best.w)], R=R, L=data.L)
        rows = [(s.t, s.sq_loss, s.grad_norm) for s in trace]
    elif algo == "ideal-omnitron":
        model, trace = ideal_omnitron_fit(data, cfg, return_trace=True)
        rows = [(s.t, s.sq_loss, s.grad_norm) for s in trace]
    else:
        cfg = stochastic_preset(cfg, data.L)
        if cfg.T < 1:
            raise click.UsageError("omnitron needs --T >= 1")
        oracle, stream = split_for_omnitron(data, cfg.T, cfg.seed)
        model, trace = omnitron_fit(oracle, stream, cfg, return_trace=True)
        rows = [(s.t, s.sq_loss, s.grad_norm) for s in trace]
    _write_text(os.path.join(out, "model.json"), model.to_json() + "\n")
    _write_csv(os.path.join(out, "trace.csv"), ["t", "sq_loss", "grad_norm"], rows)
    click.echo(f"trained {algo}: {len(rows)} trace rows, final sq_loss {fmt(rows[-1][1])}")


@cli.command("eval-omnigap")
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--grid-eps", type=click.FloatRange(min=0, max=1, min_open=True, max_open=True), default=0.025,
              show_default=True)
@click.option("--grid-cap", type=click.IntRange(min=4), default=64, show_default=True)
@click.option("--beta", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@click.pass_context
def eval_omnigap(ctx, model_path, data_path, grid_eps, grid_cap, beta):
    """Sweep a comparator grid; writes eval.csv and summary.json."""
    model = _load_model(model_path)
    data = _load_data(data_path)
    if isinstance(model, StepPredictor):
        if data.d != 1:
            raise click.UsageError("step predictor models need one-feature data")
        R, sign = 1.0, (1 if model.direction == "inc" else -1)
    else:
        if model.d != data.d:
            raise click.UsageError(f"model expects d = {model.d}, data has d = {data.d}")
        R, sign = model.R, None
    grid = build_grid(data.d, beta, data.L * R, R, grid_eps, cap=grid_cap, seed=ctx.obj["seed"], sign=sign)
    og, pl = omnigap_table(model, grid, data)
    out = _out_dir(ctx)
    rows = [(i, j, float(og[i, j]), float(pl[i, j])) for i in range(og.shape[0]) for j in range(og.shape[1])]
    _write_csv(os.path.join(out, "eval.csv"), ["link_id", "weight_id", "omnigap", "pl_gap"], rows)
    io, jo = np.unravel_index(int(np.argmax(og)), og.shape)
    ip, jp = np.unravel_index(int(np.argmax(pl)), pl.shape)
    summary = {
        "max_omnigap": float(fmt(og[io, jo])),
        "argmax_omnigap": {"link_id": int(io), "weight_id": int(jo)},
        "max_pl_gap": float(fmt(pl[ip, jp])),
        "argmax_pl_gap": {"link_id": int(ip), "weight_id": int(jp)},
        "n_links": int(og.shape[0]),
        "n_weights": int(og.shape[1]),
        "grid_eps": grid_eps,
        "grid_cap": grid_cap,
        "n": data.n,
    }
    _write_text(os.path.join(out, "summary.json"), json.dumps(summary, indent=2) + "\n")
    click.echo(f"max omnigap {fmt(og[io, jo])}  max pl gap {fmt(pl[ip, jp])}")


def _bench_instance(rng, n):
    y = rng.random(n)
    return BIRInstance(y, np.zeros(n - 1), rng.random(n - 1) * (2.0 / n))


def scaling_svg(rows, width=480, height=360):
    """Log-log plot of time against n, one polyline per algorithm."""
    pad = 50
    ns = np.array([r[0] for r in rows], dtype=float)
    ts = np.array([max(r[1], 1e-3) for r in rows], dtype=float)
    lx, ly = np.log10(ns), np.log10(ts)
    x0, x1 = lx.min(), max(lx.max(), lx.min() + 1)
    y0, y1 = ly.min(), max(ly.max(), ly.min() + 1)

    def px(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    colors = {"exact": "#1f77b4", "reference": "#d62728"}
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">log10 n</text>',
             f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" '
             f'text-anchor="middle">log10 time (ms)</text>']
    for k, algo in enumerate(sorted({r[2] for r in rows})):
        sel = [i for i, r in enumerate(rows) if r[2] == algo]
        pts = " ".join(f"{px(lx[i]):.1f},{py(ly[i]):.1f}" for i in sel)
        color = colors.get(algo, "#2ca02c")
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad - 80}" y="{pad + 16 * k}" font-size="12" fill="{color}">{algo}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@cli.command("bench-bir")
@click.option("--sizes", default="1000,10000,100000", show_default=True, help="Comma-separated instance sizes.")
@click.option("--trials", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--reference-max", type=click.IntRange(min=0), default=5000, show_default=True,
              help="Largest n timed with the reference solver.")
@click.pass_context
def bench_bir(ctx, sizes, trials, reference_max):
    """Time the exact solver (and the reference on small n); writes bench.csv and bench.svg."""
    try:
        ns = [int(float(s)) for s in sizes.split(",") if s.strip()]
    except ValueError:
        raise click.UsageError(f"bad --sizes {sizes!r}") from None
    if not ns or min(ns) < 1:
        raise click.UsageError("sizes must be positive integers")
    rng = philox(ctx.obj["seed"], 0)
    solve_bir(_bench_instance(rng, 8))  # compile outside the timed region
    rows = []
    mismatch = 0.0
    for n in ns:
        for _ in range(trials):
            inst = _bench_instance(rng, n)
            t0 = time.perf_counter()
            sol = solve_bir(inst)
            rows.append((n, 1e3 * (time.perf_counter() - t0), "exact", sol.objective))
            if n <= reference_max:
                t0 = time.perf_counter()
                ref = solve_bir_reference(inst)
                rows.append((n, 1e3 * (time.perf_counter() - t0), "reference", ref.objective))
                mismatch = max(mismatch, abs(ref.objective - sol.objective))
            click.echo(f"n={n} exact {fmt(rows[-1 if n > reference_max else -2][1])} ms")
    out = _out_dir(ctx)
    _write_csv(os.path.join(out, "bench.csv"), ["n", "time_ms", "algo", "objective"],
               [(n, float(t), a, float(o)) for n, t, a, o in rows])
    _write_text(os.path.join(out, "bench.svg"), scaling_svg(rows))
    click.echo(f"largest exact/reference objective difference {fmt(mismatch)}")


@cli.command()
@click.argument("target", type=click.Choice(sorted(TARGETS)))
def repro(target):
    """Run a reference scenario and report measured against required values."""
    checks = TARGETS[target]()
    for c in checks:
        click.echo(c.line())
    ok = all(c.passed for c in checks)
    click.echo(f"{target}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None):
    try:
        rv = cli.main(args=argv, prog_name="omnisim", standalone_mode=False)
    except click.exceptions.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_FAIL
    except IOFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    except (ValueError, RuntimeError, StreamExhaustedError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_FAIL
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
