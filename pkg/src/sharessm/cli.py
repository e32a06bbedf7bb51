"""Command-line surface: training, evaluation, ablations, and analysis sweeps.

This is the only module that touches the filesystem.  Every command writes
its artifacts into ``--out`` together with the exact configuration used, the
content hashes of its inputs, and the seed, so re-running a command with the
same inputs reproduces the metric files byte for byte.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import os

# honor the thread-count override before numpy binds its thread pools
if "SHARESSM_THREADS" in os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["SHARESSM_THREADS"])

import argparse
import hashlib
import sys
from dataclasses import replace

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, ingest, load_manifest, split_dataset
from .dynamics import (OscillatorParams, Scheme, simulate_neuron,
                       spectral_sweep)
from .energy import ratio_sweep
from .errors import ParameterError, ShareSSMError, TrainingError
from .network import ModelConfig, build_model
from .runconfig import RunConfig, load_config, serialize_config
from .train import (AblationSpec, TrainConfig, evaluate, fit, run_ablation)

DEFAULT_RATIOS = "0.0625,0.125,0.25,0.5,1,2,4,8"


# -- artifact helpers ----------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def git_blob_sha1(data: bytes) -> str:
    h = hashlib.sha1()
    h.update(b"blob %d\x00" % len(data))
    h.update(data)
    return h.hexdigest()


def write_artifacts(out_dir: str, config_text: str, seed: int, inputs=()):
    """Echo the config and record content hashes of every input file."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.cfg"), "w", encoding="utf-8") as fh:
        fh.write(config_text)
    lines = [f"seed = {seed}",
             f"config_sha1 = {git_blob_sha1(config_text.encode('utf-8'))}"]
    for path in inputs:
        with open(path, "rb") as fh:
            lines.append(f"input {os.path.basename(path)} = {git_blob_sha1(fh.read())}")
    with open(os.path.join(out_dir, "meta.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# -- run assembly ---------------------------------------------------------------

def _model_config_from(cfg: RunConfig, ds: Dataset) -> ModelConfig:
    kwargs = dict(n_blocks=cfg.n_blocks, hidden=cfg.hidden, state=cfg.state,
                  scheme=Scheme.from_string(cfg.scheme), task=ds.task,
                  dropout=cfg.dropout, ssm_only=cfg.ssm_only,
                  scan_mode=cfg.scan_mode, kernel_size=cfg.kernel_size)
    if ds.task == "classification":
        kwargs["num_classes"] = int(ds.y.max()) + 1
    else:
        kwargs["out_dim"] = ds.y.shape[2]
    return ModelConfig(**kwargs)


def _train_config_from(cfg: RunConfig, ds: Dataset) -> TrainConfig:
    loss = cfg.resolved_loss() if cfg.task == ds.task else (
        "cross_entropy" if ds.task == "classification" else "mse")
    return TrainConfig(lr=cfg.lr, weight_decay=cfg.weight_decay,
                       batch_size=cfg.batch_size, epochs=cfg.epochs,
                       seed=cfg.seed, loss=loss, split=cfg.split,
                       omega_max=cfg.omega_max)


def _load_run(config_path: str):
    cfg = load_config(config_path)
    if not cfg.dataset:
        raise ParameterError("config must name a dataset manifest")
    manifest = load_manifest(cfg.dataset)
    ds = ingest(manifest.path, manifest)
    split = split_dataset(ds, cfg.split, manifest.split_seed)
    dataset_files = sorted(
        os.path.join(manifest.path, f) for f in os.listdir(manifest.path)
        if f.endswith(".csv"))
    return cfg, manifest, ds, split, dataset_files


# -- commands ---------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg, manifest, ds, split, data_files = _load_run(args.config)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    config_text = serialize_config(cfg)
    write_artifacts(cfg.out_dir, config_text, cfg.seed, inputs=data_files)
    model_cfg = _model_config_from(cfg, ds)
    train_cfg = _train_config_from(cfg, ds)
    graph = build_model(model_cfg, ds.x.shape[2], seed=cfg.seed)
    result = fit(graph, split, train_cfg)
    write_csv(os.path.join(cfg.out_dir, "history.csv"),
              ("epoch", "split", "metric", "value"), result.history)
    save_checkpoint(os.path.join(cfg.out_dir, "best.ckpt"),
                    result.best_state, config_text, cfg.seed)
    test = evaluate(graph, split.x_test, split.y_test, train_cfg.loss)
    write_csv(os.path.join(cfg.out_dir, "metrics.csv"),
              ("split", "metric", "value"),
              [("test", k, v) for k, v in sorted(test.items())])
    print(f"trained {manifest.name}: best epoch {result.best_epoch}, "
          f"val loss {result.best_val_loss:.6g}")
    return 0


def cmd_eval(args) -> int:
    cfg, manifest, ds, split, data_files = _load_run(args.config)
    out_dir = args.out or cfg.out_dir
    arrays, config_text, seed = load_checkpoint(args.checkpoint)
    write_artifacts(out_dir, serialize_config(cfg), cfg.seed,
                    inputs=data_files + [args.checkpoint])
    graph = build_model(_model_config_from(cfg, ds), ds.x.shape[2], seed=cfg.seed)
    graph.load_arrays(arrays)
    train_cfg = _train_config_from(cfg, ds)
    rows = []
    for split_name, (x, y) in (("val", (split.x_val, split.y_val)),
                               ("test", (split.x_test, split.y_test))):
        for metric, value in sorted(evaluate(graph, x, y, train_cfg.loss).items()):
            rows.append((split_name, metric, value))
    write_csv(os.path.join(out_dir, "metrics.csv"),
              ("split", "metric", "value"), rows)
    for row in rows:
        print(f"{row[0]} {row[1]} = {row[2]:.6g}")
    return 0


def cmd_ablate(args) -> int:
    cfg, manifest, ds, split, data_files = _load_run(args.config)
    out_dir = args.out or cfg.out_dir
    write_artifacts(out_dir, serialize_config(cfg), cfg.seed, inputs=data_files)
    model_cfg = _model_config_from(cfg, ds)
    train_cfg = _train_config_from(cfg, ds)
    variants = [frozenset()]
    for spec_text in args.components or []:
        names = frozenset(n.strip() for n in spec_text.split(",") if n.strip())
        variants.append(names)
    rows = []
    for names in variants:
        result = run_ablation(AblationSpec(names), split, model_cfg, train_cfg,
                              ds.x.shape[2], n_seeds=args.seeds)
        rows.append((result.label, result.mean, result.std,
                     ";".join(repr(s) for s in result.scores)))
        print(f"{result.label}: {result.mean:.4f} +- {result.std:.4f}")
    write_csv(os.path.join(out_dir, "ablation.csv"),
              ("components", "mean", "std", "scores"), rows)
    return 0


def cmd_energy(args) -> int:
    ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
    if not ratios:
        raise ParameterError("--ratios must list at least one value")
    rows = [(r, ann, snn, ratio) for r, _, ann, snn, ratio in
            ratio_sweep(args.length, args.hidden, args.fr, ratios,
                        snn_kind=args.snn_kind)]
    config_text = (f"length = {args.length}\nhidden = {args.hidden}\n"
                   f"fr = {args.fr!r}\nratios = {args.ratios}\n"
                   f"snn_kind = {args.snn_kind}\n")
    write_artifacts(args.out, config_text, seed=0)
    write_csv(os.path.join(args.out, "energy.csv"),
              ("p_over_h", "ann_pj", "snn_pj", "ratio"), rows)
    for r, ann, snn, ratio in rows:
        print(f"p/h = {r:g}: ratio {ratio:.1f}x")
    return 0


def cmd_spectra(args) -> int:
    scheme = Scheme.from_string(args.scheme)
    omega, dt, eigs = spectral_sweep(args.samples, scheme, seed=args.seed)
    rows = []
    for i in range(args.samples):
        for lam in eigs[i]:
            rows.append((omega[i], dt[i], lam.real, lam.imag, abs(lam)))
    config_text = (f"scheme = {args.scheme}\nsamples = {args.samples}\n"
                   f"seed = {args.seed}\n")
    write_artifacts(args.out, config_text, seed=args.seed)
    write_csv(os.path.join(args.out, "spectra.csv"),
              ("omega", "dt", "re", "im", "abs"), rows)
    radii = np.abs(eigs)
    print(f"{args.samples} samples, |lambda| in [{radii.min():.12f}, {radii.max():.12f}]")
    return 0


def cmd_neuron(args) -> int:
    scheme = Scheme.from_string(args.scheme)
    params = OscillatorParams(np.array([args.omega]), np.array([args.dt]),
                              np.array([args.damping]))
    trace = simulate_neuron(params, scheme, args.steps)
    rows = [(n, trace.u[n], trace.v[n], trace.energy[n])
            for n in range(len(trace.u))]
    config_text = (f"scheme = {args.scheme}\nomega = {args.omega!r}\n"
                   f"dt = {args.dt!r}\ndamping = {args.damping!r}\n"
                   f"steps = {args.steps}\n")
    write_artifacts(args.out, config_text, seed=0)
    write_csv(os.path.join(args.out, "neuron.csv"),
              ("step", "u", "v", "energy"), rows)
    print(f"{args.steps} steps, final amplitude {trace.amplitude[-1]:.6g}")
    return 0


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sharessm",
        description="Spiking resonator state-space models: train, analyze, account")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the config's out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="homogenization ablations over seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--components", action="append", default=None,
                   help="comma list, e.g. 'B,C'; repeatable; "
                        "the heterogeneous baseline always runs")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("energy", help="ANN vs SNN block energy sweep")
    p.add_argument("--length", type=int, default=17984)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--fr", type=float, default=0.32)
    p.add_argument("--ratios", default=DEFAULT_RATIOS)
    p.add_argument("--snn-kind", default="share_ssm_only",
                   choices=("share", "share_ssm_only"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("spectra", help="closed-form eigenvalue sweep")
    p.add_argument("--scheme", required=True, choices=("im", "imex"))
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("neuron", help="single-resonator impulse response")
    p.add_argument("--scheme", required=True, choices=("euler", "im", "imex"))
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_neuron)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else int(exc.code or 0)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ShareSSMError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected runtime failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
