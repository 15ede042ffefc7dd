"""Command-line entry point.

Subcommands: ``gen-data``, ``spectrum``, ``train``, ``eval``,
``bench-latency`` and ``verify``. Every subcommand accepts ``--config``
(a ``key = value`` file), ``--seed`` and ``--out``; explicit flags win over
config-file values.

Exit codes: 0 success, 1 validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bench, checkpoint, data, profile, training, verify
from .model import FcnetConfig

__all__ = ["main", "parse_config_file", "ConfigError"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("fcnet")


class ConfigError(ValueError):
    pass


# keys a config file may set, with their value types; model and trainer
# fields come from the dataclasses, the rest are data-generation knobs
_EXTRA_KEYS: dict[str, type] = {
    "count": int,
    "steps": int,
    "dt": float,
    "kp": float,
    "kd": float,
    "kind": str,
    "val_frac": float,
    "channel": int,
    "m_highlight": int,
    "samples": int,
    "warmup": int,
}


def _field_types() -> dict[str, type]:
    out: dict[str, type] = {}
    for cls in (FcnetConfig, training.TrainConfig):
        for f in dataclasses.fields(cls):
            t = f.type if isinstance(f.type, str) else f.type.__name__
            out[f.name] = float if "float" in t else int
    out.update(_EXTRA_KEYS)
    return out


def _coerce(key: str, raw: str, kind: type):
    if raw.lower() in ("none", ""):
        return None
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def parse_config_file(path: str | Path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    types = _field_types()
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value, types[key])
    return out


def _settings(args: argparse.Namespace) -> dict:
    cfg = parse_config_file(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key in ("config", "func", "command") or value is None:
            continue
        cfg[key] = value
    return cfg


def _pick(cfg: dict, cls) -> dict:
    names = {f.name for f in dataclasses.fields(cls)}
    return {k: v for k, v in cfg.items() if k in names and v is not None}


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# data helpers
# --------------------------------------------------------------------------

def _generate(cfg: dict) -> list[data.Trajectory]:
    kind = cfg.get("kind", "masspring")
    seed = int(cfg.get("seed", 0))
    count = int(cfg.get("count", 1000 if kind == "masspring" else 1))
    steps = int(cfg.get("steps", 64 if kind == "masspring" else 512))
    dt = float(cfg.get("dt", 0.01))
    rng = np.random.default_rng(seed)
    if kind == "masspring":
        return data.masspring_dataset(count, steps, dt=dt, kp=float(cfg.get("kp", 20.0)),
                                      kd=float(cfg.get("kd", 6.0)), seed=seed)
    out = []
    for i in range(count):
        if kind == "harmonic":
            # integer period over a 256-sample window: energy lands in mode 4
            omega = 2 * math.pi * 4 / (256 * dt)
            tr = data.gen_harmonic(1.0, omega, float(rng.uniform(0, 2 * math.pi)), steps, dt)
        elif kind == "rotor":
            tr = data.gen_accel_rotor(0.0, float(rng.uniform(-1, 1)),
                                      float(rng.uniform(0.5, 2.0)), steps, dt)
        elif kind == "noise":
            tr = data.Trajectory(rng.standard_normal((steps, 1)), np.zeros((steps, 0)), dt)
        else:
            raise ConfigError(f"unknown data kind {kind!r}")
        tr.meta["id"] = str(i)
        out.append(tr)
    return out


def _load_or_generate(cfg: dict) -> list[data.Trajectory]:
    if cfg.get("data"):
        return data.load_trajectories(cfg["data"])
    return _generate(cfg)


def _batches(trajs, cfg: dict, n: int, stats: data.NormStats | None = None):
    train_t, val_t = data.split_train_val(trajs, float(cfg.get("val_frac", 0.1)))
    if not train_t:
        raise ConfigError("no training trajectories after the split")
    stats = stats or data.fit_norm(train_t)
    tb = data.windows_to_batch(data.window_dataset(train_t, n, stats=stats))
    vb = data.windows_to_batch(data.window_dataset(val_t, n, stats=stats)) if val_t else None
    return tb, vb, stats


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_gen_data(cfg: dict) -> int:
    trajs = _generate(cfg)
    path = _out_dir(cfg) / f"{cfg.get('kind', 'masspring')}.fctraj"
    data.save_trajectories(trajs, path)
    print(f"wrote {len(trajs)} trajectories to {path}")
    return EXIT_OK


def cmd_spectrum(cfg: dict) -> int:
    trajs = _load_or_generate(cfg)
    rep = profile.spectrum_report(
        trajs, channel=int(cfg.get("channel", 0)), n=int(cfg.get("n", 256)),
        m_highlight=int(cfg.get("m_highlight", 10)),
    )
    path = _out_dir(cfg) / "spectrum.csv"
    profile.write_spectrum_csv(rep, path)
    print(f"windows {rep.windows}  peak mode {rep.peak_mode}  "
          f"top-{rep.m_highlight} coverage {rep.low_mode_coverage:.4f}%")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_train(cfg: dict) -> int:
    trajs = _load_or_generate(cfg)
    d_s, d_a = trajs[0].states.shape[1], trajs[0].actions.shape[1]
    mcfg = FcnetConfig(**{**_pick(cfg, FcnetConfig), "d_s": d_s, "d_a": d_a})
    tcfg = training.TrainConfig(**_pick(cfg, training.TrainConfig))
    tb, vb, stats = _batches(trajs, cfg, mcfg.n)
    out = _out_dir(cfg)
    res = training.train(tb, tcfg, mcfg, vb, loss_csv=out / "loss.csv")
    checkpoint.save_checkpoint(res.params, out / "model.ckpt")
    (out / "norm.json").write_text(json.dumps(stats.to_dict()))
    last = res.history[-1]
    print(f"epochs {len(res.history)}  train {last['train_loss']:.4e}  "
          f"val {last['val_loss']:.4e}")
    print(f"wrote {out / 'model.ckpt'}, {out / 'loss.csv'}, {out / 'norm.json'}")
    return EXIT_OK


def cmd_eval(cfg: dict) -> int:
    if not cfg.get("checkpoint"):
        raise ConfigError("eval needs --checkpoint")
    p = checkpoint.load_checkpoint(cfg["checkpoint"])
    norm_path = cfg.get("norm") or Path(cfg["checkpoint"]).with_name("norm.json")
    stats = data.NormStats.from_dict(json.loads(Path(norm_path).read_text()))
    trajs = _load_or_generate(cfg)
    _, vb, _ = _batches(trajs, cfg, p.cfg.n, stats)
    if vb is None:
        raise ConfigError("validation split is empty")
    print(f"val_mse {training.evaluate(p, vb):.6e}")
    return EXIT_OK


def cmd_bench_latency(cfg: dict) -> int:
    report = bench.bench_latency(
        models=cfg.get("models") or ("fcnet", "attn"),
        ns=cfg.get("ns") or (64, 2048),
        layers=(int(cfg.get("layers", 4)),),
        d_hs=(int(cfg.get("d_h", 256)),),
        samples=int(cfg.get("samples", 1000)),
        warmup=int(cfg.get("warmup", bench.WARMUP_STEPS)),
        seed=int(cfg.get("seed", 0)),
    )
    out = _out_dir(cfg)
    bench.write_latency_csv(report, out / "latency.csv")
    for r in report.rows:
        print(f"{r.model:6s} n={r.n:5d} L={r.layers} d_h={r.d_h}  "
              f"mean {r.mean_s * 1e3:.3f} ms  p99 {r.p99_s * 1e3:.3f} ms")
    par = bench.bench_parallel(seed=int(cfg.get("seed", 0)))
    with open(out / "parallel.csv", "w") as fh:
        fh.write("T,seconds\n")
        for T, sec in par.items():
            fh.write(f"{T},{sec!r}\n")
    print("parallel forward: " + "  ".join(f"T={T} {s:.4f}s" for T, s in par.items()))
    print(f"wrote {out / 'latency.csv'}, {out / 'parallel.csv'}")
    return EXIT_OK


DUAL_TOL = 1e-8
GRAD_TOL = 1e-5


def cmd_verify(cfg: dict) -> int:
    seed = int(cfg.get("seed", 0))
    dual = verify.run_dual_form_suite(count=100, seed=seed)
    grad = verify.grad_check(seed=seed)
    print(f"dual-form cases {dual.cases}  max discrepancy {dual.max_err:.3e}")
    print(f"gradient coords {grad.coords}  max rel err {grad.max_rel_err:.3e} ({grad.worst})")
    ok = dual.max_err < DUAL_TOL and grad.max_rel_err < GRAD_TOL
    print("verify: ok" if ok else "verify: FAILED")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default: current)")


def _model_flags(p: argparse.ArgumentParser) -> None:
    for name in ("d_h", "d_q", "layers", "n", "m", "ffn_mult"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int)


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="trajectory file; generated on the fly if omitted")
    p.add_argument("--kind", choices=("masspring", "harmonic", "rotor", "noise"))
    p.add_argument("--count", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--dt", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fcnet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gen-data", help="generate trajectories")
    _common(p)
    _data_flags(p)
    p.add_argument("--kp", type=float)
    p.add_argument("--kd", type=float)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("spectrum", help="per-mode energy profile of a channel")
    _common(p)
    _data_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--channel", type=int)
    p.add_argument("--m-highlight", dest="m_highlight", type=int)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("train", help="fit a model by imitation")
    _common(p)
    _data_flags(p)
    _model_flags(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--base-lr", dest="base_lr", type=float)
    p.add_argument("--target-val-loss", dest="target_val_loss", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="validation MSE of a checkpoint")
    _common(p)
    _data_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--norm", help="normalisation JSON (default: next to checkpoint)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-latency", help="streaming latency and parallel scaling")
    _common(p)
    p.add_argument("--models", nargs="+", choices=("fcnet", "attn"))
    p.add_argument("--ns", nargs="+", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--d-h", dest="d_h", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--warmup", type=int)
    p.set_defaults(func=cmd_bench_latency)

    p = sub.add_parser("verify", help="dual-form and gradient self-checks")
    _common(p)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command is None:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        return args.func(_settings(args))
    except (ValueError, OSError, checkpoint.CheckpointError,
            data.TrajectoryGenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
