"""Command line entry point: simulate, gen-data, train, eval, serve,
compare, gradcheck.

Exit codes: 0 success, 1 usage error (bad flags, missing subcommand),
2 runtime error (missing files, corrupt inputs, failed checks).
Every subcommand that takes ``--seed`` writes bit-identical output
files for the same seed; outputs land under ``--out`` with stable
names. Scenario values loaded from a config file can be overridden by
flags (flags win).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract here is exit 1."""

    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="agora", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("simulate", help="run one scenario and write its report")
    p.add_argument("scenario", help="shipped scenario name or config file path")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--ticks", type=int, default=None, help="override the scenario length")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--csv", action="store_true", help="also write the atmosphere trajectory as CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("gen-data", help="run scenarios and label feature sequences with an oracle")
    p.add_argument("scenario", help="shipped scenario name or config file path")
    p.add_argument("-n", "--samples", type=int, required=True, help="number of samples")
    p.add_argument("--oracle", choices=("heuristic", "rule"), default="heuristic")
    p.add_argument("--seq-len", type=int, default=16, help="timesteps per sample")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="fit the budget regressor on a dataset file")
    p.add_argument("dataset", help="dataset file from gen-data")
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    p.add_argument("--seed", type=int, default=0, help="init/shuffle/split seed")
    p.add_argument("--lr", type=float, default=None, help="override learning rate")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None, help="override max epochs")
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="report a weight file's MSE on a dataset")
    p.add_argument("weights", help="weight file from train")
    p.add_argument("dataset", help="dataset file")
    p.add_argument("--split", choices=("all", "train", "test"), default="all",
                   help="evaluate the whole file or one side of a seeded split")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--out", default=None, help="also write the report as JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="host rooms over a WebSocket endpoint")
    p.add_argument("--listen", default="127.0.0.1:8765", help="HOST:PORT (port 0 picks a free one)")
    p.add_argument("--matrix", choices=("noop", "rule", "heuristic", "learned"), default="noop")
    p.add_argument("--weights", default=None, help="weight file for --matrix learned")
    p.add_argument("--banned-token", action="append", default=[],
                   help="banned token for --matrix rule (repeatable)")
    p.add_argument("--topic", default="", help="topic given to new rooms")
    p.add_argument("--log-dir", default=None, help="persist rooms to append-only logs here")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("compare", help="run two scenarios across seeds and tabulate metrics")
    p.add_argument("scenario_a")
    p.add_argument("scenario_b")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (0..k-1)")
    p.add_argument("--out", default=None, help="also write per-seed metrics as JSON here")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference check of the model gradients")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=2)
    p.add_argument("--tolerance", type=float, default=1e-3,
                   help="fail (exit 2) if the max relative error exceeds this")
    p.add_argument("--per-tensor", action="store_true", help="print every tensor's error")
    p.set_defaults(func=_cmd_gradcheck)

    return parser


# -- subcommands ----------------------------------------------------------


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scenario(args):
    from .simulator import load_scenario

    cfg = load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "ticks", None) is not None:
        cfg = replace(cfg, ticks=args.ticks)
    return cfg


def _cmd_simulate(args) -> int:
    from .simulator import run_scenario

    cfg = _load_scenario(args)
    report = run_scenario(cfg)
    out = _outdir(args.out)
    report_path = out / f"{cfg.name}-seed{cfg.seed}-report.json"
    report_path.write_text(report.to_json() + "\n", encoding="utf-8")
    print(
        f"{cfg.name} seed={cfg.seed} regime={report.regime}: "
        f"mean_atmosphere={report.mean_atmosphere:+.4f} "
        f"gini={report.participation_gini:.4f} "
        f"mute_rate={report.mute_event_rate:.4f} "
        f"messages={report.messages} tasks={report.tasks_completed}/{report.tasks_issued}"
    )
    print(f"report: {report_path}")
    if args.csv:
        csv_path = out / f"{cfg.name}-seed{cfg.seed}-trajectory.csv"
        lines = ["tick,atmosphere"]
        lines += [f"{t},{v!r}" for t, v in enumerate(report.trajectory)]
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"trajectory: {csv_path}")
    return 0


def _cmd_gen_data(args) -> int:
    from .matrix import make_matrix
    from .model_store import save_dataset
    from .simulator import generate_dataset

    cfg = _load_scenario(args)
    if args.oracle == "heuristic":
        oracle = make_matrix({"kind": "heuristic", **cfg.heuristic})
    else:
        oracle = make_matrix({"kind": "rule", **cfg.rule})
    samples = generate_dataset(cfg, oracle, args.samples, seq_len=args.seq_len)
    out = _outdir(args.out)
    path = out / f"{cfg.name}-{args.oracle}-n{args.samples}.ds"
    save_dataset(samples, path)
    labels = np.array([s.label for s in samples])
    print(
        f"{len(samples)} samples from {cfg.name!r} labeled by {args.oracle}: "
        f"label mean={labels.mean():.4f} min={labels.min():.4f} max={labels.max():.4f}"
    )
    print(f"dataset: {path}")
    return 0


def _train_configs(args):
    from .training import desk_train_config, paper_train_config
    from .transformer import desk_config, paper_config

    if args.profile == "paper":
        model_cfg, train_cfg = paper_config(), paper_train_config()
    else:
        model_cfg, train_cfg = desk_config(), desk_train_config()
    overrides = {"seed": args.seed}
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.epochs is not None:
        overrides["max_epochs"] = args.epochs
    if args.patience is not None:
        overrides["patience"] = args.patience
    if args.test_fraction is not None:
        overrides["test_fraction"] = args.test_fraction
    return model_cfg, replace(train_cfg, **overrides)


def _cmd_train(args) -> int:
    from .model_store import load_dataset, save_weights
    from .training import train
    from .transformer import ModelConfig, init_weights

    dataset = load_dataset(args.dataset)
    if not dataset:
        raise ValueError(f"{args.dataset}: empty dataset")
    model_cfg, train_cfg = _train_configs(args)
    seq_len, input_dim = dataset[0].features.shape
    model_cfg = ModelConfig(
        input_dim=int(input_dim),
        model_dim=model_cfg.model_dim,
        heads=model_cfg.heads,
        encoder_layers=model_cfg.encoder_layers,
        decoder_layers=model_cfg.decoder_layers,
        ff_dim=model_cfg.ff_dim,
        seq_len=int(seq_len),
        dropout=model_cfg.dropout,
        layernorm_eps=model_cfg.layernorm_eps,
    )
    weights = init_weights(model_cfg, seed=args.seed)
    best, history = train(weights, train_cfg, dataset)

    out = _outdir(args.out)
    weights_path = out / "model.agw"
    history_path = out / "history.json"
    save_weights(best, weights_path)
    payload = history.to_dict()
    # MSE of the returned (best-epoch) weights; `eval --split train`
    # with the same split settings reproduces final_train_mse exactly
    payload["final_train_mse"] = history.train_mse[history.best_epoch]
    payload["final_test_mse"] = history.test_mse[history.best_epoch]
    payload["profile"] = args.profile
    payload["samples"] = len(dataset)
    payload["train_config"] = {
        "learning_rate": train_cfg.learning_rate,
        "batch_size": train_cfg.batch_size,
        "max_epochs": train_cfg.max_epochs,
        "patience": train_cfg.patience,
        "test_fraction": train_cfg.test_fraction,
        "seed": train_cfg.seed,
    }
    history_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(
        f"trained {args.profile} profile on {len(dataset)} samples: "
        f"epochs_run={history.epochs_run} best_epoch={history.best_epoch} "
        f"train_mse={payload['final_train_mse']!r} test_mse={payload['final_test_mse']!r}"
    )
    print(f"weights: {weights_path}")
    print(f"history: {history_path}")
    return 0


def _cmd_eval(args) -> int:
    from .model_store import load_dataset, load_weights
    from .training import as_arrays, evaluate, split_indices

    weights = load_weights(args.weights)
    dataset = load_dataset(args.dataset)
    x, y = as_arrays(dataset, weights.config.input_dim, weights.config.seq_len)
    if args.split != "all":
        train_idx, test_idx = split_indices(x.shape[0], args.test_fraction, args.split_seed)
        idx = train_idx if args.split == "train" else test_idx
        x, y = x[idx], y[idx]
    mse = evaluate(weights, x, y, batch_size=args.batch_size)
    report = {
        "mse": mse,
        "n": int(x.shape[0]),
        "split": args.split,
        "weights": str(args.weights),
        "dataset": str(args.dataset),
    }
    print(f"mse={mse!r} n={x.shape[0]} split={args.split}")
    if args.out is not None:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        print(f"report: {out_path}")
    return 0


def _parse_listen(value: str):
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise _UsageError(f"--listen must be HOST:PORT, got {value!r}")
    return host, int(port)


def _cmd_serve(args) -> int:
    from .engine import EngineConfig
    from .service import ServiceConfig, run_service

    host, port = _parse_listen(args.listen)
    if args.matrix == "rule":
        matrix_spec = {"kind": "rule", "banned_tokens": sorted(args.banned_token)}
    elif args.matrix == "learned":
        if not args.weights:
            raise _UsageError("--matrix learned needs --weights")
        matrix_spec = {"kind": "learned", "weights_path": args.weights}
    else:
        matrix_spec = {"kind": args.matrix}
    config = ServiceConfig(
        engine=EngineConfig(),
        matrix_spec=matrix_spec,
        topic=args.topic,
        log_dir=args.log_dir,
    )
    try:
        asyncio.run(run_service(config, host=host, port=port))
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_compare(args) -> int:
    from .simulator import load_scenario, run_scenario

    if args.seeds < 1:
        raise _UsageError("--seeds must be >= 1")
    rows = []
    per_seed = {}
    for name in (args.scenario_a, args.scenario_b):
        cfg = load_scenario(name)
        reports = [run_scenario(replace(cfg, seed=s)) for s in range(args.seeds)]
        per_seed[cfg.name] = [r.to_dict() for r in reports]
        metric = lambda f: np.array([f(r) for r in reports])
        atm = metric(lambda r: r.mean_atmosphere)
        gini = metric(lambda r: r.participation_gini)
        mute = metric(lambda r: r.mute_event_rate)
        freedom = metric(lambda r: r.interactive_freedom)
        rows.append(
            (cfg.name, reports[0].regime, atm.mean(), atm.std(), gini.mean(),
             mute.mean(), freedom.mean(), metric(lambda r: r.tasks_completed).mean())
        )
    header = (
        f"{'scenario':<24} {'regime':<14} {'atmosphere':>16} {'gini':>8} "
        f"{'mute_rate':>10} {'freedom':>8} {'tasks':>6}"
    )
    print(header)
    print("-" * len(header))
    for name, regime, am, asd, g, mu, fr, tk in rows:
        print(
            f"{name:<24} {regime:<14} {am:+.4f} ± {asd:.4f} {g:>8.4f} "
            f"{mu:>10.4f} {fr:>8.4f} {tk:>6.1f}"
        )
    if args.out is not None:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(json.dumps(per_seed, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        print(f"per-seed metrics: {out_path}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .transformer import gradient_check

    result = gradient_check(batch_size=args.batch_size, eps=args.eps, seed=args.seed)
    if args.per_tensor:
        for name in sorted(result["per_tensor"]):
            print(f"{name:<16} rel_err={result['per_tensor'][name]:.3e}")
    print(f"max relative error: {result['max_rel_err']:.6e} (eps={result['eps']:g})")
    if result["max_rel_err"] > args.tolerance:
        print(f"gradcheck FAILED tolerance {args.tolerance:g}", file=sys.stderr)
        return 2
    return 0


# -- driver ---------------------------------------------------------------


def run(argv: Optional[List[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # runtime failures map to exit 2 by contract
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
