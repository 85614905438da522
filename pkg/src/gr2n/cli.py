"""``python -m gr2n <command>``: gen-data, train, eval, gradcheck, bench.

Exit status is 0 on success. On failure a JSON object
``{"error": <type>, "message": ..., "field": <config path or null>}`` is
printed to stderr and the exit status is 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .harness import ConfigError, ExperimentConfig, cmd_bench, cmd_eval, cmd_gendata, cmd_gradcheck, cmd_train
from .synth import ScenarioSpec


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gr2n", description="Relation network experiments: data generation, training, evaluation, gradient checks and timing.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic scene dataset")
    g.add_argument("--config", help="scenario JSON (default scenario when omitted)")
    g.add_argument("--n", type=int, default=2500, help="number of scenes (split 80/10/10)")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a model from an experiment config")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True)

    e = sub.add_parser("eval", help="evaluate a checkpoint on the config's test set")
    e.add_argument("--config", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--out")

    c = sub.add_parser("gradcheck", help="compare tape gradients with finite differences")
    c.add_argument("--config", help="JSON with optional keys cases, kinds, eps")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")

    b = sub.add_parser("bench", help="time per-scene vs per-pair forwards")
    b.add_argument("--config", help="JSON with optional keys checkpoint, n_people, batch_sizes, repeats")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    return p


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _emit(result: dict, out: str | None, name: str) -> None:
    text = json.dumps(result, indent=2)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text)


def run(args: argparse.Namespace) -> None:
    if args.command == "gen-data":
        spec = None
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                spec = ScenarioSpec.from_json(fh.read())
        _emit(cmd_gendata(spec, args.n, args.seed, args.out), None, "")
    elif args.command == "train":
        cfg = ExperimentConfig.load(args.config, args.seed)
        report = cmd_train(cfg, args.out)
        print(json.dumps({"accuracy": report.accuracy, "mAP": report.mean_average_precision}))
    elif args.command == "eval":
        cfg = ExperimentConfig.load(args.config, args.seed)
        _emit(cmd_eval(cfg, args.checkpoint, args.out).to_dict(), None, "")
    elif args.command == "gradcheck":
        conf = _load_json(args.config)
        result = cmd_gradcheck(conf.get("cases", 20), args.seed, tuple(conf.get("kinds", ["gr2n"])), conf.get("eps", 1e-5))
        _emit(result, args.out, "gradcheck.json")
    elif args.command == "bench":
        conf = _load_json(args.config)
        result = cmd_bench(
            conf.get("checkpoint"),
            tuple(conf.get("n_people", (2, 4, 6, 8))),
            tuple(conf.get("batch_sizes", (1, 2, 4, 8))),
            conf.get("repeats", 5),
            args.seed,
        )
        _emit(result, args.out, "bench.json")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc), "field": exc.path}), file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "field": None}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
