"""Command line entry points.

    alee synth   --out DIR [--n 2000 --types 8 --roles 6 --seed 0]
    alee run     --corpus DIR --strategy mblp --seed 0 --out DIR
    alee ablate  --corpus DIR --seeds 0,1,2 --out DIR
    alee sweep-m --corpus DIR --ms 2,5,10,inf --seeds 0,1 --out DIR
    alee serve   --corpus DIR --port 8080

`run`, `ablate`, `sweep-m` and `serve` all accept `--config FILE`
(YAML or JSON); flags override the file. The evaluation set is carved
from the corpus tail (`experiment.eval_size` sentences), the rest is
the active-learning pool.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import Config, load_config
from .corpus import TaskSchema, load_corpus
from .harness import PUBLIC_STRATEGIES, ablation_suite, run_experiment, sweep_m
from .synth import SynthSpec, write_corpus


def _parse_m(text: str) -> int | None:
    if text.lower() in ("inf", "none", "all"):
        return None
    return int(text)


def _parse_seeds(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip() != ""]


def _load_task(args) -> tuple[Config, TaskSchema, list, list]:
    cfg = load_config(args.config) if args.config else Config()
    if getattr(args, "strategy", None):
        cfg.select.strategy = args.strategy
    if getattr(args, "query_size", None):
        cfg.select.query_size = args.query_size
    if getattr(args, "m", None) is not None:
        cfg.select.m = _parse_m(args.m)
    if getattr(args, "seed", None) is not None:
        cfg.experiment.seed = args.seed

    root = Path(args.corpus)
    schema = TaskSchema.load(root / "schema.json")
    sents = load_corpus(root / "corpus.jsonl", schema)
    cut = cfg.experiment.eval_size
    if not 0 < cut < len(sents):
        raise SystemExit(f"eval_size {cut} does not fit a corpus of "
                         f"{len(sents)} sentences")
    return cfg, schema, sents[:-cut], sents[-cut:]


def cmd_synth(args):
    spec = SynthSpec(n=args.n, n_types=args.types, n_roles=args.roles,
                     seed=args.seed, noise=args.noise, lexemes=args.lexemes)
    schema_path, corpus_path = write_corpus(spec, args.out)
    print(f"wrote {schema_path} and {corpus_path}")


def cmd_run(args):
    cfg, schema, train, eval_ = _load_task(args)
    summary = run_experiment(cfg, schema, train, eval_, cfg.select.strategy,
                             cfg.experiment.seed, out_dir=args.out)
    last = summary["curve"][-1]
    need = summary["labels_to_target"]
    print(f"strategy={summary['strategy']} seed={summary['seed']} "
          f"final trigger_f1={last['trigger_f1']:.3f} "
          f"labels_to_target={need if need is not None else 'never'}")


def cmd_ablate(args):
    cfg, schema, train, eval_ = _load_task(args)
    report = ablation_suite(cfg, schema, train, eval_,
                            seeds=_parse_seeds(args.seeds), out_dir=args.out)
    for name, row in report["variants"].items():
        print(f"{name}: trigger_f1 at 20% labeled = {row['mean']:.3f}")


def cmd_sweep_m(args):
    cfg, schema, train, eval_ = _load_task(args)
    report = sweep_m(cfg, schema, train, eval_,
                     ms=[_parse_m(t) for t in args.ms.split(",")],
                     seeds=_parse_seeds(args.seeds), out_dir=args.out)
    for key, row in report["per_m"].items():
        print(f"m={key}: mean labels_to_target = {row['mean']:.0f}")


def cmd_serve(args):
    import uvicorn

    from .service import build_app

    cfg, schema, train, eval_ = _load_task(args)
    app = build_app(cfg, schema, train, eval_, state_dir=args.out)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alee",
                                description="Active learning for event "
                                            "extraction")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--types", type=int, default=8)
    s.add_argument("--roles", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.1)
    s.add_argument("--lexemes", type=int, default=8)
    s.set_defaults(fn=cmd_synth)

    def task_args(sp, strategy=False):
        sp.add_argument("--corpus", required=True,
                        help="directory with schema.json and corpus.jsonl")
        sp.add_argument("--config", default=None)
        sp.add_argument("--out", default=None)
        if strategy:
            sp.add_argument("--strategy", choices=PUBLIC_STRATEGIES,
                            default=None)
            sp.add_argument("--m", default=None,
                            help="top-m for importance; 'inf' averages all")
            sp.add_argument("--query-size", type=int, default=None)
            sp.add_argument("--seed", type=int, default=None)

    s = sub.add_parser("run", help="one active-learning experiment")
    task_args(s, strategy=True)
    s.set_defaults(fn=cmd_run)

    s = sub.add_parser("ablate", help="full method vs ablations")
    task_args(s)
    s.add_argument("--seeds", default="0,1,2")
    s.set_defaults(fn=cmd_ablate)

    s = sub.add_parser("sweep-m", help="sweep the importance cutoff m")
    task_args(s)
    s.add_argument("--ms", default="2,5,10,inf")
    s.add_argument("--seeds", default="0,1,2")
    s.set_defaults(fn=cmd_sweep_m)

    s = sub.add_parser("serve", help="annotation REST service")
    task_args(s, strategy=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8080)
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
