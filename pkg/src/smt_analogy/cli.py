"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from .embedding import EmbedConfig, train_encoder
from .errors import DataError, NumericError
from .fileio import (
    export_heatmap,
    read_checkpoint,
    read_corpus,
    read_predictions,
    write_checkpoint,
    write_corpus,
    write_json,
    write_predictions,
)
from .inference import RECOVERY_PRESET, InferenceConfig
from .oracle import SearchLimits
from .pipeline import evaluate, infer_corpus, oracle_corpus, run_pipeline
from .synth import GenParams, make_corpus
from .vocab import default_vocab

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("smt_analogy")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _inference_config(args: argparse.Namespace) -> InferenceConfig:
    base = dict(RECOVERY_PRESET) if args.preset == "recovery" else {}
    explicit = {
        "lambda1": args.lambda1,
        "lambda2": args.lambda2,
        "lambda3": args.lambda3,
        "lr": args.lr,
        "max_iters": args.iters,
        "tol": args.tol,
        "tau": args.tau,
        "init_offset": args.init_offset,
        "seed": args.seed,
    }
    base.update({k: v for k, v in explicit.items() if v is not None})
    if args.sigmoid_inside:
        base["sigmoid_inside"] = True
    if args.depth_reward:
        base["depth_reward"] = True
    try:
        return InferenceConfig(**base)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_inference_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda1", type=float, help="depth (systematicity) weight, default 1e-3")
    p.add_argument("--lambda2", type=float, help="embedding-order weight, default 1e-1")
    p.add_argument("--lambda3", type=float, help="one-to-one weight, default 1e-3")
    p.add_argument("--lr", type=float, help="Adam learning rate, default 1e-3")
    p.add_argument("--iters", type=int, help="maximum Adam iterations, default 2000")
    p.add_argument("--tol", type=float, help="stop when the objective changes less than this")
    p.add_argument("--tau", type=float, help="decision threshold on scores, default 0.5")
    p.add_argument("--seed", type=int, help="initialization seed, default 0")
    p.add_argument("--init-offset", type=float, help="shift of the initial X, default 0")
    p.add_argument("--sigmoid-inside", action="store_true", help="optimize X = sigmoid(Z) throughout")
    p.add_argument("--depth-reward", action="store_true", help="use -||X d||^2 instead of the depth penalty")
    p.add_argument(
        "--preset",
        choices=("default", "recovery"),
        default="default",
        help="'recovery' starts from settings tuned for planted instances; explicit flags still win",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smt-analogy", description="Structure-mapping analogy between expression DAGs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic corpus of planted analogy pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--num", type=int, required=True)
    p.add_argument("--depth-min", type=int, default=2)
    p.add_argument("--depth-max", type=int, default=7)
    p.add_argument("--distractor", type=float, default=0.3)
    p.add_argument("--relabel", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-nodes", type=int, default=60, help="node cap per generated DAG")
    p.add_argument("--base-max-nodes", type=int, help="node cap for the planted base")

    p = sub.add_parser("train", help="train the order-embedding encoder")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=3, help="message-passing layers")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--pairs", type=int, default=1000, help="positives (and negatives) in the pair pool")
    p.add_argument("--vocab-seed", type=int, default=0)

    p = sub.add_parser("infer", help="align every pair of a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    _add_inference_flags(p)

    p = sub.add_parser("oracle", help="compute exact best mappings as gold")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-base", type=int, default=12)
    p.add_argument("--max-target", type=int, default=40)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("heatmap", help="export one pair's score matrix as a PGM image")
    p.add_argument("--pred", required=True)
    p.add_argument("--pair", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="infer and evaluate in one pass")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--pred-out", required=True)
    p.add_argument("--metrics-out", required=True)
    _add_inference_flags(p)
    return parser


def _gen(args) -> None:
    try:
        params = GenParams(
            depth_min=args.depth_min,
            depth_max=args.depth_max,
            max_nodes=args.max_nodes,
            distractor=args.distractor,
            relabel=args.relabel,
            base_max_nodes=args.base_max_nodes,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.num < 0:
        raise UsageError("--num must be non-negative")
    write_corpus(args.out, make_corpus(params, args.num, args.seed))


def _train(args) -> None:
    try:
        config = EmbedConfig(
            layers=args.k,
            hidden=args.hidden,
            dim=args.dim,
            margin=args.margin,
            lr=args.lr,
            steps=args.steps,
            batch_size=args.batch_size,
            pairs=args.pairs,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    graphs = {}
    for inst in read_corpus(args.corpus):
        for g in (inst.base, inst.target):
            graphs.setdefault(g.id, g)
    if not graphs:
        raise DataError(f"{args.corpus}: corpus holds no graphs")
    vocab = default_vocab(seed=args.vocab_seed)
    result = train_encoder(config, list(graphs.values()), vocab)
    if result.losses:
        log.info("loss %.4f -> %.4f", result.losses[0], result.losses[-1])
    write_checkpoint(args.out, result.params, vocab)


def _infer(args) -> None:
    config = _inference_config(args)
    params, vocab = read_checkpoint(args.model)
    preds, failures = infer_corpus(read_corpus(args.corpus), params, vocab, config)
    write_predictions(args.out, preds)
    for f in failures:
        print(f"pair {f.id}: {f.error}", file=sys.stderr)


def _oracle(args) -> None:
    limits = SearchLimits(max_base=args.max_base, max_target=args.max_target)
    solved, failures = oracle_corpus(read_corpus(args.corpus), limits)
    write_corpus(args.out, solved)
    for f in failures:
        print(f"pair {f.id}: {f.error}", file=sys.stderr)


def _eval(args) -> None:
    metrics = evaluate(read_predictions(args.pred), read_corpus(args.gold))
    write_json(args.out, metrics)
    agg = metrics["aggregate"]
    print(f"f1 {agg['f1']:.4f}  auc {agg['roc_auc']:.4f}  exact {agg['exact_match_rate']:.4f}  pairs {agg['pairs_scored']}")


def _heatmap(args) -> None:
    for p in read_predictions(args.pred):
        if p.id == args.pair:
            export_heatmap(p.scores, args.out)
            return
    raise DataError(f"{args.pred}: no pair with id {args.pair!r}")


def _run(args) -> None:
    metrics = run_pipeline(args.corpus, args.model, _inference_config(args), args.pred_out, args.metrics_out)
    agg = metrics["aggregate"]
    print(f"f1 {agg['f1']:.4f}  auc {agg['roc_auc']:.4f}  exact {agg['exact_match_rate']:.4f}  pairs {agg['pairs_scored']}")


COMMANDS = {"gen": _gen, "train": _train, "infer": _infer, "oracle": _oracle, "eval": _eval, "heatmap": _heatmap, "run": _run}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"smt-analogy {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
