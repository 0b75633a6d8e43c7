"""Command-line pipeline: synth -> network -> train -> score -> eval / report.

Every stage reads and writes plain-text artifacts in one work directory, so
the stages compose without moving files by hand.
"""

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, build_config, config_lines, parse_lines, read_config_file
from .errors import (
    ConfigError,
    DegenerateNetworkError,
    DivergenceError,
    EmptyTableError,
    NotFoundError,
    ReviewParseError,
    StageOrderError,
    UndefinedMetricError,
    UndefinedScoreError,
    ValidationError,
)
from .features import write_feature_dump
from .metrics import evaluate
from .network import build_network, load_network, save_network
from .reviews import load_labels, load_reviews, validate_labels, write_labels, write_reviews
from .scoring import rank_users, read_ranking, write_ranking
from .synth import generate, read_spec, write_spec
from .trainer import init_embeddings, load_embeddings, save_embeddings, train
from .walks import generate_walks

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_DIVERGENCE = 4
EXIT_STAGE_ORDER = 5

HIST_BINS = 50

# artifact names inside the work directory
NETWORK = "network.tsv"
USERS = "users.txt"
HISTOGRAM = "hbar_hist.tsv"
FEATURES = "pairs.csv"
U_TEXT, PHI_TEXT = "U.txt", "Phi.txt"
U_BIN, PHI_BIN = "U.bin", "Phi.bin"
LOSS_LOG = "loss.log"
RANKING = "ranking.tsv"
REPORT_TEXT, REPORT_KV = "report.txt", "report.kv"
MANIFEST = "manifest.txt"


class UsageError(Exception):
    pass


def _update_manifest(workdir, entries):
    path = Path(workdir) / MANIFEST
    current = {}
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines():
            if " = " in line:
                k, v = line.split(" = ", 1)
                current[k] = v
    current.update({k: str(v) for k, v in entries.items()})
    path.write_text("".join(f"{k} = {current[k]}\n" for k in sorted(current)), encoding="utf-8")


def _config_entries(cfg):
    return dict(line.split(" = ", 1) for line in config_lines(cfg))


def _require(path, stage):
    if not Path(path).exists():
        raise StageOrderError(f"{path} not found; run the '{stage}' stage first")


def _load_dataset(cfg):
    if not cfg.dataset:
        raise ConfigError("paths.dataset is not set")
    return load_reviews(cfg.dataset, cfg.schema)


def _load_labels(cfg, dataset=None):
    if not cfg.labels:
        return None
    if not Path(cfg.labels).exists():
        raise NotFoundError(f"label file {cfg.labels} not found")
    labels = load_labels(cfg.labels)
    if dataset is not None:
        validate_labels(labels, dataset)
    return labels


def pair_class(labels, u_i, u_j):
    a, b = labels.get(u_i), labels.get(u_j)
    if a is None or b is None:
        return None
    return {2: "C-C", 1: "NC-C", 0: "NC-NC"}[int(a) + int(b)]


def hbar_histogram(feature_rows, labels=None, bins=HIST_BINS):
    """Counts of h_bar per pair class over ``bins`` equal-width bins on [0, 1]."""
    groups = {}
    for u_i, u_j, f in feature_rows:
        cls = "all" if labels is None else pair_class(labels, u_i, u_j)
        if cls is not None:
            groups.setdefault(cls, []).append(f.h_bar)
    classes = ["all"] if labels is None else ["C-C", "NC-C", "NC-NC"]
    edges = np.linspace(0.0, 1.0, bins + 1)
    return edges, {c: np.histogram(groups.get(c, []), bins=edges)[0] for c in classes}


def write_histogram(edges, counts, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("class\tbin_lo\tbin_hi\tcount\n")
        for cls, hist in counts.items():
            for lo, hi, c in zip(edges[:-1], edges[1:], hist):
                fh.write(f"{cls}\t{lo:.2f}\t{hi:.2f}\t{int(c)}\n")


def read_histogram(path):
    counts = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            cls, lo, hi, c = line.rstrip("\n").split("\t")
            counts.setdefault(cls, []).append((float(lo), float(hi), int(c)))
    return counts


# --- stages -----------------------------------------------------------------

def cmd_synth(args):
    if not args.spec or not Path(args.spec).exists():
        raise UsageError(f"spec file {args.spec!r} not found")
    spec = read_spec(args.spec)
    out = Path(args.out)
    targets = [out / "reviews.csv", out / "labels.csv", out / "spec.txt"]
    existing = [str(t) for t in targets if t.exists()]
    if existing and not args.force:
        raise UsageError(f"refusing to overwrite {', '.join(existing)} (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    dataset, labels = generate(spec)
    write_reviews(dataset.records, targets[0], spec.schema)
    write_labels(labels, targets[1])
    write_spec(spec, targets[2])
    print(f"wrote {len(dataset)} reviews by {len(labels)} users "
          f"({sum(labels.values())} colluders) to {out}")
    return EXIT_OK


def cmd_network(cfg):
    work = Path(cfg.workdir)
    work.mkdir(parents=True, exist_ok=True)
    dataset = _load_dataset(cfg)
    labels = _load_labels(cfg, dataset)
    t0 = time.perf_counter()
    net, rows, zeta = build_network(dataset, cfg.features, cfg.min_co_reviews, cfg.workers, return_features=True)
    save_network(net, work / NETWORK, work / USERS)
    edges, counts = hbar_histogram(rows, labels)
    write_histogram(edges, counts, work / HISTOGRAM)
    if cfg.dump_features:
        write_feature_dump(rows, work / FEATURES)
    _update_manifest(work, {**_config_entries(cfg), "network.zeta_applied": repr(zeta),
                            "network.edges": net.n_edges, "network.positive_edges": net.positive_edges.size})
    print(f"{net.n_users} users, {len(rows)} candidate pairs, {net.n_edges} edges "
          f"({net.positive_edges.size} positive) with zeta={zeta:.4f} in {time.perf_counter() - t0:.1f}s")
    return EXIT_OK


def cmd_train(cfg):
    work = Path(cfg.workdir)
    _require(work / NETWORK, "network")
    _require(work / USERS, "network")
    net = load_network(work / NETWORK, work / USERS)
    workers = cfg.workers
    corpus = generate_walks(net, cfg.walk, workers=workers)
    tcfg = cfg.train
    if tcfg.workers != workers:
        tcfg = replace(tcfg, workers=workers)
    init = init_embeddings(net.n_users, tcfg.dim, tcfg.seed)
    with open(work / LOSS_LOG, "w", encoding="utf-8") as fh:
        fh.write("epoch\tlr\ttotal\tdirect\tindirect\tregularization\tdeactivated\n")

        def record(entry, _state):
            fh.write(f"{entry.epoch}\t{entry.learning_rate:.6g}\t{entry.total!r}\t{entry.direct!r}\t"
                     f"{entry.indirect!r}\t{entry.regularization!r}\t{entry.deactivated}\n")

        state = train(net, corpus, tcfg, state=init, callback=record)
    users = list(net.users)
    save_embeddings(state.U, users, work / U_TEXT)
    save_embeddings(state.Phi, users, work / PHI_TEXT)
    if cfg.binary_embeddings:
        save_embeddings(state.U, users, work / U_BIN, binary=True)
        save_embeddings(state.Phi, users, work / PHI_BIN, binary=True)
    _update_manifest(work, {**_config_entries(cfg), "train.pairs": corpus.context_pairs.shape[0],
                            "train.mode": "deterministic" if workers == 1 else f"parallel({workers})"})
    last = state.history[-1].total if state.history else float("nan")
    print(f"trained {tcfg.epochs} epochs on {net.n_users} users, final loss {last:.6g}")
    return EXIT_OK


def _write_report(cfg, ranking, labels):
    work = Path(cfg.workdir)
    report = evaluate(ranking, labels, cfg.eval_ks)
    (work / REPORT_TEXT).write_text(report.to_text(), encoding="utf-8")
    (work / REPORT_KV).write_text(report.to_kv(), encoding="utf-8")
    print(report.to_text(), end="")
    return report


def cmd_score(cfg):
    work = Path(cfg.workdir)
    _require(work / U_TEXT, "train")
    users, U = load_embeddings(work / U_TEXT)
    ranking = rank_users(U, users, cfg.score_n)
    write_ranking(ranking, work / RANKING)
    _update_manifest(work, {"score.n": cfg.score_n, "score.n_effective": ranking.n})
    print(f"ranked {len(ranking)} users (n={ranking.n}) -> {work / RANKING}")
    labels = _load_labels(cfg)
    if labels is None:
        print("no labels configured; evaluation skipped")
        return EXIT_OK
    _write_report(cfg, ranking, labels)
    return EXIT_OK


def cmd_eval(cfg):
    work = Path(cfg.workdir)
    _require(work / RANKING, "score")
    labels = _load_labels(cfg)
    if labels is None:
        raise ConfigError("paths.labels is required for eval")
    _write_report(cfg, read_ranking(work / RANKING), labels)
    return EXIT_OK


def cmd_report(cfg):
    work = Path(cfg.workdir)
    _require(work / HISTOGRAM, "network")
    counts = read_histogram(work / HISTOGRAM)
    print("h_bar distribution (pairs per class)")
    for cls, bins in counts.items():
        total = sum(c for _, _, c in bins)
        high = sum(c for lo, _, c in bins if lo >= 0.8 - 1e-9)
        low = sum(c for _, hi, c in bins if hi <= 0.22 + 1e-9)
        print(f"  {cls:6s} pairs={total:8d}  h>=0.8: {high:7d}  h<=0.22: {low:7d}")
        peak = max((c for _, _, c in bins), default=0) or 1
        for lo, hi, c in bins:
            if c:
                print(f"    [{lo:.2f},{hi:.2f}) {c:7d} {'#' * max(1, round(40 * c / peak))}")
    if (work / REPORT_TEXT).exists():
        print("evaluation")
        print((work / REPORT_TEXT).read_text(encoding="utf-8"), end="")
    return EXIT_OK


STAGES = {"network": cmd_network, "train": cmd_train, "score": cmd_score, "eval": cmd_eval, "report": cmd_report}


def _stage_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="tuned settings for a reference dataset")
    p.add_argument("--dataset", help="shortcut for paths.dataset")
    p.add_argument("--labels", help="shortcut for paths.labels")
    p.add_argument("--workdir", help="shortcut for paths.workdir")
    p.add_argument("--seed", type=int, help="sets walk.seed and train.seed")
    p.add_argument("--workers", type=int, help="1 forces deterministic single-worker mode")
    return p


def make_parser():
    parser = argparse.ArgumentParser(prog="spamnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--spec", required=True, help="key = value campaign spec file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    _stage_parser(sub, "network", "build the signed network and h_bar histogram")
    _stage_parser(sub, "train", "learn embeddings from the network")
    _stage_parser(sub, "score", "rank users by spamicity (evaluates when labels are set)")
    _stage_parser(sub, "eval", "evaluate an existing ranking against labels")
    _stage_parser(sub, "report", "print the h_bar histogram and evaluation summary")
    return parser


def resolve_config(args):
    values = {}
    if args.preset:
        values.update(PRESETS[args.preset])
    if args.config:
        if not Path(args.config).exists():
            raise UsageError(f"config file {args.config!r} not found")
        values.update(read_config_file(args.config))
    values.update(parse_lines(args.set, "--set"))
    for flag, key in (("dataset", "paths.dataset"), ("labels", "paths.labels"), ("workdir", "paths.workdir"),
                      ("workers", "run.workers")):
        if getattr(args, flag) is not None:
            values[key] = str(getattr(args, flag))
    if args.seed is not None:
        values["walk.seed"] = values["train.seed"] = str(args.seed)
    return build_config(values)


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args)
        return STAGES[args.command](resolve_config(args))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"spamnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageOrderError as exc:
        print(f"spamnet: stage order: {exc}", file=sys.stderr)
        return EXIT_STAGE_ORDER
    except DivergenceError as exc:
        print(f"spamnet: training diverged at {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ConfigError, ValidationError, ReviewParseError, NotFoundError, DegenerateNetworkError,
            EmptyTableError, UndefinedMetricError, UndefinedScoreError) as exc:
        print(f"spamnet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
