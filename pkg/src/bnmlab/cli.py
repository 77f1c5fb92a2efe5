"""Command-line front end.

Subcommands:

* check    run the numerical property suites; exit 0 iff all pass
* toy      print the two-sample two-class corner table and the
           equal-entropy diversity pair, asserting the expected orderings
* train    run one training configuration, write run.csv and summary.txt
* compare  run several methods over paired seeds, write compare.csv and
           per-cell run CSVs

Exit codes: 0 success, 1 assertion or validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import checks
from .config import ConfigError, RunSetup, load_compare_setup, load_train_setup, resolve_seed
from .linalg import entropy, frobenius_norm, numeric_rank, thin_svd
from .model import Classifier, forward, init_classifier, with_class_prototypes
from .objectives import equal_entropy_diversity_demo
from .rng import STREAM_INIT, stream
from .scenarios import (
    DEFAULT_PROTOTYPE_K,
    Dataset,
    PrototypeInit,
    ScenarioKind,
    eligible_indices,
    generate,
    known_class_means,
    prototype_init,
)
from .trainer import (
    RunRecord,
    compare,
    compare_csv_lines,
    compare_table_text,
    format_float,
    records_csv_lines,
    train,
)

QUIET, NORMAL, VERBOSE = 0, 1, 2


def _say(verbosity: int, *parts) -> None:
    if verbosity >= NORMAL:
        print(*parts)


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_check(seed: int, verbosity: int) -> int:
    results = checks.run_all_checks(
        seed, progress=lambda r: _say(verbosity, f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}")
    )
    failed = [r for r in results if not r.ok]
    _say(verbosity, f"{len(results) - len(failed)}/{len(results)} suites passed (seed {seed})")
    if failed:
        print(f"FAILED: {', '.join(r.name for r in failed)}", file=sys.stderr)
        return 1
    return 0


def _toy_row(label: str, m: np.ndarray) -> tuple[str, float, float, float]:
    return label, entropy(m), frobenius_norm(m), math.fsum(thin_svd(m).sigma)


def cmd_toy(verbosity: int) -> int:
    corners = [
        ("[[1,0],[1,0]]", np.array([[1.0, 0.0], [1.0, 0.0]]), False),
        ("[[0,1],[1,0]]", np.array([[0.0, 1.0], [1.0, 0.0]]), True),
        ("[[1,0],[0,1]]", np.array([[1.0, 0.0], [0.0, 1.0]]), True),
        ("[[0,1],[0,1]]", np.array([[0.0, 1.0], [0.0, 1.0]]), False),
    ]
    rows = []
    ok = True
    for label, m, is_perm in corners:
        _, h, f, nuc = _toy_row(label, m)
        rows.append((label, h, f, nuc))
        ok &= abs(h) <= 1e-10 and abs(f - math.sqrt(2.0)) <= 1e-10
        target = 2.0 if is_perm else math.sqrt(2.0)
        ok &= abs(nuc - target) <= 1e-10

    same, diverse = equal_entropy_diversity_demo()
    for label, m in (("uniform-rows demo", same), ("diverse-rows demo", diverse)):
        rows.append(_toy_row(label, m))
    nuc_same = math.fsum(thin_svd(same).sigma)
    nuc_diverse = math.fsum(thin_svd(diverse).sigma)
    ok &= entropy(same) == entropy(diverse)
    ok &= frobenius_norm(same) == frobenius_norm(diverse)
    ok &= nuc_diverse > nuc_same
    # Cross-check the printed nuclear norms against the closed-form Gram
    # eigenvalue oracle (both demo matrices have two columns).
    for m, nuc in ((same, nuc_same), (diverse, nuc_diverse)):
        oracle = math.fsum(checks.oracle_singular_values(m))
        ok &= abs(nuc - oracle) <= 1e-10

    if verbosity >= NORMAL:
        print(f"{'matrix':<20} {'entropy':>12} {'fnorm':>12} {'nuclear':>12}")
        for label, h, f, nuc in rows:
            print(f"{label:<20} {h:>12.9f} {f:>12.9f} {nuc:>12.9f}")
        print(
            "only the two permutation corners reach nuclear norm 2; "
            "the diverse demo matrix beats its rank-one twin "
            f"({nuc_diverse:.9f} > {nuc_same:.9f})"
        )
    if not ok:
        print("toy table assertions failed", file=sys.stderr)
        return 1
    return 0


def _build_run(setup: RunSetup) -> tuple[Dataset, Classifier, PrototypeInit | None]:
    d = generate(setup.scenario)
    init_rng = stream(setup.train.seed, STREAM_INIT)
    c0 = init_classifier(2, setup.scenario.n_classes, init_rng, hidden=setup.hidden)
    proto = None
    if setup.scenario.kind is ScenarioKind.OPEN_SET:
        # Known heads start from labelled class means, unknown heads from
        # held-out prototypes, so the initial model is a coherent
        # nearest-mean classifier over all categories.
        proto = prototype_init(d, DEFAULT_PROTOTYPE_K)
        c0 = with_class_prototypes(c0, {**known_class_means(d), **proto.means})
    return d, c0, proto


def _summary_lines(setup: RunSetup, d: Dataset, c: Classifier, final: RunRecord,
                   proto: PrototypeInit | None) -> list[str]:
    eval_idx = eligible_indices(d, "unlabeled", proto.flagged if proto else ())
    probs = forward(c, d.unlabeled_x[eval_idx]).probs
    pred_rank = numeric_rank(thin_svd(probs), setup.train.rank_tol)
    lines = [
        f"scenario = {setup.scenario.kind.value}",
        f"objective = {setup.train.objective.value}",
        f"lambda = {format_float(setup.train.lam)}",
        f"steps = {final.step}",
        f"loss_cls = {format_float(final.loss_cls)}",
        f"loss_obj = {format_float(final.loss_obj)}",
        f"acc = {format_float(final.acc_unlabeled)}",
    ]
    lines += [
        f"recall_{j} = {format_float(r)}" for j, r in enumerate(final.per_class_recall)
    ]
    lines += [
        f"div_ratio = {format_float(final.diversity_ratio)}",
        f"minority_ratio = {format_float(final.minority_ratio)}",
        f"unknown_ratio = {format_float(final.unknown_ratio)}",
        f"pred_rank = {pred_rank}",
    ]
    return lines


def cmd_train(config_path: str, out_dir: str, seed_flag: int | None, verbosity: int) -> int:
    try:
        setup = load_train_setup(config_path, seed_flag)
        d, c0, proto = _build_run(setup)
        final_c, records = train(c0, d, setup.train, proto=proto)
    except (ConfigError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not records:
        print("error: no evaluation records (steps < eval_every?)", file=sys.stderr)
        return 1
    os.makedirs(out_dir, exist_ok=True)
    _write_lines(
        os.path.join(out_dir, "run.csv"),
        records_csv_lines(records, setup.scenario.n_classes),
    )
    _write_lines(
        os.path.join(out_dir, "summary.txt"),
        _summary_lines(setup, d, final_c, records[-1], proto),
    )
    _say(verbosity, f"wrote {out_dir}/run.csv and {out_dir}/summary.txt")
    _say(verbosity, f"final acc {format_float(records[-1].acc_unlabeled)}")
    return 0


def cmd_compare(config_path: str, out_dir: str, seed_flag: int | None,
                seeds_flag: int | None, verbosity: int) -> int:
    try:
        setup = load_compare_setup(config_path, seed_flag, seeds_flag)
        d, c0, proto = _build_run(setup)
    except (ConfigError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    labels = [label for label, _ in setup.methods]
    configs = [cfg for _, cfg in setup.methods]
    summaries = compare(configs, d, c0, n_seeds=setup.n_seeds, proto=proto, labels=labels)

    os.makedirs(out_dir, exist_ok=True)
    _write_lines(os.path.join(out_dir, "compare.csv"), compare_csv_lines(summaries))
    for s in summaries:
        for i, cell in enumerate(s.cell_records):
            if cell is None:
                continue
            _write_lines(
                os.path.join(out_dir, f"{s.label}_seed{i}.csv"),
                records_csv_lines(list(cell), setup.scenario.n_classes),
            )
    if verbosity >= NORMAL:
        print(compare_table_text(summaries))
        for s in summaries:
            for err in s.errors:
                print(f"note: {s.label} {err}")
    _say(verbosity, f"wrote {out_dir}/compare.csv")
    if any(s.n_failed == len(s.finals) for s in summaries):
        print("error: at least one method failed on every seed", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnmlab",
        description="Batch output-matrix objectives: self-checks, toy tables, training runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed-override", type=int, default=None,
                       help="override every seed (precedence: flag > config > env > 1)")
        p.add_argument("-q", "--quiet", action="store_true", help="suppress normal output")
        p.add_argument("-v", "--verbose", action="store_true", help="extra progress output")

    common(sub.add_parser("check", help="run the numerical property suites"))
    common(sub.add_parser("toy", help="print the two-class corner table"))
    p_train = sub.add_parser("train", help="run one training configuration")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    common(p_train)
    p_cmp = sub.add_parser("compare", help="compare methods over paired seeds")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--seeds", type=int, default=None, help="number of paired seeds")
    common(p_cmp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    verbosity = QUIET if args.quiet else (VERBOSE if args.verbose else NORMAL)
    if args.command == "check":
        try:
            seed = resolve_seed(args.seed_override, None)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return cmd_check(seed, verbosity)
    if args.command == "toy":
        return cmd_toy(verbosity)
    if args.command == "train":
        return cmd_train(args.config, args.out, args.seed_override, verbosity)
    return cmd_compare(args.config, args.out, args.seed_override, args.seeds, verbosity)


if __name__ == "__main__":
    raise SystemExit(main())
