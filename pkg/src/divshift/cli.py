"""Command-line interface: end-to-end runs over manifest-described ensembles.

Every subcommand writes deterministic report files: CSV cells carry floats
at 6 significant digits, the JSON variants carry full binary64 precision.
Row ordering is fixed, and fan-out across model pairs never reorders
results, so identical inputs produce byte-identical outputs at any worker
count. Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibration import CalibrationConfig, cace, ensemble_cace
from .core import (
    EnsembleManifest,
    NumericalError,
    PAIRING_ANCHOR,
    ValidationError,
    enumerate_pairs,
)
from .detect import ScoreKind, detection_suite
from .divergence import (
    ALL_NOTIONS,
    EpsilonPolicy,
    GRID_MODE_ANCHOR,
    GRID_MODE_ERROR,
    Notion,
    aggregate_disagreement,
    aggregate_error,
    binary_error_curve,
    simplex_grid,
)
from .estimate import EstimationConfig, Method, build_estimation_report, gate_by_r2
from .io import LoadedEnsemble, load_ensemble, load_manifest
from .linefit import LineFit, TransformKind, fit_transformed, polyfit3
from .synth import SynthConfig, generate_world, write_world

PROG = "divshift"


@dataclass
class RunConfig:
    """Common knobs shared by the manifest-driven subcommands."""

    manifest_path: str | None
    notions: tuple[Notion, ...]
    transform: TransformKind
    method: Method | None
    r2_gate: float
    out: Path
    formats: tuple[str, ...]
    force: bool
    workers: int


# ---------------------------------------------------------------------------
# Deterministic report writing.


def fmt6(value) -> str:
    return "%.6g" % float(value)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt6(value)
    return str(value)


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def _check_overwrite(path: Path, force: bool):
    if path.exists() and not force:
        raise ValidationError(f"{path} exists; pass --force to overwrite")


def write_table(cfg: RunConfig, stem: str, columns, rows) -> list[str]:
    """Write a report table to <out>/<stem>.csv and/or .json."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in cfg.formats:
        path = cfg.out / f"{stem}.csv"
        _check_overwrite(path, cfg.force)
        lines = [",".join(columns)]
        lines += [",".join(_cell(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
        written.append(str(path))
    if "json" in cfg.formats:
        path = cfg.out / f"{stem}.json"
        _check_overwrite(path, cfg.force)
        doc = [dict(zip(columns, [_jsonable(v) for v in row])) for row in rows]
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        written.append(str(path))
    return written


# ---------------------------------------------------------------------------
# Shared computation steps.


def disagreement_table(
    ensemble: LoadedEnsemble, pairs, splits, notions, eps: EpsilonPolicy, workers: int
):
    """{(pair, split, notion) -> mean disagreement}; parallel across pairs."""

    def one_pair(pair):
        a, b = pair
        out = []
        for split in splits:
            pa = ensemble.predictions[(a, split)]
            pb = ensemble.predictions[(b, split)]
            for notion in notions:
                out.append((split, notion, aggregate_disagreement(notion, pa, pb, eps).value))
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_pair = list(pool.map(one_pair, pairs))
    else:
        per_pair = [one_pair(p) for p in pairs]
    table = {}
    for pair, results in zip(pairs, per_pair):
        for split, notion, value in results:
            table[(pair, split, notion)] = value
    return table


def error_table(ensemble: LoadedEnsemble, splits, notions, eps: EpsilonPolicy):
    """{(model, split, notion) -> mean error} for splits that have labels."""
    table = {}
    for split in splits:
        labels = ensemble.labels_for(split)
        if labels is None:
            continue
        for model_id in ensemble.manifest.model_ids:
            pred = ensemble.predictions[(model_id, split)]
            for notion in notions:
                table[(model_id, split, notion)] = aggregate_error(notion, pred, labels, eps)
    return table


def agreement_fits(dis_table, pairs, id_split, ood_splits, notions, transform):
    """ID-vs-OOD pairwise-disagreement line per (ood split, notion)."""
    fits = {}
    for split in ood_splits:
        per_notion = {}
        for notion in notions:
            xs = [dis_table[(p, id_split, notion)] for p in pairs]
            ys = [dis_table[(p, split, notion)] for p in pairs]
            per_notion[notion] = fit_transformed(xs, ys, notion, transform)
        fits[split] = per_notion
    return fits


def accuracy_fits(err_table, model_ids, id_split, ood_splits, notions, transform):
    """ID-vs-OOD per-model-error line per (ood split, notion), where labeled."""
    fits = {}
    for split in ood_splits:
        if not any((m, split, n) in err_table for m in model_ids for n in notions):
            continue
        per_notion = {}
        for notion in notions:
            xs = [err_table[(m, id_split, notion)] for m in model_ids]
            ys = [err_table[(m, split, notion)] for m in model_ids]
            per_notion[notion] = fit_transformed(xs, ys, notion, transform)
        fits[split] = per_notion
    return fits


def _load(cfg: RunConfig):
    if not cfg.manifest_path:
        raise ValidationError("this command needs --manifest")
    manifest = load_manifest(cfg.manifest_path)
    return load_ensemble(manifest)


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_disagree(cfg: RunConfig, eps: EpsilonPolicy) -> int:
    ensemble = _load(cfg)
    manifest = ensemble.manifest
    pairs = enumerate_pairs(manifest)
    table = disagreement_table(ensemble, pairs, manifest.splits, cfg.notions, eps, cfg.workers)
    rows = [
        (split, a, b, notion.value, table[((a, b), split, notion)])
        for split in manifest.splits
        for (a, b) in pairs
        for notion in cfg.notions
    ]
    for path in write_table(cfg, "disagree", ("split", "model_a", "model_b", "notion", "value"), rows):
        print(path)
    return 0


def cmd_error(cfg: RunConfig, eps: EpsilonPolicy) -> int:
    ensemble = _load(cfg)
    manifest = ensemble.manifest
    labeled = [s for s in manifest.splits if ensemble.labels_for(s) is not None]
    if not labeled:
        raise ValidationError("no split has labels; the error table needs at least one")
    table = error_table(ensemble, labeled, cfg.notions, eps)
    rows = [
        (split, model, notion.value, table[(model, split, notion)])
        for split in labeled
        for model in manifest.model_ids
        for notion in cfg.notions
    ]
    for path in write_table(cfg, "error", ("split", "model", "notion", "value"), rows):
        print(path)
    return 0


def _fit_row(kind, split, notion, fit: LineFit):
    return (
        kind,
        split,
        notion.value,
        fit.transform.value,
        fit.transform_downgraded,
        fit.slope,
        fit.intercept,
        fit.r2,
        fit.n_points,
    )


_FIT_COLUMNS = (
    "line",
    "split",
    "notion",
    "transform",
    "downgraded",
    "slope",
    "intercept",
    "r2",
    "n_points",
)


def cmd_line(cfg: RunConfig, eps: EpsilonPolicy) -> int:
    ensemble = _load(cfg)
    manifest = ensemble.manifest
    pairs = enumerate_pairs(manifest)
    dis = disagreement_table(ensemble, pairs, manifest.splits, cfg.notions, eps, cfg.workers)
    agree = agreement_fits(dis, pairs, manifest.id_split, manifest.ood_splits, cfg.notions, cfg.transform)
    errs = error_table(ensemble, manifest.splits, cfg.notions, eps)
    acc = {}
    if any((m, manifest.id_split, n) in errs for m in manifest.model_ids for n in cfg.notions):
        acc = accuracy_fits(
            errs, manifest.model_ids, manifest.id_split, manifest.ood_splits, cfg.notions, cfg.transform
        )
    rows = []
    for split in manifest.ood_splits:
        for notion in cfg.notions:
            rows.append(_fit_row("agreement", split, notion, agree[split][notion]))
    for split in manifest.ood_splits:
        if split in acc:
            for notion in cfg.notions:
                rows.append(_fit_row("accuracy", split, notion, acc[split][notion]))
    for path in write_table(cfg, "line", _FIT_COLUMNS, rows):
        print(path)
    return 0


def _default_method(manifest: EnsembleManifest) -> Method:
    # The anchored pairing prefers plain line extrapolation; pair-constrained
    # least squares is the default when all pairs are observed.
    if manifest.pairing.mode == PAIRING_ANCHOR:
        return Method.ALINE_S
    return Method.ALINE_D


def cmd_estimate(cfg: RunConfig, eps: EpsilonPolicy, table1: bool) -> int:
    ensemble = _load(cfg)
    manifest = ensemble.manifest
    pairs = enumerate_pairs(manifest)
    if ensemble.labels_for(manifest.id_split) is None:
        raise ValidationError("estimation needs labels for the ID split")
    if not manifest.ood_splits:
        raise ValidationError("estimation needs at least one OOD split")
    method = cfg.method or _default_method(manifest)
    dis = disagreement_table(ensemble, pairs, manifest.splits, cfg.notions, eps, cfg.workers)
    agree = agreement_fits(dis, pairs, manifest.id_split, manifest.ood_splits, cfg.notions, cfg.transform)
    errs = error_table(ensemble, manifest.splits, cfg.notions, eps)
    admitted = set(gate_by_r2(agree, cfg.r2_gate, cfg.notions))

    detail_rows = []
    summary_rows = []
    reports = {}
    for split in manifest.ood_splits:
        ood_labels = ensemble.labels_for(split)
        for notion in cfg.notions:
            fit = agree[split][notion]
            # The admission gate is applied via gate_by_r2 above; the config
            # here only feeds the estimator (notably the anchor weight).
            config = EstimationConfig(notion=notion, transform=fit.transform, method=method)
            id_errors = np.array(
                [errs[(m, manifest.id_split, notion)] for m in manifest.model_ids]
            )
            est_ids = manifest.estimated_model_ids
            truths = None
            if ood_labels is not None:
                truths = {m: errs[(m, split, notion)] for m in est_ids}
            report = build_estimation_report(
                fit,
                manifest.model_ids,
                id_errors,
                pairs,
                [dis[(p, split, notion)] for p in pairs],
                config,
                split_id=split,
                estimated_ids=est_ids,
                true_errors=truths,
                gated=split in admitted,
            )
            reports[(split, notion)] = report
            for row in report.rows:
                detail_rows.append(
                    (
                        split,
                        notion.value,
                        method.value,
                        fit.transform.value,
                        row.model_id,
                        row.estimate,
                        row.true_error,
                        row.clamped,
                    )
                )
            summary_rows.append(
                (
                    split,
                    notion.value,
                    method.value,
                    fit.transform.value,
                    fit.slope,
                    fit.intercept,
                    fit.r2,
                    report.mape,
                    report.gated,
                )
            )
    for path in write_table(
        cfg,
        "estimate",
        ("split", "notion", "method", "transform", "model", "estimate", "true_error", "clamped"),
        detail_rows,
    ):
        print(path)
    for path in write_table(
        cfg,
        "estimate_summary",
        ("split", "notion", "method", "transform", "slope", "intercept", "r2", "mape", "admitted"),
        summary_rows,
    ):
        print(path)
    if table1:
        table_rows = [
            (split,)
            + tuple(reports[(split, n)].mape for n in cfg.notions)
            + (split in admitted,)
            for split in manifest.ood_splits
        ]
        columns = ("split",) + tuple(n.value for n in cfg.notions) + ("admitted",)
        for path in write_table(cfg, "table1", columns, table_rows):
            print(path)
        _print_table1(cfg, method, reports, admitted, manifest.ood_splits)
    return 0


def _print_table1(cfg: RunConfig, method: Method, reports, admitted, ood_splits):
    print(f"MAPE (%) for OOD error estimation, method={method.value}")
    header = ["split"] + [n.value for n in cfg.notions] + ["admitted"]
    print("  ".join(f"{h:>10}" for h in header))
    for split in ood_splits:
        cells = [f"{split:>10}"]
        for notion in cfg.notions:
            v = reports[(split, notion)].mape
            cells.append(f"{v:>10.2f}" if v is not None else f"{'-':>10}")
        cells.append(f"{'yes' if split in admitted else 'no':>10}")
        print("  ".join(cells))


def cmd_detect(cfg: RunConfig, eps: EpsilonPolicy, kinds, pooled: bool, table2: bool) -> int:
    ensemble = _load(cfg)
    manifest = ensemble.manifest
    if not manifest.ood_splits:
        raise ValidationError("detection needs at least one OOD split")
    pairs = enumerate_pairs(manifest)
    overrides = manifest.options.get("severity") if manifest.options else None
    results, split_means, severity_means = detection_suite(
        ensemble.predictions,
        manifest.id_split,
        manifest.ood_splits,
        kinds,
        manifest.model_ids,
        pairs,
        pooled=pooled,
        severity_overrides=overrides,
        eps_policy=eps,
        workers=cfg.workers,
    )
    rows = [
        (r.score_kind.name, r.ood_split, r.subject, r.auc, r.n_id, r.n_ood) for r in results
    ]
    for path in write_table(
        cfg, "detect", ("kind", "ood_split", "subject", "auc", "n_id", "n_ood"), rows
    ):
        print(path)
    split_rows = [
        (kind.name, split, manifest.severity_of(split), split_means[(kind.name, split)])
        for kind in kinds
        for split in manifest.ood_splits
    ]
    for path in write_table(
        cfg, "detect_splits", ("kind", "ood_split", "severity", "mean_auc"), split_rows
    ):
        print(path)
    severities = sorted({sev for (_, sev) in severity_means})
    sev_rows = [
        (kind.name, sev, severity_means[(kind.name, sev)])
        for kind in kinds
        for sev in severities
        if (kind.name, sev) in severity_means
    ]
    for path in write_table(cfg, "detect_severity", ("kind", "severity", "mean_auc"), sev_rows):
        print(path)
    if table2:
        table_rows = [
            (sev,) + tuple(severity_means.get((kind.name, sev)) for kind in kinds)
            for sev in severities
        ]
        columns = ("severity",) + tuple(k.name for k in kinds)
        for path in write_table(cfg, "table2", columns, table_rows):
            print(path)
        print("Mean ROC-AUC (x100) per severity")
        header = ["severity"] + [k.name for k in kinds]
        print("  ".join(f"{h:>12}" for h in header))
        for sev in severities:
            cells = [f"{sev:>12}"]
            for kind in kinds:
                v = severity_means.get((kind.name, sev))
                cells.append(f"{100.0 * v:>12.2f}" if v is not None else f"{'-':>12}")
            print("  ".join(cells))
    return 0


def cmd_calibrate(cfg: RunConfig, eps: EpsilonPolicy, bins: int) -> int:
    ensemble = _load(cfg)
    manifest = ensemble.manifest
    cal = CalibrationConfig(n_bins=bins)
    labeled_ood = [s for s in manifest.ood_splits if ensemble.labels_for(s) is not None]
    if not labeled_ood:
        raise ValidationError("calibration analysis needs OOD splits with labels")
    if ensemble.labels_for(manifest.id_split) is None:
        raise ValidationError("calibration analysis needs labels for the ID split")
    pairs = enumerate_pairs(manifest)
    dis = disagreement_table(ensemble, pairs, manifest.splits, cfg.notions, eps, cfg.workers)
    agree = agreement_fits(dis, pairs, manifest.id_split, labeled_ood, cfg.notions, cfg.transform)
    errs = error_table(ensemble, manifest.splits, cfg.notions, eps)
    acc = accuracy_fits(
        errs, manifest.model_ids, manifest.id_split, labeled_ood, cfg.notions, cfg.transform
    )

    model_rows = []
    split_rows = []
    cace_of = {}
    for split in labeled_ood:
        labels = ensemble.labels_for(split)
        per_model = []
        for model_id in manifest.model_ids:
            value = cace(ensemble.predictions[(model_id, split)], labels, cal)
            per_model.append(value)
            model_rows.append((split, model_id, value))
        mean = ensemble_cace(
            [ensemble.predictions[(m, split)] for m in manifest.model_ids], labels, cal
        )
        cace_of[split] = mean
        split_rows.append((split, mean, len(per_model)))
    for path in write_table(cfg, "cace_models", ("split", "model", "cace"), model_rows):
        print(path)
    for path in write_table(cfg, "cace_splits", ("split", "ensemble_cace", "n_models"), split_rows):
        print(path)

    pair_rows = []
    for split in labeled_ood:
        for notion in cfg.notions:
            pair_rows.append(("agreement", split, notion.value, cace_of[split], agree[split][notion].r2))
            pair_rows.append(("accuracy", split, notion.value, cace_of[split], acc[split][notion].r2))
    for path in write_table(cfg, "cace_vs_r2", ("line", "split", "notion", "cace", "r2"), pair_rows):
        print(path)

    poly_rows = []
    if len(labeled_ood) >= 4:
        for line_kind, fits in (("agreement", agree), ("accuracy", acc)):
            for notion in cfg.notions:
                xs = [cace_of[s] for s in labeled_ood]
                ys = [fits[s][notion].r2 for s in labeled_ood]
                coeffs = polyfit3(xs, ys)
                poly_rows.append(
                    (line_kind, notion.value, *[float(c) for c in coeffs], len(labeled_ood))
                )
    for path in write_table(
        cfg, "cace_trend", ("line", "notion", "c0", "c1", "c2", "c3", "n_points"), poly_rows
    ):
        print(path)
    if len(labeled_ood) < 4:
        print("note: cubic trend skipped, needs >= 4 labeled OOD splits")
    return 0


def cmd_synth(cfg: RunConfig, args) -> int:
    config = SynthConfig(
        n_models=args.models,
        n_samples=args.samples,
        n_classes=args.classes,
        skill=tuple(args.skill),
        temperature=tuple(args.temperature),
        severities=tuple(args.severities),
        seed=args.seed,
    )
    world = generate_world(config)
    manifest_path = write_world(world, cfg.out, force=cfg.force)
    print(manifest_path)
    return 0


def cmd_grid(cfg: RunConfig, eps: EpsilonPolicy, args) -> int:
    for notion in cfg.notions:
        if args.figure == 1:
            mode = GRID_MODE_ANCHOR if args.mode == "anchor" else GRID_MODE_ERROR
            grid = simplex_grid(notion, args.resolution, mode=mode, label=args.label, eps_policy=eps)
            stem = f"fig1_{notion.value}_{args.mode}"
            columns = ("p1", "p2", "value")
        else:
            grid = binary_error_curve(notion, args.resolution, eps_policy=eps)
            stem = f"fig2_{notion.value}"
            columns = ("t", "value")
        rows = [tuple(float(v) for v in row) for row in grid]
        for path in write_table(cfg, stem, columns, rows):
            print(path)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing.


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # Usage problems are validation errors (exit 1), not argparse's 2.
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _formatter(prog):
    return argparse.HelpFormatter(prog, width=96)


def _add_common(sub, manifest_required=True):
    if manifest_required:
        sub.add_argument("--manifest", required=True, help="path to the ensemble manifest JSON")
    sub.add_argument(
        "--notion",
        default="top1,hd,jsd,kld",
        help="comma-separated subset of top1,hd,jsd,kld (default: all)",
    )
    sub.add_argument(
        "--transform",
        choices=["identity", "probit"],
        default="identity",
        help="axis transform for line fitting (probit degrades to identity for kld)",
    )
    sub.add_argument("--r2-gate", type=float, default=0.95, help="R^2 admission gate (default 0.95)")
    sub.add_argument("--out", default="divshift_out", help="output directory (default divshift_out)")
    sub.add_argument(
        "--format", default="csv,json", help="report formats, subset of csv,json (default both)"
    )
    sub.add_argument("--force", action="store_true", help="overwrite existing report files")
    sub.add_argument("--workers", type=int, default=1, help="worker threads across model pairs")
    sub.add_argument("--eps", type=float, default=1e-12, help="probability floor for kld (default 1e-12)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog=PROG,
        description="Distribution-level classifier disagreement for shift diagnostics.",
        formatter_class=_formatter,
    )
    subs = parser.add_subparsers(dest="command", metavar="command")

    p = subs.add_parser(
        "disagree",
        help="per-pair, per-split, per-notion mean disagreement table",
        formatter_class=_formatter,
    )
    _add_common(p)

    p = subs.add_parser(
        "error",
        help="per-model, per-split, per-notion mean error table (labeled splits)",
        formatter_class=_formatter,
    )
    _add_common(p)

    p = subs.add_parser(
        "line",
        help="ID-vs-OOD agreement and accuracy line fits per notion and split",
        formatter_class=_formatter,
    )
    _add_common(p)

    p = subs.add_parser(
        "estimate",
        help="unlabeled OOD error estimation from the fitted disagreement lines",
        formatter_class=_formatter,
    )
    _add_common(p)
    p.add_argument(
        "--method",
        choices=["aline-s", "aline-d"],
        default=None,
        help="estimator (default: aline-d for all-pairs manifests, aline-s for anchor)",
    )
    p.add_argument("--table1", action="store_true", help="print the MAPE summary table")

    p = subs.add_parser(
        "detect",
        help="ROC-AUC of OOD detection scores against the ID split",
        formatter_class=_formatter,
    )
    _add_common(p)
    p.add_argument(
        "--kinds",
        default="neg-msp,neg-maxlogit,pair-top1,pair-hd,pair-jsd,pair-kld",
        help="comma-separated score kinds (neg-msp, neg-maxlogit, pair-<notion>)",
    )
    p.add_argument(
        "--pooled",
        action="store_true",
        help="average per-sample scores over subjects before the AUC instead of averaging per-subject AUCs",
    )
    p.add_argument("--table2", action="store_true", help="print the severity-by-kind AUC table")

    p = subs.add_parser(
        "calibrate",
        help="CACE per model and split, CACE-vs-R^2 pairs, and cubic trend fits",
        formatter_class=_formatter,
    )
    _add_common(p)
    p.add_argument("--bins", type=int, default=15, help="confidence bins (default 15)")

    p = subs.add_parser(
        "synth",
        help="generate a reproducible synthetic ensemble plus manifest",
        formatter_class=_formatter,
    )
    _add_common(p, manifest_required=False)
    p.add_argument("--seed", type=int, default=123, help="generator seed (default 123)")
    p.add_argument("--models", type=int, default=20, help="number of models (default 20)")
    p.add_argument("--samples", type=int, default=2000, help="samples per split (default 2000)")
    p.add_argument("--classes", type=int, default=10, help="number of classes (default 10)")
    p.add_argument(
        "--skill", type=float, nargs=2, default=(7.0, 13.0), metavar=("LO", "HI"),
        help="skill range (default 7 13)",
    )
    p.add_argument(
        "--temperature", type=float, nargs=2, default=(0.8, 1.2), metavar=("LO", "HI"),
        help="temperature range (default 0.8 1.2)",
    )
    p.add_argument(
        "--severities",
        type=float,
        nargs="+",
        default=(0.25, 0.4, 0.8, 1.3, 1.9),
        help="severity per split; the first split is the ID split",
    )

    p = subs.add_parser(
        "grid",
        help="simplex disagreement/error grids (figure 1) or binary error curves (figure 2)",
        formatter_class=_formatter,
    )
    _add_common(p, manifest_required=False)
    p.add_argument("--figure", type=int, choices=[1, 2], required=True, help="which grid to emit")
    p.add_argument("--resolution", type=int, default=200, help="grid resolution (default 200)")
    p.add_argument(
        "--mode",
        choices=["anchor", "error"],
        default="anchor",
        help="figure 1 mode: disagreement against the fixed anchor, or error for --label",
    )
    p.add_argument("--label", type=int, default=0, help="class index for error mode (default 0)")
    return parser


def _parse_notions(text: str) -> tuple[Notion, ...]:
    names = [t for t in (s.strip() for s in text.split(",")) if t]
    if not names:
        raise ValidationError("empty --notion list")
    if names == ["all"]:
        return ALL_NOTIONS
    notions = tuple(Notion.from_name(n) for n in names)
    if len(set(notions)) != len(notions):
        raise ValidationError(f"duplicate notions in {text!r}")
    return notions


def _parse_formats(text: str) -> tuple[str, ...]:
    formats = tuple(t for t in (s.strip() for s in text.split(",")) if t)
    for f in formats:
        if f not in ("csv", "json"):
            raise ValidationError(f"unknown format {f!r}; expected csv and/or json")
    if not formats:
        raise ValidationError("empty --format list")
    return formats


def _run_config(args) -> RunConfig:
    if getattr(args, "workers", 1) < 1:
        raise ValidationError("--workers must be >= 1")
    if not 0.0 <= args.r2_gate <= 1.0:
        raise ValidationError(f"--r2-gate must be in [0, 1], got {args.r2_gate}")
    return RunConfig(
        manifest_path=getattr(args, "manifest", None),
        notions=_parse_notions(args.notion),
        transform=TransformKind.from_name(args.transform),
        method=Method.from_name(args.method) if getattr(args, "method", None) else None,
        r2_gate=args.r2_gate,
        out=Path(args.out),
        formats=_parse_formats(args.format),
        force=args.force,
        workers=args.workers,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            raise ValidationError("a subcommand is required")
        cfg = _run_config(args)
        eps = EpsilonPolicy(eps=args.eps)
        if args.command == "disagree":
            return cmd_disagree(cfg, eps)
        if args.command == "error":
            return cmd_error(cfg, eps)
        if args.command == "line":
            return cmd_line(cfg, eps)
        if args.command == "estimate":
            return cmd_estimate(cfg, eps, args.table1)
        if args.command == "detect":
            kinds = tuple(ScoreKind.parse(t) for t in args.kinds.split(",") if t.strip())
            if not kinds:
                raise ValidationError("empty --kinds list")
            return cmd_detect(cfg, eps, kinds, args.pooled, args.table2)
        if args.command == "calibrate":
            return cmd_calibrate(cfg, eps, args.bins)
        if args.command == "synth":
            return cmd_synth(cfg, args)
        if args.command == "grid":
            return cmd_grid(cfg, eps, args)
        raise ValidationError(f"unknown subcommand {args.command!r}")
    except ValidationError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"{PROG}: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
