"""Command-line front end: corpus -> models -> imbalance / rankings.

Archives and model artifacts are plain directories of the documented
text formats plus a manifest, so every intermediate stays inspectable.
Every command is a pure function of its inputs, flags, and seed; reruns
produce identical outputs (manifests stamp SOURCE_DATE_EPOCH when set,
wall-clock time otherwise).

Subcommands: ingest, model, imbalance, rank, synth, report.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .corpus import (
    CitationNetwork,
    ConferenceRank,
    GenderCategory,
    IngestError,
    ParseError,
    load_network,
    write_citations,
    write_papers,
)
from .imbalance import (
    PaperFilter,
    imbalance_report,
    stratified_imbalance,
    write_report_csv,
    write_report_json,
)
from .ranking import (
    DEFAULT_ALPHA,
    DEFAULT_EPS,
    DEFAULT_T_MAX,
    citation_scores,
    pagerank_observed,
    pagerank_reference,
    share_curve,
    write_ranking_csv,
    write_share_csv,
)
from .refmodels import (
    DEFAULT_COUNT_TOL,
    ExpectedCitations,
    ModelError,
    StructuralReport,
    compute_model,
    structural_report,
)
from .synth import GenerationError, generate_network, load_config

log = logging.getLogger("citegap")

OUTPUT_DIR_ENV = "CITEGAP_OUTPUT_DIR"

PAPERS_FILE = "papers.tsv"
CITATIONS_FILE = "citations.tsv"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.json"
CBAR_FILE = "c_bar.tsv"
MODEL_META_FILE = "model.json"
GROUPS_FILE = "groups.tsv"


class CliError(Exception):
    """Fatal command error; the message goes to stderr, exit code 2."""


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.isoformat()


def _write_manifest(out_dir: Path, argv: list[str], inputs: dict[str, Path],
                    seed: int | None, **extra: object) -> None:
    manifest = {
        "command": argv,
        "inputs": {name: {"path": str(p), "sha256": _sha256(p)}
                   for name, p in sorted(inputs.items())},
        "seed": seed,
        "version": __version__,
        "timestamp": _timestamp(),
    }
    manifest.update(extra)
    with open(out_dir / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args: argparse.Namespace, out: str) -> Path:
    base = Path(args.output_dir)
    path = Path(out)
    if not path.is_absolute():
        path = base / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_archive(path: str | Path) -> CitationNetwork:
    archive = Path(path)
    papers = archive / PAPERS_FILE
    citations = archive / CITATIONS_FILE
    for p in (papers, citations):
        if not p.is_file():
            raise CliError(f"archive {archive} is missing {p.name}")
    return load_network(papers, citations)


def _network_summary(net: CitationNetwork) -> dict[str, object]:
    by_gender = {g.value: 0 for g in GenderCategory}
    by_rank = {r.value: 0 for r in ConferenceRank}
    for p in net.papers:
        by_gender[p.gender.value] += 1
        by_rank[p.rank.value] += 1
    return {
        "papers": net.n,
        "citations": net.m,
        "by_gender": by_gender,
        "by_rank": by_rank,
    }


def _write_archive(net: CitationNetwork, out: Path) -> dict[str, object]:
    write_papers(net.papers, out / PAPERS_FILE)
    write_citations(net, out / CITATIONS_FILE)
    summary = _network_summary(net)
    with open(out / SUMMARY_FILE, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def cmd_ingest(args: argparse.Namespace, argv: list[str]) -> int:
    papers_path, citations_path = Path(args.papers), Path(args.citations)
    net = load_network(papers_path, citations_path)
    if net.m == 0:
        raise CliError("empty network: no citations survived filtering")
    out = _out_dir(args, args.out)
    summary = _write_archive(net, out)
    _write_manifest(out, argv,
                    {"papers": papers_path, "citations": citations_path},
                    args.seed)
    print(f"papers: {summary['papers']}")
    print(f"citations: {summary['citations']}")
    for g, count in summary["by_gender"].items():
        print(f"gender {g}: {count}")
    return 0


def _model_from_args(net: CitationNetwork, model: str, attrs: tuple[str, ...],
                     exact: bool, count_tol: float) -> ExpectedCitations:
    return compute_model(net, model, attrs, count_tol=count_tol, exact=exact)


def _parse_attrs(text: str | None) -> tuple[str, ...]:
    if text is None:
        return ("rank", "country", "topic")
    return tuple(a.strip() for a in text.split(",") if a.strip())


def _write_structural(report: StructuralReport, out: Path) -> None:
    with open(out / "report_degree_hist.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["out_degree", "papers"])
        for k, c in sorted(report.out_degree_hist.items()):
            writer.writerow([k, c])
    for attribute, pairs in report.pairwise.items():
        with open(out / f"report_pairs_{attribute}.csv", "w", encoding="utf-8",
                  newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["from_value", "to_value", "observed", "expected"])
            for a, la in enumerate(pairs.labels):
                for b, lb in enumerate(pairs.labels):
                    writer.writerow([la, lb, repr(float(pairs.observed[a, b])),
                                     repr(float(pairs.expected[a, b]))])
    with open(out / "report_survival.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series", "threshold", "fraction"])
        series = [("observed", report.survival_observed),
                  ("expected", report.survival_expected)]
        for g, (obs, exp) in sorted(report.survival_by_gender.items()):
            series.append((f"observed_{g}", obs))
            series.append((f"expected_{g}", exp))
        for name, curve in series:
            for x, fraction in zip(curve.thresholds, curve.fraction):
                writer.writerow([name, repr(float(x)), repr(float(fraction))])


def _write_model_artifact(net: CitationNetwork, ec: ExpectedCitations,
                          archive: Path, out: Path, *, exact: bool,
                          count_tol: float, dump_groups: bool) -> None:
    with open(out / CBAR_FILE, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["paper_id", "c_bar"])
        for i, p in enumerate(net.papers):
            writer.writerow([p.id, repr(float(ec.c_bar[i]))])
    report = structural_report(net, ec)
    meta = {
        "model": ec.model,
        "attributes": list(ec.attributes),
        "exact": exact,
        "count_tol": count_tol,
        "n_papers": ec.n_papers,
        "n_citations": ec.n_citations,
        "ks_in_degree": report.ks_in_degree,
        "archive": {
            "papers_sha256": _sha256(archive / PAPERS_FILE),
            "citations_sha256": _sha256(archive / CITATIONS_FILE),
        },
    }
    with open(out / MODEL_META_FILE, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_structural(report, out)
    if dump_groups:
        with open(out / GROUPS_FILE, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(["citing_id", "member_count", "weight", "member_ids"])
            for g in ec.groups:
                writer.writerow(
                    [net.papers[g.citing].id, g.members.size, repr(g.weight)]
                    + [net.papers[j].id for j in g.members]
                )


def cmd_model(args: argparse.Namespace, argv: list[str]) -> int:
    archive = Path(args.archive)
    net = _load_archive(archive)
    model = args.model.upper()
    if model == "RD" and args.attrs is not None:
        log.warning("--attrs is ignored by the random-draws model")
    attrs = () if model == "RD" else _parse_attrs(args.attrs)
    ec = _model_from_args(net, model, attrs, args.exact, args.count_tol)
    out = _out_dir(args, args.out)
    _write_model_artifact(net, ec, archive, out, exact=args.exact,
                          count_tol=args.count_tol, dump_groups=args.dump_groups)
    _write_manifest(out, argv,
                    {"papers": archive / PAPERS_FILE,
                     "citations": archive / CITATIONS_FILE},
                    args.seed, model=model, attributes=list(attrs))
    print(f"model {model} on {net.n} papers / {net.m} citations")
    return 0


def _load_model_artifact(archive: Path, artifact: Path,
                         net: CitationNetwork) -> ExpectedCitations:
    """Recompute the expectations named by a model artifact and verify
    them against the stored c_bar."""
    meta_path = artifact / MODEL_META_FILE
    if not meta_path.is_file():
        raise CliError(f"model artifact {artifact} is missing {MODEL_META_FILE}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    for name, digest in (("papers", meta["archive"]["papers_sha256"]),
                         ("citations", meta["archive"]["citations_sha256"])):
        actual = _sha256(archive / f"{name}.tsv")
        if actual != digest:
            raise CliError(
                f"model artifact {artifact} was built from a different archive "
                f"({name}.tsv digest mismatch)"
            )
    ec = _model_from_args(net, meta["model"], tuple(meta["attributes"]),
                          meta.get("exact", False),
                          meta.get("count_tol", DEFAULT_COUNT_TOL))
    stored = {}
    with open(artifact / CBAR_FILE, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        next(reader)
        for pid, value in reader:
            stored[pid] = float(value)
    recomputed = {p.id: float(ec.c_bar[i]) for i, p in enumerate(net.papers)}
    if set(stored) != set(recomputed) or any(
        abs(stored[pid] - recomputed[pid]) > 1e-9 for pid in stored
    ):
        raise CliError(f"model artifact {artifact} is inconsistent with the archive")
    return ec


def cmd_imbalance(args: argparse.Namespace, argv: list[str]) -> int:
    archive, artifact = Path(args.archive), Path(args.model_artifact)
    net = _load_archive(archive)
    ec = _load_model_artifact(archive, artifact, net)
    from_filter = PaperFilter.parse(args.from_)
    to_filter = PaperFilter.parse(args.to)
    for name, f in (("--from", from_filter), ("--to", to_filter)):
        if not any(f(p) for p in net.papers):
            log.warning("%s %r selects no papers; reports will be undefined",
                        name, f.description)
    seed = args.seed if args.seed is not None else 0
    if args.stratify == "none":
        reports = imbalance_report(net, ec, from_filter, to_filter,
                                   args.bootstrap, seed)
    else:
        stratifier = "conference_rank" if args.stratify == "rank" else "subfield"
        reports = stratified_imbalance(net, ec, stratifier, args.bootstrap, seed)
    out = _out_dir(args, args.out)
    write_report_csv(reports, out / "imbalance.csv")
    write_report_json(reports, out / "imbalance.json")
    _write_manifest(out, argv,
                    {"papers": archive / PAPERS_FILE,
                     "citations": archive / CITATIONS_FILE,
                     "c_bar": artifact / CBAR_FILE},
                    seed, model=ec.model,
                    from_filter=from_filter.description,
                    to_filter=to_filter.description,
                    stratify=args.stratify, bootstrap=args.bootstrap)
    for r in reports:
        label = f"{r.gender.value}" + (f" [{r.stratum}]" if r.stratum else "")
        if r.over_under is None:
            print(f"{label}: undefined (expected 0)")
        else:
            ci = ""
            if r.ci_low is not None:
                ci = f" (95% CI [{r.ci_low:+.4f}, {r.ci_high:+.4f}])"
            print(f"{label}: {r.over_under:+.4%}{ci}")
    return 0


def _parse_d_grid(text: str) -> list[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"bad --d-grid {text!r}") from exc
    if not grid or any(not 0 < d <= 100 for d in grid):
        raise CliError("--d-grid values must be in (0, 100]")
    return grid


def cmd_rank(args: argparse.Namespace, argv: list[str]) -> int:
    archive = Path(args.archive)
    net = _load_archive(archive)
    inputs = {"papers": archive / PAPERS_FILE,
              "citations": archive / CITATIONS_FILE}
    models: dict[str, ExpectedCitations] = {}
    ec = None
    if args.model_artifact is not None:
        artifact = Path(args.model_artifact)
        ec = _load_model_artifact(archive, artifact, net)
        models[ec.model] = ec
        inputs["c_bar"] = artifact / CBAR_FILE

    if args.metric == "pagerank":
        if ec is not None:
            result = pagerank_reference(ec, net, args.alpha, args.eps, args.t_max)
        else:
            result = pagerank_observed(net, args.alpha, args.eps, args.t_max)
    else:
        result = citation_scores(net, ec)

    grid = _parse_d_grid(args.d_grid)
    points = share_curve(net, args.metric, models, grid,
                         alpha=args.alpha, eps=args.eps, t_max=args.t_max)
    out = _out_dir(args, args.out)
    write_ranking_csv(result, net, out / "rankings.csv")
    write_share_csv(points, out / "share_curve.csv")
    _write_manifest(out, argv, inputs, args.seed, metric=args.metric,
                    source=result.source, d_grid=grid)
    print(f"{args.metric} ranking for source {result.source}: "
          f"converged={result.converged} iterations={result.iterations_used}")
    return 0


def cmd_synth(args: argparse.Namespace, argv: list[str]) -> int:
    config_path = Path(args.config)
    cfg = load_config(config_path)
    if args.seed is not None:
        cfg.seed = args.seed
    net = generate_network(cfg)
    out = _out_dir(args, args.out)
    summary = _write_archive(net, out)
    _write_manifest(out, argv, {"config": config_path}, cfg.seed)
    print(f"papers: {summary['papers']}")
    print(f"citations: {summary['citations']}")
    return 0


def cmd_report(args: argparse.Namespace, argv: list[str]) -> int:
    archive, artifact = Path(args.archive), Path(args.model_artifact)
    net = _load_archive(archive)
    ec = _load_model_artifact(archive, artifact, net)
    report = structural_report(net, ec)
    out = _out_dir(args, args.out)
    _write_structural(report, out)
    _write_manifest(out, argv,
                    {"papers": archive / PAPERS_FILE,
                     "citations": archive / CITATIONS_FILE,
                     "c_bar": artifact / CBAR_FILE},
                    args.seed, model=ec.model, ks_in_degree=report.ks_in_degree)
    print(f"structural report for {ec.model}: KS(in-citations) = "
          f"{report.ks_in_degree:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citegap",
        description="Quantify group imbalance in citation networks against "
                    "draw-based reference models.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for stochastic steps (default 0; overrides "
                             "the synth config seed)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap (results never depend on it)")
    parser.add_argument("--output-dir",
                        default=os.environ.get(OUTPUT_DIR_ENV, "."),
                        help=f"base directory for relative outputs "
                             f"(default: ${OUTPUT_DIR_ENV} or '.')")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="filter raw tables into a network archive")
    p.add_argument("papers")
    p.add_argument("citations")
    p.add_argument("out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("model", help="compute a reference model on an archive")
    p.add_argument("archive")
    p.add_argument("out")
    p.add_argument("--model", required=True, choices=["rd", "hd", "pd"])
    p.add_argument("--attrs", default=None,
                   help="comma-joined attribute set for hd/pd "
                        "(default rank,country,topic)")
    p.add_argument("--exact", action="store_true",
                   help="exact-rational running counts for pd")
    p.add_argument("--count-tol", type=float, default=DEFAULT_COUNT_TOL,
                   help="pd count-equality tolerance in float mode")
    p.add_argument("--dump-groups", action="store_true",
                   help="also write the diagnostic group dump")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("imbalance", help="observed vs expected citations per "
                                         "gender category")
    p.add_argument("archive")
    p.add_argument("model_artifact")
    p.add_argument("out")
    p.add_argument("--from", dest="from_", default="all",
                   help="citing-paper filter, e.g. gender=WW")
    p.add_argument("--to", default="all", help="cited-paper filter")
    p.add_argument("--bootstrap", type=int, default=500,
                   help="bootstrap resamples (0 disables CIs)")
    p.add_argument("--stratify", choices=["none", "rank", "subfield"],
                   default="none")
    p.set_defaults(func=cmd_imbalance)

    p = sub.add_parser("rank", help="impact scores and top-share curves")
    p.add_argument("archive")
    p.add_argument("out")
    p.add_argument("--model-artifact", default=None)
    p.add_argument("--metric", choices=["citations", "pagerank"],
                   default="citations")
    p.add_argument("--d-grid", default="1,5,10,20,50,100")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--t-max", type=int, default=DEFAULT_T_MAX)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="structural comparison for a model artifact")
    p.add_argument("archive")
    p.add_argument("model_artifact")
    p.add_argument("out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, list(argv))
    except (CliError, ParseError, IngestError, ModelError, GenerationError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
