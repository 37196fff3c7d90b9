"""Command-line surface tying the pipeline together.

Exit codes: 0 ok, 2 configuration or input error, 3 research failure,
4 planning (or exemplar textualization) failure, 5 draft failure,
6 forging/assembly failure, 7 judging failure. Chart-level failures are
non-fatal: they become placeholders in the assembled report.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .assemble import MissingArtifactError
from .config import ConfigError, RunConfig, apply_flag_overrides, load_config
from .drafting import DraftFormatError
from .evalbench import (
    EvalError,
    ManifestError,
    TopicManifest,
    VisionClassifier,
    aggregate,
    caption_classifier,
    chart_stats,
    compare,
    judge_pair,
    results_tsv,
)
from .fdv import FdvParseError, parse_fdv
from .forge import run_refinement
from .gateway import GatewayError, ModelFormatError
from .imaging import placeholder_png
from .pipeline import (
    StageInputError,
    build_gateway,
    build_search_backend,
    load_exemplars,
    load_learnings,
    resolve_run_id,
    stage_draft,
    stage_forge_and_assemble,
    stage_plan,
    stage_research,
)
from .planning import PlanFormatError
from .render import BrowserLaunchError, RenderHarness
from .research import ResearchError, format_learnings, keyword_slug
from .textualize import ExemplarLibrary, TextualizeError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESEARCH = 3
EXIT_PLAN = 4
EXIT_DRAFT = 5
EXIT_ASSEMBLY = 6
EXIT_JUDGE = 7

NEUTRAL_STYLE = (
    "Restrained professional palette: deep navy #1f3a5f for primary series, amber "
    "#e8a33d for highlights, cool gray #8a94a0 for context; sans-serif labels with a "
    "clear hierarchy of title, axis, and annotation sizes."
)


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config)
    return apply_flag_overrides(config, args)


def cmd_report(args) -> int:
    try:
        config = _load_run_config(args)
        config.validate()
        gateway = build_gateway(config)
        backend = build_search_backend(config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))

    outdir = Path(config.paths.out) / resolve_run_id(config, args.topic)
    outdir.mkdir(parents=True, exist_ok=True)

    try:
        learnings = stage_research(config, gateway, backend, args.topic, outdir)
    except (ResearchError, ModelFormatError, GatewayError) as exc:
        return _fail(EXIT_RESEARCH, f"research failed: {exc}")

    try:
        exemplars = load_exemplars(config, gateway)
        outline, style = stage_plan(config, gateway, args.topic, learnings, exemplars, outdir)
    except (PlanFormatError, TextualizeError, GatewayError) as exc:
        return _fail(EXIT_PLAN, f"planning failed: {exc}")

    try:
        draft = stage_draft(
            config, gateway, args.topic, learnings, outline, style, exemplars, outdir
        )
    except (DraftFormatError, GatewayError) as exc:
        return _fail(EXIT_DRAFT, f"drafting failed: {exc}")

    try:
        with RenderHarness(config.render) as harness:
            final = stage_forge_and_assemble(
                config, gateway, harness, learnings, style, draft, outdir
            )
    except (BrowserLaunchError, GatewayError, MissingArtifactError, OSError) as exc:
        return _fail(EXIT_ASSEMBLY, f"assembly failed: {exc}")

    print(f"report bundle written to {final.outdir}")
    print(f"  charts: {len(final.chart_files)}  references: {len(final.references)}")
    return EXIT_OK


def cmd_research(args) -> int:
    try:
        config = _load_run_config(args)
        config.validate()
        gateway = build_gateway(config)
        backend = build_search_backend(config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    outdir = Path(config.paths.out) / resolve_run_id(config, args.topic)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        learnings = stage_research(config, gateway, backend, args.topic, outdir)
    except (ResearchError, ModelFormatError, GatewayError) as exc:
        return _fail(EXIT_RESEARCH, f"research failed: {exc}")
    print(f"{len(learnings.learnings)} learnings, {len(learnings.references)} references")
    print(f"written to {outdir}")
    return EXIT_OK


def cmd_textualize(args) -> int:
    try:
        config = _load_run_config(args)
        config.validate()
        gateway = build_gateway(config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    library = ExemplarLibrary(config.paths.exemplars)
    names = library.names()
    if not names:
        return _fail(EXIT_CONFIG, f"no exemplars under {config.paths.exemplars}")
    try:
        for name in names:
            library.textualized(name, gateway, config.profiles.vision)
            print(f"textualized {name}")
    except (TextualizeError, GatewayError) as exc:
        return _fail(EXIT_PLAN, f"textualization failed: {exc}")
    return EXIT_OK


def cmd_plan(args) -> int:
    try:
        config = _load_run_config(args)
        config.validate()
        gateway = build_gateway(config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    if not config.run_id:
        return _fail(EXIT_CONFIG, "plan requires --run-id of an existing research run")
    outdir = Path(config.paths.out) / config.run_id
    try:
        learnings = load_learnings(outdir)
    except StageInputError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        exemplars = load_exemplars(config, gateway)
        stage_plan(config, gateway, learnings.topic, learnings, exemplars, outdir)
    except (PlanFormatError, TextualizeError, GatewayError) as exc:
        return _fail(EXIT_PLAN, f"planning failed: {exc}")
    print(f"plan written to {outdir}")
    return EXIT_OK


def cmd_render_chart(args) -> int:
    try:
        config = _load_run_config(args)
        config.validate()
        gateway = build_gateway(config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    fdv_path = Path(args.fdv_file)
    if not fdv_path.is_file():
        return _fail(EXIT_CONFIG, f"no such file: {fdv_path}")
    try:
        spec = parse_fdv(fdv_path.read_text(encoding="utf-8"))
    except FdvParseError as exc:
        return _fail(EXIT_CONFIG, f"not a valid chart description: {exc}")

    style = NEUTRAL_STYLE
    if args.style:
        style = Path(args.style).read_text(encoding="utf-8")
    out = Path(args.out_file) if args.out_file else fdv_path.with_suffix(".png")
    try:
        with RenderHarness(config.render) as harness:
            artifact = run_refinement(
                gateway,
                config.profiles.text,
                config.profiles.vision,
                spec,
                style,
                config.refine,
                harness.render,
            )
    except (BrowserLaunchError, GatewayError) as exc:
        return _fail(EXIT_ASSEMBLY, f"chart rendering failed: {exc}")
    version = artifact.final_version
    if artifact.failed or version is None or version.screenshot is None:
        out.write_bytes(placeholder_png("chart rendering failed"))
        print(f"chart failed ({artifact.failure_reason}); placeholder written to {out}")
        return EXIT_ASSEMBLY
    out.write_bytes(version.screenshot)
    print(f"chart written to {out} ({len(artifact.versions)} versions)")
    return EXIT_OK


def _bundle_for(topic: str, root: Path) -> Path:
    return root / keyword_slug(topic)[:48]


def cmd_evaluate(args) -> int:
    try:
        config = _load_run_config(args)
        config.validate()
        gateway = build_gateway(config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        manifest = TopicManifest.load(args.manifest)
    except (ManifestError, OSError) as exc:
        return _fail(EXIT_CONFIG, f"bad topic manifest: {exc}")

    ours_root = Path(args.ours_dir)
    other_root = Path(args.other_dir)
    missing = []
    for entry in manifest.entries:
        for root, label in ((ours_root, "ours"), (other_root, "other")):
            if not _bundle_for(entry.topic, root).is_dir():
                missing.append(f"{label}: {entry.topic}")
    if missing:
        return _fail(EXIT_CONFIG, "missing report bundles:\n  " + "\n  ".join(missing))

    base_seed = config.seed or 0
    results = []
    topics = []
    for index, entry in enumerate(manifest.entries):
        ours = _bundle_for(entry.topic, ours_root)
        other = _bundle_for(entry.topic, other_root)
        learnings_str = ""
        try:
            learnings = load_learnings(ours)
            learnings_str = format_learnings(learnings.learnings)
        except StageInputError:
            pass
        seed = base_seed + index
        try:
            verdict, order = judge_pair(
                gateway,
                config.profiles.judge,
                entry.topic,
                learnings_str,
                ours,
                other,
                seed,
            )
        except EvalError as exc:
            return _fail(EXIT_JUDGE, f"judging failed for {entry.topic!r}: {exc}")
        except GatewayError as exc:
            return _fail(EXIT_JUDGE, f"judging failed for {entry.topic!r}: {exc}")
        results.append(compare(verdict, order=order, seed=seed))
        topics.append(entry.topic)

    summary = aggregate(results)
    eval_dir = Path(config.paths.eval_out) / (config.run_id or f"eval-{base_seed}")
    eval_dir.mkdir(parents=True, exist_ok=True)
    (eval_dir / "results.tsv").write_text(results_tsv(topics, results), encoding="utf-8")
    (eval_dir / "summary.tsv").write_text(summary.render_tsv(), encoding="utf-8")
    print(summary.render_table())
    print(f"\nresults written to {eval_dir}")
    return EXIT_OK


def cmd_stats(args) -> int:
    try:
        config = _load_run_config(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    paths = [Path(p) for p in args.manifests]
    if not paths:
        return _fail(EXIT_CONFIG, "no manifest paths given")
    if args.classifier == "vision":
        try:
            config.validate()
            gateway = build_gateway(config)
        except ConfigError as exc:
            return _fail(EXIT_CONFIG, str(exc))
        classifier = VisionClassifier(gateway, config.profiles.vision)
    else:
        classifier = caption_classifier
    try:
        stats = chart_stats(paths, classifier)
    except (EvalError, OSError, ValueError) as exc:
        return _fail(EXIT_CONFIG, f"cannot compute stats: {exc}")
    print(f"reports: {stats.reports}")
    print(f"charts: {stats.total_charts}")
    print(f"average charts per report: {stats.average:.2f}")
    for label, count in stats.histogram.items():
        if count:
            print(f"  {label}: {count}")
    return EXIT_OK


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=("live", "record", "replay"))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--config", type=Path)
    parser.add_argument("--out", type=Path)
    parser.add_argument("--run-id", dest="run_id")
    parser.add_argument("--breadth", type=int, help="initial research keyword count")
    parser.add_argument("--depth", type=int, help="research rounds")
    parser.add_argument("--nmax", type=int, help="max chart critique iterations")
    parser.add_argument("--parallel-charts", dest="parallel_charts", type=int)
    parser.add_argument("--browser", help="browser binary path")
    parser.add_argument("--fixtures", type=Path, help="model transcript store")
    parser.add_argument("--corpus", type=Path, help="search fixture corpus")
    parser.add_argument("--exemplars", type=Path, help="exemplar report library")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chartweaver",
        description="Research a topic and generate a text-chart interleaved report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_report = sub.add_parser("report", help="run the full pipeline for one topic")
    p_report.add_argument("topic")
    _add_common_flags(p_report)
    p_report.set_defaults(func=cmd_report)

    p_research = sub.add_parser("research", help="run only the research stage")
    p_research.add_argument("topic")
    _add_common_flags(p_research)
    p_research.set_defaults(func=cmd_research)

    p_text = sub.add_parser("textualize", help="textualize the exemplar library")
    _add_common_flags(p_text)
    p_text.set_defaults(func=cmd_textualize)

    p_plan = sub.add_parser("plan", help="plan from an existing research run")
    _add_common_flags(p_plan)
    p_plan.set_defaults(func=cmd_plan)

    p_chart = sub.add_parser("render-chart", help="compile one chart description to PNG")
    p_chart.add_argument("fdv_file")
    p_chart.add_argument("out_file", nargs="?")
    p_chart.add_argument("--style", help="style guide text file")
    _add_common_flags(p_chart)
    p_chart.set_defaults(func=cmd_render_chart)

    p_eval = sub.add_parser("evaluate", help="judge report pairs over a topic manifest")
    p_eval.add_argument("manifest")
    p_eval.add_argument("ours_dir")
    p_eval.add_argument("other_dir")
    _add_common_flags(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_stats = sub.add_parser("stats", help="chart statistics over report manifests")
    p_stats.add_argument("manifests", nargs="+")
    p_stats.add_argument("--classifier", choices=("caption", "vision"), default="caption")
    _add_common_flags(p_stats)
    p_stats.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
