from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import pytest

from chartweaver.evalbench import (
    METRICS,
    ChartStats,
    ComparisonResult,
    EvalError,
    JudgeVerdict,
    ManifestError,
    MetricScore,
    QuantizationError,
    Summary,
    TopicEntry,
    TopicManifest,
    VerdictFormatError,
    aggregate,
    caption_classifier,
    chart_stats,
    compare,
    judge_pair,
    ours_first_for_seed,
    parse_score,
    parse_verdict_sides,
    report_parts,
    results_tsv,
)
from chartweaver.gateway import Gateway, ImagePart, ModelProfile, TextPart

from stub_browser import write_png

JUDGE = ModelProfile(role="judge", endpoint="m-judge", temperature=0.0)

OURS_PNG = write_png(6, 4, [(200, 40, 40)])
OTHER_PNG = write_png(6, 4, [(40, 40, 200)])

HIGH = {m: "4" for m in METRICS}
LOW = {m: "3" for m in METRICS}


def verdict_response(a_scores: dict, b_scores: dict) -> str:
    sections = []
    for name, scores in (("report_a", a_scores), ("report_b", b_scores)):
        metric_xml = "\n".join(
            f"<{m}>\n  <score>{scores[m]}</score>\n  <justification>evidence for {m}"
            f"</justification>\n</{m}>"
            for m in METRICS
        )
        # template-faithful unclosed wrapper tags
        sections.append(f"<{name}>\n{metric_xml}\n<{name}>")
    return "<evaluation>\n" + "\n".join(sections) + "\n<evaluation>"


def verdict(ours: dict[str, str], other: dict[str, str]) -> JudgeVerdict:
    return JudgeVerdict(
        ours={m: MetricScore(Fraction(v), "j") for m, v in ours.items()},
        other={m: MetricScore(Fraction(v), "j") for m, v in other.items()},
    )


def make_bundle(tmp_path: Path, name: str, png: bytes, charts: int = 1) -> Path:
    bundle = tmp_path / name
    (bundle / "charts").mkdir(parents=True)
    lines = ["## Report\n\nSome analysis text.\n"]
    manifest = []
    for i in range(1, charts + 1):
        (bundle / "charts" / f"chart_{i}.png").write_bytes(png)
        lines.append(f"![c{i}](charts/chart_{i}.png)\n\nMore text.\n")
        manifest.append(
            {"ordinal": i, "caption": f"bar chart {i}", "failed": False,
             "final_version": 0, "versions": 1, "iterations": 1, "selection_used": False}
        )
    (bundle / "report.md").write_text("\n".join(lines))
    (bundle / "manifest.meta").write_text(json.dumps({"charts": manifest}))
    return bundle


class OrderAwareJudge:
    """Scores 'ours' higher no matter which side it is presented on."""

    def __init__(self, ours_png: bytes):
        self.ours_png = ours_png
        self.calls = 0

    def __call__(self, profile, messages):
        self.calls += 1
        images = [
            p for m in messages for p in m.parts if isinstance(p, ImagePart)
        ]
        ours_first = images[0].decoded() == self.ours_png
        if ours_first:
            return verdict_response(HIGH, LOW), {}
        return verdict_response(LOW, HIGH), {}


def gw(transport) -> Gateway:
    return Gateway(mode="live", transport=transport, sleeper=lambda s: None)


class TestScores:
    def test_half_points_accepted(self):
        assert parse_score("3.5") == Fraction(7, 2)
        assert parse_score(" 4 ") == 4

    @pytest.mark.parametrize("raw", ["3.7", "0.5", "5.5", "abc", "4.25", ""])
    def test_off_grid_rejected(self, raw):
        with pytest.raises(QuantizationError):
            parse_score(raw)

    def test_quantization_property(self):
        for doubled in range(2, 11):
            parse_score(str(doubled / 2))


class TestVerdictParsing:
    def test_full_response(self):
        side_a, side_b = parse_verdict_sides(verdict_response(HIGH, LOW))
        assert side_a["informativeness"].score == 4
        assert side_b["coherence"].score == 3
        assert side_a["visualization_quality"].justification.startswith("evidence")

    def test_missing_metric_rejected(self):
        partial = {m: "4" for m in METRICS[:-1]}
        response = verdict_response(HIGH, LOW).replace(
            "<visualization_consistency>", "<nope>"
        )
        with pytest.raises(VerdictFormatError):
            parse_verdict_sides(response)
        assert partial  # silence unused warning

    def test_missing_section_rejected(self):
        with pytest.raises(VerdictFormatError):
            parse_verdict_sides("<report_a>only one side</report_a>")

    def test_off_grid_score_raises_quantization(self):
        response = verdict_response({**HIGH, "coherence": "3.7"}, LOW)
        with pytest.raises(QuantizationError):
            parse_verdict_sides(response)


class TestJudgePair:
    def seeds_for_both_orders(self):
        first = next(s for s in range(50) if ours_first_for_seed(s))
        second = next(s for s in range(50) if not ours_first_for_seed(s))
        return first, second

    def test_depermutation_identical_across_orders(self, tmp_path):
        ours = make_bundle(tmp_path, "ours", OURS_PNG)
        other = make_bundle(tmp_path, "other", OTHER_PNG)
        judge = OrderAwareJudge(OURS_PNG)
        seed_first, seed_second = self.seeds_for_both_orders()

        verdict_a, order_a = judge_pair(
            gw(judge), JUDGE, "topic", "learnings", ours, other, seed_first
        )
        verdict_b, order_b = judge_pair(
            gw(judge), JUDGE, "topic", "learnings", ours, other, seed_second
        )
        assert order_a == "ours_first" and order_b == "ours_second"
        for metric in METRICS:
            assert verdict_a.ours[metric].score == verdict_b.ours[metric].score == 4
            assert verdict_a.other[metric].score == verdict_b.other[metric].score == 3

    def test_images_interleaved_at_their_positions(self, tmp_path):
        ours = make_bundle(tmp_path, "ours", OURS_PNG, charts=2)
        other = make_bundle(tmp_path, "other", OTHER_PNG)
        judge = OrderAwareJudge(OURS_PNG)
        seed = next(s for s in range(50) if ours_first_for_seed(s))
        judge_pair(gw(judge), JUDGE, "topic", "learnings", ours, other, seed)

    def test_bundle_without_images_rejected(self, tmp_path):
        ours = make_bundle(tmp_path, "ours", OURS_PNG)
        empty = tmp_path / "empty"
        empty.mkdir()
        (empty / "report.md").write_text("text only, no charts")
        with pytest.raises(EvalError):
            judge_pair(gw(OrderAwareJudge(OURS_PNG)), JUDGE, "t", "l", ours, empty, 0)

    def test_reprompt_on_malformed_then_parse(self, tmp_path):
        ours = make_bundle(tmp_path, "ours", OURS_PNG)
        other = make_bundle(tmp_path, "other", OTHER_PNG)
        responses = iter(["not xml at all", verdict_response(HIGH, LOW)])

        def transport(profile, messages):
            return next(responses), {}

        seed = next(s for s in range(50) if ours_first_for_seed(s))
        verdict_out, _ = judge_pair(gw(transport), JUDGE, "t", "l", ours, other, seed)
        assert verdict_out.ours["informativeness"].score == 4

    def test_order_fairness_over_200_seeds(self):
        ours_first = sum(1 for seed in range(200) if ours_first_for_seed(seed))
        assert 80 <= ours_first <= 120


class TestCompare:
    def test_clean_sweep(self):
        result = compare(verdict({m: "4" for m in METRICS}, {m: "3" for m in METRICS}))
        assert all(outcome == "win" for outcome in result.per_metric.values())
        assert result.overall == "win"

    def test_identical_scores_tie(self):
        result = compare(verdict({m: "3.5" for m in METRICS}, {m: "3.5" for m in METRICS}))
        assert all(outcome == "tie" for outcome in result.per_metric.values())
        assert result.overall == "tie"

    def test_overall_win_with_two_metric_losses(self):
        ours = dict(zip(METRICS, ["4", "4", "4", "2", "2"]))
        other = {m: "3" for m in METRICS}
        result = compare(verdict(ours, other))
        outcomes = [result.per_metric[m] for m in METRICS]
        assert outcomes == ["win", "win", "win", "lose", "lose"]
        assert result.overall == "win"  # mean 3.2 vs 3.0

    def test_exact_mean_tie(self):
        ours = dict(zip(METRICS, ["4", "2", "3", "3", "3"]))
        other = {m: "3" for m in METRICS}
        result = compare(verdict(ours, other))
        assert result.overall == "tie"

    def test_missing_metric_rejected(self):
        bad = verdict(HIGH, LOW)
        del bad.ours["coherence"]
        with pytest.raises(VerdictFormatError):
            compare(bad)


def constructed_results(win: int, lose: int, tie: int) -> list[ComparisonResult]:
    results = []
    for outcome, count in (("win", win), ("lose", lose), ("tie", tie)):
        for _ in range(count):
            results.append(
                ComparisonResult(
                    per_metric={m: outcome for m in METRICS},
                    overall=outcome,
                    order="ours_first",
                    seed=0,
                )
            )
    return results


class TestAggregate:
    def test_eight_two_zero(self):
        summary = aggregate(constructed_results(8, 2, 0))
        row = summary.row("overall")
        assert (row.win_pct, row.lose_pct, row.tie_pct) == (80, 20, 0)

    def test_table_one_shape(self):
        summary = aggregate(constructed_results(82, 16, 2))
        row = summary.row("overall")
        assert (row.win_pct, row.lose_pct, row.tie_pct) == (82, 16, 2)
        assert "82%" in summary.render_table()

    def test_single_result(self):
        summary = aggregate(constructed_results(0, 0, 1))
        row = summary.row("informativeness")
        assert (row.win_pct, row.lose_pct, row.tie_pct) == (0, 0, 100)

    def test_counts_conserved(self):
        summary = aggregate(constructed_results(5, 3, 2))
        for row in summary.rows:
            assert row.win + row.lose + row.tie == 10

    def test_rounding_remainder_to_tie(self):
        summary = aggregate(constructed_results(1, 1, 1))
        row = summary.row("overall")
        assert (row.win_pct, row.lose_pct, row.tie_pct) == (33, 33, 34)
        assert row.win_pct + row.lose_pct + row.tie_pct == 100

    def test_empty_rejected(self):
        with pytest.raises(EvalError):
            aggregate([])

    def test_tsv_render(self):
        summary = aggregate(constructed_results(1, 0, 0))
        tsv = summary.render_tsv()
        assert tsv.startswith("metric\twin\tlose\ttie\n")
        assert "overall\t100%\t0%\t0%" in tsv


class TestResultsTsv:
    def test_columns(self):
        results = constructed_results(1, 0, 0)
        tsv = results_tsv(["topic one"], results)
        lines = tsv.strip().split("\n")
        assert lines[0].split("\t")[0] == "topic"
        assert lines[1].split("\t")[0] == "topic one"
        assert lines[1].split("\t")[-1] == "ours_first"


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = TopicManifest(
            [TopicEntry("Energy", "Solar adoption"), TopicEntry("Travel", "Rail renaissance")]
        )
        path = tmp_path / "topics.tsv"
        manifest.save(path)
        loaded = TopicManifest.load(path)
        assert loaded.entries == manifest.entries

    def test_unknown_category(self):
        with pytest.raises(ManifestError):
            TopicManifest([TopicEntry("Sports", "t")]).validate()

    def test_duplicate_topics(self):
        entries = [TopicEntry("Energy", "Same"), TopicEntry("Travel", "same")]
        with pytest.raises(ManifestError):
            TopicManifest(entries).validate()

    def test_bad_line(self, tmp_path):
        path = tmp_path / "topics.tsv"
        path.write_text("Energy no tab here\n")
        with pytest.raises(ManifestError):
            TopicManifest.load(path)


class TestChartStats:
    def test_average_and_histogram(self, tmp_path):
        make_bundle(tmp_path, "r1", OURS_PNG, charts=2)
        make_bundle(tmp_path, "r2", OURS_PNG, charts=3)
        stats = chart_stats([tmp_path / "r1", tmp_path / "r2"], caption_classifier)
        assert stats.reports == 2
        assert stats.total_charts == 5
        assert stats.average == 2.5
        assert stats.histogram["bar"] == 5
        assert sum(stats.histogram.values()) == stats.total_charts

    def test_failed_charts_excluded(self, tmp_path):
        bundle = make_bundle(tmp_path, "r1", OURS_PNG, charts=2)
        data = json.loads((bundle / "manifest.meta").read_text())
        data["charts"][0]["failed"] = True
        (bundle / "manifest.meta").write_text(json.dumps(data))
        stats = chart_stats([bundle], caption_classifier)
        assert stats.total_charts == 1

    def test_unknown_label_rejected(self, tmp_path):
        bundle = make_bundle(tmp_path, "r1", OURS_PNG)
        with pytest.raises(EvalError):
            chart_stats([bundle], lambda image, caption: "histogram")

    def test_caption_classifier_keywords(self):
        assert caption_classifier(b"", "Monthly trend of EV sales") == "line"
        assert caption_classifier(b"", "Sankey of energy flows") == "sankey"
        assert caption_classifier(b"", "Something unusual") == "others"


def test_report_parts_alternate_text_and_images(tmp_path):
    bundle = make_bundle(tmp_path, "r", OURS_PNG, charts=2)
    parts = report_parts(bundle)
    kinds = [type(p).__name__ for p in parts]
    assert kinds.count("ImagePart") == 2
    assert kinds[0] == "TextPart"
    image_positions = [i for i, kind in enumerate(kinds) if kind == "ImagePart"]
    assert image_positions[0] > 0 and image_positions[1] > image_positions[0] + 1
