#!/usr/bin/env python3
"""Regenerate the committed fixture world.

Builds, from canned content, everything the replay-mode test suite runs
against: the search corpus, the two-image exemplar report, the topic
manifests, two pairs of evaluation bundles, and the transcript record store.
Records are produced by driving the real pipeline in record mode against a
scripted model transport and the protocol stub browser, so replayed runs
exercise exactly the code paths that produced the fixtures.

Usage: python tools/make_fixtures.py [--repo-root PATH]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from chartweaver.config import RunConfig  # noqa: E402
from chartweaver.evalbench import ours_first_for_seed, judge_pair  # noqa: E402
from chartweaver.fdv import FdvSpec, serialize_fdv  # noqa: E402
from chartweaver.gateway import Gateway, ImagePart, RecordStore, TextPart  # noqa: E402
from chartweaver.pipeline import load_learnings, run_report_pipeline  # noqa: E402
from chartweaver.render import RenderHarness, RenderOptions  # noqa: E402
from chartweaver.research import FixtureCorpus, keyword_slug, format_learnings  # noqa: E402
from chartweaver.textualize import ExemplarLibrary  # noqa: E402

sys.path.insert(0, str(REPO_ROOT / "tests"))
from stub_browser import write_png  # noqa: E402

STUB_BROWSER = REPO_ROOT / "tests" / "stub_browser.py"

TOPIC = "Electric vehicle adoption trends worldwide"
EVAL_TOPIC_2 = "Global expansion of fiber broadband access"
EVAL_BASE_SEED = 7

# render parameters shared between recording and replay; the acceptance suite
# imports these so replayed runs reproduce the recorded screenshot bytes
REPLAY_RENDER = {
    "width": 640,
    "height": 480,
    "scale": 1,
    "settle_ms": 50,
    "timeout_s": 5.0,
    "poll_interval_s": 0.02,
}

# -- canned research world -----------------------------------------------------

KEYWORDS_ROUND0 = [
    "global electric vehicle sales 2024 statistics",
    "EV market share by country 2024",
    "electric vehicle charging infrastructure growth",
]
KEYWORDS_ROUND1 = [
    "EV battery price decline 2015 2024",
    "government electric vehicle incentive programs comparison",
]
GOAL_ROUND0 = (
    "Quantify the pace of global electric vehicle adoption and the regional "
    "differences behind it."
)
GOAL_ROUND1 = "Explain the cost and policy levers behind electric vehicle adoption."

QUERIES_ROUND0 = "\n".join(
    [f"{i}. {kw}" for i, kw in enumerate(KEYWORDS_ROUND0, start=1)] + [f"Goal: {GOAL_ROUND0}"]
)
QUERIES_ROUND1 = "\n".join(
    [f"{i}. {kw}" for i, kw in enumerate(KEYWORDS_ROUND1, start=1)] + [f"Goal: {GOAL_ROUND1}"]
)

CORPUS_PAGES = {
    KEYWORDS_ROUND0[0]: [
        (
            "https://data.example/ev-outlook-2024",
            "Global EV Outlook 2024",
            "Worldwide electric vehicle sales reached 14.2 million units in 2024, a 35% "
            "increase over 2023. Battery-electric vehicles accounted for 70% of plug-in "
            "volume, plug-in hybrids for 30%. Quarterly volumes were 2.9M, 3.3M, 3.7M, "
            "and 4.3M units.",
        ),
        (
            "https://tracker.example/registrations-q4",
            "EV Registrations Tracker Q4",
            "Registration data shows China contributed roughly 60% of global EV volume "
            "in 2024. European registrations grew 9% while North American growth slowed "
            "to 6% in the fourth quarter.",
        ),
        (
            "https://evnews.example/2024-recap",
            "EV Year in Review",
            "A recap of 2024: record deliveries, two price wars, and the first year in "
            "which one in five new cars sold globally could plug in.",
        ),
    ],
    KEYWORDS_ROUND0[1]: [
        (
            "https://atlas.example/market-share-2024",
            "Market Share Atlas 2024",
            "Norway remains the outlier: 89% of new cars sold in 2024 were electric. The "
            "EU averaged 22% and the United States 10%. The ten leading markets are "
            "tabulated by share and absolute volume.",
        ),
        (
            "https://emerging.example/briefing-12",
            "Emerging EV Markets Briefing 12",
            "Brazil and India both more than doubled EV sales in 2024 from a low base. "
            "Thailand crossed 10% share on strong imports.",
        ),
        (
            "https://evnews.example/2024-recap",
            "EV Year in Review",
            "A recap of 2024: record deliveries, two price wars, and the first year in "
            "which one in five new cars sold globally could plug in.",
        ),
    ],
    KEYWORDS_ROUND0[2]: [
        (
            "https://charge.example/index-2024",
            "Public Charging Index 2024",
            "Public charging points worldwide passed 4.5 million in 2024, up about 40% "
            "year over year. Fast chargers of 150 kW or more were 28% of new public "
            "installations.",
        ),
        (
            "https://gridwatch.example/charger-ratios",
            "Grid Watch: Charger Ratios",
            "Charger-to-EV ratios range from one public point per 9 EVs in China to one "
            "per 24 in the United States, with the EU near one per 13.",
        ),
        (
            "https://urban.example/depot-charging",
            "Depot Charging for Fleets",
            "Commercial fleets increasingly install depot charging; utilization above "
            "30% makes depot chargers cash-positive within three years.",
        ),
    ],
    KEYWORDS_ROUND1[0]: [
        (
            "https://cells.example/price-survey-2024",
            "Battery Price Survey 2024",
            "Average lithium-ion pack prices fell from 384 USD/kWh in 2015 to 115 USD/kWh "
            "in 2024. LFP cell prices dropped below 80 USD/kWh late in the year. The "
            "survey table lists yearly averages: 384, 295, 221, 181, 157, 140, 132, 151, "
            "139, 115.",
        ),
        (
            "https://parity.example/threshold-note",
            "Cost Parity Threshold Note",
            "Pack prices below 100 USD/kWh are widely treated as the threshold at which "
            "battery-electric drivetrains reach cost parity with combustion equivalents.",
        ),
        (
            "https://mining.example/lithium-supply",
            "Lithium Supply Outlook",
            "Lithium carbonate spot prices fell 70% from their 2022 peak, easing cell "
            "cost pressure across chemistries.",
        ),
    ],
    KEYWORDS_ROUND1[1]: [
        (
            "https://policy.example/incentive-table",
            "Incentive Comparison Table",
            "Purchase incentives range from 7,500 USD federal tax credits in the United "
            "States to VAT exemptions in Norway and registration-tax waivers in the "
            "Netherlands. The table compares 14 national programs.",
        ),
        (
            "https://policy.example/shift-review",
            "Policy Shift Review",
            "Several governments are redirecting funds from purchase subsidies toward "
            "charging infrastructure and grid upgrades after 2024 budget reviews.",
        ),
    ],
}

SYNTHESIS_RESPONSES = {
    KEYWORDS_ROUND0[0]: (
        [
            "Global electric vehicle sales reached 14.2 million units in 2024, up 35% "
            "year over year ([Global EV Outlook](https://data.example/ev-outlook-2024)).",
            "Battery-electric models made up 70% of 2024 plug-in volume, with plug-in "
            "hybrids at 30% ([Global EV Outlook](https://data.example/ev-outlook-2024)).",
            "China accounted for roughly 60% of worldwide EV registrations in 2024 "
            "([EV Registrations Tracker](https://tracker.example/registrations-q4)).",
        ],
        [
            "How did quarterly sales momentum change within 2024?",
            "Which automakers gained the most global EV share?",
            "What share of 2024 sales were plug-in hybrids by region?",
        ],
    ),
    KEYWORDS_ROUND0[1]: (
        [
            "Norway led adoption with electric vehicles at 89% of new car sales in 2024 "
            "([Market Share Atlas](https://atlas.example/market-share-2024)).",
            "The EU averaged a 22% EV share of new sales in 2024 while the United States "
            "reached 10% ([Market Share Atlas](https://atlas.example/market-share-2024)).",
            "Brazil and India both more than doubled EV sales in 2024 from a low base "
            "([Emerging EV Markets](https://emerging.example/briefing-12)).",
        ],
        [
            "What explains Norway's outlier adoption rate?",
            "How quickly are emerging markets closing the share gap?",
            "Which US states exceed the national EV share average?",
        ],
    ),
    KEYWORDS_ROUND0[2]: (
        [
            "Public charging points worldwide passed 4.5 million in 2024, a roughly 40% "
            "annual increase ([Public Charging Index](https://charge.example/index-2024)).",
            "Fast chargers of at least 150 kW made up 28% of new public installations in "
            "2024 ([Public Charging Index](https://charge.example/index-2024)).",
            "Charger-to-EV ratios vary widely, from 1:9 in China to 1:24 in the United "
            "States ([Grid Watch](https://gridwatch.example/charger-ratios)).",
        ],
        [
            "Is charger deployment keeping pace with fleet growth?",
            "How do urban and highway charging economics differ?",
            "Which networks lead on fast-charging reliability?",
        ],
    ),
    KEYWORDS_ROUND1[0]: (
        [
            "Average lithium-ion pack prices fell from 384 USD/kWh in 2015 to 115 USD/kWh "
            "in 2024 ([Battery Price Survey](https://cells.example/price-survey-2024)).",
            "LFP cell prices dropped below 80 USD/kWh in late 2024 "
            "([Battery Price Survey](https://cells.example/price-survey-2024)).",
            "Packs below 100 USD/kWh are widely treated as the cost-parity threshold "
            "with combustion drivetrains ([Cost Parity Note](https://parity.example/threshold-note)).",
        ],
        [
            "When do mainstream segments hit drivetrain cost parity?",
            "How sensitive are pack prices to lithium spot prices?",
        ],
    ),
    KEYWORDS_ROUND1[1]: (
        [
            "Purchase incentives range from 7,500 USD US federal credits to VAT "
            "exemptions in Norway ([Incentive Comparison](https://policy.example/incentive-table)).",
            "Several countries are shifting funding from purchase subsidies toward "
            "charging infrastructure after 2024 ([Policy Shift Review](https://policy.example/shift-review)).",
        ],
        [
            "Which incentive designs deliver the most adoption per dollar?",
            "How do fleets respond to charging-side incentives?",
        ],
    ),
}


def synthesis_text(learnings: list[str], questions: list[str]) -> str:
    lines = ["Learnings:"]
    lines += [f"{i}. {text}" for i, text in enumerate(learnings, start=1)]
    lines += ["", "Follow-up questions:"]
    lines += [f"{i}. {q}" for i, q in enumerate(questions, start=1)]
    return "\n".join(lines)


# -- canned plan and draft -----------------------------------------------------

STYLE_GUIDE_TEXT = """\
**Base Design Elements:** Anchor every chart on deep navy #1f3a5f for primary series, \
amber #e8a33d for highlighted values, and cool gray #8a94a0 for context series. \
Backgrounds stay white; gridlines are hairline gray. Typography: chart titles in a \
bold sans-serif, axis labels in a smaller regular weight, annotations italic. Keep a \
single information hierarchy across charts: title, subtitle, plot, source line."""

PLAN_SECTIONS = [
    (
        "The Adoption Surge",
        "Global EV sales hit 14.2 million units in 2024, growing 35% in a single year. "
        "Battery-electric models dominate the mix at 70% of plug-in volume. The section "
        "frames how quickly the fleet is electrifying.",
    ),
    (
        "Regional Divergence",
        "Adoption is wildly uneven: Norway at 89% share, the EU at 22%, the US at 10%. "
        "China alone contributes roughly 60% of global volume. The section maps leaders "
        "and laggards.",
    ),
    (
        "The Infrastructure Race",
        "Public charging passed 4.5 million points in 2024, up about 40%. Fast chargers "
        "are a rising share of new installs. Charger-to-EV ratios still differ threefold "
        "across major markets.",
    ),
    (
        "Battery Economics",
        "Pack prices fell from 384 to 115 USD/kWh over a decade. LFP cells broke the 80 "
        "USD/kWh line in 2024. The 100 USD/kWh parity threshold is now within reach.",
    ),
    (
        "Policy Levers",
        "Incentives vary from US tax credits to Norwegian VAT exemptions. Budgets are "
        "shifting from purchase subsidies to charging infrastructure. The section weighs "
        "which levers matter next.",
    ),
]

PLAN_RESPONSE = (
    "## Visualization Style Guide\n\n"
    + STYLE_GUIDE_TEXT
    + "\n\n"
    + "\n\n".join(f"**Title:** {title}\n**Summary:** {summary}" for title, summary in PLAN_SECTIONS)
)


def _fdv(layout: dict, scale: dict, data: dict, marks: dict) -> FdvSpec:
    return FdvSpec(layout, scale, data, marks)


FDV_SALES = _fdv(
    {
        "Part-A.1": "Single panel 640x420 on white, title 'Global EV Sales Bar Chart "
        "2020-2024' centered at the top with a small source caption bottom-left.",
        "Part-A.2": "Margins 48px left, 24px right; plot area fills the remainder.",
    },
    {
        "Part-B.1": "x-axis: band scale over years 2020-2024 with 20% padding.",
        "Part-B.2": "y-axis: linear 0 to 15 million units, ticks every 3 million.",
    },
    {
        "Part-C.1": "Title text: 'Global EV Sales Bar Chart 2020-2024'.",
        "Part-C.2": "Values in million units: 2020: 3.1, 2021: 6.6, 2022: 10.5, "
        "2023: 13.9, 2024: 14.2.",
        "Part-C.3": "Source line: Global EV Outlook.",
    },
    {
        "Part-D.1": "Vertical bars in deep navy #1f3a5f, 60% band width, amber #e8a33d "
        "highlight on the 2024 bar.",
        "Part-D.2": "Value labels above each bar in 12px sans-serif.",
    },
)

FDV_BATTERY = _fdv(
    {
        "Part-A.1": "Single panel 640x420, title 'Battery Pack Price Trend Line "
        "2015-2024' top-left, white background.",
    },
    {
        "Part-B.1": "x-axis: linear over years 2015-2024.",
        "Part-B.2": "y-axis: linear 0 to 400 USD/kWh with a dashed reference line at 100.",
    },
    {
        "Part-C.1": "Title text: 'Battery Pack Price Trend Line 2015-2024'.",
        "Part-C.2": "USD/kWh by year: 384, 295, 221, 181, 157, 140, 132, 151, 139, 115.",
        "Part-C.3": "Annotation: 'cost-parity threshold 100 USD/kWh'.",
    },
    {
        "Part-D.1": "Single navy #1f3a5f line of width 2.5 with circular markers; the "
        "reference line in gray #8a94a0.",
    },
)

FDV_SHARE = _fdv(
    {
        "Part-A.1": "Single panel 640x420, title 'EV Market Share Pie 2024' centered, "
        "legend on the right edge.",
    },
    {
        "Part-B.1": "Angle scale proportional to share of global volume; color scale "
        "maps regions to the report palette.",
    },
    {
        "Part-C.1": "Title text: 'EV Market Share Pie 2024'.",
        "Part-C.2": "Shares: China 60%, Europe 25%, United States 10%, Rest of world 5%.",
    },
    {
        "Part-D.1": "Donut with 40% inner radius; slices in navy #1f3a5f, amber #e8a33d, "
        "gray #8a94a0, light blue; labels outside with leader lines.",
    },
)


def chart_html(title: str, detail: str) -> str:
    return f"""<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>body {{ margin: 0; background: #ffffff; font-family: sans-serif; }}</style>
</head>
<body>
<h1 style="font-size:18px;color:#1f3a5f;text-align:center">{title}</h1>
<svg id="chart" width="640" height="420" role="img" aria-label="{detail}"></svg>
<script>
  const svg = document.getElementById("chart");
  const note = document.createElementNS("http://www.w3.org/2000/svg", "text");
  note.setAttribute("x", "320");
  note.setAttribute("y", "210");
  note.setAttribute("text-anchor", "middle");
  note.textContent = "{detail}";
  svg.appendChild(note);
</script>
</body>
</html>"""


CHART_CODE = {
    "Global EV Sales Bar Chart 2020-2024": chart_html(
        "Global EV Sales Bar Chart 2020-2024", "bars for 3.1 6.6 10.5 13.9 14.2 million"
    ),
    "Battery Pack Price Trend Line 2015-2024": chart_html(
        "Battery Pack Price Trend Line 2015-2024", "line from 384 down to 115 USD/kWh"
    ),
    "EV Market Share Pie 2024": chart_html(
        "EV Market Share Pie 2024", "donut of 60 25 10 5 percent"
    ),
}

CRITIQUE_OK = (
    "The rendered chart matches the specification: marks are evenly spaced, labels are "
    "legible, margins are tight, and nothing overlaps. No issues found."
)


def draft_response() -> str:
    block = lambda spec: serialize_fdv(spec, delimited=True)
    return f"""## The Adoption Surge

Electric vehicles moved from niche to mainstream in half a decade. Global sales reached \
14.2 million units in 2024, up 35% in a single year \
([Global EV Outlook](https://data.example/ev-outlook-2024)), and battery-electric models \
accounted for 70% of that volume.

{block(FDV_SALES)}

### What the growth is made of

China contributed roughly 60% of worldwide registrations \
([EV Registrations Tracker](https://tracker.example/registrations-q4)), while European \
volumes grew more slowly.

## Regional Divergence

Norway shows where the curve can end: 89% of new cars sold there in 2024 were electric \
([Market Share Atlas](https://atlas.example/market-share-2024)). The EU average stood at \
22% and the United States at 10%, while Brazil and India more than doubled from a low \
base ([Emerging EV Markets](https://emerging.example/briefing-12)).

{block(FDV_SHARE)}

## Battery Economics

The cost story underwrites everything else. Average pack prices fell from 384 USD/kWh in \
2015 to 115 USD/kWh in 2024 \
([Battery Price Survey](https://cells.example/price-survey-2024)), and LFP cells broke \
the 80 USD/kWh line late in the year. The 100 USD/kWh parity threshold \
([Cost Parity Note](https://parity.example/threshold-note)) is in sight.

{block(FDV_BATTERY)}

## Policy Levers

Incentives still shape demand: US federal credits of 7,500 USD contrast with Norwegian \
VAT exemptions ([Incentive Comparison](https://policy.example/incentive-table)). After \
2024, several budgets are shifting from purchase subsidies toward charging \
infrastructure ([Policy Shift Review](https://policy.example/shift-review)), a bet that \
the public charging network, now past 4.5 million points \
([Public Charging Index](https://charge.example/index-2024)), is the next bottleneck.
"""


# -- exemplar report -----------------------------------------------------------

EXEMPLAR_VOLUME_PNG = write_png(64, 40, [(30, 70, 160), (90, 140, 210), (220, 228, 240)])
EXEMPLAR_MODES_PNG = write_png(64, 40, [(150, 60, 40), (220, 150, 60), (245, 235, 220)])

EXEMPLAR_REPORT = """# Weekday traffic in two cities

Urban mobility teams compare corridor volumes to plan signal timing and bus priority.

![Hourly traffic volume](assets/volume.png)

Morning peaks arrive earlier in London than in Chicago, while evening peaks are broader
in both cities. Corridor volumes normalise by lane count before comparison.

![Mode split by corridor](assets/modes.png)

Bus-priority corridors show the strongest shift away from single-occupancy cars, with
cycling holding a stable share across the year.
"""

FDV_VOLUME = _fdv(
    {
        "Part-A.1": "Single panel, title 'Hourly Traffic Volume, London vs Chicago' "
        "top-center, legend top-right.",
    },
    {
        "Part-B.1": "x-axis: linear over hours 0-23; y-axis: linear 0-4000 vehicles/hour.",
    },
    {
        "Part-C.1": "Series London: rises to 3400 at 08:00, dips midday, second peak "
        "2900 at 18:00. Series Chicago: peak 3100 at 09:00, broader evening peak.",
        "Part-C.2": "Legend entries: London, Chicago. Axis labels: Hour of day, "
        "Vehicles per hour.",
    },
    {
        "Part-D.1": "Two lines of width 2, blue for London and orange for Chicago, with "
        "hollow circular markers every two hours.",
    },
)

FDV_MODES = _fdv(
    {
        "Part-A.1": "Single panel, title 'Mode Split by Corridor' top-left, horizontal "
        "stacked layout.",
    },
    {
        "Part-B.1": "x-axis: linear 0-100 percent; y-axis: band scale over five corridors.",
    },
    {
        "Part-C.1": "Corridors A-E with car/bus/cycle/walk shares, car share ranging "
        "52% down to 31% on the bus-priority corridor.",
        "Part-C.2": "Legend: Car, Bus, Cycle, Walk.",
    },
    {
        "Part-D.1": "Horizontal stacked bars, 70% band height, categorical palette with "
        "car in dark red and bus in amber; percentage labels inside segments over 10%.",
    },
)


# -- evaluation bundles --------------------------------------------------------

OURS_SCORES = {
    "informativeness": "4.5",
    "coherence": "4",
    "verifiability": "4",
    "visualization_quality": "5",
    "visualization_consistency": "4",
}
OTHER_SCORES = {
    "informativeness": "3",
    "coherence": "3.5",
    "verifiability": "3",
    "visualization_quality": "4",
    "visualization_consistency": "4",
}
METRIC_ORDER = (
    "informativeness",
    "coherence",
    "verifiability",
    "visualization_quality",
    "visualization_consistency",
)


def verdict_response(a_scores: dict, b_scores: dict) -> str:
    sections = []
    for name, scores in (("report_a", a_scores), ("report_b", b_scores)):
        metric_xml = "\n".join(
            f"    <{m}>\n      <score>{scores[m]}</score>\n      <justification>\n"
            f"        Grounded in the {m.replace('_', ' ')} of the presented report.\n"
            f"      </justification>\n    </{m}>"
            for m in METRIC_ORDER
        )
        sections.append(f"  <{name}>\n{metric_xml}\n  <{name}>")
    return "<evaluation>\n" + "\n".join(sections) + "\n<evaluation>"


# -- scripted transport ----------------------------------------------------------


class ScriptedTransport:
    """Deterministic stand-in for the model provider during recording."""

    def __init__(self):
        self.exemplar_specs: dict[str, FdvSpec] = {
            hashlib.sha256(EXEMPLAR_VOLUME_PNG).hexdigest(): FDV_VOLUME,
            hashlib.sha256(EXEMPLAR_MODES_PNG).hexdigest(): FDV_MODES,
        }
        self.ours_pngs: set[bytes] = set()

    def __call__(self, profile, messages):
        text = "\n".join(
            part.text
            for message in messages
            for part in message.parts
            if isinstance(part, TextPart)
        )
        images = [
            part for message in messages for part in message.parts if isinstance(part, ImagePart)
        ]

        if profile.role == "judge":
            ours_first = bool(images) and images[0].decoded() in self.ours_pngs
            if ours_first:
                return verdict_response(OURS_SCORES, OTHER_SCORES), {}
            return verdict_response(OTHER_SCORES, OURS_SCORES), {}

        if "generate a list of SERP queries" in text:
            if f"<prompt>{TOPIC}</prompt>" in text:
                return QUERIES_ROUND0, {}
            return QUERIES_ROUND1, {}

        if "<query>" in text:
            for keyword, (learnings, questions) in SYNTHESIS_RESPONSES.items():
                if f"<query>{keyword}</query>" in text:
                    return synthesis_text(learnings, questions), {}
            raise RuntimeError(f"no synthesis script for request: {text[:200]}")

        if "extract the design document from the image" in text:
            digest = hashlib.sha256(images[0].decoded()).hexdigest()
            spec = self.exemplar_specs.get(digest)
            if spec is None:
                raise RuntimeError("design extraction requested for unknown image")
            return (
                "Here is the extracted design document.\n\n"
                + serialize_fdv(spec, delimited=True)
            ), {}

        if "create a structured outline" in text:
            return PLAN_RESPONSE, {}

        if "interleaved texts and visualization" in text:
            return draft_response(), {}

        if "I need a professional HTML visualization" in text:
            for marker, code in CHART_CODE.items():
                if marker in text:
                    return f"```html\n{code}\n```", {}
            raise RuntimeError(f"no chart code script for request: {text[:200]}")

        if "Here is a screenshot of the page" in text:
            return CRITIQUE_OK, {}

        raise RuntimeError(f"scripted transport has no rule for: {text[:200]}")


# -- builders --------------------------------------------------------------------


def build_corpus(root: Path) -> None:
    if root.exists():
        shutil.rmtree(root)
    corpus = FixtureCorpus(root)
    for keyword, pages in CORPUS_PAGES.items():
        for rank, (url, title, body) in enumerate(pages, start=1):
            corpus.write_page(keyword, rank, url, title, body)


def build_exemplars(root: Path) -> None:
    if root.exists():
        shutil.rmtree(root)
    folder = root / "city-traffic"
    (folder / "assets").mkdir(parents=True)
    (folder / "report.md").write_text(EXEMPLAR_REPORT, encoding="utf-8")
    (folder / "assets" / "volume.png").write_bytes(EXEMPLAR_VOLUME_PNG)
    (folder / "assets" / "modes.png").write_bytes(EXEMPLAR_MODES_PNG)


def build_manifests(root: Path) -> None:
    root.mkdir(parents=True, exist_ok=True)
    sample = [
        ("Technology & Media", "How smartphone use has changed among teenagers"),
        ("Agriculture & Food", "Global trends in plant-based protein consumption"),
        ("Travel", "The recovery of international tourism after 2020"),
        ("Population", "Urbanization trends across continents"),
        ("Healthcare", "The global burden of diabetes"),
        ("Public Sector", "Open government data adoption worldwide"),
        ("Energy", TOPIC),
        ("Climate & Environment", "Progress on global reforestation efforts"),
        ("Education", "Literacy rate progress in developing countries"),
        ("Economy & Work", "The rise of remote work since 2020"),
    ]
    lines = [f"{category}\t{topic}" for category, topic in sample]
    (root / "topics.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    eval_lines = [f"Energy\t{TOPIC}", f"Technology & Media\t{EVAL_TOPIC_2}"]
    (root / "eval-topics.tsv").write_text("\n".join(eval_lines) + "\n", encoding="utf-8")


def synthetic_bundle(folder: Path, title: str, charts: list[tuple[str, bytes]]) -> None:
    (folder / "charts").mkdir(parents=True, exist_ok=True)
    pieces = [f"## {title}\n\nA compact report used as a judging fixture.\n"]
    manifest = []
    for index, (caption, png) in enumerate(charts, start=1):
        (folder / "charts" / f"chart_{index}.png").write_bytes(png)
        pieces.append(f"![{caption}](charts/chart_{index}.png)\n\n*{caption}*\n")
        manifest.append(
            {
                "ordinal": index,
                "caption": caption,
                "failed": False,
                "final_version": 0,
                "versions": 1,
                "iterations": 1,
                "selection_used": False,
            }
        )
    (folder / "report.md").write_text("\n".join(pieces), encoding="utf-8")
    (folder / "manifest.meta").write_text(
        json.dumps({"charts": manifest}, indent=2) + "\n", encoding="utf-8"
    )


def build_bundles(root: Path, pipeline_outdir: Path) -> tuple[Path, Path, Path, Path]:
    if root.exists():
        shutil.rmtree(root)
    slug1 = keyword_slug(TOPIC)[:48]
    slug2 = keyword_slug(EVAL_TOPIC_2)[:48]
    ours1 = root / "ours" / slug1
    other1 = root / "other" / slug1
    ours2 = root / "ours" / slug2
    other2 = root / "other" / slug2

    # ours/topic1 is the genuine pipeline output bundle
    (ours1 / "charts").mkdir(parents=True)
    for name in ("report.md", "manifest.meta", "learnings.meta"):
        shutil.copy2(pipeline_outdir / name, ours1 / name)
    for chart in sorted((pipeline_outdir / "charts").glob("chart_*.png")):
        shutil.copy2(chart, ours1 / "charts" / chart.name)

    synthetic_bundle(
        other1,
        "Electric vehicles: a brief baseline survey",
        [("bar chart of sales", write_png(64, 48, [(120, 120, 130), (180, 180, 190)]))],
    )
    synthetic_bundle(
        ours2,
        "Fiber broadband expansion",
        [
            ("line chart of coverage", write_png(64, 48, [(20, 90, 60), (60, 170, 120)])),
            ("bar chart of subscriptions", write_png(64, 48, [(10, 60, 40), (90, 200, 150)])),
        ],
    )
    learnings2 = {
        "topic": EVAL_TOPIC_2,
        "goal_trail": ["Map fiber coverage growth."],
        "round_breadths": [2],
        "learnings": [
            {
                "text": "Fiber passed 1.4 billion premises worldwide in 2024 "
                "([Fiber Atlas](https://fiber.example/atlas))",
                "citations": ["https://fiber.example/atlas"],
            }
        ],
        "references": [["https://fiber.example/atlas", "Fiber Atlas"]],
    }
    (ours2 / "learnings.meta").write_text(
        json.dumps(learnings2, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    synthetic_bundle(
        other2,
        "Broadband notes",
        [("pie of technologies", write_png(64, 48, [(140, 60, 140), (200, 140, 200)]))],
    )
    return ours1, other1, ours2, other2


def depermutation_seeds() -> tuple[int, int]:
    first = next(seed for seed in range(1000, 1100) if ours_first_for_seed(seed))
    second = next(seed for seed in range(1000, 1100) if not ours_first_for_seed(seed))
    return first, second


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repo-root", type=Path, default=REPO_ROOT)
    args = parser.parse_args()
    root: Path = args.repo_root

    corpus_dir = root / "corpus"
    exemplars_dir = root / "exemplars"
    fixtures_dir = root / "fixtures"
    manifests_dir = root / "manifests"
    bundles_dir = root / "bundles"

    build_corpus(corpus_dir)
    build_exemplars(exemplars_dir)
    build_manifests(manifests_dir)
    if fixtures_dir.exists():
        shutil.rmtree(fixtures_dir)
    fixtures_dir.mkdir(parents=True)

    transport = ScriptedTransport()
    config = RunConfig(mode="record", seed=EVAL_BASE_SEED)
    config.paths.fixtures = fixtures_dir
    config.paths.corpus = corpus_dir
    config.paths.exemplars = exemplars_dir
    config.render = RenderOptions(
        **REPLAY_RENDER, browser_command=(sys.executable, str(STUB_BROWSER))
    )
    gateway = Gateway(mode="record", store=RecordStore(fixtures_dir), transport=transport)
    backend = FixtureCorpus(corpus_dir)

    with tempfile.TemporaryDirectory() as tmp:
        outdir = Path(tmp) / "run"
        outdir.mkdir()
        exemplars = ExemplarLibrary(exemplars_dir).load_all(gateway, config.profiles.vision)
        with RenderHarness(config.render) as harness:
            run = run_report_pipeline(
                config, TOPIC, gateway, backend, harness, exemplars, outdir
            )
        print(f"pipeline recorded: {len(run.final.chart_files)} charts")
        ours1, other1, ours2, other2 = build_bundles(bundles_dir, outdir)

    # judge transcripts: the two evaluation seeds plus one seed per order for
    # the de-permutation check
    for bundle in (ours1, ours2):
        for chart in (bundle / "charts").glob("chart_*.png"):
            transport.ours_pngs.add(chart.read_bytes())

    seed_first, seed_second = depermutation_seeds()
    judge_calls = [
        (TOPIC, ours1, other1, EVAL_BASE_SEED),
        (EVAL_TOPIC_2, ours2, other2, EVAL_BASE_SEED + 1),
        (TOPIC, ours1, other1, seed_first),
        (TOPIC, ours1, other1, seed_second),
    ]
    for topic, ours, other, seed in judge_calls:
        learnings = load_learnings(ours)
        verdict, order = judge_pair(
            gateway,
            config.profiles.judge,
            topic,
            format_learnings(learnings.learnings),
            ours,
            other,
            seed,
        )
        print(f"judged seed={seed} order={order}")

    meta = {
        "topic": TOPIC,
        "eval_topic_2": EVAL_TOPIC_2,
        "eval_base_seed": EVAL_BASE_SEED,
        "depermutation_seeds": [seed_first, seed_second],
        "render": REPLAY_RENDER,
    }
    (fixtures_dir / "meta.json").write_text(
        json.dumps(meta, indent=2) + "\n", encoding="utf-8"
    )
    records = len(list(fixtures_dir.glob("*.record")))
    print(f"fixture store: {records} records")
    return 0


if __name__ == "__main__":
    sys.exit(main())
