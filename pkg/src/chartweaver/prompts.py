"""Prompt templates for every model call in the pipeline.

Templates carry ``{name}`` placeholders filled by :func:`fill`; literal JSON
braces in the chart-description format examples are left untouched because
only ``{lowercase_identifier}`` tokens are substituted.
"""

from __future__ import annotations

import re

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


def fill(template: str, **values: str) -> str:
    """Substitute every placeholder; unknown or leftover names are errors."""
    unused = set(values)

    def sub(match: re.Match) -> str:
        name = match.group(1)
        if name not in values:
            raise KeyError(f"template placeholder {{{name}}} not provided")
        unused.discard(name)
        return values[name]

    filled = _PLACEHOLDER_RE.sub(sub, template)
    if unused:
        raise KeyError(f"unused template values: {sorted(unused)}")
    return filled


RESEARCHER_SYSTEM = """\
You are an expert researcher. Follow these instructions when responding:
- You may be asked to research subjects that is after your knowledge cutoff, assume the user is right when presented with news.
- The user is a highly experienced analyst, no need to simplify it, be as detailed as possible and make sure your response is correct.
- Be highly organized.
- Suggest solutions that I didn't think about.
- Be proactive and anticipate my needs.
- Treat me as an expert in all subject matter.
- Mistakes erode my trust, so be accurate and thorough.
- Provide detailed explanations, I'm comfortable with lots of detail.
- Value good arguments over authorities, the source is irrelevant.
- Consider new technologies and contrarian ideas, not just the conventional wisdom.
- You may use high levels of speculation or prediction, just flag it for me."""

SERP_QUERIES_USER = """\
Given the following prompt from the user, generate a list of SERP queries to research the topic. Return a maximum of {queries_num} queries, but feel free to return less if the original prompt is clear.
Make sure each query is unique and not similar to each other:
<prompt>{query}</prompt>
Here are some learnings from previous research:
{learning_str}

Format your response as a numbered list with one query per line. After the list, state the next overarching research goal on a single line beginning with "Goal:"."""

LEARNINGS_USER = """\
Given the following contents from a SERP search for the query <query>{query}</query>, generate a list of learnings from the contents.
Return a maximum of {learning_num} learnings, but feel free to return less if the contents are clear. Make sure each learning is unique and not similar to each other. The learnings should be concise and to the point, as detailed and information dense as possible.
Please seamlessly incorporate references to external sources using Markdown hyperlinks.
Make sure to include any entities like people, places, companies, products, things, etc in the learnings, as well as any exact metrics, numbers, or dates. The learnings will be used to research the topic further.
Extract all meaningful data available in the contents, including any tables or lists, and explictly contain them in the learnings.
In addition, return a list of follow-up questions to research the topic further, max of {question_num}.
<contents>
{contents}
</contents>

Format your response with a "Learnings:" line followed by a numbered list, then a "Follow-up questions:" line followed by a numbered list."""

_FORMAT_BLOCK = """\
<visualization>
{
"Part-A: Overall Layout": {
"Part-A.1": "...",
"Part-A.2": "...",
...
},
"Part-B: Plotting Scale": {
"Part-B.1": "...",
"Part-B.2": "...",
...
},
"Part-C: Data": {
"Part-C.1": "...",
"Part-C.2": "...",
...
},
"Part-D: Marks": {
"Part-D.1": "...",
"Part-D.2": "...",
...
}
}
<visualization>"""

DESIGN_EXTRACT_SYSTEM = """\
You are a visualization design expert. You will be given a visualization image, and your task is to extract the design document from the image. The design document should include the overall layout, plotting scale, data transform, and marks used in the visualization. Your description should be detailed enough that someone could accurately recreate the visualization based solely on your specifications."""

DESIGN_EXTRACT_USER = (
    """\
Extract a comprehensive and precise visualization design specification from the given image. Capture all visual elements, data representations, and design choices with exact measurements, positions, and relationships. Ignore branding elements like company logos or trademarks.
## Overall Format
The format of the design document must strictly follow the following format:
"""
    + _FORMAT_BLOCK
    + """

## Explanation for Each Part:
### Part-A: Overall Layout
* Description of the overall figure dimensions, margins, and background
* If there are multiple subplots, also describe the detailed breakdown of main component layout and positioning.
* Description of title, subtitle, and caption placements with specific alignments
* Analysis of whitespace usage and component spacing hierarchies

### Part-B: Plotting Scale
Describe each scale used (such as x-axis scale, y-axis scale, color scale). Be specific in the position, formatting, size and shape.

### Part-C: Data
Comprehensive listing of **ALL** exact data represented in the visualization. This includes titles, subtitles, axis labels, legends, and any other text or numerical data.

### Part-D: Marks
* Complete specification of all primary visual marks (bars, lines, points) with exact sizes.
* Text label specifications (font, size, weight, positioning relative to marks)
* Interaction between marks including overlaps, nestings, or connections
* Annotations, highlights, or emphasis techniques
* Color usage patterns and semantic meanings
* Text alignment and spacing patterns"""
)

OUTLINE_SYSTEM = """\
You an expert report-generation assistant specialized in creating professional documents that combine insightful analysis with diverse visualizations. Your purpose is to help users transform raw information into polished, presentation-ready reports.
Below are a list of professional reports for your reference.
## Example Reports
{example_reports}"""

OUTLINE_USER = """\
Using the provided topic and previous learnings, please create a structured outline for a comprehensive report. The outline should present a logical narrative flow that thoroughly explores the subject matter. Please do NOT include introduction or conclusion sections.
## Input

**Topic**
{topic}

**Previous learnings**
{learning_str}

## Requirements

The outline should feature:
* 4-6 distinct sections forming a cohesive narrative progression
* Clear identification of key insights and report points within each section
* Minimal conceptual overlap between sections, with each section addressing unique aspects
* A clear and logical flow of ideas, ensuring that section are connected rather than isolated

## Deliverable Format

For each section, please provide:

**Title:** A concise, engaging heading that captures the section's essence
**Summary:** A brief narrative (3-5 sentences) synthesizing the key points and insights
## Visualization Style Guide

Before detailing individual sections, please provide a foundational style guide for visualizations that ensures consistency while accommodating different concepts, including:

* **Base Design Elements:** Color palatte for common concepts across charts. Use color coding and information hierarchy of professional industry reports that resembles the style of example reports
This style guide should offer flexible guidelines rather than rigid specifications, allowing each visualization to effectively represent its concept while maintaining overall visual cohesion."""

REPORT_SYSTEM = (
    """\
You an expert report-generation assistant specialized in creating professional text-image interleaved documents that combine insightful analysis with diverse visualizations.
When visualization is needed, generate a comprehensive and precise visualization design specification. Include all visual elements, data representations, and design choices with exact measurements, positions, and relationships.

## Visualization format
The format of the design document must strictly follow the following format:
"""
    + _FORMAT_BLOCK
    + """

## Explanation for Each Part:
### Part-A: Overall Layout
* Description of the overall figure dimensions, margins, and background
* If there are multiple subplots, also describe the detailed breakdown of main component layout and positioning.
* Description of title, subtitle, and caption placements with specific alignments
* Analysis of whitespace usage and component spacing hierarchies
* Consider creating composite visualizations where appropriate (for example, combining line and bar charts within a single subplot to enhance data comparison and maximize visual space).

### Part-B: Plotting Scale
Describe each scale used (such as x-axis scale, y-axis scale, color scale). Be specific in the position, formatting, size and shape.

### Part-C: Data
* Comprehensive listing of **ALL** necessary data for visualization. **ALL** data should be present or can be derived from provided learnings. Do not create fake data or add placeholders.
* Appropriate texts, including titles, subtitles, axis labels, legends and moderate amount of annotations.

### Part-D: Marks
* Complete specification of all primary visual marks (bars, lines, points) with exact sizes.
* Text label specifications (font, size, weight, positioning relative to marks)
* Interaction between marks including overlaps, nestings, or connections
* Annotations, highlights, or emphasis techniques
* Color usage patterns and semantic meanings
* Text alignment and spacing patterns

Below are a list of professional reports for your reference. Follow the style, including the layout, infomation hierarchy, stress of the visualization designs in these reports.
## Example Reports
{example_reports}"""
)

REPORT_USER = """\
Please generate a detailed report with interleaved texts and visualization based on the topic, outline and previous learnings.
## Input
### Topic of the report
{topic}

### Outline for the report
{outline}

### Previous learnings
{learning_str}

### Visualization Style Guide
{visualization_style_guide}

## Guidelines
- When referencing the knowledge provided, include a Markdown hyperlink at the appropriate position using the source URL provided
- Maintain a professional, academic tone throughout
- Use second-level (##) headings for the section title, and third-level (###) headings for subsections
- only utilize data available in the previous learnings part. Do not create fake data or add placeholders."""

CHART_CODE_SYSTEM = """\
You are a HTML, D3.js V7 implementation expert who transforms visualization designs into working code. You write clean, efficient HTML and D3.js code to create data visualizations exactly as specified. You follow D3.js best practices, optimize for performance, and ensure responsive design across devices."""

CHART_CODE_USER = """\
I need a professional HTML visualization to convey insight based on provided visualization design specification. Please implement with html and d3.js according to the specifications below.
**Visualization Design Specification**
{chart_design}
**Visualization Style Guide**
{visualization_style_guide}
## Implementation Requirements
- Ensure the visualization is located at the center and there is no large empty space
- The top-level wrapper should have no box-shadow, no margin, and no visible borders
- Use icons from font-awesome with <i> tag and corresponding class name when needed
- Highlight key numbers with larger font size, font-family: 'Georgia', and deeper colors

IMPORTANT: Deliver your solution as a complete, self-contained HTML file enclosed in a code block starting with "```html" and ending with "```" to ensure I can extract it properly."""

CHART_EVAL_USER = """\
Here is a screenshot of the page rendered by the HTML code, along with any console messages that may contain errors. Please examine the image thoroughly and report any problems you find.
Specifically check for these common rendering issues:

1. Placeholder content: Does the image contain placeholder text (e.g., "Lorem ipsum", "Chart title", "Sample data") instead of actual content?
2. Excessive annotations: Are there too many annotations or labels that clutter the visualization?
3. Overlapping elements: Do any text labels, legends, data points or other elements overlap, making content unreadable?
4. Sizing problems: Is the visualization too small to be readable or too large for its container? Does it have appropriate dimensions?
5. Excessive margins: Are there large empty spaces around the visualization?

## Console Message
{console_message}

For each issue found, provide:
1. A clear description of the issue
2. The specific location in the image where it occurs
3. Relevent elements that cause the issue

Focus on learning issues. If no issues are found, end your response with "No issues found." """

SATISFIED_SENTINEL = "No issues found."

CHART_REGEN_USER = """\
Here is the previous HTML code:
```html
{previous_code}
```

## Console Message
{console_message}

## Evaluation
{feedback}

Based on the above evaluation, please regenerate the complete HTML code with all necessary fixes implemented. Ensure the new code:

1. Addresses all the issues you identified
2. Maintains the overall functionality and design intent
3. Is complete and ready to run without additional modifications

Specifically:
1. Remove redundant or overlapping annotations that don't add critical information
2. Reposition remaining annotations to ensure clear visibility and logical placement
3. Adjust chart dimensions or add annotations to increase overall size and eliminate excessive margins
4. Reduce the size of specific elements to prevent overlapping between components
5. Expand container dimensions to fully display truncated content

IMPORTANT: Deliver your solution as a complete, self-contained HTML file enclosed in a code block starting with "```html" and ending with "```" to ensure I can extract it properly."""

CHART_SELECT_SYSTEM = """\
You are an expert in data visualization design. Your task is to evaluate the provided images based on the given design specification and select the most appropriate one."""

CHART_SELECT_USER = """\
Here are a visualization design specification and two charts that implement the specification, please identify which one best meets the following criteria:
* Most closely matches the design specification requirements
* Offers optimal readability (e.g., has least isses regarding overlapping, elements are of appropriate size and margin)

## Visualization Design Specification
{chart_design}
## Response Format
Return your response in the following format:

<evaluation>
[Your evaluation of the charts]
</evaluation>

<selection>
[first or second]
</selection>"""

JUDGE_SYSTEM = """\
You are an expert evaluator of AI-generated reports with advanced knowledge of data visualization and information analysis. Your role is to provide fair, impartial assessments of report quality based strictly on objective criteria.

## Evaluation Task
You will evaluate two AI-generated reports based on:
- The overarching topic
- Research learnings from internet searches that are used as source of information for the reports

For each criterion below, assign a score from 1-5 (1=poor, 5=excellent) with half-point increments allowed (e.g., 3.5). Provide a concise, evidence-based justification for each score, highlighting specific examples that demonstrate meaningful distinctions in quality between the reports. Your evaluation should clearly articulate why one report receives a higher or lower score than another based on observable differences in content, structure, or analysis. Be cautious with extreme scores (1 and 5).

## Evaluation Criteria
### Informativeness and Depth: Does the report deliver comprehensive, substantive and thorough information?
Score 1: Extremely superficial content with minimal information. Contains only basic facts without context or explanation.
Score 2: Limited content with some relevant information but significant gaps. Lacks necessary depth on key aspects.
Score 3: Adequate information covering main points with some supporting details, but missing opportunities for deeper analysis.
Score 4: Comprehensive information with substantive details, examples, and insights across most sections.
Score 5: Exceptionally thorough coverage with rich, nuanced details, expert-level insights, and well-contextualized information throughout.

### Coherence and Organization: Is the report well-organized with visualizations that connect meaningfully to the text?
Score 1: Disorganized; lacks logical structure and coherence. Visualizations appear random and unconnected to text.
Score 2: Basic structure present but with awkward transitions. Visualizations loosely connected to surrounding content.
Score 3: Clear overall organization with occasional flow issues. Visualizations generally support the text but integration could be improved.
Score 4: Well-structured with smooth transitions between sections. Visualizations meaningfully integrated with text content.
Score 5: Impeccable organization with seamless progression of sections. Visualizations perfectly complement and enhance textual narrative.

### Verifiability: Does the infomation of the reports can be verified with citations?
Score 1: Rarely supported with evidence; many claims are unsubstantiated
Score 2: Inconsistently verified; some claims are supported; evidence is occasionally provided
Score 3: Generally verified; claims are usually supported with evidence; however, there might be a few instances where verification is lacking
Score 4: Well-supported; claims are very well supported with credible evidence, and instances of unsupported claims are rare.
Score 5: Very well-supported; almost every claim is substantiated with credible evidence, showing a high level of thorough verification.

### Visualization Quality: Do the visualizations in the report have excellent quality?
Score 1: Poor visualizations that confuse rather than clarify. Inappropriate chart types, missing labels, or misleading representations.
Score 2: Basic visualizations with few annotations or explanations; functional issues (e.g., unclear axes, poor color choices) hinder interpretation.
Score 3: Adequate visualizations with labels and annotations that communicate data clearly but lack refinement or miss opportunities for improved insight.
Score 4: Well-executed visualizations with great visual appeal, clear labeling and annotations, and thoughtful design choices.
Score 5: Expert-level visualizations that reveal insights through masterful design, appropriate annotations, and careful attention to visual communication principles

### Visualization Consistency: Do the visualizations in the report maintain a consistent style?
Score 1: No visual consistency. Charts use different color palettes, conflicting typography, inconsistent information hierarchy, and varying design treatments (such as different border styles, background treatments, or legend placements).
Score 2: Minimal consistency with obvious style variations across visualizations. While some basic elements might align, there are clear discrepancies in color usage, information organization, axis formatting, or label treatments.
Score 3: Moderate consistency with a partially unified approach. Most visualizations share similar color schemes and basic formatting, but variations exist in how information hierarchy is presented, how emphasis is applied, or how supporting elements are styled.
Score 4: Strong consistency with cohesive design elements. Visualizations share a clear color system, consistent information hierarchy, and unified styling approach, with only minor variations that don't distract from the report's overall visual flow.
Score 5: Perfect consistency across all visualizations with a meticulously applied design system. Unified color palette used purposefully to highlight key information, consistent information hierarchy that guides the viewer's attention appropriately, identical typography treatment, and harmonious spacing, scale, and proportion across all charts and graphics.

## Response Format:
Please give your response in the following XML format:

<evaluation>
  <report_a>
    <informativeness>
      <score>X</score>
      <justification>
        Provide a brief justification here
      </justification>
    </informativeness>
    <coherence>
      <score>X</score>
      <justification>
        Provide a brief justification here
      </justification>
    </coherence>
    <verifiability>
      <score>X</score>
      <justification>
        Provide a brief justification here
      </justification>
    </verifiability>
    <visualization_quality>
      <score>X</score>
      <justification>
        Provide a brief justification here
      </justification>
    </visualization_quality>
    <visualization_consistency>
      <score>X</score>
      <justification>
        Provide a brief justification here
      </justification>
    </visualization_consistency>
  </report_a>
  <report_b>
    <!-- The same as above -->
  </report_b>
</evaluation>"""

JUDGE_USER_HEADER = """\
## Topic:
{topic}
## learnings:
{learnings_str}
"""

CHART_CLASSIFY_USER = """\
Classify the chart shown in the image as exactly one of the following types:
bar, line, pie, scatter, bubble, sankey, choropleth, flowchart, dashboard, infographic, others

Respond with only the single type label."""
