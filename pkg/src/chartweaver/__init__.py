"""Topic-to-multimodal-report pipeline with deterministic record/replay testing.

The package researches a topic through pluggable search and model backends,
plans and drafts a report whose charts are written as structured textual
descriptions, compiles each description to a rendered chart image through an
actor-critic refinement loop, assembles the final text-chart interleaved
bundle, and can judge pairs of such bundles with a multimodal model.
"""

__version__ = "0.1.0"
