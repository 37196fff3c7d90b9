"""Run configuration: INI-style config file with flag overrides (flags win)."""

from __future__ import annotations

import configparser
import shlex
from dataclasses import dataclass, field
from pathlib import Path

from .forge import RefineConfig
from .gateway import ModelProfile
from .render import RenderOptions
from .research import ResearchConfig

MODES = ("live", "record", "replay")


class ConfigError(Exception):
    pass


@dataclass
class ModelProfiles:
    text: ModelProfile = field(
        default_factory=lambda: ModelProfile("text_model", "gpt-4o-mini", temperature=0.7)
    )
    vision: ModelProfile = field(
        default_factory=lambda: ModelProfile("vision_model", "claude-3.7-sonnet", temperature=0.0)
    )
    judge: ModelProfile = field(
        default_factory=lambda: ModelProfile("judge", "gpt-4.1", temperature=0.0)
    )


@dataclass
class RunPaths:
    out: Path = Path("runs")
    eval_out: Path = Path("eval")
    exemplars: Path = Path("exemplars")
    corpus: Path | None = None
    fixtures: Path | None = None


@dataclass
class RunConfig:
    mode: str = "live"
    seed: int | None = None
    run_id: str | None = None
    parallel_charts: int = 2
    base_url: str = "https://api.openai.com/v1"
    search_backend: str = "auto"  # auto | live | corpus
    search_base_url: str = "https://api.firecrawl.dev"
    requests_per_minute: dict[str, int] = field(default_factory=dict)
    profiles: ModelProfiles = field(default_factory=ModelProfiles)
    research: ResearchConfig = field(default_factory=ResearchConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    render: RenderOptions = field(default_factory=RenderOptions)
    paths: RunPaths = field(default_factory=RunPaths)

    def resolved_search_backend(self) -> str:
        if self.search_backend != "auto":
            return self.search_backend
        return "corpus" if self.mode == "replay" or self.paths.corpus else "live"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        try:
            self.research.validate()
            self.refine.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.parallel_charts < 1:
            raise ConfigError("parallel_charts must be >= 1")
        if self.mode == "replay":
            if self.seed is None:
                raise ConfigError("replay mode requires an explicit seed")
            if self.paths.fixtures is None or not Path(self.paths.fixtures).is_dir():
                raise ConfigError("replay mode requires an existing fixtures directory")
            if self.resolved_search_backend() == "corpus" and (
                self.paths.corpus is None or not Path(self.paths.corpus).is_dir()
            ):
                raise ConfigError("replay mode requires an existing corpus directory")


def _get(parser: configparser.ConfigParser, section: str, key: str, fallback=None):
    if parser.has_option(section, key):
        value = parser.get(section, key).strip()
        return value if value else fallback
    return fallback


def load_config(path: Path | str | None) -> RunConfig:
    """Parse the declarative config file; missing file yields defaults."""
    config = RunConfig()
    if path is None:
        return config
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"config file not found: {path}")

    mode = _get(parser, "run", "mode")
    if mode:
        config.mode = mode
    seed = _get(parser, "run", "seed")
    if seed is not None:
        config.seed = int(seed)
    config.run_id = _get(parser, "run", "run_id", config.run_id)
    parallel = _get(parser, "run", "parallel_charts")
    if parallel is not None:
        config.parallel_charts = int(parallel)

    config.base_url = _get(parser, "models", "base_url", config.base_url)
    profiles = {}
    for name, role in (("text", "text_model"), ("vision", "vision_model"), ("judge", "judge")):
        current: ModelProfile = getattr(config.profiles, name)
        endpoint = _get(parser, "models", f"{name}_endpoint", current.endpoint)
        temperature = _get(parser, "models", f"{name}_temperature")
        max_tokens = _get(parser, "models", f"{name}_max_tokens")
        profiles[name] = ModelProfile(
            role,
            endpoint,
            temperature=float(temperature) if temperature is not None else current.temperature,
            max_tokens=int(max_tokens) if max_tokens is not None else current.max_tokens,
        )
        rpm = _get(parser, "models", f"{name}_requests_per_minute")
        if rpm is not None:
            config.requests_per_minute[role] = int(rpm)
    config.profiles = ModelProfiles(**profiles)

    research_kwargs = {}
    for key, attr in (
        ("rounds", "rounds"),
        ("breadth", "initial_breadth"),
        ("pages_per_keyword", "pages_per_keyword"),
        ("learnings_per_keyword", "learnings_per_keyword"),
        ("max_questions", "max_questions"),
    ):
        value = _get(parser, "research", key)
        if value is not None:
            research_kwargs[attr] = int(value)
    if research_kwargs:
        config.research = ResearchConfig(
            **{**config.research.__dict__, **research_kwargs}
        )

    nmax = _get(parser, "refine", "max_rounds")
    if nmax is not None:
        config.refine = RefineConfig(max_rounds=int(nmax))

    render_kwargs = {}
    for key, cast in (
        ("width", int),
        ("height", int),
        ("scale", int),
        ("settle_ms", int),
        ("timeout_s", float),
        ("poll_interval_s", float),
        ("browser_path", str),
    ):
        value = _get(parser, "render", key)
        if value is not None:
            render_kwargs[key] = cast(value)
    command = _get(parser, "render", "browser_command")
    if command is not None:
        render_kwargs["browser_command"] = tuple(shlex.split(command))
    if render_kwargs:
        config.render = RenderOptions(**{**config.render.__dict__, **render_kwargs})

    for key in ("out", "eval_out", "exemplars", "corpus", "fixtures"):
        value = _get(parser, "paths", key)
        if value is not None:
            setattr(config.paths, key, Path(value))

    backend = _get(parser, "search", "backend")
    if backend is not None:
        config.search_backend = backend
    config.search_base_url = _get(parser, "search", "base_url", config.search_base_url)
    return config


def apply_flag_overrides(config: RunConfig, args) -> RunConfig:
    """Command-line flags beat the config file."""
    if getattr(args, "mode", None):
        config.mode = args.mode
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "out", None):
        config.paths.out = Path(args.out)
    if getattr(args, "run_id", None):
        config.run_id = args.run_id
    if getattr(args, "breadth", None) is not None:
        config.research = ResearchConfig(
            **{**config.research.__dict__, "initial_breadth": args.breadth}
        )
    if getattr(args, "depth", None) is not None:
        config.research = ResearchConfig(**{**config.research.__dict__, "rounds": args.depth})
    if getattr(args, "nmax", None) is not None:
        config.refine = RefineConfig(max_rounds=args.nmax)
    if getattr(args, "parallel_charts", None) is not None:
        config.parallel_charts = args.parallel_charts
    if getattr(args, "browser", None):
        config.render = RenderOptions(
            **{**config.render.__dict__, "browser_path": args.browser}
        )
    if getattr(args, "fixtures", None):
        config.paths.fixtures = Path(args.fixtures)
    if getattr(args, "corpus", None):
        config.paths.corpus = Path(args.corpus)
    if getattr(args, "exemplars", None):
        config.paths.exemplars = Path(args.exemplars)
    return config
