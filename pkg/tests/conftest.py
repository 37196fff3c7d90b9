import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
REPO_ROOT = TESTS_DIR.parent

sys.path.insert(0, str(TESTS_DIR))
sys.path.insert(0, str(REPO_ROOT / "tools"))


@pytest.fixture
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture
def replay_ini(tmp_path: Path) -> Path:
    """Config file for replay runs against the committed fixture world."""
    from make_fixtures import REPLAY_RENDER, STUB_BROWSER

    text = f"""[run]
mode = replay
seed = 7

[render]
width = {REPLAY_RENDER["width"]}
height = {REPLAY_RENDER["height"]}
scale = {REPLAY_RENDER["scale"]}
settle_ms = {REPLAY_RENDER["settle_ms"]}
timeout_s = {REPLAY_RENDER["timeout_s"]}
poll_interval_s = {REPLAY_RENDER["poll_interval_s"]}
browser_command = {sys.executable} {STUB_BROWSER}

[paths]
fixtures = {REPO_ROOT / "fixtures"}
corpus = {REPO_ROOT / "corpus"}
exemplars = {REPO_ROOT / "exemplars"}
out = {tmp_path / "runs"}
eval_out = {tmp_path / "eval"}
"""
    path = tmp_path / "replay.ini"
    path.write_text(text, encoding="utf-8")
    return path
