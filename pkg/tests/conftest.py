from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from botscope.pipeline import PipelineConfig, run_pipeline  # noqa: E402
from botscope.synthetic import generate_synthetic_log, reference_spec, write_synthetic  # noqa: E402

REFERENCE_CONFIG = {
    "inputs": [{"path": "events.jsonl"}],
    "bot_scores": {"source": "file", "path": "bot_scores.csv"},
    "stance": {"source": "partition", "seeds": "seeds.csv"},
    "toxicity": {"scorer": "stub"},
}


def write_reference_inputs(data, directory: Path) -> Path:
    """Dataset files plus a config.json next to them; returns the config path."""
    write_synthetic(data, directory)
    cfg = directory / "config.json"
    cfg.write_text(json.dumps(REFERENCE_CONFIG, indent=2))
    return cfg


@pytest.fixture(scope="session")
def reference_data():
    return generate_synthetic_log(reference_spec())


@pytest.fixture(scope="session")
def reference_inputs(reference_data, tmp_path_factory):
    return write_reference_inputs(reference_data, tmp_path_factory.mktemp("reference_inputs"))


@pytest.fixture(scope="session")
def reference_run(reference_inputs, tmp_path_factory):
    return run_pipeline(PipelineConfig.load(reference_inputs), tmp_path_factory.mktemp("reference_run"))


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance.RESULTS):
            terminalreporter.write_line(line)
