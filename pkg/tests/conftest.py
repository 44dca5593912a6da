"""Shared fixtures: both demo cases are materialized and replayed once.

The two scripted sessions are expensive enough (a few hundred artifact
writes each) that every module asserting against them shares one run.
The suite as a whole must pass with no network access, so an autouse
guard refuses every socket connection attempt.
"""

from __future__ import annotations

import socket
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pytest
from hypothesis import settings

from txpostmortem import scenarios
from txpostmortem.orchestrator import Orchestrator, SessionOutcome
from txpostmortem.scenarios import CaseBundle

SUITE_STARTED = time.monotonic()

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")

DATA_DIR = Path(__file__).parent / "data"


@dataclass
class ReplayRun:
    """One scripted end-to-end session plus everything assertions need."""

    bundle: CaseBundle
    outcome: SessionOutcome
    doc: dict[str, Any]
    elapsed: float

    @property
    def session_root(self) -> Path:
        return self.outcome.session.root


def run_case(name: str, root: Path) -> ReplayRun:
    bundle = scenarios.CASE_BUILDERS[name](root / name)
    orch = Orchestrator(
        backend=bundle.backend(), adapter=bundle.adapter(), runner=bundle.runner()
    )
    started = time.monotonic()
    outcome = orch.run_postmortem(bundle.seed(), str(root / name / "runs"))
    return ReplayRun(
        bundle=bundle,
        outcome=outcome,
        doc=outcome.summary_doc(),
        elapsed=time.monotonic() - started,
    )


@pytest.fixture(autouse=True, scope="session")
def no_network():
    real_connect = socket.socket.connect

    def refused(self, address):
        raise RuntimeError(f"test attempted a network connection: {address!r}")

    socket.socket.connect = refused
    try:
        yield
    finally:
        socket.socket.connect = real_connect


@pytest.fixture(scope="session")
def case_root(tmp_path_factory: pytest.TempPathFactory) -> Path:
    return tmp_path_factory.mktemp("cases")


@pytest.fixture(scope="session")
def prxvt_run(case_root: Path) -> ReplayRun:
    return run_case("prxvt", case_root)


@pytest.fixture(scope="session")
def valinity_run(case_root: Path) -> ReplayRun:
    return run_case("valinity", case_root)
