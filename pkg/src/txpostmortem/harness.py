"""Exploit reproduction harness: scaffold, run, and read back test projects.

The harness turns a reproducer's file map into a Foundry project pinned to
the oracle definition's fork block, runs it through an injectable runner
(real ``forge`` subprocess or a simulated transcript player), and parses the
output into structured results plus named runtime observations.
"""

from __future__ import annotations

import hashlib
import logging
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Protocol

from . import workspace
from .domain import Address
from .oracles import OracleDefinition

logger = logging.getLogger(__name__)

#: Run command recorded in every project README; consumers substitute their
#: own archival endpoint.
RUN_COMMAND_TEMPLATE = "RPC_URL=<your-archival-endpoint> forge test -vvv"

TEST_FILE = "test/Exploit.sol"
CONFIG_FILE = "foundry.toml"
README_FILE = "README.md"

DEFAULT_FOUNDRY_TOML = """\
[profile.default]
src = "src"
test = "test"
libs = ["lib"]
evm_version = "cancun"
"""


class HarnessError(Exception):
    pass


class ScaffoldError(HarnessError):
    pass


class ConsistencyError(ScaffoldError):
    """Project files disagree with the oracle definition (fork block)."""


@dataclass(frozen=True)
class PoCProject:
    """A scaffolded exploit test project rooted inside a session."""

    root: Path
    chainid: int
    fork_block: int
    files: tuple[str, ...]
    fork_pinned: bool
    run_command: str = RUN_COMMAND_TEMPLATE


_FORK_BLOCK_PATTERNS = (
    re.compile(r"FORK_BLOCK\s*=\s*([0-9_]+)"),
    re.compile(r"createSelectFork\s*\([^,)]*,\s*([0-9_]+)\s*\)"),
    re.compile(r"rollFork\s*\(\s*([0-9_]+)\s*\)"),
)


def detect_fork_block(test_source: str) -> Optional[int]:
    """Find the pinned fork block in test source, if any."""
    for pattern in _FORK_BLOCK_PATTERNS:
        match = pattern.search(test_source)
        if match:
            return int(match.group(1).replace("_", ""))
    return None


def project_readme(definition: OracleDefinition) -> str:
    return (
        "# Exploit reproduction\n\n"
        f"Fork-pinned Foundry test for chain {definition.chainid} at block "
        f"{definition.fork_block}.\n\n"
        "Run with an archival RPC endpoint for the incident chain:\n\n"
        "```sh\n"
        f"{RUN_COMMAND_TEMPLATE}\n"
        "```\n\n"
        "Success criteria:\n\n"
        f"{definition.success_criteria}\n"
    )


def scaffold_project(
    session: workspace.Session,
    files: Mapping[str, str],
    definition: OracleDefinition,
) -> PoCProject:
    """Write the reproducer's files under ``forge_poc/`` and sanity-check them.

    The project must contain exactly one exploit test at ``test/Exploit.sol``;
    a missing ``foundry.toml`` gets a default, and the README with the run
    command template is always (re)generated.  A fork block pinned in the
    test must equal the oracle definition's fork block.
    """
    if TEST_FILE not in files:
        raise ScaffoldError(f"project must include {TEST_FILE}")
    extra_tests = [
        name
        for name in files
        if name.startswith("test/") and name.endswith(".sol") and name != TEST_FILE
    ]
    if extra_tests:
        raise ScaffoldError(
            f"project must contain exactly one exploit test; extra: {sorted(extra_tests)}"
        )
    for name in files:
        if Path(name).is_absolute() or ".." in Path(name).parts:
            raise ScaffoldError(f"unsafe project path: {name}")

    pinned = detect_fork_block(files[TEST_FILE])
    if pinned is not None and pinned != definition.fork_block:
        raise ConsistencyError(
            f"test pins fork block {pinned} but the oracle definition says "
            f"{definition.fork_block}"
        )

    staged = dict(files)
    staged.setdefault(CONFIG_FILE, DEFAULT_FOUNDRY_TOML)
    staged[README_FILE] = project_readme(definition)
    for name, content in staged.items():
        workspace.write_text_artifact(
            session, f"{workspace.FORGE_PROJECT_DIR}/{name}", content
        )
    root = session.root / workspace.FORGE_PROJECT_DIR
    return PoCProject(
        root=root,
        chainid=definition.chainid,
        fork_block=definition.fork_block,
        files=tuple(sorted(staged)),
        fork_pinned=pinned is not None,
    )


def project_content_hash(root: Path) -> str:
    """Content hash over every file in the project tree, path-ordered."""
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(b"\0")
        digest.update(path.read_bytes())
        digest.update(b"\0")
    return digest.hexdigest()


class ProjectRunner(Protocol):
    def run(self, project: PoCProject, rpc_url: Optional[str] = None) -> str:
        """Execute the project's tests and return raw combined output."""
        ...


class SubprocessRunner:
    """Runs ``forge test -vvv`` in the project directory."""

    def __init__(self, forge_bin: str = "forge", timeout: float = 900.0):
        self.forge_bin = forge_bin
        self.timeout = timeout

    def run(self, project: PoCProject, rpc_url: Optional[str] = None) -> str:
        import os

        env = dict(os.environ)
        if rpc_url:
            env["RPC_URL"] = rpc_url
        try:
            completed = subprocess.run(
                [self.forge_bin, "test", "-vvv"],
                cwd=project.root,
                env=env,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except FileNotFoundError as exc:
            raise HarnessError(f"runner binary not found: {self.forge_bin}") from exc
        except subprocess.TimeoutExpired as exc:
            raise HarnessError(f"test run timed out after {self.timeout}s") from exc
        return (completed.stdout or "") + (completed.stderr or "")


class SimulatedRunner:
    """Replays canned run transcripts; used for offline scripted sessions.

    Transcripts are keyed by project content hash; unkeyed transcripts are
    consumed from an ordered queue, one per run.
    """

    def __init__(
        self,
        transcripts: Mapping[str, str] | None = None,
        queue: list[str] | None = None,
    ):
        self.transcripts = dict(transcripts or {})
        self.queue = list(queue or [])

    @classmethod
    def from_dir(cls, path: str | Path) -> "SimulatedRunner":
        """Load ``run_<n>.txt`` files as the queue and ``<hash>.txt`` as keyed."""
        path = Path(path)
        keyed: dict[str, str] = {}
        ordered: list[tuple[int, str]] = []
        for entry in sorted(path.glob("*.txt")):
            text = entry.read_text(encoding="utf-8")
            match = re.match(r"^run_(\d+)$", entry.stem)
            if match:
                ordered.append((int(match.group(1)), text))
            else:
                keyed[entry.stem] = text
        return cls(keyed, [text for _, text in sorted(ordered)])

    def run(self, project: PoCProject, rpc_url: Optional[str] = None) -> str:
        key = project_content_hash(project.root)
        if key in self.transcripts:
            return self.transcripts[key]
        if self.queue:
            return self.queue.pop(0)
        raise HarnessError(f"no transcript for project hash {key}")


@dataclass(frozen=True)
class TestOutcome:
    name: str
    passed: bool
    reverted: bool
    reason: str = ""


@dataclass(frozen=True)
class RunResult:
    compiled: bool
    tests: tuple[TestOutcome, ...]
    fork_pinned: bool
    duration_seconds: Optional[float]
    raw_output: str

    @property
    def all_passed(self) -> bool:
        return bool(self.tests) and all(t.passed for t in self.tests)

    def to_doc(self) -> dict:
        return {
            "compiled": self.compiled,
            "tests": [
                {
                    "name": t.name,
                    "passed": t.passed,
                    "reverted": t.reverted,
                    "reason": t.reason,
                }
                for t in self.tests
            ],
            "fork_pinned": self.fork_pinned,
            "duration_seconds": self.duration_seconds,
        }


_TEST_LINE = re.compile(r"\[(PASS|FAIL[^\]]*)\]\s+([A-Za-z_][A-Za-z0-9_]*)\s*\(")
_DURATION = re.compile(r"finished in\s+([0-9.]+)\s*(ms|s)\b")
_COMPILE_FAIL = re.compile(r"Compiler run failed|^Error\s*[:(]", re.MULTILINE)


def parse_run_output(raw: str, fork_pinned: bool) -> RunResult:
    """Parse forge-style output; never raises, garbage parses as not-compiled."""
    compiled = False
    if not _COMPILE_FAIL.search(raw):
        compiled = bool(
            re.search(r"Compiler run successful|\[(PASS|FAIL)|Suite result", raw)
        )
    tests = []
    for status, name in _TEST_LINE.findall(raw):
        passed = status == "PASS"
        reverted = (not passed) and "revert" in status.lower()
        reason = "" if passed else status[len("FAIL") :].strip(".:, ")
        tests.append(TestOutcome(name=name, passed=passed, reverted=reverted, reason=reason))
    duration = None
    match = _DURATION.search(raw)
    if match:
        duration = float(match.group(1)) / (1000.0 if match.group(2) == "ms" else 1.0)
    return RunResult(
        compiled=compiled,
        tests=tuple(tests),
        fork_pinned=fork_pinned,
        duration_seconds=duration,
        raw_output=raw,
    )


def run_project(
    project: PoCProject, runner: ProjectRunner, rpc_url: Optional[str] = None
) -> RunResult:
    raw = runner.run(project, rpc_url)
    return parse_run_output(raw, fork_pinned=project.fork_pinned)


@dataclass(frozen=True)
class CorrectnessChecks:
    """The three execution-level checks every reproduction must clear."""

    compiles: bool
    runs_clean: bool
    pinned_fork: bool

    def to_doc(self) -> dict:
        return {
            "compiles": self.compiles,
            "runs_clean": self.runs_clean,
            "pinned_fork": self.pinned_fork,
        }


def correctness_checks(project: PoCProject, result: RunResult) -> CorrectnessChecks:
    runs_clean = (
        result.compiled
        and bool(result.tests)
        and all(t.passed and not t.reverted for t in result.tests)
    )
    return CorrectnessChecks(
        compiles=result.compiled,
        runs_clean=runs_clean,
        pinned_fork=project.fork_block > 0 and result.fork_pinned,
    )


# --------------------------------------------------------------------------
# Observation protocol: the test logs `OBS <name>=<value>` per oracle input.

_OBS_LINE = re.compile(
    r"^\s*OBS\s+([A-Za-z_][A-Za-z0-9_]*)=(-?\d+|0x[0-9a-fA-F]{40}|true|false)\s*$",
    re.MULTILINE,
)


@dataclass(frozen=True)
class ObservationReport:
    observations: dict[str, int | bool | str]
    missing: tuple[str, ...]
    warnings: tuple[str, ...] = ()


def extract_observations(raw_output: str, expected: list[str]) -> ObservationReport:
    """Collect OBS lines; duplicates keep the last value with a warning."""
    observations: dict[str, int | bool | str] = {}
    warnings: list[str] = []
    for name, token in _OBS_LINE.findall(raw_output):
        if name in observations:
            warnings.append(f"duplicate observation {name}; keeping the last value")
        if token in ("true", "false"):
            observations[name] = token == "true"
        elif token.startswith("0x"):
            observations[name] = token.lower()
        else:
            observations[name] = int(token)
    missing = tuple(name for name in expected if name not in observations)
    return ObservationReport(
        observations=observations, missing=missing, warnings=tuple(warnings)
    )


def scan_for_addresses(
    project_root: Path, deny: set[Address] | frozenset[Address]
) -> list[tuple[str, str, int]]:
    """Find deny-listed addresses in project sources: (file, address, line)."""
    hits: list[tuple[str, str, int]] = []
    wanted = {a.value for a in deny}
    if not wanted:
        return hits
    pattern = re.compile(r"0x[0-9a-fA-F]{40}")
    for path in sorted(p for p in project_root.rglob("*") if p.is_file()):
        try:
            text = path.read_text(encoding="utf-8")
        except (UnicodeDecodeError, OSError):
            continue
        for line_no, line in enumerate(text.splitlines(), 1):
            for match in pattern.findall(line):
                if match.lower() in wanted:
                    hits.append((str(path.relative_to(project_root)), match.lower(), line_no))
    return hits
