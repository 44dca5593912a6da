#!/usr/bin/env python3
"""Run one bundled incident case fully offline and show what it produced.

Builds the case's fixtures, scripted role outputs, and run transcripts under
the chosen working directory, replays the whole pipeline against them, then
prints the session summary and the main artifact paths.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from txpostmortem import CASE_BUILDERS, Orchestrator
from txpostmortem import workspace


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("case", choices=sorted(CASE_BUILDERS))
    parser.add_argument("--workdir", default="offline_runs", type=Path)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    bundle = CASE_BUILDERS[args.case](args.workdir / "cases" / args.case)
    orchestrator = Orchestrator(
        backend=bundle.backend(),
        adapter=bundle.adapter(),
        runner=bundle.runner(),
    )
    outcome = orchestrator.run_postmortem(
        bundle.seed(), str(args.workdir / "sessions")
    )
    doc = outcome.summary_doc()
    print(json.dumps(doc, indent=2, sort_keys=True))

    root = outcome.session.root
    print()
    print(f"session: {root}")
    for rel in (
        workspace.ROOT_CAUSE_DOC,
        workspace.ROOT_CAUSE_REPORT,
        "artifacts/poc/oracle_generator/oracle_definition.json",
        workspace.POC_REPORT,
        workspace.FORGE_PROJECT_DIR,
    ):
        marker = "ok " if (root / rel).exists() else "MISSING"
        print(f"  [{marker}] {rel}")
    return 0 if doc["outcome"]["stage"] == "done" else 1


if __name__ == "__main__":
    sys.exit(main())
