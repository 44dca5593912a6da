"""Session workspace: directory layout, atomic artifact IO, document schemas.

A session is a directory rooted at ``<base>/<session_id>/`` holding the raw
seed input, per-role iteration artifacts, final reports, and the scaffolded
exploit project.  All JSON artifacts pass through a structural schema check
before hitting disk, and writes are atomic (temp file + rename) so a crashed
run never leaves half-written documents behind.
"""

from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from .domain import SeedRef

logger = logging.getLogger(__name__)


class WorkspaceError(Exception):
    pass


class SchemaError(WorkspaceError):
    """Document failed structural validation; ``errors`` lists field paths."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class PathEscapeError(WorkspaceError):
    pass


class ArtifactNotFound(WorkspaceError):
    pass


class CorruptArtifact(WorkspaceError):
    pass


class UnknownSchema(WorkspaceError):
    pass


# --------------------------------------------------------------------------
# Canonical relative paths inside a session directory.

RAW_INPUT = "raw.json"
SOURCES_META = "sources.json"
ROOT_CAUSE_DOC = "root_cause.json"
ROOT_CAUSE_REPORT = "root_cause_report.md"
POC_REPORT = "poc_report.md"
SESSION_SUMMARY = "session_summary.json"
SCHEMA_DIR = "schema"
SEED_DIR = "artifacts/root_cause/seed"
ROOT_CAUSE_STAGE_DIR = "artifacts/root_cause"
POC_STAGE_DIR = "artifacts/poc"
EVALUATION_DIR = "artifacts/evaluation"
RPC_MAP_COPY = "artifacts/rpc/chainid_rpc_map.json"
FORGE_PROJECT_DIR = "forge_poc"


# --------------------------------------------------------------------------
# Structural schema mini-language.
#
# A spec is one of:
#   "string" | "int" | "number" | "bool" | "array" | "object" | "any"
#   {"enum": [...]}                      closed set of scalar values
#   {"array_of": spec}                   homogeneous list
#   {"object": {"required": {...}, "optional": {...}}}
#   {"map_of": spec}                     object with arbitrary keys
#   {"nullable": spec}                   spec or null

_SCALARS = {
    "string": str,
    "bool": bool,
    "array": list,
    "object": dict,
}


def check_document(doc: Any, spec: Any, path: str = "") -> list[str]:
    """Return a list of human-readable errors; empty means the doc conforms."""
    where = path or "document"
    if spec == "any":
        return []
    if spec == "int":
        if isinstance(doc, bool) or not isinstance(doc, int):
            return [f"{where}: expected integer"]
        return []
    if spec == "number":
        if isinstance(doc, bool) or not isinstance(doc, (int, float)):
            return [f"{where}: expected number"]
        return []
    if isinstance(spec, str):
        want = _SCALARS.get(spec)
        if want is None:
            raise UnknownSchema(f"bad spec {spec!r} at {where}")
        if spec != "bool" and isinstance(doc, bool):
            return [f"{where}: expected {spec}"]
        if not isinstance(doc, want):
            return [f"{where}: expected {spec}"]
        return []
    if "nullable" in spec:
        if doc is None:
            return []
        return check_document(doc, spec["nullable"], path)
    if "enum" in spec:
        if doc not in spec["enum"]:
            return [f"{where}: expected one of {spec['enum']}, got {doc!r}"]
        return []
    if "array_of" in spec:
        if not isinstance(doc, list):
            return [f"{where}: expected array"]
        errors: list[str] = []
        for i, item in enumerate(doc):
            errors.extend(check_document(item, spec["array_of"], f"{path}[{i}]"))
        return errors
    if "map_of" in spec:
        if not isinstance(doc, dict):
            return [f"{where}: expected object"]
        errors = []
        for key, value in doc.items():
            errors.extend(check_document(value, spec["map_of"], f"{path}.{key}" if path else key))
        return errors
    if "object" in spec:
        if not isinstance(doc, dict):
            return [f"{where}: expected object"]
        errors = []
        required: Mapping[str, Any] = spec["object"].get("required", {})
        optional: Mapping[str, Any] = spec["object"].get("optional", {})
        for key, sub in required.items():
            sub_path = f"{path}.{key}" if path else key
            if key not in doc:
                errors.append(f"{sub_path}: required")
            else:
                errors.extend(check_document(doc[key], sub, sub_path))
        for key, sub in optional.items():
            if key in doc:
                sub_path = f"{path}.{key}" if path else key
                errors.extend(check_document(doc[key], sub, sub_path))
        return errors
    raise UnknownSchema(f"bad spec {spec!r} at {where}")


DATA_REQUEST_KINDS = [
    "tx_metadata",
    "tx_trace",
    "balance_diff",
    "state_diff",
    "receipt_logs",
    "txlist",
    "contract_meta",
    "storage_slot",
    "decompile",
    "other",
]

_DATA_REQUEST_SPEC = {
    "object": {
        "required": {
            "kind": {"enum": DATA_REQUEST_KINDS},
            "chainid": "int",
            "target": "string",
        },
        "optional": {
            "reason": "string",
            "out_path": "string",
            "block_lo": {"nullable": "int"},
            "block_hi": {"nullable": "int"},
            "extra": "object",
        },
    }
}

_EXPRESSION_SPEC = {
    "object": {
        "required": {
            "lhs": "string",
            "comparator": {"enum": ["eq", "gt", "lt", "ge", "le", "within_tolerance"]},
            "rhs": "string",
        }
    }
}

_TOLERANCE_SPEC = {
    "object": {
        "required": {
            "kind": {"enum": ["relative_bps", "absolute"]},
            "value": "int",
        },
        "optional": {"rationale": "string"},
    }
}

_CONSTRAINT_SPEC = {
    "object": {
        "required": {
            "id": "string",
            "check": _EXPRESSION_SPEC,
        },
        "optional": {
            "description": "string",
            "tolerance": _TOLERANCE_SPEC,
        },
    }
}

_LIFECYCLE_PHASES = ["funding", "setup", "exploit", "exit"]

_EVALUATION_ENTRY_SPEC = {
    "object": {
        "required": {
            "round": "int",
            "action": {"enum": ["Initial", "Maintain", "Change"]},
            "result": "bool",
            "reason": "string",
        }
    }
}

SCHEMAS: dict[str, Any] = {
    "raw_input": {
        "object": {
            "required": {
                "targets": {
                    "array_of": {
                        "object": {
                            "required": {"chainid": "int", "txhash": "string"},
                        }
                    }
                }
            }
        }
    },
    "analysis_result": {
        "object": {
            "required": {
                "summary": "string",
                "hypothesis": "string",
                "candidate_contracts": {"array_of": "string"},
                "candidate_roles": "object",
                "all_relevant_txs": {"array_of": "string"},
                "data_requests": {"array_of": _DATA_REQUEST_SPEC},
            },
            "optional": {
                "root_cause": "object",
            },
        }
    },
    "collection_summary": {
        "object": {
            "required": {
                "fetched": {
                    "array_of": {
                        "object": {
                            "required": {
                                "request": "object",
                                "files": {"array_of": "string"},
                            }
                        }
                    }
                },
                "failed": {
                    "array_of": {
                        "object": {
                            "required": {"request": "object", "error": "string"},
                        }
                    }
                },
            },
            "optional": {"iteration": "int", "fetched_count": "int"},
        }
    },
    "challenge_result": {
        "object": {
            "required": {
                "status": {"enum": ["Pass", "Reject"]},
                "feedback": "string",
                "missing_evidence": {"array_of": "string"},
            },
            "optional": {"reject_reasons": {"array_of": "string"}},
        }
    },
    "root_cause": {
        "object": {
            "required": {
                "chainid": "int",
                "seed": {"array_of": "string"},
                "act": {
                    "object": {
                        "required": {"is_act": "bool"},
                        "optional": {
                            "predicate": "string",
                            "rejection_reason": "string",
                        },
                    }
                },
                "lifecycle": {
                    "array_of": {
                        "object": {
                            "required": {
                                "txhash": "string",
                                "phase": {"enum": _LIFECYCLE_PHASES},
                            }
                        }
                    }
                },
                "all_relevant_txs": {"array_of": "string"},
                "roles": {
                    "object": {
                        "required": {
                            "attacker_eoas": {"array_of": "string"},
                            "attacker_contracts": {"array_of": "string"},
                            "victim_contracts": {"array_of": "string"},
                        },
                        "optional": {"helpers": {"array_of": "string"}},
                    }
                },
                "mechanism": "string",
                "violated_invariant": "string",
                "fork_block": "int",
            },
        }
    },
    "oracle_definition": {
        "object": {
            "required": {
                "chainid": "int",
                "fork_block": "int",
                "variables": {
                    "array_of": {
                        "object": {
                            "required": {
                                "name": "string",
                                "kind": {
                                    "enum": [
                                        "victim_contract",
                                        "asset",
                                        "attacker_role",
                                        "helper_role",
                                    ]
                                },
                                "address": {"nullable": "string"},
                            }
                        }
                    }
                },
                "pre_check": {"array_of": _CONSTRAINT_SPEC},
                "hard": {"array_of": _CONSTRAINT_SPEC},
                "soft": {"array_of": _CONSTRAINT_SPEC},
                "success_criteria": "string",
            },
            "optional": {"setup": "string"},
        }
    },
    "poc_validation": {
        "object": {
            "required": {
                "overall_status": {"enum": ["Pass", "Reject"]},
                "oracle_results": {
                    "array_of": {
                        "object": {
                            "required": {"id": "string", "satisfied": "bool"},
                            "optional": {
                                "kind": "string",
                                "measured": "any",
                                "expected": "any",
                                "reason": "string",
                            },
                        }
                    }
                },
                "rubric": "object",
            },
            "optional": {
                "reject_reasons": {"array_of": "string"},
                "pre_check_results": {"array_of": "object"},
            },
        }
    },
    "evaluation_result": {
        "map_of": {
            "object": {
                "required": {
                    "description": "string",
                    "evaluation_history": {"array_of": _EVALUATION_ENTRY_SPEC},
                }
            }
        }
    },
    "session_summary": {
        "object": {
            "required": {
                "session_id": "string",
                "outcome": {
                    "object": {
                        "required": {
                            "stage": {
                                "enum": [
                                    "bootstrap",
                                    "root_cause",
                                    "poc",
                                    "done",
                                    "aborted_non_act",
                                    "failed",
                                ]
                            }
                        },
                        "optional": {"is_act": "bool", "failure": "string"},
                    }
                },
                "iterations": {"map_of": "int"},
                "usage": {
                    "object": {
                        "required": {
                            "input_tokens": "int",
                            "cached_input_tokens": "int",
                            "output_tokens": "int",
                        }
                    }
                },
                "latencies": "object",
                "fetched_items": "int",
                "poc": {
                    "object": {
                        "required": {"reproducer_iterations": "int", "rejects": "int"},
                        "optional": {"validated": "bool"},
                    }
                },
            },
            "optional": {"reject_log": "array", "turns": "object"},
        }
    },
}


class SchemaRegistry:
    """Lookup table from schema id to structural document schema."""

    def __init__(self, schemas: Mapping[str, Any] | None = None):
        self._schemas = dict(SCHEMAS if schemas is None else schemas)

    def ids(self) -> list[str]:
        return sorted(self._schemas)

    def get(self, schema_id: str) -> Any:
        try:
            return self._schemas[schema_id]
        except KeyError:
            raise UnknownSchema(f"unknown schema id {schema_id!r}") from None

    def validate(self, schema_id: str, doc: Any) -> list[str]:
        return check_document(doc, self.get(schema_id))


DEFAULT_REGISTRY = SchemaRegistry()


# --------------------------------------------------------------------------
# Sessions.


@dataclass(frozen=True)
class Session:
    """Handle to one postmortem run's directory tree."""

    session_id: str
    root: Path
    seed: SeedRef
    created_at: datetime

    @property
    def raw_input_path(self) -> Path:
        return self.root / RAW_INPUT


def _dump_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _atomic_write(target: Path, data: str) -> None:
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(data)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def resolve_inside(root: Path, relpath: str | Path) -> Path:
    """Resolve ``relpath`` under ``root``, refusing traversal outside it."""
    candidate = (root / relpath).resolve()
    root = root.resolve()
    if candidate != root and root not in candidate.parents:
        raise PathEscapeError(f"path escapes session root: {relpath}")
    return candidate


def raw_input_doc(seed: SeedRef) -> dict[str, Any]:
    return {
        "targets": [
            {"chainid": seed.chainid, "txhash": tx.value} for tx in seed.txs
        ]
    }


def create_session(
    base_dir: str | Path,
    seed: SeedRef,
    attributions: list[str] | None = None,
    registry: SchemaRegistry = DEFAULT_REGISTRY,
    now: datetime | None = None,
) -> Session:
    """Create the session directory skeleton and record the seed input."""
    base = Path(base_dir)
    created = now or datetime.now(timezone.utc)
    stamp = created.strftime("%Y%m%dT%H%M%SZ")
    prefix = seed.primary.value[2:10]
    session_id = f"{stamp}_{prefix}"
    root = base / session_id
    bump = 0
    while root.exists():
        bump += 1
        session_id = f"{stamp}_{prefix}-{bump}"
        root = base / session_id
    for sub in (SEED_DIR, POC_STAGE_DIR, EVALUATION_DIR, SCHEMA_DIR):
        (root / sub).mkdir(parents=True, exist_ok=True)
    session = Session(session_id=session_id, root=root, seed=seed, created_at=created)
    write_artifact(session, RAW_INPUT, raw_input_doc(seed), schema_id="raw_input")
    write_artifact(
        session,
        SOURCES_META,
        {"attributions": sorted(set(attributions or ["manual"]))},
    )
    for schema_id in registry.ids():
        write_artifact(session, f"{SCHEMA_DIR}/{schema_id}.json", registry.get(schema_id))
    logger.info("created session %s at %s", session_id, root)
    return session


def open_session(root: str | Path) -> Session:
    """Re-open an existing session directory from its raw input."""
    root = Path(root)
    raw_path = root / RAW_INPUT
    if not raw_path.is_file():
        raise ArtifactNotFound(f"no {RAW_INPUT} under {root}")
    try:
        doc = json.loads(raw_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CorruptArtifact(f"unreadable {RAW_INPUT}: {exc}") from exc
    errors = DEFAULT_REGISTRY.validate("raw_input", doc)
    if errors:
        raise SchemaError(errors)
    targets = doc["targets"]
    seed = SeedRef.from_strings(targets[0]["chainid"], [t["txhash"] for t in targets])
    mtime = datetime.fromtimestamp(raw_path.stat().st_mtime, timezone.utc)
    return Session(session_id=root.name, root=root, seed=seed, created_at=mtime)


def write_artifact(
    session: Session,
    relpath: str | Path,
    doc: Any,
    schema_id: str | None = None,
    registry: SchemaRegistry = DEFAULT_REGISTRY,
) -> Path:
    """Validate (when a schema id is given) and atomically write a JSON doc."""
    if schema_id is not None:
        errors = registry.validate(schema_id, doc)
        if errors:
            raise SchemaError(errors)
    target = resolve_inside(session.root, relpath)
    _atomic_write(target, _dump_json(doc))
    return target


def write_text_artifact(session: Session, relpath: str | Path, text: str) -> Path:
    """Atomically write a text artifact (reports, project sources)."""
    target = resolve_inside(session.root, relpath)
    _atomic_write(target, text)
    return target


def read_artifact(session: Session, relpath: str | Path) -> Any:
    target = resolve_inside(session.root, relpath)
    if not target.is_file():
        raise ArtifactNotFound(str(relpath))
    try:
        return json.loads(target.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise CorruptArtifact(f"{relpath}: {exc}") from exc
    except OSError as exc:
        raise WorkspaceError(f"{relpath}: {exc}") from exc


_ITER_RE = re.compile(r"^iter_(\d+)$")


def iteration_dirs(session: Session, role: str, stage_dir: str = ROOT_CAUSE_STAGE_DIR) -> list[Path]:
    base = session.root / stage_dir / role
    if not base.is_dir():
        return []
    found = []
    for entry in base.iterdir():
        match = _ITER_RE.match(entry.name)
        if match and entry.is_dir():
            found.append((int(match.group(1)), entry))
    return [path for _, path in sorted(found)]


def next_iteration_dir(
    session: Session, role: str, stage_dir: str = ROOT_CAUSE_STAGE_DIR
) -> Path:
    """Allocate the next dense ``iter_k`` directory for a role."""
    base = session.root / stage_dir / role
    existing = [
        int(m.group(1))
        for entry in (base.iterdir() if base.is_dir() else [])
        if (m := _ITER_RE.match(entry.name)) and entry.is_dir()
    ]
    k = max(existing) + 1 if existing else 0
    path = base / f"iter_{k}"
    path.mkdir(parents=True, exist_ok=False)
    return path
