"""Typed payloads exchanged with chain data providers.

Every payload has a JSON document form (``to_doc``/``from_doc``) because the
record/replay layer and the workspace both persist raw JSON; the dataclasses
exist so analysis code never touches loose dicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ..domain import Address, TxHash

TRACE_CALL_TYPES = (
    "CALL",
    "DELEGATECALL",
    "STATICCALL",
    "CALLCODE",
    "CREATE",
    "CREATE2",
    "SELFDESTRUCT",
)

SOURCE_KINDS = (
    "verified_source",
    "bytecode",
    "disassembly",
    "decompiled",
    "unavailable",
)


@dataclass(frozen=True)
class DataRequest:
    """One evidence fetch: what to get, where, and over which block window."""

    kind: str
    chainid: int
    target: str
    block_lo: Optional[int] = None
    block_hi: Optional[int] = None
    reason: str = ""
    out_path: Optional[str] = None
    extra: dict[str, Any] = field(default_factory=dict)

    def normalized_target(self) -> str:
        target = self.target.strip()
        if target[:2] in ("0x", "0X"):
            return "0x" + target[2:].lower()
        return target

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "kind": self.kind,
            "chainid": self.chainid,
            "target": self.target,
        }
        if self.block_lo is not None:
            doc["block_lo"] = self.block_lo
        if self.block_hi is not None:
            doc["block_hi"] = self.block_hi
        if self.reason:
            doc["reason"] = self.reason
        if self.out_path:
            doc["out_path"] = self.out_path
        if self.extra:
            doc["extra"] = self.extra
        return doc

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "DataRequest":
        return cls(
            kind=doc["kind"],
            chainid=doc["chainid"],
            target=doc["target"],
            block_lo=doc.get("block_lo"),
            block_hi=doc.get("block_hi"),
            reason=doc.get("reason", ""),
            out_path=doc.get("out_path"),
            extra=dict(doc.get("extra", {})),
        )


@dataclass(frozen=True)
class TxRecord:
    """Condensed external-transaction row, as returned by explorer txlists."""

    txhash: TxHash
    block_number: int
    from_address: Address
    to_address: Optional[Address]
    selector: Optional[str]
    value: int
    gas_used: int
    effective_gas_price: int
    status: bool
    index: int = 0

    def order_key(self) -> tuple[int, int]:
        return (self.block_number, self.index)

    def to_doc(self) -> dict[str, Any]:
        return {
            "txhash": self.txhash.value,
            "block_number": self.block_number,
            "from": self.from_address.value,
            "to": self.to_address.value if self.to_address else None,
            "selector": self.selector,
            "value": self.value,
            "gas_used": self.gas_used,
            "effective_gas_price": self.effective_gas_price,
            "status": self.status,
            "index": self.index,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "TxRecord":
        return cls(
            txhash=TxHash(doc["txhash"]),
            block_number=doc["block_number"],
            from_address=Address(doc["from"]),
            to_address=Address(doc["to"]) if doc.get("to") else None,
            selector=doc.get("selector"),
            value=doc.get("value", 0),
            gas_used=doc.get("gas_used", 0),
            effective_gas_price=doc.get("effective_gas_price", 0),
            status=bool(doc.get("status", True)),
            index=doc.get("index", 0),
        )


@dataclass(frozen=True)
class TraceNode:
    """One frame of an opcode-level call trace."""

    call_type: str
    from_address: Address
    to_address: Optional[Address]
    value: int = 0
    gas_used: int = 0
    selector: Optional[str] = None
    error: Optional[str] = None
    children: tuple["TraceNode", ...] = ()

    @property
    def reverted(self) -> bool:
        return self.error is not None

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    def to_doc(self) -> dict[str, Any]:
        return {
            "call_type": self.call_type,
            "from": self.from_address.value,
            "to": self.to_address.value if self.to_address else None,
            "value": self.value,
            "gas_used": self.gas_used,
            "selector": self.selector,
            "error": self.error,
            "children": [c.to_doc() for c in self.children],
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "TraceNode":
        return cls(
            call_type=doc["call_type"],
            from_address=Address(doc["from"]),
            to_address=Address(doc["to"]) if doc.get("to") else None,
            value=doc.get("value", 0),
            gas_used=doc.get("gas_used", 0),
            selector=doc.get("selector"),
            error=doc.get("error"),
            children=tuple(cls.from_doc(c) for c in doc.get("children", [])),
        )


@dataclass(frozen=True)
class BalanceDelta:
    """Net balance change of one (address, asset) pair across a transaction."""

    address: Address
    asset: str
    delta: int
    decimals: int = 18

    def to_doc(self) -> dict[str, Any]:
        return {
            "address": self.address.value,
            "asset": self.asset,
            "delta": self.delta,
            "decimals": self.decimals,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "BalanceDelta":
        return cls(
            address=Address(doc["address"]),
            asset=doc["asset"],
            delta=doc["delta"],
            decimals=doc.get("decimals", 18),
        )


@dataclass(frozen=True)
class ContractMeta:
    """What we could learn about a contract's code, best source first."""

    address: Address
    chainid: int
    verified: bool
    source_kind: str
    name: Optional[str] = None
    content: str = ""
    implementation: Optional[Address] = None

    def to_doc(self) -> dict[str, Any]:
        return {
            "address": self.address.value,
            "chainid": self.chainid,
            "verified": self.verified,
            "source_kind": self.source_kind,
            "name": self.name,
            "content": self.content,
            "implementation": self.implementation.value if self.implementation else None,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "ContractMeta":
        return cls(
            address=Address(doc["address"]),
            chainid=doc["chainid"],
            verified=bool(doc["verified"]),
            source_kind=doc["source_kind"],
            name=doc.get("name"),
            content=doc.get("content", ""),
            implementation=Address(doc["implementation"]) if doc.get("implementation") else None,
        )


@dataclass
class CollectionSummary:
    """Outcome of one batch of data requests: what landed where, what failed."""

    fetched: list[dict[str, Any]] = field(default_factory=list)
    failed: list[dict[str, Any]] = field(default_factory=list)

    @property
    def fetched_count(self) -> int:
        return len(self.fetched)

    def record_success(self, request: DataRequest, files: list[str]) -> None:
        self.fetched.append({"request": request.to_doc(), "files": list(files)})

    def record_failure(self, request: DataRequest, error: str) -> None:
        self.failed.append({"request": request.to_doc(), "error": error})

    def to_doc(self, iteration: Optional[int] = None) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "fetched": self.fetched,
            "failed": self.failed,
            "fetched_count": self.fetched_count,
        }
        if iteration is not None:
            doc["iteration"] = iteration
        return doc
