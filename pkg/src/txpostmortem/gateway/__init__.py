"""Chain data gateway: typed requests, record/replay fixtures, live access."""

from .base import (
    BootstrapError,
    ChainAdapter,
    GatewayError,
    MissingCredential,
    MissingFixture,
    UnsupportedRequest,
    UpstreamError,
    load_rpc_map,
    resolve_rpc_url,
)
from .collect import (
    SEED_ARTIFACT_KINDS,
    execute_data_requests,
    fetch_balance_diff,
    fetch_contract_meta,
    fetch_seed_artifacts,
    fetch_trace,
    fetch_tx_metadata,
    fetch_txlist,
    read_storage_slot,
)
from .fixtures import FixtureStore, RecordingAdapter, ReplayAdapter, fixture_key
from .live import LiveAdapter, disassemble
from .types import (
    BalanceDelta,
    CollectionSummary,
    ContractMeta,
    DataRequest,
    TraceNode,
    TxRecord,
)

__all__ = [
    "BalanceDelta",
    "BootstrapError",
    "ChainAdapter",
    "CollectionSummary",
    "ContractMeta",
    "DataRequest",
    "FixtureStore",
    "GatewayError",
    "LiveAdapter",
    "MissingCredential",
    "MissingFixture",
    "RecordingAdapter",
    "ReplayAdapter",
    "SEED_ARTIFACT_KINDS",
    "TraceNode",
    "TxRecord",
    "UnsupportedRequest",
    "UpstreamError",
    "disassemble",
    "execute_data_requests",
    "fetch_balance_diff",
    "fetch_contract_meta",
    "fetch_seed_artifacts",
    "fetch_trace",
    "fetch_tx_metadata",
    "fetch_txlist",
    "fixture_key",
    "load_rpc_map",
    "read_storage_slot",
    "resolve_rpc_url",
]
