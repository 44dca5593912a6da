"""Chain-data gateway: fixture keys, record/replay closure, live adapter."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from txpostmortem import workspace
from txpostmortem.domain import Address, SeedRef, TxHash, UnsupportedChain
from txpostmortem.gateway.base import (
    BootstrapError,
    MissingCredential,
    MissingFixture,
    UnsupportedRequest,
    UpstreamError,
    load_rpc_map,
    resolve_rpc_url,
)
from txpostmortem.gateway.collect import (
    execute_data_requests,
    fetch_seed_artifacts,
    fetch_txlist,
    read_storage_slot,
)
from txpostmortem.gateway.fixtures import (
    FixtureStore,
    RecordingAdapter,
    ReplayAdapter,
    fixture_key,
)
from txpostmortem.gateway.live import LiveAdapter, disassemble
from txpostmortem.gateway.types import DataRequest, TxRecord
from txpostmortem.lifecycle import DEFAULT_WINDOW
from txpostmortem.scenarios import (
    VAL_CHAIN,
    VAL_EOA,
    VAL_EOA_2,
    VAL_ROUTER,
    VAL_SEED_BLOCK,
)

TX = "0x" + "ab" * 32
ADDR = "0x" + "cd" * 20


def _request(**overrides) -> DataRequest:
    base = dict(kind="tx_trace", chainid=1, target=TX)
    base.update(overrides)
    return DataRequest(**base)


class TestFixtureKey:
    def test_deterministic(self):
        assert fixture_key(_request()) == fixture_key(_request())

    def test_ignores_reason_and_out_path(self):
        plain = fixture_key(_request())
        annotated = fixture_key(_request(reason="why not", out_path="here.json"))
        assert plain == annotated

    def test_target_case_is_normalized(self):
        assert fixture_key(_request(target=TX.upper().replace("0X", "0x"))) == fixture_key(
            _request()
        )

    @pytest.mark.parametrize(
        "override",
        [
            {"kind": "tx_metadata"},
            {"chainid": 8453},
            {"target": "0x" + "ee" * 32},
            {"block_lo": 5},
            {"block_hi": 9},
            {"extra": {"slot": "0x1"}},
        ],
    )
    def test_semantic_fields_change_the_key(self, override):
        assert fixture_key(_request(**override)) != fixture_key(_request())

    def test_key_shape(self):
        key = fixture_key(_request(kind="txlist", chainid=10, target=ADDR))
        prefix, chain, digest = key.rsplit("_", 2)
        assert prefix == "txlist"
        assert chain == "10"
        assert len(digest) == 16
        int(digest, 16)


class TestFixtureStore:
    def test_round_trip(self, tmp_path):
        store = FixtureStore(tmp_path)
        request = _request()
        store.save(request, {"root": {"x": 1}})
        assert store.has(request)
        assert store.load(request) == {"root": {"x": 1}}

    def test_missing_fixture(self, tmp_path):
        store = FixtureStore(tmp_path)
        assert not store.has(_request())
        with pytest.raises(MissingFixture):
            store.load(_request())

    def test_files_are_byte_stable(self, tmp_path):
        request = _request()
        payload = {"b": [1, 2], "a": "x"}
        first = FixtureStore(tmp_path / "one").save(request, payload)
        second = FixtureStore(tmp_path / "two").save(request, payload)
        assert first.read_bytes() == second.read_bytes()
        assert first.read_bytes().endswith(b"\n")

    def test_keys_sorted(self, tmp_path):
        store = FixtureStore(tmp_path)
        store.save(_request(kind="txlist", target=ADDR), {"records": []})
        store.save(_request(), {"root": {}})
        assert store.keys() == sorted(store.keys())
        assert len(store.keys()) == 2


class _StubAdapter:
    """Serves a deterministic payload for every supported request kind."""

    def __init__(self):
        self.calls = 0

    def fetch(self, request: DataRequest) -> dict:
        if request.kind == "other":
            raise UnsupportedRequest("stub cannot serve 'other'")
        self.calls += 1
        return {
            "kind": request.kind,
            "chainid": request.chainid,
            "target": request.normalized_target(),
            "window": [request.block_lo, request.block_hi],
            "extra": dict(request.extra),
        }


def _one_request_per_kind() -> list[DataRequest]:
    requests = []
    for kind in workspace.DATA_REQUEST_KINDS:
        requests.append(
            DataRequest(
                kind=kind,
                chainid=1,
                target=ADDR if kind not in ("tx_metadata", "tx_trace") else TX,
                block_lo=10 if kind == "txlist" else None,
                block_hi=20 if kind == "txlist" else None,
                extra={"slot": "0x0", "block": "latest"} if kind == "storage_slot" else {},
            )
        )
    return requests


class TestRecordReplayClosure:
    def test_every_kind_recorded_then_replayed_byte_identically(self, tmp_path):
        requests = [r for r in _one_request_per_kind() if r.kind != "other"]
        assert len(requests) == len(workspace.DATA_REQUEST_KINDS) - 1

        store = FixtureStore(tmp_path / "fixtures")
        recorder = RecordingAdapter(_StubAdapter(), store)
        recorded = {fixture_key(r): recorder.fetch(r) for r in requests}

        replays = []
        for _ in range(2):
            adapter = ReplayAdapter(FixtureStore(tmp_path / "fixtures"))
            replays.append({fixture_key(r): adapter.fetch(r) for r in requests})
        assert replays[0] == replays[1] == recorded

        # Byte-level determinism: re-recording the same payloads must leave
        # every fixture file unchanged.
        before = {p.name: p.read_bytes() for p in store.root.glob("*.json")}
        for request in requests:
            RecordingAdapter(_StubAdapter(), store).fetch(request)
        after = {p.name: p.read_bytes() for p in store.root.glob("*.json")}
        assert before == after
        assert len(before) == len(requests)

    def test_replay_never_reaches_the_inner_adapter(self, tmp_path):
        store = FixtureStore(tmp_path)
        inner = _StubAdapter()
        RecordingAdapter(inner, store).fetch(_request())
        assert inner.calls == 1
        ReplayAdapter(store).fetch(_request())
        assert inner.calls == 1

    def test_other_kind_is_refused_by_the_live_path(self):
        adapter = LiveAdapter(env={}, rpc_map={1: "http://node"})
        with pytest.raises(UnsupportedRequest):
            adapter.fetch(DataRequest(kind="other", chainid=1, target="anything"))


class TestRequestTypes:
    def test_normalized_target_lowercases_hex_only(self):
        hexreq = _request(target="0xAB" + "cd" * 31)
        assert hexreq.normalized_target() == ("0xAB" + "cd" * 31).lower()
        textreq = _request(kind="other", target="Some Label")
        assert textreq.normalized_target() == "Some Label"

    def test_to_doc_omits_empty_optionals(self):
        doc = _request().to_doc()
        assert "block_lo" not in doc
        assert "reason" not in doc
        assert "out_path" not in doc
        assert "extra" not in doc
        rich = _request(block_lo=1, block_hi=2, reason="r", out_path="o", extra={"k": 1})
        doc = rich.to_doc()
        assert doc["block_lo"] == 1 and doc["extra"] == {"k": 1}

    def test_txrecord_doc_uses_from_and_to(self):
        record = TxRecord(
            txhash=TxHash(TX),
            block_number=7,
            from_address=Address(ADDR),
            to_address=None,
            selector=None,
            value=0,
            gas_used=21000,
            effective_gas_price=10,
            status=True,
        )
        doc = record.to_doc()
        assert doc["from"] == ADDR
        assert doc["to"] is None
        assert TxRecord.from_doc(doc) == record

    @given(
        blocks=st.lists(
            st.tuples(st.integers(0, 10**6), st.integers(0, 500)), min_size=1, max_size=20
        )
    )
    def test_order_key_sorts_by_block_then_index(self, blocks):
        records = [
            TxRecord(
                txhash="0x" + f"{i:064x}",
                block_number=block,
                from_address=ADDR,
                to_address=ADDR,
                selector=None,
                value=0,
                gas_used=1,
                effective_gas_price=1,
                status=True,
                index=index,
            )
            for i, (block, index) in enumerate(blocks)
        ]
        ordered = sorted(records, key=TxRecord.order_key)
        assert [(r.block_number, r.index) for r in ordered] == sorted(
            (r.block_number, r.index) for r in records
        )


class _SeedAdapter:
    """Stub for seed bootstrap; optionally fails specific kinds."""

    def __init__(self, fail_kinds=()):
        self.fail_kinds = set(fail_kinds)

    def fetch(self, request: DataRequest) -> dict:
        if request.kind in self.fail_kinds:
            raise UpstreamError(f"stub failure for {request.kind}")
        if request.kind == "tx_metadata":
            return {"txhash": request.normalized_target(), "block_number": 100}
        if request.kind == "tx_trace":
            return {"root": {"call_type": "CALL", "from": ADDR, "to": ADDR, "children": []}}
        if request.kind == "balance_diff":
            return {"entries": []}
        raise UnsupportedRequest(request.kind)


class TestSeedBootstrap:
    def _session(self, tmp_path):
        seed = SeedRef(chainid=1, txs=(TX,))
        return workspace.create_session(tmp_path, seed)

    def test_lands_three_artifacts_per_seed_tx(self, tmp_path):
        session = self._session(tmp_path)
        summary = fetch_seed_artifacts(session, _SeedAdapter())
        assert summary.fetched_count == 3
        base = session.root / workspace.SEED_DIR / "1" / TX
        for name in ("metadata.json", "trace.json", "balance_diff.json"):
            assert (base / name).is_file()
        index = json.loads((session.root / workspace.SEED_DIR / "index.json").read_text())
        assert index["targets"] == [{"chainid": 1, "txhash": TX}]
        assert len(index["artifacts"][TX]) == 3

    def test_any_failure_is_fatal_with_diagnostics(self, tmp_path):
        session = self._session(tmp_path)
        with pytest.raises(BootstrapError) as info:
            fetch_seed_artifacts(session, _SeedAdapter(fail_kinds={"tx_trace"}))
        assert info.value.diagnostics
        assert any("tx_trace" in line for line in info.value.diagnostics)


class TestExecuteDataRequests:
    def test_failures_recorded_without_aborting(self, tmp_path):
        session = workspace.create_session(tmp_path, SeedRef(chainid=1, txs=(TX,)))
        iter_dir = workspace.next_iteration_dir(
            session, workspace.ROOT_CAUSE_STAGE_DIR
        )
        requests = [
            DataRequest(kind="tx_trace", chainid=1, target=TX),
            DataRequest(kind="other", chainid=1, target="nope"),
            DataRequest(kind="tx_trace", chainid=1, target=TX),  # name collision
        ]
        summary = execute_data_requests(session, requests, _StubAdapter(), iter_dir)
        assert summary.fetched_count == 2
        assert len(summary.failed) == 1
        names = sorted(p.name for p in iter_dir.glob("*.json"))
        assert len(names) == 2
        assert len(set(names)) == 2

    def test_out_path_is_honored(self, tmp_path):
        session = workspace.create_session(tmp_path, SeedRef(chainid=1, txs=(TX,)))
        iter_dir = workspace.next_iteration_dir(session, workspace.ROOT_CAUSE_STAGE_DIR)
        requests = [
            DataRequest(kind="tx_trace", chainid=1, target=TX, out_path="custom.json")
        ]
        execute_data_requests(session, requests, _StubAdapter(), iter_dir)
        assert (iter_dir / "custom.json").is_file()


class TestTypedFetchers:
    def test_txlist_is_sorted_by_order_key(self, tmp_path):
        store = FixtureStore(tmp_path)
        request = DataRequest(kind="txlist", chainid=1, target=ADDR)
        rows = [
            {"txhash": "0x" + "01" * 32, "block_number": 9, "from": ADDR, "to": ADDR,
             "selector": None, "value": 0, "gas_used": 1, "effective_gas_price": 1,
             "status": True, "index": 1},
            {"txhash": "0x" + "02" * 32, "block_number": 3, "from": ADDR, "to": ADDR,
             "selector": None, "value": 0, "gas_used": 1, "effective_gas_price": 1,
             "status": True, "index": 0},
            {"txhash": "0x" + "03" * 32, "block_number": 9, "from": ADDR, "to": ADDR,
             "selector": None, "value": 0, "gas_used": 1, "effective_gas_price": 1,
             "status": True, "index": 0},
        ]
        store.save(request, {"records": rows})
        records = fetch_txlist(ReplayAdapter(store), 1, ADDR)
        assert [r.block_number for r in records] == [3, 9, 9]
        assert [r.index for r in records] == [0, 0, 1]

    def test_storage_slot_round_trip(self, tmp_path):
        store = FixtureStore(tmp_path)
        request = DataRequest(
            kind="storage_slot",
            chainid=1,
            target=ADDR,
            extra={"slot": "0x2", "block": 123},
        )
        store.save(request, {"address": ADDR, "slot": "0x2", "block": 123,
                             "value_hex": "0x" + "00" * 31 + "2a"})
        value = read_storage_slot(ReplayAdapter(store), 1, ADDR, "0x2", 123)
        assert value == "0x" + "00" * 31 + "2a"


class TestCaseFixtures:
    """The bundled demo incidents must replay the mining windows exactly."""

    def test_window_txlist_counts(self, valinity_run):
        adapter = valinity_run.bundle.adapter()
        lo = VAL_SEED_BLOCK - DEFAULT_WINDOW
        hi = VAL_SEED_BLOCK + DEFAULT_WINDOW
        eoa = fetch_txlist(adapter, VAL_CHAIN, VAL_EOA, lo, hi)
        assert len(eoa) == 14
        assert fetch_txlist(adapter, VAL_CHAIN, VAL_EOA_2, lo, hi) == []
        router = fetch_txlist(adapter, VAL_CHAIN, VAL_ROUTER, lo, hi)
        assert len(router) == 2

    def test_replaying_twice_is_byte_identical(self, valinity_run):
        adapter = valinity_run.bundle.adapter()
        lo = VAL_SEED_BLOCK - DEFAULT_WINDOW
        hi = VAL_SEED_BLOCK + DEFAULT_WINDOW
        request = DataRequest(
            kind="txlist", chainid=VAL_CHAIN, target=VAL_EOA, block_lo=lo, block_hi=hi
        )
        first = json.dumps(adapter.fetch(request), sort_keys=True)
        second = json.dumps(valinity_run.bundle.adapter().fetch(request), sort_keys=True)
        assert first == second


class TestRpcMap:
    def test_packaged_map_covers_every_supported_chain(self):
        from txpostmortem.domain import CHAIN_NAMES

        mapping = load_rpc_map()
        assert set(mapping) == set(CHAIN_NAMES)

    def test_custom_map_file(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text('{"1": "http://node-one"}')
        assert load_rpc_map(path) == {1: "http://node-one"}

    def test_resolve_substitutes_credentials(self):
        url = resolve_rpc_url(1, {"KEY": "abc"}, {1: "http://node/${KEY}"})
        assert url == "http://node/abc"

    def test_unsupported_chain(self):
        with pytest.raises(UnsupportedChain):
            resolve_rpc_url(424242, {}, {424242: "http://node"})

    def test_unconfigured_chain(self):
        with pytest.raises(UnsupportedChain):
            resolve_rpc_url(1, {}, {10: "http://node"})

    def test_missing_credential_names_the_variable(self):
        with pytest.raises(MissingCredential) as info:
            resolve_rpc_url(1, {}, {1: "http://node/${SECRET_TOKEN}"})
        assert "SECRET_TOKEN" in str(info.value)


def _metadata_rpc(responses: dict[str, dict]):
    calls = []

    def rpc_post(url, body, timeout):
        calls.append(body)
        return {"jsonrpc": "2.0", "id": body["id"], "result": responses[body["method"]]}

    return rpc_post, calls


class TestLiveAdapter:
    def _adapter(self, rpc_post=None, api_get=None, env=None, retries=3):
        return LiveAdapter(
            env=env or {},
            rpc_map={1: "http://node"},
            rpc_post=rpc_post or (lambda url, body, timeout: {"result": None}),
            api_get=api_get or (lambda url, params, timeout: {}),
            retries=retries,
            backoff=0.0,
        )

    def test_tx_metadata_normalization(self):
        rpc_post, calls = _metadata_rpc(
            {
                "eth_getTransactionByHash": {
                    "blockNumber": "0x64",
                    "from": ADDR.upper().replace("0X", "0x"),
                    "to": None,
                    "value": "0xde0b6b3a7640000",
                    "nonce": "0x1",
                    "gasPrice": "0x5f5e100",
                    "input": "0xa9059cbb" + "00" * 64,
                },
                "eth_getTransactionReceipt": {
                    "gasUsed": "0x5208",
                    "effectiveGasPrice": "0x5f5e100",
                    "status": "0x1",
                },
            }
        )
        adapter = self._adapter(rpc_post=rpc_post)
        doc = adapter.fetch(DataRequest(kind="tx_metadata", chainid=1, target=TX))
        assert doc["block_number"] == 100
        assert doc["from"] == ADDR
        assert doc["to"] is None
        assert doc["value"] == 10**18
        assert doc["gas_used"] == 21000
        assert doc["selector"] == "0xa9059cbb"
        assert doc["status"] == 1
        assert calls[0]["method"] == "eth_getTransactionByHash"

    def test_retries_then_upstream_error(self):
        attempts = []

        def rpc_post(url, body, timeout):
            attempts.append(1)
            raise OSError("connection refused")

        adapter = self._adapter(rpc_post=rpc_post, retries=3)
        with pytest.raises(UpstreamError) as info:
            adapter.fetch(DataRequest(kind="tx_metadata", chainid=1, target=TX))
        assert len(attempts) == 3
        assert "3 attempts" in str(info.value)

    def test_rpc_error_payloads_are_upstream_errors(self):
        def rpc_post(url, body, timeout):
            return {"error": {"code": -32000, "message": "header not found"}}

        adapter = self._adapter(rpc_post=rpc_post, retries=1)
        with pytest.raises(UpstreamError):
            adapter.fetch(DataRequest(kind="storage_slot", chainid=1, target=ADDR))

    def test_txlist_requires_explorer_credential(self):
        adapter = self._adapter()
        with pytest.raises(MissingCredential) as info:
            adapter.fetch(DataRequest(kind="txlist", chainid=1, target=ADDR))
        assert "ETHERSCAN_API_KEY" in str(info.value)

    def test_txlist_parses_explorer_rows(self):
        def api_get(url, params, timeout):
            assert params["apikey"] == "k"
            assert params["action"] == "txlist"
            return {
                "status": "1",
                "result": [
                    {
                        "hash": TX.upper().replace("0X", "0x"),
                        "blockNumber": "100",
                        "from": ADDR,
                        "to": ADDR,
                        "input": "0x",
                        "value": "0",
                        "gasUsed": "21000",
                        "gasPrice": "100",
                        "isError": "0",
                    }
                ],
            }

        adapter = self._adapter(api_get=api_get, env={"ETHERSCAN_API_KEY": "k"})
        doc = adapter.fetch(DataRequest(kind="txlist", chainid=1, target=ADDR))
        assert doc["records"][0]["txhash"] == TX
        assert doc["records"][0]["status"] is True
        assert doc["records"][0]["index"] == 0

    def test_storage_slot_hexifies_int_blocks(self):
        slots = []

        def rpc_post(url, body, timeout):
            slots.append(body["params"])
            return {"result": "0x2a"}

        adapter = self._adapter(rpc_post=rpc_post)
        doc = adapter.fetch(
            DataRequest(
                kind="storage_slot",
                chainid=1,
                target=ADDR,
                extra={"slot": "0x1", "block": 255},
            )
        )
        assert slots[0] == [ADDR, "0x1", "0xff"]
        assert doc["value_hex"] == "0x2a"


class TestDisassembler:
    def test_push_widths_consume_immediates(self):
        # 6001 = PUSH1 0x01, 52 = MSTORE, 00 = STOP
        listing = disassemble("0x600152 00".replace(" ", ""))
        lines = listing.splitlines()
        assert lines[0].endswith("PUSH1 0x01")
        assert lines[1].endswith("MSTORE")
        assert lines[2].endswith("STOP")

    def test_unknown_opcodes_keep_raw_hex(self):
        listing = disassemble("0x0c")
        assert "UNKNOWN_0x0c" in listing

    def test_limit_caps_output(self):
        listing = disassemble("0x" + "00" * 100, limit=5)
        assert len(listing.splitlines()) == 5
