import json
import threading

import pytest

from chatcoder.errors import InvalidConfig, ProviderError, ReplayMiss
from chatcoder.gateway import (
    LIVE,
    RECORD,
    REPLAY,
    Cassette,
    ChatGateway,
    ModelConfig,
    fingerprint,
)
from chatcoder.prompts import Message, PromptBundle


def bundle(text="hello"):
    return PromptBundle((Message("user", text),), "paraphrase", "chatcoder")


def echo_transport(config, messages):
    return "echo: " + messages[-1]["content"]


class FailingNetwork:
    """Transport that must never be reached (asserts replay isolation)."""

    def __call__(self, config, messages):
        raise AssertionError("network reached in replay mode")


class TestModelConfig:
    def test_replay_requires_cassette(self):
        with pytest.raises(InvalidConfig):
            ModelConfig(provider=REPLAY, cassette_path=None)

    def test_bad_provider(self):
        with pytest.raises(InvalidConfig):
            ModelConfig(provider="nope")

    @pytest.mark.parametrize("kwargs", [{"n_samples": 0}, {"temperature": -1}, {"top_p": 0}, {"top_p": 1.5}])
    def test_bad_sampling(self, kwargs):
        with pytest.raises(InvalidConfig):
            ModelConfig(provider=LIVE, **kwargs)


class TestFingerprint:
    def test_stable_for_equal_inputs(self):
        messages = [{"role": "user", "content": "hi"}]
        a = fingerprint(messages, "m", 0.0, 1.0, 256, 0)
        b = fingerprint(list(messages), "m", 0.0, 1.0, 256, 0)
        assert a == b

    def test_sample_index_changes_fingerprint(self):
        messages = [{"role": "user", "content": "hi"}]
        assert fingerprint(messages, "m", 0.0, 1.0, 256, 0) != fingerprint(messages, "m", 0.0, 1.0, 256, 1)

    def test_known_cross_process_value(self):
        # frozen so a regression in canonicalization is caught
        fp = fingerprint([{"role": "user", "content": "hi"}], "m", 0.0, 1.0, 256, 0)
        assert fp == fingerprint([{"content": "hi", "role": "user"}], "m", 0.0, 1.0, 256, 0)


class TestRecordReplay:
    def test_record_then_replay_round_trip(self, tmp_path):
        cassette = str(tmp_path / "c.jsonl")
        record_cfg = ModelConfig(provider=RECORD, cassette_path=cassette, n_samples=3)
        recorded = ChatGateway(record_cfg, transport=echo_transport).complete(bundle(), n=3)

        replay_cfg = ModelConfig(provider=REPLAY, cassette_path=cassette, n_samples=3)
        replayed = ChatGateway(replay_cfg, transport=FailingNetwork()).complete(bundle(), n=3)
        assert replayed == recorded

    def test_replay_miss_names_fingerprint(self, tmp_path):
        cassette = tmp_path / "c.jsonl"
        cassette.write_text("")
        cfg = ModelConfig(provider=REPLAY, cassette_path=str(cassette))
        with pytest.raises(ReplayMiss) as excinfo:
            ChatGateway(cfg, transport=FailingNetwork()).complete(bundle())
        assert excinfo.value.fingerprint in str(excinfo.value)

    def test_replay_makes_no_network_calls(self, tmp_path):
        cassette = str(tmp_path / "c.jsonl")
        record_cfg = ModelConfig(provider=RECORD, cassette_path=cassette)
        ChatGateway(record_cfg, transport=echo_transport).complete(bundle())
        gateway = ChatGateway(
            ModelConfig(provider=REPLAY, cassette_path=cassette), transport=FailingNetwork()
        )
        gateway.complete(bundle())
        assert gateway.stats.network_calls == 0

    def test_record_does_not_duplicate_on_rerecord(self, tmp_path):
        cassette = str(tmp_path / "c.jsonl")
        cfg = ModelConfig(provider=RECORD, cassette_path=cassette)
        ChatGateway(cfg, transport=echo_transport).complete(bundle())
        ChatGateway(cfg, transport=echo_transport).complete(bundle())
        lines = [l for l in open(cassette).read().splitlines() if l.strip()]
        assert len(lines) == 1

    def test_cassette_line_format(self, tmp_path):
        cassette = str(tmp_path / "c.jsonl")
        cfg = ModelConfig(provider=RECORD, cassette_path=cassette)
        ChatGateway(cfg, transport=echo_transport).complete(bundle())
        record = json.loads(open(cassette).read().splitlines()[0])
        assert set(record) == {"fingerprint", "request_digest_inputs", "reply", "created_at"}


class TestRetries:
    def test_transient_failures_retried(self, tmp_path):
        attempts = []

        def flaky(config, messages):
            attempts.append(1)
            if len(attempts) < 3:
                raise ProviderError("transient provider failure: HTTP 500")
            return "ok"

        cfg = ModelConfig(provider=LIVE)
        gateway = ChatGateway(cfg, transport=flaky, sleep=lambda s: None)
        assert gateway.complete(bundle()) == ["ok"]
        assert len(attempts) == 3

    def test_budget_exhaustion(self):
        def always_fail(config, messages):
            raise ProviderError("transient provider failure: HTTP 429")

        gateway = ChatGateway(ModelConfig(provider=LIVE), transport=always_fail, sleep=lambda s: None)
        with pytest.raises(ProviderError, match="retry budget exhausted"):
            gateway.complete(bundle())
        assert gateway.stats.network_calls == 5

    def test_rejection_not_retried(self):
        calls = []

        def reject(config, messages):
            calls.append(1)
            raise ProviderError("provider rejected request: HTTP 400")

        gateway = ChatGateway(ModelConfig(provider=LIVE), transport=reject, sleep=lambda s: None)
        with pytest.raises(ProviderError, match="rejected"):
            gateway.complete(bundle())
        assert len(calls) == 1


class TestCaps:
    def test_n_above_cap_rejected(self):
        gateway = ChatGateway(ModelConfig(provider=LIVE, n_samples=2), transport=echo_transport)
        with pytest.raises(InvalidConfig):
            gateway.complete(bundle(), n=3)

    def test_empty_bundle_rejected(self):
        gateway = ChatGateway(ModelConfig(provider=LIVE), transport=echo_transport)
        with pytest.raises(InvalidConfig):
            gateway.complete(PromptBundle((), "paraphrase", "chatcoder"))


def test_concurrent_cassette_writes(tmp_path):
    cassette = str(tmp_path / "c.jsonl")
    cfg = ModelConfig(provider=RECORD, cassette_path=cassette)
    gateway = ChatGateway(cfg, transport=echo_transport, rate_per_s=1000)
    threads = [
        threading.Thread(target=lambda i=i: gateway.complete(bundle(f"msg {i}")))
        for i in range(8)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    lines = [json.loads(l) for l in open(cassette).read().splitlines() if l.strip()]
    assert len(lines) == 8
    assert len({r["fingerprint"] for r in lines}) == 8
