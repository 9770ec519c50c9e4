import pytest

from litreview.gateway import (AuthError, Gateway, HttpChatProvider,
                               MalformedPayloadError, MockProvider, ParseError,
                               ProviderConfig, RateLimitError, RequestContext,
                               mock_gateway, parse_binary, parse_labeled_multi,
                               parse_subclass_list, request_fingerprint)


class TestParseBinary:
    @pytest.mark.parametrize("text,expected", [
        ("Yes", "Yes"),
        ("  no.\n", "No"),
        ('"YES"', "Yes"),
        ("```\nNo\n```", "No"),
        ("yes!", "Yes"),
    ])
    def test_lenient_forms(self, text, expected):
        assert parse_binary(text) == expected

    @pytest.mark.parametrize("text", [
        "The answer is Yes because the abstract develops a model.",
        "maybe",
        "",
        "Yes and No",
    ])
    def test_failures_carry_text(self, text):
        with pytest.raises(ParseError) as exc:
            parse_binary(text)
        assert exc.value.text == text

    def test_round_trip_identity(self):
        for answer in ("Yes", "No"):
            assert parse_binary(answer) == answer


class TestParseLabeledMulti:
    def test_example_map(self, taxonomy):
        dim = taxonomy.dimension("underlying")
        text = ("{Stocks: yes, Indexes: no, Commodities: no, Currencies: no, "
                "Interest Rates: yes, Cryptocurrencies: no}")
        assert parse_labeled_multi(text, dim) == frozenset({"Stocks", "Interest Rates"})

    def test_all_no_becomes_sentinel(self, taxonomy):
        dim = taxonomy.dimension("underlying")
        text = ("{Stocks: no, Indexes: no, Commodities: no, Currencies: no, "
                "Interest Rates: no, Cryptocurrencies: no}")
        assert parse_labeled_multi(text, dim) == frozenset({"Not Specified"})

    def test_never_empty(self, taxonomy):
        dim = taxonomy.dimension("underlying")
        text = ("{Stocks: no, Indexes: no, Commodities: no, Currencies: no, "
                "Interest Rates: no, Cryptocurrencies: no}")
        assert parse_labeled_multi(text, dim)

    def test_indexes_alias_maps_to_indices(self, taxonomy):
        dim = taxonomy.dimension("underlying")
        text = ("{Stocks: no, Indexes: yes, Commodities: no, Currencies: no, "
                "Interest Rates: no, Cryptocurrencies: no}")
        assert parse_labeled_multi(text, dim) == frozenset({"Indices"})

    def test_value_outside_yes_no(self, taxonomy):
        dim = taxonomy.dimension("underlying")
        text = ("{Stocks: maybe, Indexes: no, Commodities: no, Currencies: no, "
                "Interest Rates: no, Cryptocurrencies: no}")
        with pytest.raises(ParseError):
            parse_labeled_multi(text, dim)

    def test_missing_keys(self, taxonomy):
        dim = taxonomy.dimension("underlying")
        with pytest.raises(ParseError) as exc:
            parse_labeled_multi("{Stocks: yes}", dim)
        assert "Indices" in str(exc.value)

    def test_unparseable_structure(self, taxonomy):
        dim = taxonomy.dimension("underlying")
        with pytest.raises(ParseError):
            parse_labeled_multi("Stocks yes, the rest no", dim)


class TestParseSubclassList:
    def test_two_indices(self, taxonomy):
        dim = taxonomy.dimension("model_type")
        assert parse_subclass_list("[1.2; 2.1]", dim) == frozenset({"1.2", "2.1"})

    def test_empty_list_becomes_catchall(self, taxonomy):
        dim = taxonomy.dimension("model_type")
        assert parse_subclass_list("[]", dim) == frozenset({"8.3"})

    def test_bad_index_reported(self, taxonomy):
        dim = taxonomy.dimension("model_type")
        with pytest.raises(ParseError) as exc:
            parse_subclass_list("[1.2; 1.2; 9.9]", dim)
        assert "9.9" in str(exc.value)

    def test_deduplicates(self, taxonomy):
        dim = taxonomy.dimension("model_type")
        assert parse_subclass_list("[1.2; 1.2]", dim) == frozenset({"1.2"})

    def test_comma_separators_and_fencing(self, taxonomy):
        dim = taxonomy.dimension("model_type")
        assert parse_subclass_list("```\n[1.1, 2.3]\n```", dim) == frozenset({"1.1", "2.3"})

    def test_prose_rejected(self, taxonomy):
        dim = taxonomy.dimension("model_type")
        with pytest.raises(ParseError):
            parse_subclass_list("The classes are [1.1]", dim)


class TestMockProvider:
    def test_scripted_answer(self, gateway):
        ctx = RequestContext("P07", "pricing_model", 1)
        assert gateway.complete("prompt text", ctx).text == "Yes"

    def test_determinism(self, gateway):
        ctx = RequestContext("P05", "pricing_model", 3)
        first = gateway.complete("p", ctx).text
        assert all(gateway.complete("p", ctx).text == first for _ in range(5))

    def test_missing_entry_raises(self, gateway):
        from litreview.gateway import GatewayError
        with pytest.raises(GatewayError):
            gateway.complete("p", RequestContext("P99", "pricing_model", 1))

    def test_empty_prompt_precondition(self, gateway):
        with pytest.raises(ValueError):
            gateway.complete("  ", RequestContext("P01", "pricing_model", 1))

    def test_fingerprint_stable(self):
        a = request_fingerprint("p", "m", 0.0)
        assert a == request_fingerprint("p", "m", 0.0)
        assert a != request_fingerprint("p2", "m", 0.0)


class TestRetries:
    def test_transient_failures_then_success(self):
        script = {"responses": [
            {"paper_id": "A", "dimension_id": "d", "run_index": 1,
             "text": "Yes", "transient_failures": 2},
        ]}
        provider = MockProvider(script)
        config = ProviderConfig(provider_id="mock", model_name="m", max_retries=2)
        gw = Gateway(config, provider, sleep=lambda _s: None)
        response = gw.complete("p", RequestContext("A", "d", 1))
        assert response.text == "Yes"
        assert provider.calls == 3

    def test_rate_limit_exhausted_after_retries(self):
        script = {"responses": [
            {"paper_id": "A", "dimension_id": "d", "run_index": 1,
             "text": "Yes", "transient_failures": 3},
        ]}
        provider = MockProvider(script)
        config = ProviderConfig(provider_id="mock", model_name="m", max_retries=2)
        gw = Gateway(config, provider, sleep=lambda _s: None)
        with pytest.raises(RateLimitError):
            gw.complete("p", RequestContext("A", "d", 1))
        assert provider.calls == 3  # 1 attempt + 2 retries

    def test_auth_failure_not_retried(self):
        script = {"responses": [
            {"paper_id": "A", "dimension_id": "d", "run_index": 1,
             "text": "x", "error": "auth"},
        ]}
        provider = MockProvider(script)
        gw = Gateway(ProviderConfig("mock", "m", max_retries=5), provider,
                     sleep=lambda _s: None)
        with pytest.raises(AuthError):
            gw.complete("p", RequestContext("A", "d", 1))
        assert provider.calls == 1

    def test_backoff_delays_double(self):
        delays = []
        script = {"responses": [
            {"paper_id": "A", "dimension_id": "d", "run_index": 1,
             "text": "ok", "transient_failures": 3},
        ]}
        gw = Gateway(ProviderConfig("mock", "m", max_retries=3),
                     MockProvider(script), backoff_base=0.5, sleep=delays.append)
        gw.complete("p", RequestContext("A", "d", 1))
        assert delays == [0.5, 1.0, 2.0]


class FakeSession:
    def __init__(self, responses):
        self._responses = list(responses)
        self.requests = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append({"url": url, "json": json, "headers": headers})
        return self._responses.pop(0)


class FakeResponse:
    def __init__(self, status_code, body=None):
        self.status_code = status_code
        self._body = body or {}

    def json(self):
        return self._body


class TestHttpChatProvider:
    def config(self, **kw):
        return ProviderConfig(provider_id="remote", model_name="big-model",
                              endpoint="https://api.example/v1/chat",
                              credential_ref="TEST_LLM_KEY", **kw)

    def test_extracts_first_choice(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sekret")
        session = FakeSession([FakeResponse(200, {
            "choices": [{"message": {"content": "Yes"}}]})])
        provider = HttpChatProvider(self.config(), session=session)
        assert provider.send("prompt") == "Yes"
        sent = session.requests[0]
        assert sent["json"]["model"] == "big-model"
        assert sent["json"]["messages"] == [{"role": "user", "content": "prompt"}]
        assert sent["headers"]["Authorization"] == "Bearer sekret"

    def test_missing_credential(self, monkeypatch):
        monkeypatch.delenv("TEST_LLM_KEY", raising=False)
        provider = HttpChatProvider(self.config(), session=FakeSession([]))
        with pytest.raises(AuthError):
            provider.send("prompt")

    def test_status_mapping(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "k")
        for status, exc in [(401, AuthError), (429, RateLimitError)]:
            provider = HttpChatProvider(self.config(), session=FakeSession([FakeResponse(status)]))
            with pytest.raises(exc):
                provider.send("prompt")

    def test_malformed_payload(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "k")
        provider = HttpChatProvider(self.config(),
                                    session=FakeSession([FakeResponse(200, {"nope": 1})]))
        with pytest.raises(MalformedPayloadError):
            provider.send("prompt")

    def test_429_retried_three_times_then_error(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "k")
        session = FakeSession([FakeResponse(429)] * 3)
        provider = HttpChatProvider(self.config(max_retries=2), session=session)
        gw = Gateway(self.config(max_retries=2), provider, sleep=lambda _s: None)
        with pytest.raises(RateLimitError):
            gw.complete("prompt")
        assert len(session.requests) == 3

    def test_credential_never_in_serialized_config(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "supersecret")
        d = self.config().to_dict()
        assert "supersecret" not in str(d)
        assert d["credential_ref"] == "TEST_LLM_KEY"
