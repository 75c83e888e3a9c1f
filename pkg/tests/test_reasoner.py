from __future__ import annotations

import itertools
import json
import logging
from importlib import resources

import httpx
import numpy as np
import pytest

from mindgrid.matrix import PD_PAYOFF, RWS_PAYOFF
from mindgrid.reasoner import (
    BackendUnavailable,
    CassetteReasoner,
    Completion,
    Message,
    OracleReasoner,
    PromptExchange,
    ReasonerParseError,
    RemoteReasoner,
    SamplingConfig,
    Session,
    make_reasoner,
)
from mindgrid.reasoner.oracle import (
    HYP_BEST_RESPONSE,
    HYP_MIRROR,
    HYP_UNKNOWN,
    fit_hypothesis,
    invert_payoff,
    predict_play,
)
from mindgrid.reasoner.prompts import TemplateError, load_template, placeholders, render, task_of

RWS = ("rock", "paper", "scissors")
PD = ("cooperate", "defect")
KEY = "sk-test-0123456789abcdef"

RWS_A = np.array([[0, -10, 10], [10, 0, -10], [-10, 10, 0]], dtype=float)
PD_A = np.array([[3, 0], [5, 1]], dtype=float)


def np_reward(own, opp, a):
    v, w = np.asarray(own, float), np.asarray(opp, float)
    return float((v / v.sum()) @ a @ (w / w.sum()))


# -- payoff inversion ------------------------------------------------------------


@pytest.mark.parametrize("payoff, a", [(RWS_PAYOFF, RWS_A), (PD_PAYOFF, PD_A)])
def test_invert_payoff_minimises_error(payoff, a):
    size = a.shape[0]
    candidates = [
        tuple(n if i == j else 1 for i in range(size)) for j in range(size) for n in range(1, 10)
    ]
    owns = [c for c in itertools.product(range(1, 7), repeat=size)][:60]
    for own in owns:
        for opp in candidates[::4]:
            reward = np_reward(own, opp, a)
            got = invert_payoff(own, reward, payoff)
            assert got in candidates
            best = min(abs(np_reward(own, c, a) - reward) for c in candidates)
            assert abs(np_reward(own, got, a) - reward) == pytest.approx(best, abs=1e-9)


def test_invert_payoff_recovers_pure_scissors():
    reward = np_reward((5, 1, 1), (1, 1, 6), RWS_A)
    assert invert_payoff((5, 1, 1), reward, RWS_PAYOFF) == (1, 1, 6)


def test_invert_payoff_tie_prefers_five():
    # a balanced own inventory scores 0 against everything
    assert invert_payoff((1, 1, 1), 0.0, RWS_PAYOFF) == (5, 1, 1)


# -- hypothesis fitting ------------------------------------------------------------


def test_fit_empty_history_is_unknown():
    assert fit_hypothesis([], [], RWS) == HYP_UNKNOWN


def test_fit_pure():
    text = fit_hypothesis(["rock", "paper"], ["scissors", "scissors"], RWS)
    assert "pure scissors" in text
    assert predict_play(text, [], [], RWS) == "scissors"


def test_fit_best_response():
    mine = ["rock", "paper", "scissors", "rock"]
    theirs = ["scissors", "paper", "scissors", "rock"]
    assert fit_hypothesis(mine, theirs, RWS) == HYP_BEST_RESPONSE
    assert predict_play(HYP_BEST_RESPONSE, mine, theirs, RWS) == "paper"


def test_fit_mirror_and_grim():
    assert fit_hypothesis(["defect", "cooperate", "defect"], ["cooperate", "defect", "cooperate"], PD) == HYP_MIRROR
    grim = fit_hypothesis(["defect", "cooperate", "cooperate"], ["cooperate", "defect", "defect"], PD)
    assert "until I have defected 1" in grim
    assert predict_play(grim, ["cooperate"], ["cooperate"], PD) == "cooperate"
    assert predict_play(grim, ["defect"], ["cooperate"], PD) == "defect"


def test_fit_flip():
    text = fit_hypothesis(["paper"] * 4, ["rock", "rock", "scissors", "scissors"], RWS)
    assert "starts with rock and switches to scissors after 2" in text
    assert predict_play(text, [], ["rock"], RWS) == "rock"
    assert predict_play(text, [], ["rock", "rock"], RWS) == "scissors"


def _exchange(text, config=None):
    return PromptExchange("sys", (Message("user", text),), config or SamplingConfig())


def test_oracle_is_deterministic():
    fields = {
        "step": 3, "opponent": "player_1", "resource_names": list(RWS), "history": [],
        "top_hypotheses": [],
    }
    prompt = render(load_template("hypothesis"), fields)
    a, b = OracleReasoner().complete(_exchange(prompt)), OracleReasoner().complete(_exchange(prompt))
    assert a.text == b.text and HYP_UNKNOWN in a.text


def test_oracle_unknown_task():
    assert "Unsupported" in OracleReasoner().complete(_exchange("[task: juggle]")).text
    assert "do not know" in OracleReasoner().complete(_exchange("hello")).text


# -- remote backend ---------------------------------------------------------------


def _ok(text="{'ok': 1}"):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


def _remote(monkeypatch, handler, **kw):
    monkeypatch.setenv("MINDGRID_API_KEY", KEY)
    sleeps = []
    r = RemoteReasoner(
        "https://llm.invalid/v1/", "m", transport=httpx.MockTransport(handler), sleep=sleeps.append, **kw
    )
    return r, sleeps


def test_remote_sends_chat_payload(monkeypatch):
    seen = []

    def handler(request):
        seen.append(request)
        return _ok()

    r, _ = _remote(monkeypatch, handler)
    out = r.complete(_exchange("hi", SamplingConfig(temperature=0.5, max_tokens=10)))
    assert out.text == "{'ok': 1}" and out.retries == 0
    req = seen[0]
    assert str(req.url) == "https://llm.invalid/v1/chat/completions"
    assert req.headers["authorization"] == f"Bearer {KEY}"
    body = json.loads(req.content)
    assert body["messages"] == [{"role": "system", "content": "sys"}, {"role": "user", "content": "hi"}]
    assert (body["model"], body["temperature"], body["max_tokens"]) == ("m", 0.5, 10)


def test_remote_retries_with_backoff(monkeypatch, caplog):
    replies = iter([httpx.Response(503), httpx.Response(429), _ok("done")])
    r, sleeps = _remote(monkeypatch, lambda req: next(replies))
    with caplog.at_level(logging.DEBUG):
        out = r.complete(_exchange("hi"))
    assert out.text == "done" and out.retries == 2
    assert sleeps == [1.0, 2.0]
    assert KEY not in caplog.text


def test_remote_retries_transport_errors(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) == 1:
            raise httpx.ConnectError("refused", request=request)
        return _ok("back")

    r, _ = _remote(monkeypatch, handler)
    assert r.complete(_exchange("hi")).text == "back"


def test_remote_gives_up(monkeypatch, caplog):
    r, sleeps = _remote(monkeypatch, lambda req: httpx.Response(500), max_retries=2)
    with caplog.at_level(logging.DEBUG), pytest.raises(BackendUnavailable, match="3 attempts") as info:
        r.complete(_exchange("hi"))
    assert len(sleeps) == 2
    assert KEY not in caplog.text and KEY not in str(info.value)


def test_remote_client_error_is_not_retried(monkeypatch):
    r, sleeps = _remote(monkeypatch, lambda req: httpx.Response(401, text="bad key"))
    with pytest.raises(BackendUnavailable, match="HTTP 401"):
        r.complete(_exchange("hi"))
    assert sleeps == []


def test_remote_malformed_body(monkeypatch):
    r, _ = _remote(monkeypatch, lambda req: httpx.Response(200, json={"nope": 1}))
    with pytest.raises(BackendUnavailable, match="malformed"):
        r.complete(_exchange("hi"))


def test_remote_needs_key_from_environment(monkeypatch):
    monkeypatch.delenv("MINDGRID_API_KEY", raising=False)
    with pytest.raises(ValueError, match="MINDGRID_API_KEY"):
        RemoteReasoner("https://llm.invalid", "m")


# -- cassettes ----------------------------------------------------------------------


def test_cassette_record_then_replay(tmp_path):
    path = tmp_path / "c.jsonl"
    rec = make_reasoner("cassette", path=path, mode="record", inner=OracleReasoner())
    prompt = "[task: hypothesis]\nResource Order: ['rock/yellow', 'paper/purple', 'scissors/blue']\nInteraction History: []"
    first = rec.complete(_exchange(prompt)).text
    replay = CassetteReasoner(path)
    assert replay.complete(_exchange(prompt)).text == first
    with pytest.raises(BackendUnavailable):
        replay.complete(_exchange(prompt + " "))
    line = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert line["digest"] == _exchange(prompt).digest()


def test_cassette_replays_repeats_in_order(tmp_path):
    path = tmp_path / "c.jsonl"
    replies = iter(["one", "two"])

    class Scripted:
        name = "scripted"

        def complete(self, exchange):
            return Completion(next(replies))

    rec = CassetteReasoner(path, "record", Scripted())
    rec.complete(_exchange("x"))
    rec.complete(_exchange("x"))
    replay = CassetteReasoner(path)
    assert [replay.complete(_exchange("x")).text for _ in range(3)] == ["one", "two", "two"]


def test_digest_depends_on_config():
    assert _exchange("x").digest() != _exchange("x", SamplingConfig(temperature=0.7)).digest()


def test_make_reasoner_rejects_unknown():
    with pytest.raises(ValueError):
        make_reasoner("psychic")


# -- session -----------------------------------------------------------------------


class Scripted:
    name = "scripted"

    def __init__(self, *replies):
        self.replies = list(replies)
        self.seen = []

    def complete(self, exchange):
        self.seen.append(exchange)
        return Completion(self.replies.pop(0))


def _need_int(v):
    if not isinstance(v, dict) or not isinstance(v.get("n"), int):
        raise ValueError("need {'n': int}")
    return v["n"]


def test_session_retries_once_with_error():
    backend = Scripted("no idea", "```python\n{'n': 4}\n```")
    s = Session(backend)
    assert s.ask("verdict_checked", {}, _need_int) == 4
    assert s.calls == 2
    retry = backend.seen[1].messages
    assert [m.role for m in retry] == ["user", "assistant", "user"]
    assert "could not be used" in retry[2].content
    assert [t.task for t in s.drain_traces()] == ["verdict_checked"] * 2
    assert s.traces == []


def test_session_gives_up_after_retry():
    s = Session(Scripted("{'n': 'x'}", "{'m': 1}"))
    with pytest.raises(ReasonerParseError, match="need"):
        s.ask("verdict_checked", {}, _need_int)


# -- prompt templates ------------------------------------------------------------


def _template_names():
    folder = resources.files("mindgrid").joinpath("data", "prompts")
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".txt"))


@pytest.mark.parametrize("name", _template_names())
def test_template_tags_and_fields(name):
    text = load_template(name)
    if name.startswith(("system_", "verdict_")):
        assert task_of(text) is None
    else:
        assert text.splitlines()[0] == f"[task: {name}]"
        assert task_of(text) == name
    fields = {k: f"<{k}>" for k in placeholders(text)}
    out = render(text, fields)
    assert all(f"<{k}>" in out for k in fields)


def test_render_keeps_literal_braces():
    assert render("{'action_plan': []} {x}", {"x": 1}) == "{'action_plan': []} 1"
    with pytest.raises(TemplateError):
        render("{missing}", {})
