from hypothesis import given, strategies as st

from mosr.candidates import (
    FOLLOWUP,
    UNANSWERED,
    CandidateEntry,
    CandidateSet,
    active_candidates,
    coverage,
    extract_truth,
    on_email,
)
from mosr.email_stream import DAY, EmailObject

TW = 3 * DAY


def mail(s, r, t):
    return EmailObject(s, (r,) if isinstance(r, str) else tuple(r), t, 1, 0)


def keyed(cset):
    return {k: (e.activates_at, e.expires_at) for k, e in cset.entries.items()}


def test_first_email_creates_both_obligations():
    state = on_email({}, mail("X", "Y", 0), TW)
    assert keyed(state["Y"]) == {("X", UNANSWERED): (0, 259200)}
    assert keyed(state["X"]) == {("Y", FOLLOWUP): (86400, 259200)}


def test_reply_discharges_obligations():
    state = on_email({}, mail("X", "Y", 0), TW)
    on_email(state, mail("Y", "X", 100000), TW)
    assert ("X", UNANSWERED) not in state["Y"].entries
    assert ("X", FOLLOWUP) in state["Y"].entries
    assert ("Y", UNANSWERED) in state["X"].entries
    # X's follow-up on Y got its answer
    assert ("Y", FOLLOWUP) not in state["X"].entries


def test_no_emails_no_candidates():
    assert on_email({}, mail("a", "a", 0), TW)["a"].entries == {}


def test_active_interval_is_half_open_and_deduplicated():
    cs = CandidateSet("me")
    cs.add(CandidateEntry("c", UNANSWERED, 100, 100, 200))
    assert active_candidates(cs, 150) == ["c"]
    assert active_candidates(cs, 200) == []
    cs.add(CandidateEntry("c", FOLLOWUP, 50, 120, 200))
    assert active_candidates(cs, 150) == ["c"]


def test_active_order_is_activation_then_address():
    cs = CandidateSet("me")
    cs.add(CandidateEntry("b", UNANSWERED, 10, 10, 500))
    cs.add(CandidateEntry("a", UNANSWERED, 10, 10, 500))
    cs.add(CandidateEntry("z", UNANSWERED, 5, 5, 500))
    assert active_candidates(cs, 20) == ["z", "a", "b"]


def test_truth_first_contact_order():
    stream = [mail("u", "b", 10), mail("u", "c", 20), mail("u", "b", 30), mail("x", "u", 15)]
    truth = extract_truth(stream, "u", 0, TW)
    assert truth.true_set == ("b", "c") and truth.ranks == {"b": 0, "c": 1}
    assert not extract_truth(stream, "x", 100, TW)
    assert extract_truth([mail("u", "d", 5)], "u", 0, TW).ranks == {"d": 0}


def test_coverage():
    truth = extract_truth([mail("u", ["a", "b"], 1)], "u", 0, TW)
    assert coverage(["a"], truth) == 0.5


events = st.lists(
    st.tuples(st.sampled_from("abcd"), st.sampled_from("abcd"), st.integers(0, 6 * DAY)),
    max_size=25,
).map(lambda xs: sorted((mail(s, r, t) for s, r, t in xs if s != r), key=lambda e: e.timestamp))


@given(events, st.integers(0, 8 * DAY))
def test_nothing_live_after_expiry(stream, t):
    state = {}
    for e in stream:
        on_email(state, e, TW)
    for cs in state.values():
        for e in cs.live(t):
            assert e.activates_at <= t < e.expires_at
            assert e.expires_at == e.source_timestamp + TW
        assert len(active_candidates(cs, t)) == len(set(active_candidates(cs, t)))


@given(events)
def test_replay_is_deterministic(stream):
    def run():
        state = {}
        trace = []
        for e in stream:
            on_email(state, e, TW)
            trace.append({u: keyed(cs) for u, cs in state.items()})
        return trace

    assert run() == run()
