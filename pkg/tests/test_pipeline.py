import numpy as np
import pytest
from dataclasses import replace

from mosr.config import ExperimentConfig, build_config
from mosr.email_stream import DAY, AddressDirectory, DataError, EmailObject
from mosr.evaluation import format_series_csv
from mosr.pipeline import (
    MOSR,
    OnlineRanker,
    config_for_point,
    grid_points,
    robustness_run,
    run_experiment,
    subsample,
    sweep,
    tau_table,
)
from mosr.synthetic import SyntheticConfig, generate_synthetic_stream, preference

SMALL = dict(n_users=5, n_days=30, n_colleagues=10, n_outsiders=15, contacts_per_user=8)


@pytest.fixture(scope="module")
def stream():
    return generate_synthetic_stream(SyntheticConfig(seed=1, **SMALL))


@pytest.fixture(scope="module")
def config(stream):
    return replace(ExperimentConfig(), users=tuple(stream.users))


def test_empty_stream():
    res = run_experiment([], AddressDirectory(frozenset({"a"})), ExperimentConfig())
    assert res.series == [] and res.weights == {}


def test_replay_is_byte_identical(stream, config):
    a = run_experiment(stream.events, stream.directory, config)
    b = run_experiment(stream.events, stream.directory, config)
    assert format_series_csv(a.series) == format_series_csv(b.series)
    assert a.series and {r.ranker for r in a.series} == set(config.ranker_names) | {MOSR}


def test_weights_stay_on_simplex(stream, config):
    res = run_experiment(stream.events, stream.directory, config, track_weights=True)
    for traj in res.trajectory.values():
        for _, w in traj:
            assert abs(w.sum() - 1) < 1e-9 and (w >= 0).all()


def test_no_lookahead(stream, config):
    cut = stream.schedule.start + 20 * DAY
    full = run_experiment(stream.events, stream.directory, config).series
    short = run_experiment([e for e in stream.events if e.timestamp < cut], stream.directory, config).series
    early = lambda rows: [r for r in rows if r.date < "2000-01-21"]  # noqa: E731
    assert early(full) == early(short) and early(full)


def test_noise_free_owa25_preference_ends_on_owa25():
    cfg = SyntheticConfig(noise=0.0, true_preferences=(preference(owa_2_5=1.0),), seed=4, **SMALL)
    s = generate_synthetic_stream(cfg)
    res = run_experiment(s.events, s.directory, replace(ExperimentConfig(), users=tuple(s.users)))
    names = res.ranker_names
    for u in s.users:
        assert names[int(np.argmax(res.weights[u]))] == "owa:2.5"


def test_train_test_split(stream, config):
    start = stream.schedule.start + 10 * DAY
    res = run_experiment(stream.events, stream.directory, replace(config, test_start=start))
    assert {r.split for r in res.series} == {"train", "test"}
    assert all((r.split == "test") == (r.date >= "2000-01-11") for r in res.series)
    assert set(res.average_losses()) == set(res.average_losses(split=None))


def test_end_bound_limits_replay(stream, config):
    res = run_experiment(stream.events, stream.directory, replace(config, end=stream.schedule.start + 5 * DAY))
    assert max(r.date for r in res.series) <= "2000-01-05"


def test_unordered_stream_rejected():
    d = AddressDirectory(frozenset({"a", "b"}), {"a": 1, "b": 1})
    events = [EmailObject("a", ("b",), 10, 1, 0), EmailObject("b", ("a",), 5, 1, 0)]
    with pytest.raises(DataError):
        run_experiment(events, d)


def test_sweep_single_point_matches_run(stream, config):
    rows = sweep(stream.events, stream.directory, config, {"lambda": ["0.99"]})
    assert len(rows) == 1
    direct = run_experiment(stream.events, stream.directory, config).average_losses()
    assert {k: v for k, v in rows[0].items() if k != "lambda"} == direct


def test_sweep_grid_shapes(stream, config):
    rows = sweep(stream.events, stream.directory, config, {"distance": ["two_paths", "shortest"]})
    assert [r["distance"] for r in rows] == ["two_paths", "shortest"]
    assert len(grid_points({"lambda": list("1234"), "delta_d": list("abcd")})) == 16
    cfg = config_for_point(config, {"alphas": "0.5:3", "delta_d": "50"})
    assert cfg.ranker_names[:2] == ["owa:0.5", "owa:3.0"] and cfg.delta_d == 50


def test_losses_grow_with_delta_d(stream, config):
    rows = sweep(stream.events, stream.directory, config, {"delta_d": ["0", "10", "50", "99"]})
    for ranker in config.ranker_names + [MOSR]:
        vals = [r[ranker] for r in rows]
        assert vals == sorted(vals)


def test_tau_table(stream, config):
    res = run_experiment(stream.events, stream.directory, config, collect_features=True)
    s = stream.schedule.start
    rows = dict(tau_table(res, (s, s + 15 * DAY), (s + 15 * DAY, s + 30 * DAY)))
    assert "*" in rows and all(v >= 0 for v in rows.values())
    assert res.feature_matrix(s, s + 30 * DAY).shape[1] == 7


def test_robustness_identity_and_determinism(stream, config):
    full = run_experiment(stream.events, stream.directory, config).average_losses()
    res = robustness_run(stream.events, stream.directory, config, 1.0, 2, seed=0)
    assert res.samples == [full, full]
    assert all(v == 0 for v in res.variance().values())
    a = subsample(stream.events, 0.5, 9, 3)
    assert a == subsample(stream.events, 0.5, 9, 3)
    assert a[0] != a[1]
    with pytest.raises(ValueError):
        subsample(stream.events, 0.0, 1, 1)


def test_online_ranker(stream):
    r = OnlineRanker(stream.directory)
    for e in stream.events[:400]:
        assert r.step(e) >= 0
    u = stream.users[0]
    order = r.rerank(u, stream.events[399].timestamp + 1)
    assert len(order) == len(set(order))


def test_config_keys_feed_the_replay(stream):
    cfg = build_config({"eval.users": ",".join(stream.users), "mrac.delta_d": "0"})
    res = run_experiment(stream.events, stream.directory, cfg)
    assert all(r.loss == 0 for r in res.series if r.n_discovered == 0)
    assert any(r.loss > 0 for r in res.series)
    assert {r.user for r in res.series} <= set(stream.users)
