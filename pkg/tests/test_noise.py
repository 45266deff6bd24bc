import numpy as np
import pytest
from hypothesis import given, strategies as st

from dynimp.errors import ConfigError
from dynimp.lattice import ModelParams, build_lattice
from dynimp.noise import sample_schedule, split_horizon, static_schedule

G = build_lattice(2, 5)
P = ModelParams(0.3, 5e-3)


@given(st.floats(0.05, 60), st.floats(0.01, 60))
def test_segment_count_and_partial(horizon, tau):
    s = sample_schedule(G, P, tau, horizon, 1, 0)
    n_full, rem = split_horizon(horizon, tau)
    assert s.n_segments == n_full + (rem > 0)
    assert s.n_segments in (int(np.ceil(horizon / tau - 1e-9)), int(np.ceil(horizon / tau)))
    assert s.durations.sum() == pytest.approx(horizon, rel=1e-12)
    assert np.all(np.abs(s.onsite) <= P.delta / 2)
    assert np.all(np.abs(s.couplings) <= P.bigJ)


def test_integer_ratio_has_no_partial_segment():
    assert split_horizon(25.0, 25.0 / 7) == (7, 0.0)
    assert split_horizon(25.0, 40.0) == (0, 25.0)
    with pytest.raises(ConfigError):
        split_horizon(1.0, 0.0)


def test_static_is_one_segment():
    s = static_schedule(G, P, 25.0, 3, 4)
    assert s.n_segments == 1
    t = sample_schedule(G, P, 25.0, 25.0, 3, 4)
    assert np.array_equal(s.onsite, t.onsite) and np.array_equal(s.couplings, t.couplings)


def test_zero_strength_gives_zero_fields():
    s = sample_schedule(G, ModelParams(0.0, 0.0), 1.0, 10.0, 1, 0)
    assert not s.onsite.any() and not s.couplings.any()


def test_determinism_and_distinct_realizations():
    a = sample_schedule(G, P, 2.0, 25.0, 9, 3)
    b = sample_schedule(G, P, 2.0, 25.0, 9, 3)
    assert np.array_equal(a.onsite, b.onsite) and np.array_equal(a.couplings, b.couplings)
    firsts = {tuple(sample_schedule(G, P, 2.0, 25.0, 9, r).onsite[0]) for r in range(100)}
    assert len(firsts) == 100


def test_segment_draws_do_not_depend_on_horizon():
    # segment k of realization r is addressed by counter, not by position in a stream
    short = sample_schedule(G, P, 1.0, 5.0, 2, 7)
    long = sample_schedule(G, P, 1.0, 50.0, 2, 7)
    assert np.array_equal(short.onsite, long.onsite[:5])


def test_schedule_arrays_read_only():
    s = sample_schedule(G, P, 1.0, 5.0, 2, 7)
    with pytest.raises(ValueError):
        s.onsite[0, 0] = 1.0


def test_moments_and_independence():
    g1 = build_lattice(1, 2)
    s = sample_schedule(g1, P, 1.0, 100_000.0, 5, 0)
    d = s.onsite[:, 0]
    c = s.couplings[:, 0]
    se = d.var() * np.sqrt(2 / len(d))
    assert abs(d.var() - 0.3**2 / 12) < 3 * se
    assert abs(d.mean()) < 5 * d.std() / np.sqrt(len(d))
    assert c.var() == pytest.approx(P.bigJ**2 / 3, rel=0.02)
    x = d[:10_000]
    lag1 = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(lag1) < 5 / np.sqrt(10_000)
