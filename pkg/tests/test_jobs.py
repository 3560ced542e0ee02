import numpy as np
import pytest

from packsim import jobs
from packsim.errors import (
    AbsorptionUnreachableError,
    NegativeRateError,
    NoArrivalsError,
)


def two_phase(mu_lh, mu_hl, mu_l, mu_h, lam=(1.0, 1.0)):
    return jobs.JobModel(
        num_phases=2,
        internal_rates=[[0.0, mu_lh], [mu_hl, 0.0]],
        departure_rates=[mu_l, mu_h],
        arrival_coeffs=list(lam),
    )


def full_two_phase_model():
    # Two-phase model with both internal directions and both departures.
    return two_phase(1.0, 1.0, 1.0, 2.0)


def test_minimal_model_valid():
    m = jobs.JobModel(1, [[0.0]], [1.0], [1.0])
    assert m.total_exit_rate(0) == 1.0


def test_no_departure_path_rejected():
    with pytest.raises(AbsorptionUnreachableError):
        two_phase(1.0, 1.0, 0.0, 0.0)


def test_partial_departure_path_ok():
    # Only phase H departs; L reaches it through the internal edge.
    m = two_phase(1.0, 0.0, 0.0, 2.0)
    assert m.num_phases == 2


def test_unreachable_departure_rejected():
    # L -> H edge missing, L never departs.
    with pytest.raises(AbsorptionUnreachableError) as exc:
        two_phase(0.0, 1.0, 0.0, 2.0)
    assert exc.value.phase == 0


def test_full_two_phase_model_valid():
    assert full_two_phase_model().total_exit_rate(1) == 3.0


def test_negative_rate_rejected():
    with pytest.raises(NegativeRateError):
        jobs.JobModel(1, [[0.0]], [-1.0], [1.0])
    with pytest.raises(NegativeRateError):
        jobs.JobModel(1, [[0.0]], [np.nan], [1.0])
    with pytest.raises(NegativeRateError):
        jobs.JobModel(2, [[0.5, 1.0], [1.0, 0.0]], [1.0, 1.0], [1.0, 0.0])


def test_no_arrivals_rejected():
    with pytest.raises(NoArrivalsError):
        jobs.JobModel(1, [[0.0]], [1.0], [0.0])


def test_exit_rates():
    m = two_phase(3.0, 0.0, 0.5, 2.0)
    assert m.total_exit_rate(0) == pytest.approx(3.5)
    assert m.total_exit_rate(1) == pytest.approx(2.0)


def test_remaining_time_single_phase():
    m = jobs.JobModel(1, [[0.0]], [2.0], [1.0])
    assert jobs.expected_remaining_times(m) == pytest.approx([0.5])


def test_remaining_time_symmetric():
    # Symmetry forces t_L = t_H, then 2 t = 1 + t gives t = 1.
    m = two_phase(1.0, 1.0, 1.0, 1.0)
    assert jobs.expected_remaining_times(m) == pytest.approx([1.0, 1.0])


def test_remaining_time_back_substitution():
    # t_H = 1/2, then t_L = (1 + t_H) / 2 = 0.75.
    m = two_phase(1.0, 0.0, 1.0, 2.0)
    assert jobs.expected_remaining_times(m) == pytest.approx([0.75, 0.5])


def test_remaining_time_positive_finite():
    rng = np.random.default_rng(7)
    for _ in range(25):
        p = int(rng.integers(1, 5))
        internal = rng.uniform(0, 2, size=(p, p))
        np.fill_diagonal(internal, 0.0)
        dep = rng.uniform(0.1, 2, size=p)
        m = jobs.JobModel(p, internal, dep, np.ones(p))
        t = jobs.expected_remaining_times(m)
        assert np.all(t > 0) and np.all(np.isfinite(t))


def test_remaining_time_zero_internal_is_reciprocal():
    dep = np.array([0.5, 2.0, 3.0])
    m = jobs.JobModel(3, np.zeros((3, 3)), dep, [1.0, 0.0, 0.0])
    assert jobs.expected_remaining_times(m) == pytest.approx(1.0 / dep)


def test_remaining_time_rate_scaling():
    m = two_phase(1.3, 0.4, 0.7, 2.2)
    c = 3.7
    scaled = jobs.JobModel(
        2,
        np.asarray(m.internal_rates) * c,
        np.asarray(m.departure_rates) * c,
        m.arrival_coeffs,
    )
    t = jobs.expected_remaining_times(m)
    ts = jobs.expected_remaining_times(scaled)
    assert np.allclose(ts, t / c, rtol=1e-12)
