import math

import numpy as np
import pytest

from packsim import metrics
from packsim.errors import DegenerateGridError, WindowEmptyError


def make_acc(values, batch_len=1.0, tokens_types=2):
    values = np.asarray(values, dtype=float)
    nb = values.shape[0]
    return metrics.MetricsAccumulator(
        batch_len=batch_len,
        active=values * batch_len,
        cost=np.zeros(nb),
        virtual=np.zeros(nb),
        backup=np.zeros(nb),
        tokens=np.zeros((nb, tokens_types)),
        occupancy=np.zeros(3),
        window=nb * batch_len,
        events=int(nb),
        events_post=int(nb),
    )


def test_constant_signal():
    acc = make_acc([5.0] * 20)
    est = metrics.estimate(acc)
    assert est["active"].value == pytest.approx(5.0)
    assert est["active"].half_width == pytest.approx(0.0, abs=1e-12)


def test_square_wave_mean():
    # Alternating 0/10 with equal dwell: time average 5.
    acc = make_acc([0.0, 10.0] * 10)
    est = metrics.estimate(acc)
    assert est["active"].value == pytest.approx(5.0)
    assert est["active"].half_width > 0


def test_window_empty():
    acc = make_acc([1.0] * 20)
    acc.window = 0.0
    with pytest.raises(WindowEmptyError):
        metrics.estimate(acc)


def test_cost_ratio_undefined_without_active_time():
    acc = make_acc([0.0] * 20)
    acc.cost = np.ones(20)
    est = metrics.estimate(acc)
    assert est["cost_per_active"] is None


def test_cost_ratio_value():
    acc = make_acc([2.0] * 20)
    acc.cost = np.full(20, 0.5)
    est = metrics.estimate(acc)
    assert est["cost_per_active"].value == pytest.approx(0.25)


def test_merge_preserves_point_estimate():
    rng = np.random.default_rng(5)
    vals = rng.uniform(0, 10, size=40)
    whole = make_acc(vals)
    first = make_acc(vals[:20])
    second = make_acc(vals[20:])
    merged = first.merge(second)
    est_whole = metrics.estimate(whole)
    est_merged = metrics.estimate(merged)
    assert est_merged["active"].value == pytest.approx(
        est_whole["active"].value, rel=1e-12
    )
    assert merged.window == whole.window


def test_merge_rejects_unequal_batches():
    a = make_acc([1.0] * 10, batch_len=1.0)
    b = make_acc([1.0] * 10, batch_len=2.0)
    with pytest.raises(ValueError):
        a.merge(b)


def test_ci_shrinks_with_window():
    # Poisson-toggling synthetic signal: iid batch means, CI ~ 1/sqrt(nb).
    rng = np.random.default_rng(17)
    widths = []
    for nb in (16, 64, 256):
        vals = rng.poisson(4.0, size=nb).astype(float)
        est = metrics.estimate(make_acc(vals))
        widths.append(est["active"].half_width)
    assert widths[2] < widths[1] < widths[0]
    # Roughly 1/sqrt scaling: a 16x window cuts the width ~4x.
    assert widths[2] < widths[0] / 2.0


def test_gap_scaling_exact_sqrt():
    points = [(r, 2.0 * math.sqrt(r), 0.01) for r in (4, 16, 64, 256)]
    fit = metrics.gap_scaling(points)
    assert fit.slope == pytest.approx(0.5, abs=1e-9)
    assert fit.intercept == pytest.approx(math.log(2.0), abs=1e-9)


def test_gap_scaling_linear():
    points = [(r, 3.0 * r, 0.01) for r in (2, 4, 8, 16)]
    fit = metrics.gap_scaling(points)
    assert fit.slope == pytest.approx(1.0, abs=1e-9)


def test_gap_scaling_floors_nonpositive():
    points = [(4, -0.5, 0.2), (16, 8.0, 0.2), (64, 16.0, 0.2), (256, 32.0, 0.2)]
    fit = metrics.gap_scaling(points)
    assert math.isfinite(fit.slope)
    assert fit.floor[0] == pytest.approx(0.2)


def test_gap_scaling_degenerate_grid():
    with pytest.raises(DegenerateGridError):
        metrics.gap_scaling([(4, 1.0, 0.1), (16, 2.0, 0.1)])
    with pytest.raises(DegenerateGridError):
        metrics.gap_scaling([(4, 1.0, 0.1), (4, 2.0, 0.1), (16, 3.0, 0.1)])


def test_scaling_fit_json():
    points = [(r, 2.0 * math.sqrt(r), 0.01) for r in (4, 16, 64)]
    data = metrics.gap_scaling(points).to_json_dict()
    assert set(data) >= {"r_values", "gaps", "slope", "intercept"}
