import math

import numpy as np
import pytest

from pcpolab.envs.track import generate_track, load_track, save_track


def test_nominal_length_and_closure():
    t = generate_track()
    assert t.total_length == pytest.approx(200 + 60 * math.pi, abs=1e-9)
    assert t.total_length == pytest.approx(388.50, abs=0.01)
    assert math.hypot(t.x[-1] - t.x[0], t.y[-1] - t.y[0]) < 0.015
    assert t.spacing == pytest.approx(0.015, rel=1e-3)


@pytest.mark.parametrize("seed", [0, 1, 2, 99])
def test_seeded_tracks_close_and_repeat(seed):
    t = generate_track(seed)
    assert math.hypot(t.x[-1] - t.x[0], t.y[-1] - t.y[0]) < 0.015
    assert 2 * 80 + 60 * math.pi <= t.total_length <= 2 * 120 + 60 * math.pi
    assert generate_track(seed).total_length == t.total_length


def test_curvature_by_segment():
    t = generate_track()
    assert t.curvature_at(50.0) == 0.0
    assert t.curvature_at(100 + 15 * math.pi) == pytest.approx(1 / 30)
    assert t.curvature_at(100 + 30 * math.pi + 50) == 0.0
    assert t.curvature_at(t.total_length - 1.0) == pytest.approx(1 / 30)
    # arc length wraps around the loop
    assert t.curvature_at(t.total_length + 50.0) == 0.0


def test_consecutive_samples_are_evenly_spaced():
    t = generate_track()
    step = np.hypot(np.diff(t.x), np.diff(t.y))
    assert np.all(step < 0.0151)
    assert np.all(step > 0.0149)


def test_save_and_load(tmp_path):
    t = generate_track(3)
    save_track(tmp_path / "track.txt", t)
    back = load_track(tmp_path / "track.txt")
    assert len(back.s) == len(t.s)
    assert back.total_length == pytest.approx(t.total_length, rel=1e-8)
    assert np.allclose(back.kappa, t.kappa, rtol=1e-8)
