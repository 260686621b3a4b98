import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emodistill.cluster import from_spherical, to_spherical
from emodistill.cluster.spherical import angular_distance, avd_to_xyz
from emodistill.errors import GeometryError


def test_unit_x_axis():
    az, el, r = to_spherical([1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert (az, el, r) == (0.0, 0.0, 1.0)


def test_pole_convention():
    az, el, r = to_spherical([0.0, 0.0, 1.0], [0.0, 0.0, 0.0])
    assert az == 0.0
    assert el == pytest.approx(np.pi / 2)
    assert r == pytest.approx(1.0)


def test_translation_invariance():
    az, el, r = to_spherical([1.0, 2.0, 1.0], [1.0, 1.0, 1.0])
    assert az == pytest.approx(np.pi / 2)
    assert el == pytest.approx(0.0)
    assert r == pytest.approx(1.0)


def test_origin_coincidence_rejected():
    with pytest.raises(GeometryError, match="azimuth undefined"):
        to_spherical([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])


def test_avd_axis_order():
    # x = valence, y = arousal, z = dominance
    np.testing.assert_array_equal(avd_to_xyz([1.0, 2.0, 3.0]), [2.0, 1.0, 3.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip(seed):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=3)
    origin = rng.normal(size=3)
    if np.linalg.norm(p - origin) < 1e-6:
        return
    az, el, r = to_spherical(p, origin)
    np.testing.assert_allclose(from_spherical(az, el, r, origin), p, atol=1e-9)


def test_angular_distance_extremes():
    assert angular_distance((0.0, 0.0), (0.0, 0.0)) == pytest.approx(0.0)
    assert angular_distance((0.0, 0.0), (np.pi, 0.0)) == pytest.approx(2.0)
    assert angular_distance((0.0, 0.0), (0.0, np.pi / 2)) == pytest.approx(1.0)
