import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vegsplat.colormaps import colormap_names, named_colormap
from vegsplat.transfer import (
    ColorMap,
    OpacityMap,
    TransferFunction,
    d_color_dv,
    d_opacity_dv,
    eval_color,
    eval_opacity,
    linear_opacity_map,
    load_tf,
    make_scaled_opacity_maps,
    make_training_opacity_maps,
    save_tf,
    tf_from_dict,
    tf_to_dict,
)

TENT = OpacityMap(((0.0, 0.0), (0.5, 1.0), (1.0, 0.0)))


def test_eval_linear_identity():
    m = OpacityMap(((0.0, 0.0), (1.0, 1.0)))
    assert eval_opacity(m, 0.25) == pytest.approx(0.25)


def test_eval_exact_at_control_points():
    assert eval_opacity(TENT, 0.5) == pytest.approx(1.0)
    assert eval_opacity(TENT, 0.0) == 0.0
    assert eval_opacity(TENT, 1.0) == 0.0


def test_eval_tent_mid_segment():
    # hand-computed: segment (0.5,1)-(1,0) at v=0.75
    assert eval_opacity(TENT, 0.75) == pytest.approx(0.5)


def test_eval_clamps_out_of_range():
    assert eval_opacity(TENT, -3.0) == 0.0
    assert eval_opacity(TENT, 7.0) == 0.0


def test_derivative_constant_slope():
    m = OpacityMap(((0.0, 0.0), (1.0, 1.0)))
    for v in (0.0, 0.3, 0.999, 1.0):
        assert d_opacity_dv(m, v) == pytest.approx(1.0)


def test_derivative_tent_segments():
    assert d_opacity_dv(TENT, 0.25) == pytest.approx(2.0)
    assert d_opacity_dv(TENT, 0.75) == pytest.approx(-2.0)
    # half-open convention: the knot itself takes the right segment's slope
    assert d_opacity_dv(TENT, 0.5) == pytest.approx(-2.0)


def test_derivative_matches_finite_differences_away_from_knots():
    rng = np.random.default_rng(3)
    maps = [TENT, linear_opacity_map()] + make_training_opacity_maps(5)
    for m in maps:
        for v in rng.uniform(0.01, 0.99, size=40):
            if np.min(np.abs(m.ts - v)) < 1e-3:
                continue
            h = 1e-5
            fd = (eval_opacity(m, v + h) - eval_opacity(m, v - h)) / (2 * h)
            assert abs(d_opacity_dv(m, v) - fd) < 1e-6


def test_color_derivative_matches_finite_differences():
    cm = named_colormap("viridis")
    rng = np.random.default_rng(4)
    for v in rng.uniform(0.01, 0.99, size=30):
        if np.min(np.abs(cm.ts - v)) < 1e-3:
            continue
        h = 1e-5
        fd = (eval_color(cm, v + h) - eval_color(cm, v - h)) / (2 * h)
        assert np.abs(d_color_dv(cm, v) - fd).max() < 1e-6


def test_invalid_maps_rejected():
    with pytest.raises(ValueError):
        OpacityMap(((0.1, 0.0), (1.0, 1.0)))  # missing t=0 endpoint
    with pytest.raises(ValueError):
        OpacityMap(((0.0, 0.0), (0.4, 1.0), (0.4, 0.2), (1.0, 1.0)))  # duplicate t
    with pytest.raises(ValueError):
        OpacityMap(((0.0, 0.0), (1.0, 1.5)))  # alpha out of range


def test_training_maps_steps2_shape():
    maps = make_training_opacity_maps(2)
    assert len(maps) == 2
    a0 = maps[0]
    assert eval_opacity(a0, 0.25) == pytest.approx(1.0)
    assert eval_opacity(a0, 0.75) == pytest.approx(0.0)
    assert eval_opacity(a0, 0.5) == pytest.approx(0.5)
    # first map extends flat to the lower boundary
    assert eval_opacity(a0, 0.0) == pytest.approx(1.0)


def test_training_maps_steps1_degenerate():
    (m,) = make_training_opacity_maps(1)
    vs = np.linspace(0, 1, 101)
    assert np.allclose(eval_opacity(m, vs), 1.0)


def test_training_maps_interior_support_width():
    maps = make_training_opacity_maps(10)
    assert len(maps) == 10
    for k, m in enumerate(maps[1:-1], start=1):
        nz = m.ts[m.values > 0]
        center = (k + 0.5) / 10
        assert np.isclose(nz.min(), center - 0.1) or eval_opacity(m, center - 0.1) == 0.0
        # support is exactly (center - 1/10, center + 1/10)
        assert eval_opacity(m, center - 0.1) == pytest.approx(0.0)
        assert eval_opacity(m, center + 0.1) == pytest.approx(0.0)
        assert eval_opacity(m, center) == pytest.approx(1.0)


@pytest.mark.parametrize("steps", [1, 2, 3, 5, 10, 20])
def test_partition_of_unity(steps):
    maps = make_training_opacity_maps(steps)
    vs = np.linspace(0.0, 1.0, 2001)
    total = sum(eval_opacity(m, vs) for m in maps)
    assert np.abs(total - 1.0).max() < 1e-6


def test_scaled_maps_match_rounded_step_counts():
    broad = make_scaled_opacity_maps(10, 0.5)
    assert [m.points for m in broad] == [m.points for m in make_training_opacity_maps(5)]
    narrow = make_scaled_opacity_maps(10, 2.0)
    assert [m.points for m in narrow] == [m.points for m in make_training_opacity_maps(20)]
    same = make_scaled_opacity_maps(10, 1.0)
    assert [m.points for m in same] == [m.points for m in make_training_opacity_maps(10)]


def test_scaled_maps_bad_args():
    with pytest.raises(ValueError):
        make_scaled_opacity_maps(10, 0.0)
    with pytest.raises(ValueError):
        make_scaled_opacity_maps(1, 0.2)
    with pytest.raises(ValueError):
        make_training_opacity_maps(0)


@given(st.integers(min_value=1, max_value=30), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_partition_of_unity_property(steps, v):
    maps = make_training_opacity_maps(steps)
    total = sum(float(eval_opacity(m, v)) for m in maps)
    assert abs(total - 1.0) < 1e-6


@given(st.floats(0.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_eval_within_convex_hull(v):
    for m in (TENT, linear_opacity_map()):
        val = float(eval_opacity(m, v))
        assert m.values.min() - 1e-12 <= val <= m.values.max() + 1e-12


def test_monotone_map_evaluates_monotone():
    m = OpacityMap(((0.0, 0.0), (0.2, 0.1), (0.7, 0.8), (1.0, 1.0)))
    vs = np.linspace(0, 1, 300)
    out = eval_opacity(m, vs)
    assert np.all(np.diff(out) >= -1e-12)


def test_named_colormaps():
    v = named_colormap("viridis")
    assert np.allclose(eval_color(v, 0.0), [0.267, 0.0049, 0.3294], atol=1e-4)
    g = named_colormap("grayscale")
    for x in (0.0, 0.31, 0.77, 1.0):
        assert np.allclose(eval_color(g, x), [x, x, x], atol=1e-9)
    with pytest.raises(ValueError):
        named_colormap("nonexistent")


def test_all_colormaps_have_enough_points_and_are_deterministic():
    for name in colormap_names():
        cm1 = named_colormap(name)
        cm2 = named_colormap(name)
        assert len(cm1.points) >= 32
        assert cm1.points == cm2.points


def test_tf_json_round_trip(tmp_path):
    tf = TransferFunction(color=named_colormap("jet"), opacity=TENT)
    d = tf_to_dict(tf)
    back = tf_from_dict(d)
    assert np.allclose(back.color.values, tf.color.values)
    assert np.allclose(back.opacity.values, tf.opacity.values)
    path = tmp_path / "tf.json"
    save_tf(tf, path)
    loaded = load_tf(path)
    assert np.allclose(loaded.color.ts, tf.color.ts)
    assert np.allclose(loaded.opacity.values, tf.opacity.values)
