import math

import numpy as np
import pytest

from gradcheck import make_scene, random_tf
from oracles import naive_splat_blend
from vegsplat.camera import Camera
from vegsplat.colormaps import UNSEEN_TEST_COLORMAPS, named_colormap
from vegsplat.model import GaussianSet, logit
from vegsplat.raster import (
    DEFAULT_SETTINGS,
    ImageGradients,
    SplatData,
    build_splat_data,
    rasterize_backward,
    rasterize_forward,
    render,
    render_with_state,
)
from vegsplat.transfer import OpacityMap, TransferFunction


def single_splat_data(alpha=0.5, color=(1.0, 0.0, 0.0), center=(16.5, 16.5), conic=(1.0, 0.0, 1.0)):
    return SplatData(
        mean2d=np.array([center]),
        conic=np.array([conic]),
        alpha_base=np.array([alpha]),
        depth=np.array([1.0]),
        rect=np.array([[0, 32, 0, 32]], dtype=np.int32),
        channels=np.array([color]),
    )


def test_zero_splats_is_background():
    data = SplatData(mean2d=np.zeros((0, 2)), conic=np.zeros((0, 3)), alpha_base=np.zeros(0),
                     depth=np.zeros(0), rect=np.zeros((0, 4), dtype=np.int32), channels=np.zeros((0, 3)))
    img, _ = rasterize_forward(data, 32, 32, (0.1, 0.2, 0.3))
    assert np.allclose(img.rgb, [0.1, 0.2, 0.3])
    assert np.allclose(img.alpha, 0.0)


def test_single_centered_splat_blend():
    # pixel center exactly on the mean: alpha = 0.5 * exp(0)
    data = single_splat_data()
    img, _ = rasterize_forward(data, 32, 32, (0.0, 0.0, 1.0))
    px = img.rgb[16, 16]
    assert np.allclose(px, [0.5, 0.0, 0.5], atol=1e-12)
    assert img.alpha[16, 16] == pytest.approx(0.5)


def test_two_coincident_splats_expand_equation():
    data = SplatData(
        mean2d=np.array([[16.5, 16.5], [16.5, 16.5]]),
        conic=np.array([[1.0, 0.0, 1.0], [1.0, 0.0, 1.0]]),
        alpha_base=np.array([0.5, 0.5]),
        depth=np.array([1.0, 2.0]),
        rect=np.array([[0, 32, 0, 32], [0, 32, 0, 32]], dtype=np.int32),
        channels=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
    )
    img, _ = rasterize_forward(data, 32, 32, (0.0, 0.0, 1.0))
    # 0.5*c1 + 0.25*c2 + 0.25*bg
    assert np.allclose(img.rgb[16, 16], [0.5, 0.25, 0.25], atol=1e-12)


def scene_splat_data(seed, n=50, res=32):
    rng = np.random.default_rng(seed)
    cam = Camera(position=(0.0, 0.0, 4.0), target=(0.0, 0.0, 0.0), width=res, height=res,
                 fov_y=math.radians(45.0))
    gs = GaussianSet(
        position=rng.uniform([-0.8, -0.8, -1.0], [0.8, 0.8, 1.0], size=(n, 3)),
        log_scale=rng.uniform(math.log(0.04), math.log(0.5), size=(n, 3)),
        rotation=rng.normal(size=(n, 4)),
        raw_value=rng.normal(size=n),
        raw_weight=rng.uniform(-2.5, 2.5, size=n),
        normal=rng.normal(size=(n, 3)),
        raw_ka=rng.normal(size=n), raw_kd=rng.normal(size=n), raw_ks=rng.normal(size=n),
        raw_beta=rng.uniform(0.5, 4.0, size=n),
    )
    tf = random_tf(rng)
    data, _, _, _ = build_splat_data(gs, tf, cam, DEFAULT_SETTINGS, with_aux=False)
    return data, cam, rng.uniform(size=3), gs, tf


@pytest.mark.parametrize("seed", range(10))
def test_tiled_matches_naive_oracle(seed):
    data, cam, bg, _, _ = scene_splat_data(seed)
    img, _ = rasterize_forward(data, cam.width, cam.height, bg)
    order = np.argsort(data.depth, kind="stable")
    oracle_img, oracle_t = naive_splat_blend(
        order, data.mean2d, data.conic, data.alpha_base, data.channels, data.rect,
        cam.width, cam.height, bg,
    )
    assert np.abs(img.rgb - oracle_img[:, :, :3]).max() < 1e-5
    assert np.abs((1.0 - img.alpha) - oracle_t).max() < 1e-5


def test_permuting_input_order_changes_nothing():
    scene = make_scene(3)
    img1 = render(scene.gs, scene.tf, scene.camera, scene.background)
    rng = np.random.default_rng(0)
    perm = rng.permutation(len(scene.gs))
    img2 = render(scene.gs.select(perm), scene.tf, scene.camera, scene.background)
    assert np.array_equal(img1.rgb, img2.rgb)
    assert np.array_equal(img1.alpha, img2.alpha)


def test_colormap_swap_keeps_alpha_plane_bitwise():
    scene = make_scene(5)
    planes = []
    for name in UNSEEN_TEST_COLORMAPS:
        tf = TransferFunction(color=named_colormap(name), opacity=scene.tf.opacity)
        img = render(scene.gs, tf, scene.camera, scene.background)
        planes.append(img.alpha)
    for p in planes[1:]:
        assert np.array_equal(planes[0], p)


def test_render_deterministic():
    scene = make_scene(7)
    a = render(scene.gs, scene.tf, scene.camera, scene.background, with_aux=True)
    b = render(scene.gs, scene.tf, scene.camera, scene.background, with_aux=True)
    assert np.array_equal(a.rgb, b.rgb)
    assert np.array_equal(a.depth, b.depth)


def test_backward_deterministic():
    scene = make_scene(9)
    grads = ImageGradients(rgb=scene.probe["rgb"], alpha=scene.probe["alpha"],
                           depth=scene.probe["depth"], normal=scene.probe["normal"],
                           attrs=scene.probe["attrs"])
    outs = []
    for _ in range(2):
        _, state = render_with_state(scene.gs, scene.tf, scene.camera, scene.background, with_aux=True)
        outs.append(rasterize_backward(state, grads))
    for name, arr in outs[0].arrays().items():
        assert np.array_equal(arr, getattr(outs[1], name)), name


def test_zero_image_gradient_gives_zero_parameter_gradients():
    scene = make_scene(11)
    _, state = render_with_state(scene.gs, scene.tf, scene.camera, scene.background, with_aux=True)
    g = rasterize_backward(state, ImageGradients(rgb=np.zeros((32, 32, 3))))
    for name, arr in g.arrays().items():
        assert np.all(arr == 0.0), name


def test_removing_subthreshold_splats_changes_nothing():
    # alpha_base below the cull threshold can never contribute
    data, cam, bg, _, _ = scene_splat_data(21, n=30)
    low = SplatData(
        mean2d=np.concatenate([data.mean2d, [[16.0, 16.0]]]),
        conic=np.concatenate([data.conic, [[0.5, 0.0, 0.5]]]),
        alpha_base=np.concatenate([data.alpha_base, [DEFAULT_SETTINGS.cull_alpha * 0.5]]),
        depth=np.concatenate([data.depth, [0.5]]),
        rect=np.concatenate([data.rect, np.array([[0, 32, 0, 32]], dtype=np.int32)]),
        channels=np.concatenate([data.channels, [[1.0, 1.0, 1.0]]]),
    )
    img_with, _ = rasterize_forward(low, cam.width, cam.height, bg)
    img_without, _ = rasterize_forward(data, cam.width, cam.height, bg)
    n = len(low.alpha_base)
    assert np.abs(img_with.rgb - img_without.rgb).max() <= n * DEFAULT_SETTINGS.cull_alpha


def test_fully_occluded_splat_gets_zero_gradient():
    # a wall of large near-opaque splats drives transmittance below the
    # termination cutoff before the last splat is reached
    n_wall = 10
    positions = [[0.0, 0.0, 0.5 + 0.05 * i] for i in range(n_wall)] + [[0.0, 0.0, -2.0]]
    gs = GaussianSet(
        position=np.array(positions),
        log_scale=np.full((n_wall + 1, 3), math.log(4.0)),
        rotation=np.tile([1.0, 0.0, 0.0, 0.0], (n_wall + 1, 1)),
        raw_value=np.full(n_wall + 1, logit(0.5)),
        raw_weight=np.full(n_wall + 1, logit(0.97)),
        normal=np.tile([0.0, 0.0, 1.0], (n_wall + 1, 1)),
        raw_ka=np.zeros(n_wall + 1), raw_kd=np.zeros(n_wall + 1), raw_ks=np.zeros(n_wall + 1),
        raw_beta=np.full(n_wall + 1, math.log(8.0)),
    )
    tf = TransferFunction(color=named_colormap("viridis"),
                          opacity=OpacityMap(((0.0, 0.95), (1.0, 0.95))))
    cam = Camera(position=(0.0, 0.0, 4.0), target=(0.0, 0.0, 0.0), width=32, height=32,
                 fov_y=math.radians(45.0))
    img, state = render_with_state(gs, tf, cam, (0.0, 0.0, 0.0), with_aux=True)
    # the far splat must be invisible: the image is identical without it
    img_wall = render(gs.select(np.arange(n_wall)), tf, cam, (0.0, 0.0, 0.0), with_aux=True)
    assert np.array_equal(img.rgb, img_wall.rgb)
    g = rasterize_backward(state, ImageGradients(rgb=np.ones((32, 32, 3))))
    occluded = n_wall  # the farthest splat
    for name, arr in g.arrays().items():
        assert np.all(arr[occluded] == 0.0), name
    # the frontmost wall splats (largest z, nearest the camera) still learn
    assert np.abs(g.raw_value[n_wall - 3:n_wall]).max() > 0.0


def test_rgb_only_render_has_no_aux_planes():
    scene = make_scene(2)
    img = render(scene.gs, scene.tf, scene.camera, scene.background, with_aux=False)
    assert img.depth is None and img.normal is None and img.attrs is None


def test_float32_path_close_to_float64():
    scene = make_scene(4)
    a = render(scene.gs, scene.tf, scene.camera, scene.background, dtype=np.float64)
    b = render(scene.gs, scene.tf, scene.camera, scene.background, dtype=np.float32)
    assert np.abs(a.rgb - b.rgb).max() < 1e-4
