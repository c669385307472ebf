import struct

import numpy as np
import pytest

from oracles import brute_force_tet_sample
from vegsplat.errors import DataError, FormatError
from vegsplat.volume import (
    StructuredVolume,
    UnstructuredVolume,
    generate_synthetic,
    load_structured,
    load_unstructured,
    sample,
    save_structured,
    save_unstructured,
)


def write_raw(tmp_path, name, data: bytes, desc: str):
    p = tmp_path / name
    p.write_bytes(data)
    (tmp_path / (name + ".txt")).write_text(desc)
    return p


def test_load_u8_min_max_normalization(tmp_path):
    p = write_raw(tmp_path, "v.raw", bytes(range(8)), "dims=2,2,2\ndtype=u8\n")
    vol = load_structured(p)
    assert np.allclose(vol.values, np.arange(8) / 7.0)
    assert vol.raw_range == (0.0, 7.0)


def test_load_constant_field(tmp_path):
    p = write_raw(tmp_path, "c.raw", bytes([5] * 8), "dims=2,2,2\ndtype=u8\n")
    vol = load_structured(p)
    assert np.all(vol.values == 0.0)
    assert vol.raw_range == (5.0, 5.0)


def test_load_size_mismatch(tmp_path):
    p = write_raw(tmp_path, "bad.raw", bytes(7), "dims=2,2,2\ndtype=u8\n")
    with pytest.raises(FormatError):
        load_structured(p)


def test_load_non_finite_f32(tmp_path):
    data = struct.pack("<8f", 1.0, 2.0, float("nan"), 4.0, 5.0, 6.0, 7.0, 8.0)
    p = write_raw(tmp_path, "nan.raw", data, "dims=2,2,2\ndtype=f32\n")
    with pytest.raises(DataError):
        load_structured(p)


def test_descriptor_validation(tmp_path):
    p = write_raw(tmp_path, "v.raw", bytes(8), "dims=2,2,2\ndtype=u128\n")
    with pytest.raises(FormatError):
        load_structured(p)
    p2 = write_raw(tmp_path, "w.raw", bytes(8), "dtype=u8\n")
    with pytest.raises(FormatError):
        load_structured(p2)


def test_save_load_structured_round_trip(tmp_path):
    vol = generate_synthetic("blobs", (8, 9, 10), seed=5)
    path = tmp_path / "blob.raw"
    save_structured(vol, path)
    back = load_structured(path)
    assert back.dims == vol.dims
    assert np.allclose(back.values, vol.values, atol=1e-7)
    assert np.allclose(back.spacing, vol.spacing)


def test_sample_at_grid_vertex_returns_stored_value():
    rng = np.random.default_rng(1)
    vals = rng.uniform(size=3 * 4 * 5)
    vol = StructuredVolume(dims=(3, 4, 5), spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0),
                           values=vals, raw_range=(0.0, 1.0))
    for _ in range(20):
        ix, iy, iz = rng.integers(3), rng.integers(4), rng.integers(5)
        got = sample(vol, (float(ix), float(iy), float(iz)))
        assert got == pytest.approx(vals[ix + 3 * (iy + 4 * iz)], abs=1e-12)


def test_sample_cell_center_half_and_half():
    # lower z-plane corners all 0, upper all 1: center of the cell -> 0.5
    vals = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=np.float64)
    vol = StructuredVolume(dims=(2, 2, 2), spacing=(1, 1, 1), origin=(0, 0, 0),
                           values=vals, raw_range=(0, 1))
    assert sample(vol, (0.5, 0.5, 0.5)) == pytest.approx(0.5)


def test_sample_outside_domain_is_absent():
    vol = generate_synthetic("spherical_shells", 8)
    lo, hi = vol.bbox
    assert sample(vol, hi + 0.1) is None
    assert sample(vol, lo - 1e-6) is None
    assert sample(vol, hi) is not None  # boundary itself is inside


def test_trilinear_reproduces_tri_affine_functions():
    def f(x, y, z):
        return 0.31 + 0.11 * x + 0.07 * y + 0.05 * z + 0.04 * x * y + 0.03 * x * z + 0.02 * y * z + 0.01 * x * y * z

    dims = (4, 3, 5)
    pos_vals = []
    for iz in range(dims[2]):
        for iy in range(dims[1]):
            for ix in range(dims[0]):
                pos_vals.append(f(ix / 3, iy / 2, iz / 4))
    vol = StructuredVolume(dims=dims, spacing=(1 / 3, 1 / 2, 1 / 4), origin=(0, 0, 0),
                           values=np.array(pos_vals), raw_range=(0, 1))
    rng = np.random.default_rng(7)
    for _ in range(200):
        p = rng.uniform(0, 1, size=3)
        assert sample(vol, p) == pytest.approx(f(*p), abs=1e-12)


def unit_tet_volume():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.float64)
    vals = np.array([0.0, 0.0, 0.0, 1.0])
    tets = np.array([[0, 1, 2, 3]], dtype=np.int32)
    return UnstructuredVolume(vertices=verts, values=vals, tets=tets, raw_range=(0.0, 1.0))


def test_unstructured_round_trip(tmp_path):
    vol = unit_tet_volume()
    path = tmp_path / "tet.vtet"
    save_unstructured(vol, path)
    back = load_unstructured(path)
    assert len(back.tets) == 1
    assert len(back.vertices) == 4
    assert np.allclose(back.values, vol.values)


def test_unstructured_bad_magic(tmp_path):
    path = tmp_path / "bad.vtet"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(FormatError):
        load_unstructured(path)


def test_unstructured_out_of_range_index(tmp_path):
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype="<f4")
    vals = np.zeros(4, dtype="<f4")
    tets = np.array([[0, 1, 2, 9]], dtype="<u4")
    blob = b"VTET" + struct.pack("<III", 1, 4, 1) + verts.tobytes() + vals.tobytes() + tets.tobytes()
    path = tmp_path / "oob.vtet"
    path.write_bytes(blob)
    with pytest.raises(DataError):
        load_unstructured(path)


def test_degenerate_tet_rejected():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.5, 0.5, 0.0]], dtype=np.float64)
    with pytest.raises(DataError):
        UnstructuredVolume(vertices=verts, values=np.zeros(4), tets=np.array([[0, 1, 2, 3]], dtype=np.int32),
                           raw_range=(0, 1))


def five_tet_cube():
    verts = np.array([
        [0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0],
        [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1],
    ], dtype=np.float64)
    tets = np.array([
        [0, 1, 2, 4],
        [1, 3, 2, 7],
        [1, 4, 5, 7],
        [2, 4, 6, 7],
        [1, 2, 4, 7],  # central tet
    ], dtype=np.int32)
    vals = np.linspace(0, 1, 8)
    return UnstructuredVolume(vertices=verts, values=vals, tets=tets, raw_range=(0.0, 1.0))


def test_accel_candidates_cover_cube_center():
    vol = five_tet_cube()
    cands = set(vol.accel.candidates(np.array([0.5, 0.5, 0.5])).tolist())
    assert cands == {0, 1, 2, 3, 4}


def test_unstructured_sampling_matches_brute_force():
    vol = five_tet_cube()
    rng = np.random.default_rng(11)
    pts = rng.uniform(-0.2, 1.2, size=(1000, 3))
    for p in pts:
        expected = brute_force_tet_sample(vol.vertices, vol.values, vol.tets, p)
        got = sample(vol, p)
        if expected is None:
            assert got is None
        else:
            assert got == pytest.approx(expected, abs=1e-12)


def test_unit_tet_barycentric_values():
    vol = unit_tet_volume()
    assert sample(vol, (0.0, 0.0, 0.5)) == pytest.approx(0.5)
    assert sample(vol, (0.25, 0.25, 0.25)) == pytest.approx(0.25)
    assert sample(vol, (0.6, 0.6, 0.6)) is None


def test_synthetic_shells_center_is_peak():
    vol = generate_synthetic("spherical_shells", 64, count=3)
    nx, ny, nz = vol.dims
    center_idx = (nx // 2) + nx * ((ny // 2) + ny * (nz // 2))
    assert vol.values[center_idx] == pytest.approx(1.0)
    assert vol.values.min() < 0.05 and vol.values.max() > 0.95


def test_synthetic_determinism():
    a = generate_synthetic("blobs", 16, seed=1, count=4)
    b = generate_synthetic("blobs", 16, seed=1, count=4)
    assert np.array_equal(a.values, b.values)
    c = generate_synthetic("blobs", 16, seed=2, count=4)
    assert not np.array_equal(a.values, c.values)


def test_synthetic_small_dims_rejected():
    with pytest.raises(ValueError):
        generate_synthetic("blobs", 4)
    with pytest.raises(ValueError):
        generate_synthetic("unknown_kind", 16)


@pytest.mark.parametrize("kind", ["blobs", "marschner_lobb", "spherical_shells"])
def test_synthetic_full_range_and_normalized(kind):
    vol = generate_synthetic(kind, 16, seed=3)
    assert vol.values.min() >= 0.0 and vol.values.max() <= 1.0
    assert vol.values.min() < 0.05 and vol.values.max() > 0.95
