import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskgan.data import (LabelMap, PairDataset, PhantomSpec, Volume, batch_iterator,
                          extract_axial_slices, header_summary, load_nifti_pairs, load_phantom,
                          make_condition, normalize_volume, parse_nifti, phantom_dataset,
                          phantom_pair, resize, write_nifti, write_phantom)
from maskgan.data.dataset import TrainingPair
from maskgan.data.phantom import read_manifest, render_labels
from maskgan.data.preprocess import stack_slices
from maskgan.errors import (BadMagicError, ConfigError, ContractError, DataError, NiftiError,
                            TruncatedError, UnsupportedDatatypeError)
from maskgan.rng import Rng
import niftifix

MMWHS = {"Myo": 205, "LA": 420, "LV": 500, "RA": 550, "RV": 600, "Ao": 820, "PA": 850}


# --- NIfTI -----------------------------------------------------------------

CASES = [(2, [0, 7, 200, 255]), (4, [-1000, 0, 1, 3071]), (16, [0.0, -1.5, 2.25, 1e6])]


@pytest.mark.parametrize("datatype,values", CASES)
@pytest.mark.parametrize("byteorder", ["<", ">"])
def test_parse_fixture_and_round_trip_bitwise(datatype, values, byteorder):
    data = niftifix.build(values, (2, 2, 1), datatype, byteorder, spacing=(0.5, 0.75, 2.0))
    vol = parse_nifti(data)
    assert vol.dims == (2, 2, 1)
    assert vol.spacing == (0.5, 0.75, 2.0)
    assert vol.byteorder == byteorder
    assert np.array_equal(vol.array(), niftifix.expected_array(values, (2, 2, 1)))
    assert write_nifti(vol) == data


def test_slope_and_intercept_are_applied():
    vol = parse_nifti(niftifix.build([0, 1, 2, 3], (4, 1, 1), 4, slope=2.0, inter=1.0))
    assert vol.voxels.tolist() == [1.0, 3.0, 5.0, 7.0]


def test_zero_slope_means_unscaled():
    vol = parse_nifti(niftifix.build([0, 1, 2, 3], (4, 1, 1), 4, slope=0.0, inter=5.0))
    assert vol.voxels.tolist() == [0.0, 1.0, 2.0, 3.0]


def test_voxel_order_is_x_fastest():
    vals = list(range(2 * 3 * 4))
    vol = parse_nifti(niftifix.build(vals, (2, 3, 4), 4))
    arr = vol.array()
    assert arr.shape == (4, 3, 2)
    assert arr[1, 2, 1] == 1 + 2 * 2 + 1 * 6
    slices = extract_axial_slices(vol)
    assert len(slices) == 4 and slices[1].shape == (2, 3)
    assert slices[1][1, 2] == arr[1, 2, 1]          # indexed [x, y]
    assert np.array_equal(stack_slices(slices, vol).voxels, vol.voxels)


def test_header_image_pair():
    hdr, img = niftifix.build([1.0, 2.0], (2, 1, 1), 16, magic=b"ni1\0", vox_offset=0)
    assert parse_nifti(hdr, img).voxels.tolist() == [1.0, 2.0]
    with pytest.raises(NiftiError):
        parse_nifti(hdr)


def test_rejects_float64_and_bad_files():
    with pytest.raises(UnsupportedDatatypeError):
        parse_nifti(niftifix.build([1.0, 2.0], (2, 1, 1), 64))
    good = niftifix.float32_2x2x1()
    with pytest.raises(TruncatedError):
        parse_nifti(good[:-1])
    with pytest.raises(TruncatedError):
        parse_nifti(good[:100])
    bad_magic = bytearray(good)
    bad_magic[344:348] = b"xyz\0"
    with pytest.raises(BadMagicError):
        parse_nifti(bytes(bad_magic))
    bad_size = bytearray(good)
    bad_size[0:4] = b"\0\0\0\0"
    with pytest.raises(BadMagicError):
        parse_nifti(bytes(bad_size))


def test_header_summary():
    info = header_summary(niftifix.float32_2x2x1(">"))
    assert info["dims"] == (2, 2, 1)
    assert info["datatype"] == "float32 (16)"
    assert info["byteorder"] == "big"


@settings(max_examples=30, deadline=None)
@given(dims=st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3)),
       datatype=st.sampled_from([2, 4, 16]), byteorder=st.sampled_from("<>"),
       seed=st.integers(0, 2**32))
def test_write_parse_round_trip(dims, datatype, byteorder, seed):
    n = dims[0] * dims[1] * dims[2]
    raw = Rng(seed).integers(0, 200, n).astype(np.float64)
    vol = Volume(dims, (1.0, 1.0, 1.0), raw, datatype=datatype, byteorder=byteorder)
    data = write_nifti(vol)
    back = parse_nifti(data)
    assert np.array_equal(back.voxels, raw)
    assert write_nifti(back) == data


# --- preprocessing ---------------------------------------------------------

def test_normalize_volume():
    vol = Volume((2, 1, 1), (1, 1, 1), np.array([-100.0, 300.0]))
    assert normalize_volume(vol).voxels.tolist() == [0.0, 1.0]
    flat = Volume((2, 1, 1), (1, 1, 1), np.array([5.0, 5.0]))
    assert normalize_volume(flat).voxels.tolist() == [0.0, 0.0]


def test_resize_bilinear_preserves_linear_ramp():
    # a ramp sampled at pixel centres stays a ramp (away from the clamped border)
    ramp = np.tile(np.arange(8.0), (8, 1))
    up = resize(ramp, 16, "bilinear")
    centres = (np.arange(16) + 0.5) / 2 - 0.5
    expected = np.clip(centres, 0, 7)
    assert np.allclose(up[3], expected)
    assert np.allclose(resize(ramp, 8, "bilinear"), ramp)


def test_resize_nearest_never_invents_labels():
    lab = np.array([[0, 205], [500, 850]])
    big = resize(lab, 5, "nearest")
    assert set(np.unique(big)) <= {0, 205, 500, 850}
    assert big[0, 0] == 0 and big[-1, -1] == 850
    assert np.array_equal(resize(big, 5, "nearest"), big)
    with pytest.raises(ContractError):
        resize(lab, 4, "cubic")


def test_label_map_validation():
    lm = LabelMap(dict(reversed(list(MMWHS.items()))))
    assert list(lm) == ["Myo", "LA", "LV", "RA", "RV", "Ao", "PA"]
    with pytest.raises(ConfigError):
        LabelMap({k: v for k, v in MMWHS.items() if k != "PA"})
    with pytest.raises(ConfigError):
        LabelMap({**MMWHS, "PA": 205})


def test_condition_encoding():
    lm = LabelMap(MMWHS)
    lab = np.array([[0, 205, 420], [500, 550, 600], [820, 850, 999]])
    wh = make_condition(lab, "WH", lm)
    assert np.allclose(wh, np.array([[0, 1, 2], [3, 4, 5], [6, 7, 0]]) / 7)
    two = make_condition(lab, ["LV", "Myo"], lm)
    assert two[0, 1] == 0.5 and two[1, 0] == 1.0 and two.sum() == 1.5
    with pytest.raises(ContractError):
        make_condition(lab, ["Liver"], lm)


def test_load_nifti_pairs(tmp_path):
    nx = ny = 4
    labels = np.zeros((2, ny, nx))
    labels[0, 1:3, 1:3] = 500
    image = np.arange(2 * ny * nx, dtype=np.float64).reshape(2, ny, nx)
    (tmp_path / "img.nii").write_bytes(
        write_nifti(Volume((nx, ny, 2), (1, 1, 1), image.ravel(), datatype=4)))
    (tmp_path / "lab.nii").write_bytes(
        write_nifti(Volume((nx, ny, 2), (1, 1, 1), labels.ravel(), kind="label", datatype=4)))
    ds = load_nifti_pairs([(tmp_path / "img.nii", tmp_path / "lab.nii")], LabelMap(MMWHS),
                          "WH", size=8)
    assert len(ds) == 1                      # the empty second slice is excluded
    assert ds.conditions.shape == (1, 1, 8, 8)
    assert set(np.unique(ds.conditions)) == {0.0, np.float32(3 / 7)}
    assert ds.targets.min() >= 0 and ds.targets.max() <= 1
    both = load_nifti_pairs([(tmp_path / "img.nii", tmp_path / "lab.nii")], LabelMap(MMWHS),
                            "WH", size=8, exclude_empty=False)
    assert len(both) == 2


# --- phantoms ---------------------------------------------------------------

def test_phantom_is_pure_function_of_spec_and_index():
    spec = PhantomSpec(seed=4)
    a, b = phantom_pair(spec, 17), phantom_pair(spec, 17)
    assert np.array_equal(a.condition, b.condition) and np.array_equal(a.target, b.target)
    assert not np.array_equal(phantom_pair(spec, 18).condition, a.condition)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000), index=st.integers(0, 10000), size=st.sampled_from([32, 64]))
def test_phantom_properties(seed, index, size):
    spec = PhantomSpec(size=size, seed=seed)
    pair = phantom_pair(spec, index)
    assert pair.condition.shape == pair.target.shape == (1, 1, size, size)
    for a in (pair.condition, pair.target):
        assert a.min() >= 0 and a.max() <= 1
    labels = render_labels(spec, index)
    assert 1 <= len(np.unique(labels[labels > 0])) <= 4
    # the image is a deterministic function of the mask: same label, same formula
    yy, xx = np.mgrid[0:size, 0:size]
    inside = labels > 0
    tex = 0.05 * np.sin(2 * np.pi * xx / 16) * np.sin(2 * np.pi * yy / 16)
    region = np.clip(0.3 + 0.1 * labels + tex, 0, 1)
    assert np.allclose(pair.target[0, 0][inside], region[inside], atol=1e-6)
    assert np.allclose(pair.target[0, 0][~inside], (0.1 + 0.2 * yy / (size - 1))[~inside],
                       atol=1e-6)


def test_phantom_ellipses_do_not_overlap():
    spec = PhantomSpec(seed=1)
    for i in range(30):
        labels = render_labels(spec, i, n_ellipses=4)
        assert len(np.unique(labels)) >= 2


def test_phantom_disk_round_trip(tmp_path):
    spec = PhantomSpec(size=32, seed=11)
    write_phantom(spec, 12, tmp_path / "a")
    write_phantom(spec, 12, tmp_path / "b")
    for name in ("manifest.csv", "conditions.npy", "targets.npy"):
        ha = hashlib.sha256((tmp_path / "a" / name).read_bytes()).hexdigest()
        hb = hashlib.sha256((tmp_path / "b" / name).read_bytes()).hexdigest()
        assert ha == hb
    assert read_manifest(tmp_path / "a")[3] == (3, 11, 32)
    ds = load_phantom(tmp_path / "a")
    assert np.array_equal(ds.targets, phantom_dataset(spec, 12).targets)
    (tmp_path / "bad.csv").write_text("1,2\n")
    with pytest.raises(DataError):
        read_manifest(tmp_path / "bad.csv")


# --- datasets and batching --------------------------------------------------

def _tiny_dataset(n):
    c = np.linspace(0, 1, n, dtype=np.float32).reshape(n, 1, 1, 1) * np.ones((1, 1, 2, 2))
    return PairDataset(c, c)


def test_batch_iterator_drops_short_batch_and_covers_each_item_once():
    ds = _tiny_dataset(100)
    it = batch_iterator(ds, 16, Rng(0))
    epoch = [next(it) for _ in range(6)]
    seen = np.concatenate([b.condition[:, 0, 0, 0] for b in epoch])
    assert len(seen) == 96 and len(np.unique(seen)) == 96
    nxt = next(it).condition[:, 0, 0, 0]
    assert not np.array_equal(nxt, epoch[0].condition[:, 0, 0, 0])  # reshuffled


def test_batch_iterator_is_seeded_and_resumable():
    ds = _tiny_dataset(40)
    a, b = batch_iterator(ds, 8, Rng(3)), batch_iterator(ds, 8, Rng(3))
    ref = [next(a).condition for _ in range(12)]
    assert all(np.array_equal(next(b).condition, r) for r in ref)
    resumed = batch_iterator(ds, 8, Rng(3), start=7)
    assert all(np.array_equal(next(resumed).condition, ref[k]) for k in range(7, 12))


def test_batch_iterator_errors():
    with pytest.raises(DataError):
        next(batch_iterator(_tiny_dataset(3), 4, Rng(0)))


def test_training_pair_contract():
    with pytest.raises(ContractError):
        TrainingPair(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 3)))
    with pytest.raises(ContractError):
        TrainingPair(np.full((1, 1, 2, 2), 1.5), np.zeros((1, 1, 2, 2)))
    ds = _tiny_dataset(10)
    train, held = ds.split(3)
    assert len(train) == 7 and len(held) == 3
    with pytest.raises(DataError):
        ds.split(10)
