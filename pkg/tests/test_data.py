import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from personnet import data
from personnet.data import (DatasetManifest, Record, augment_reflect, augment_translate,
                            decode_pixmap, encode_pixmap, load_manifest, sample_balanced_pairs,
                            shift_image, translation_range, write_manifest)
from personnet.errors import FormatError, IngestionError, SamplingError
from personnet.evaluation import ScoreMatrix, cmc_from_scores


def write(tmp_path, text, name="m.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# ---------------------------------------------------------------- manifest

def test_manifest_four_records(tmp_path):
    m = load_manifest(write(tmp_path, "a.ppm,1,0\nb.ppm,1,1\nc.ppm,2,0\nd.ppm,2,1\n"))
    assert len(m) == 4
    assert m.identities == [1, 2]
    assert m.index[2][1] == [3]
    assert m.eligible_identities() == [1, 2]


def test_empty_manifest_fails_at_sampling(tmp_path, rng):
    m = load_manifest(write(tmp_path, ""))
    assert len(m) == 0
    with pytest.raises(SamplingError):
        sample_balanced_pairs(m, 2, rng)


@pytest.mark.parametrize("text, line", [
    ("a.ppm,1,0\nb.ppm,1\n", 2),
    ("a.ppm,x,0\n", 1),
    ("a.ppm,1,0\nb.ppm,1,1\na.ppm,2,0\n", 3),
])
def test_manifest_errors_name_the_line(tmp_path, text, line):
    with pytest.raises(IngestionError, match=f":{line}:"):
        load_manifest(write(tmp_path, text))


def test_missing_manifest(tmp_path):
    with pytest.raises(IngestionError):
        load_manifest(tmp_path / "nope.csv")


def test_manifest_round_trip(tmp_path):
    records = [Record(f"img{i}.ppm", i // 2, i % 2) for i in range(6)]
    path = tmp_path / "m.csv"
    write_manifest(records, path)
    assert load_manifest(path).records == records


def test_single_camera_identity_not_eligible():
    m = DatasetManifest([Record("a", 1, 0), Record("b", 1, 1), Record("c", 2, 0)])
    assert m.eligible_identities() == [1]


# ---------------------------------------------------------------- pixmaps

def test_decode_white():
    img = decode_pixmap(b"P6\n2 2\n255\n" + b"\xff" * 12)
    assert img.shape == (2, 2, 3)
    assert np.all(img == 1.0)


def test_decode_normalization():
    img = decode_pixmap(b"P6 1 1 255\n" + bytes([128, 0, 255]))
    assert img[0, 0, 0] == pytest.approx(128 / 255)


def test_decode_skips_comments():
    img = decode_pixmap(b"P6\n# made by hand\n1 1\n255\n" + bytes([1, 2, 3]))
    assert img.shape == (1, 1, 3)


@pytest.mark.parametrize("buf", [
    b"P5\n1 1\n255\n\x00",
    b"P6\n1 1\n65535\n" + b"\x00" * 6,
    b"P6\n2 2\n255\n" + b"\x00" * 11,
    b"P6\n2",
])
def test_decode_rejects(buf):
    with pytest.raises(FormatError) as info:
        decode_pixmap(buf)
    assert info.value.offset is not None


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_encode_decode_round_trip(h, w, seed):
    px = np.random.default_rng(seed).integers(0, 256, size=(h, w, 3))
    img = px / 255.0
    back = decode_pixmap(encode_pixmap(img))
    np.testing.assert_array_equal(np.rint(back * 255), px)


# ---------------------------------------------------------------- augmentation

def test_translation_range_canonical():
    assert translation_range(160, 60) == (8, 3)


def test_zero_shift_is_identity(rng):
    img = rng.random((10, 6, 3))
    np.testing.assert_array_equal(shift_image(img, 0, 0), img)


def test_shift_moves_and_zero_fills():
    img = np.arange(12.0).reshape(4, 3, 1)
    out = shift_image(img, 1, -1)
    np.testing.assert_array_equal(out[1:, :2], img[:3, 1:])
    assert not out[0].any() and not out[:, 2].any()


def test_shifts_cover_full_range(rng):
    shifts = data.draw_shifts(160, 60, 1000, rng)
    assert set(shifts[:, 0]) == set(range(-8, 9))
    assert set(shifts[:, 1]) == set(range(-3, 4))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_augmentation_preserves_shape_and_range(seed):
    rng = np.random.default_rng(seed)
    img = rng.random((20, 12, 3))
    for out in augment_translate(img, 5, rng) + [augment_reflect(img)]:
        assert out.shape == img.shape
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_reflect_involution_and_columns(rng):
    img = rng.random((5, 4, 3))
    np.testing.assert_array_equal(augment_reflect(augment_reflect(img)), img)
    np.testing.assert_array_equal(augment_reflect(img)[:, -1], img[:, 0])


def test_reflect_symmetric_image_unchanged(rng):
    half = rng.random((5, 3, 3))
    img = np.concatenate([half, half[:, ::-1]], axis=1)
    np.testing.assert_array_equal(augment_reflect(img), img)


# ---------------------------------------------------------------- sampling

def test_batch_of_two_is_one_and_one(corpus, rng):
    batch = sample_balanced_pairs(corpus, 2, rng)
    assert sorted(batch.labels) == [0, 1]


def test_odd_batch_rejected(corpus, rng):
    with pytest.raises(SamplingError):
        sample_balanced_pairs(corpus, 3, rng)


def test_batches_have_configured_shape(corpus, rng):
    batch = sample_balanced_pairs(corpus, 4, rng, augment=True, reflect=True)
    for a, b, _ in batch.pairs:
        assert a.shape == b.shape == (40, 20, 3)


def test_sampling_covers_every_identity(corpus, rng):
    seen = set()
    for _ in range(2000):
        for a, b in sample_balanced_pairs(corpus, 2, rng).meta:
            seen.update((corpus.records[a].identity, corpus.records[b].identity))
    assert seen == set(corpus.eligible_identities())


def test_branch_order_randomised(corpus, rng):
    first_cams = [corpus.records[sample_balanced_pairs(corpus, 2, rng).meta[0][0]].camera
                  for _ in range(400)]
    assert 0.35 < np.mean(first_cams) < 0.65


def test_sampling_deterministic(corpus):
    runs = [sample_balanced_pairs(corpus, 6, np.random.default_rng(5)).meta for _ in range(2)]
    assert runs[0] == runs[1]


# ---------------------------------------------------------------- synthetic corpus

def test_synth_counts(corpus):
    assert len(corpus) == 160
    assert (corpus.root / "manifest.csv").read_text().count("\n") == 160


def test_synth_byte_identical(tmp_path):
    a = data.synth_dataset(tmp_path / "a", 3, 2, 16, 10, seed=7).parent
    b = data.synth_dataset(tmp_path / "b", 3, 2, 16, 10, seed=7).parent
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert all((a / n).read_bytes() == (b / n).read_bytes() for n in names)


def test_synth_refuses_non_empty_dir(tmp_path):
    (tmp_path / "out").mkdir()
    (tmp_path / "out" / "keep.txt").write_text("x")
    with pytest.raises(FileExistsError):
        data.synth_dataset(tmp_path / "out", 2, 1, 8, 8, seed=0)
    assert (tmp_path / "out" / "keep.txt").exists()
    data.synth_dataset(tmp_path / "out", 2, 1, 8, 8, seed=0, force=True)
    assert not (tmp_path / "out" / "keep.txt").exists()


def test_synth_rejects_tiny_arguments(tmp_path):
    with pytest.raises(ValueError):
        data.synth_dataset(tmp_path / "x", 1, 1, 16, 16, seed=0)


def test_raw_pixel_baseline_is_learnable_but_not_trivial(corpus):
    probes, gallery = [], []
    for ident in corpus.identities:
        probes.append(corpus.image(corpus.index[ident][0][0]).ravel())
        gallery.append(corpus.image(corpus.index[ident][1][0]).ravel())
    p, g = np.array(probes, dtype=np.float64), np.array(gallery, dtype=np.float64)
    dist = ((p[:, None] - g[None]) ** 2).sum(axis=2)
    ids = corpus.identities
    rank1 = cmc_from_scores(ScoreMatrix(-dist, ids, ids)).rank(1)
    assert 0.5 < rank1 < 0.95
