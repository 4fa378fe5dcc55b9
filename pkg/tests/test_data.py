import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facepad.data import (
    PreprocessSpec,
    arrays_from_images,
    build_feature_cache,
    load_arrays,
    load_manifest,
    parse_manifest,
    preprocess,
    read_image,
    render,
    resize_bilinear,
    subject_overlap,
    synth_dataset,
    write_image,
    write_synth_dataset,
)
from facepad.data.manifest import format_manifest
from facepad.data.preprocess import expand_box
from facepad.errors import InvalidInputError, ParseError, ValidationError
from facepad.texture import read_cache

HEADER = "path,label,subject,attack_type,split\n"


def test_manifest_parses_and_skips_comments():
    text = "# run config\n" + HEADER + "a.png,0,s1,none,train\n\n# note\nb.png,1,s2,print,test\n"
    recs = parse_manifest(text)
    assert [(r.path, r.label, r.attack_type, r.split) for r in recs] == [
        ("a.png", 0, "none", "train"), ("b.png", 1, "print", "test")]
    assert parse_manifest(format_manifest(recs, "hello")) == recs


@pytest.mark.parametrize("body,err,line", [
    ("a.png,0,s1,none\n", ParseError, 2),
    ("a.png,x,s1,none,train\n", ParseError, 2),
    ("a.png,2,s1,none,train\n", ValidationError, 2),
    ("a.png,1,s1,none,train\n", ValidationError, 2),
    ("a.png,0,s1,none,valid\n", ValidationError, 2),
    ("a.png,0,s1,none,train\na.png,0,s1,none,dev\n", ValidationError, 3),
])
def test_manifest_errors_name_the_line(body, err, line):
    with pytest.raises(err, match=f"<manifest>:{line}:"):
        parse_manifest(HEADER + body)


def test_manifest_header_checked():
    with pytest.raises(ParseError):
        parse_manifest("file,label\n")
    with pytest.raises(ParseError):
        parse_manifest("# only a comment\n")


def test_subject_overlap():
    recs = parse_manifest(HEADER + "a,0,s1,none,train\nb,0,s1,none,test\nc,0,s2,none,dev\n")
    assert subject_overlap(recs) == {"s1": {"train", "test"}}


def test_resize_corners_and_identity():
    img = np.random.default_rng(0).integers(0, 256, (10, 7, 3)).astype(np.uint8)
    out = resize_bilinear(img, 19, 13)
    for y, x, yy, xx in [(0, 0, 0, 0), (0, 12, 0, 6), (18, 0, 9, 0), (18, 12, 9, 6)]:
        assert np.array_equal(out[y, x], img[yy, xx])
    assert np.array_equal(resize_bilinear(img, 10, 7), img)


def test_resize_midpoint_is_average():
    img = np.array([[[0, 0, 0], [100, 200, 50]]], np.uint8)
    assert resize_bilinear(img, 1, 3)[0, 1].tolist() == [50, 100, 25]


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 3))
def test_preprocess_output_shape(h, w, seed):
    img = np.random.default_rng(seed).integers(0, 256, (h, w, 3)).astype(np.uint8)
    face = preprocess(img, PreprocessSpec(side=32))
    assert face.pixels.shape == (32, 32, 3) and face.pixels.dtype == np.uint8


def test_preprocess_box_margin_and_errors():
    assert expand_box((10, 10, 20, 20), 44, 100, 100) == (0, 0, 42, 42)
    assert expand_box((40, 40, 60, 60), 10, 100, 100) == (35, 35, 65, 65)

    class Fixed:
        def detect(self, raster):
            return (40, 40, 60, 60)

    img = np.zeros((100, 100, 3), np.uint8)
    img[35:65, 35:65] = 200
    face = preprocess(img, PreprocessSpec(margin=10, side=30), Fixed())
    assert np.all(face.pixels == 200)
    with pytest.raises(InvalidInputError):
        preprocess(np.zeros((0, 5, 3), np.uint8))
    with pytest.raises(ValueError):
        PreprocessSpec(margin=-1)


def test_png_round_trip(tmp_path):
    img = np.random.default_rng(2).integers(0, 256, (9, 11, 3)).astype(np.uint8)
    write_image(tmp_path / "x" / "a.png", img)
    assert np.array_equal(read_image(tmp_path / "x" / "a.png"), img)


def test_synth_is_deterministic_and_labelled():
    a_imgs, a_recs = synth_dataset(4, 5, seed=3, size=32)
    b_imgs, b_recs = synth_dataset(4, 5, seed=3, size=32)
    assert all(np.array_equal(x, y) for x, y in zip(a_imgs, b_imgs)) and a_recs == b_recs
    assert [r.label for r in a_recs] == [0] * 4 + [1] * 5
    assert all(r.attack_type.startswith("synthetic-") for r in a_recs if r.label)
    c_imgs, _ = synth_dataset(4, 5, seed=4, size=32)
    assert not np.array_equal(a_imgs[0], c_imgs[0])
    assert render(3, 1, 1, 32)[0].shape == (32, 32, 3)
    with pytest.raises(ValueError):
        synth_dataset(0, 1, 0)
    with pytest.raises(ValueError):
        synth_dataset(1, 1, 0, profile="Z")


def test_synth_files_and_feature_cache(tmp_path):
    recs = write_synth_dataset(tmp_path, {"train": (3, 3), "test": (2, 2)}, seed=1, size=32,
                               comment="demo")
    assert load_manifest(tmp_path / "manifest.csv") == recs
    assert subject_overlap(recs) == {}
    spec = PreprocessSpec(side=32)
    report = build_feature_cache(recs, tmp_path, tmp_path / "f.cache", spec, meta={"k": 1})
    assert report.written == len(recs) and not report.failures
    entries, meta = read_cache(tmp_path / "f.cache")
    assert [e[0] for e in entries] == [r.path for r in recs] and meta["k"] == 1
    cached = load_arrays(recs, tmp_path, spec, cache_path=tmp_path / "f.cache")
    fresh = load_arrays(recs, tmp_path, spec)
    assert cached.features.tobytes() == fresh.features.tobytes()
    assert cached.images.shape == (10, 32, 32, 3) and cached.images.max() <= 1.0
    mem = arrays_from_images([read_image(tmp_path / r.path) for r in recs],
                             [r.label for r in recs], spec=spec)
    assert mem.features.tobytes() == fresh.features.tobytes()
    assert len(mem.subset([0, 2])) == 2


def test_feature_cache_collects_failures(tmp_path):
    recs = write_synth_dataset(tmp_path, {"train": (2, 2)}, seed=1, size=32)
    (tmp_path / recs[0].path).write_bytes(b"not a png")
    report = build_feature_cache(recs, tmp_path, tmp_path / "f.cache", PreprocessSpec(side=32))
    assert report.written == 3 and report.failures[0][0] == recs[0].path


def test_feature_cache_parallel_matches_serial(tmp_path):
    recs = write_synth_dataset(tmp_path, {"train": (3, 3)}, seed=2, size=32)
    spec = PreprocessSpec(side=32)
    build_feature_cache(recs, tmp_path, tmp_path / "a.cache", spec)
    build_feature_cache(recs, tmp_path, tmp_path / "b.cache", spec, workers=2)
    assert (tmp_path / "a.cache").read_bytes() == (tmp_path / "b.cache").read_bytes()
