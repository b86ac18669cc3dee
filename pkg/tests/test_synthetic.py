import numpy as np
import pytest

from lesionseg.cli import PipelineConfig, segment_image
from lesionseg.postprocess import jaccard
from lesionseg.synthetic import generate_corpus, render_synthetic


def test_render_is_deterministic_for_a_seed():
    a_img, a_mask = render_synthetic(np.random.default_rng([5, 0]), size=128)
    b_img, b_mask = render_synthetic(np.random.default_rng([5, 0]), size=128)
    assert np.array_equal(a_img, b_img)
    assert np.array_equal(a_mask, b_mask)
    assert a_img.dtype == np.uint8 and a_mask.dtype == bool


def test_render_mask_is_plausible_ellipse():
    for i in range(5):
        img, mask = render_synthetic(np.random.default_rng([6, i]), size=128)
        frac = mask.mean()
        # semi-axes are 0.22..0.33 of the side, so pi*a*b bounds the area
        assert 0.12 < frac < 0.36
        # lesion pixels are darker than the skin around them
        assert img[mask].mean() < img[~mask].mean() - 30


def test_hair_flag_keeps_geometry_fixed():
    clean_img, clean_mask = render_synthetic(np.random.default_rng([7, 3]), 128, hair=False)
    hairy_img, hairy_mask = render_synthetic(np.random.default_rng([7, 3]), 128, hair=True)
    assert np.array_equal(clean_mask, hairy_mask)
    changed = (clean_img != hairy_img).any(axis=2)
    assert 0 < changed.mean() < 0.2  # strokes touch some but not most pixels


def test_hair_costs_less_than_five_points_of_jaccard():
    rng_clean = np.random.default_rng([9, 1])
    rng_hairy = np.random.default_rng([9, 1])
    clean_img, truth = render_synthetic(rng_clean, 256, hair=False)
    hairy_img, _ = render_synthetic(rng_hairy, 256, hair=True)
    cfg = PipelineConfig()
    j_clean = jaccard(segment_image(clean_img, cfg).mask, truth)
    j_hairy = jaccard(segment_image(hairy_img, cfg).mask, truth)
    assert j_clean > 0.8
    assert j_clean - j_hairy < 0.05


def test_generate_corpus_layout_and_determinism(tmp_path):
    first = tmp_path / "a"
    ids = generate_corpus(first, count=2, seed=3, size=64)
    assert ids == ["synth_000", "synth_001"]
    names = sorted(p.name for p in first.iterdir())
    assert names == [
        "synth_000.png",
        "synth_000_mask.png",
        "synth_001.png",
        "synth_001_mask.png",
    ]
    again = tmp_path / "b"
    generate_corpus(again, count=2, seed=3, size=64)
    for name in names:
        assert (first / name).read_bytes() == (again / name).read_bytes()


def test_generate_corpus_prefix_stable_as_count_grows(tmp_path):
    small = tmp_path / "small"
    big = tmp_path / "big"
    generate_corpus(small, count=2, seed=5, size=64)
    generate_corpus(big, count=4, seed=5, size=64)
    for p in small.iterdir():
        assert (big / p.name).read_bytes() == p.read_bytes()


def test_generate_corpus_validation(tmp_path):
    with pytest.raises(ValueError):
        generate_corpus(tmp_path, count=0, seed=1)
    with pytest.raises(ValueError):
        generate_corpus(tmp_path, count=1, seed=1, size=32)
