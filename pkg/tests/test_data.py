"""Synthetic shapes dataset: rendering, sampling, export."""

import numpy as np
import pytest

from divergan.data import (Attributes, CaptionSample, Nuisance, NUM_MODES,
                           PALETTE, build_vocabulary, dataset, export_dataset,
                           image_to_uint8, render, sample_nuisance)
from divergan.errors import ConfigError, EnumError
from divergan.text import tokenize


CENTER = Nuisance(u=0.5, v=0.5, bg=0.4)


class TestAttributes:
    def test_invalid_attribute_rejected(self):
        with pytest.raises(EnumError, match="color"):
            Attributes("small", "purple", "circle")

    def test_mode_index_roundtrip_and_distinct(self):
        seen = set()
        for i in range(NUM_MODES):
            a = Attributes.from_mode_index(i)
            assert a.mode_index == i
            seen.add(a.caption)
        assert len(seen) == NUM_MODES

    def test_caption_pure_function_of_attributes(self):
        a = Attributes("large", "blue", "square")
        assert a.caption == "a large blue square"


class TestRender:
    def test_center_pixel_is_shape_color(self):
        img = render(Attributes("large", "red", "circle"), CENTER, 32)
        center = img[16, 16]
        want = np.array(PALETTE["red"]) * 2.0 - 1.0
        np.testing.assert_allclose(center, want, atol=1e-6)
        assert center[0] == pytest.approx(img[..., 0].max())

    def test_deterministic(self):
        a = render(Attributes("small", "green", "triangle"),
                   Nuisance(0.3, 0.7, 0.5), 32)
        b = render(Attributes("small", "green", "triangle"),
                   Nuisance(0.3, 0.7, 0.5), 32)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("shape", ["circle", "square", "triangle"])
    def test_large_covers_more_pixels_than_small(self, shape):
        kw = dict(color="red", shape=shape)
        big = render(Attributes(size="large", **kw), CENTER, 32)
        small = render(Attributes(size="small", **kw), CENTER, 32)
        bg = CENTER.bg * 2.0 - 1.0
        count = lambda im: (np.abs(im - bg).max(axis=2) > 0.05).sum()
        assert count(big) > count(small)

    @pytest.mark.parametrize("color", list(PALETTE))
    def test_dominant_hue_matches_attribute(self, color):
        img = render(Attributes("large", color, "circle"), CENTER, 32)
        bg = CENTER.bg * 2.0 - 1.0
        mask = np.abs(img - bg).max(axis=2) > 0.2
        mean_rgb = (img[mask] + 1.0) / 2.0
        dists = {c: np.linalg.norm(mean_rgb.mean(axis=0) - np.array(v))
                 for c, v in PALETTE.items()}
        assert min(dists, key=dists.get) == color

    def test_values_in_range(self):
        img = render(Attributes("large", "yellow", "square"),
                     Nuisance(0.1, 0.9, 0.7), 64)
        assert img.min() >= -1.0 and img.max() <= 1.0

    def test_invalid_resolution(self):
        with pytest.raises(ConfigError):
            render(Attributes("small", "red", "circle"), CENTER, 17)


class TestDataset:
    def test_empty(self):
        assert dataset(seed=0, n=0) == []

    def test_same_seed_identical_bytes(self):
        a = dataset(seed=7, n=5)
        b = dataset(seed=7, n=5)
        for sa, sb in zip(a, b):
            assert sa.image.tobytes() == sb.image.tobytes()
            assert sa.attributes == sb.attributes

    def test_mode_counts_binomial_bound(self):
        # n=2400 over 24 modes: each mode 100 +- 30
        samples = dataset(seed=11, n=2400)
        counts = np.zeros(NUM_MODES, dtype=int)
        for s in samples:
            counts[s.attributes.mode_index] += 1
        assert counts.min() >= 70 and counts.max() <= 130

    def test_nuisance_independent_of_caption(self):
        # tokens depend on attributes only; nuisance never leaks in
        samples = dataset(seed=3, n=50)
        vocab = build_vocabulary()
        for s in samples:
            ids = tokenize(s.caption, vocab)
            assert len(ids) == 4
            again = tokenize(s.attributes.caption, vocab)
            assert ids == again

    def test_captions_cover_all_modes_eventually(self):
        samples = dataset(seed=5, n=1200)
        modes = {s.attributes.mode_index for s in samples}
        assert modes == set(range(NUM_MODES))


class TestExportAndQuantization:
    def test_roundtrip_quantization_bounds(self):
        img = np.array([[[-1.0, 0.0, 1.0]]], dtype=np.float32)
        out = image_to_uint8(img)
        np.testing.assert_array_equal(out, [[[0, 128, 255]]])

    def test_round_half_up(self):
        # 127.5 + 0.5 floor -> 128; value 0.0 maps to the upper midpoint
        img = np.zeros((1, 1, 3), dtype=np.float32)
        assert image_to_uint8(img)[0, 0, 0] == 128

    def test_export_writes_pngs_and_index(self, tmp_path):
        samples = dataset(seed=9, n=3)
        export_dataset(samples, tmp_path)
        index = (tmp_path / "index.tsv").read_text(encoding="utf-8")
        lines = index.strip().split("\n")
        assert lines[0].split("\t") == ["filename", "caption", "size",
                                        "color", "shape"]
        assert len(lines) == 4
        for i in range(3):
            assert (tmp_path / f"sample_{i:05d}.png").exists()
