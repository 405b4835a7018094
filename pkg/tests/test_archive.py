"""Archive format: tensor files, decoupling/fusion, validation, synthesis."""

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from fewact.archive import (Archive, DecoupledTokens, VideoRecord, decouple,
                            fuse, load_manifest, read_tensor, validate,
                            write_tensor)
from fewact.errors import FormatError
from fewact.synth import SynthConfig, synth_generate


def _record(tokens, indices, frames, spatial, video_id="v0", split="train"):
    tokens = np.asarray(tokens, dtype=np.float32)
    return VideoRecord(video_id=video_id, class_label="c0", split=split,
                       prompt_mode="unknown", tokens=tokens,
                       placeholder_indices=np.asarray(indices, dtype=np.int64),
                       frames=frames, spatial_len=spatial,
                       text_len=tokens.shape[0] - len(indices))


def _random_record(rng, frames, spatial, text_len, dim):
    length = frames * spatial + text_len
    idx = np.sort(rng.choice(length, size=frames * spatial, replace=False))
    tokens = rng.standard_normal((length, dim)).astype(np.float32)
    return _record(tokens, idx, frames, spatial)


# -- tensor files ---------------------------------------------------------------

def test_tensor_file_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.standard_normal((7, 5)).astype(np.float32)
    path = tmp_path / "t.fstk"
    write_tensor(path, arr)
    back = read_tensor(path)
    assert back.dtype == np.float32
    assert_array_equal(back, arr)


def test_tensor_file_truncation_detected(tmp_path):
    path = tmp_path / "t.fstk"
    write_tensor(path, np.ones((3, 2), dtype=np.float32))
    blob = path.read_bytes()
    path.write_bytes(blob[:-1])
    with pytest.raises(FormatError):
        read_tensor(path)


def test_tensor_file_bad_magic(tmp_path):
    path = tmp_path / "t.fstk"
    path.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(FormatError):
        read_tensor(path)


# -- decouple / fuse --------------------------------------------------------------

def test_decouple_index_arithmetic():
    # L=10, T=2, L_sp=3, placeholders {1,2,3,5,6,7}
    tokens = np.arange(10, dtype=np.float32)[:, None] * np.ones((1, 4), np.float32)
    rec = _record(tokens, [1, 2, 3, 5, 6, 7], frames=2, spatial=3)
    dec = decouple(rec)
    assert dec.visual.shape == (2, 3, 4)
    assert_array_equal(dec.visual[0, :, 0], [1, 2, 3])
    assert_array_equal(dec.visual[1, :, 0], [5, 6, 7])
    assert_array_equal(dec.textual[:, 0], [0, 4, 8, 9])


def test_decouple_all_visual():
    tokens = np.random.default_rng(1).standard_normal((6, 3)).astype(np.float32)
    rec = _record(tokens, list(range(6)), frames=2, spatial=3)
    dec = decouple(rec)
    assert dec.textual.shape == (0, 3)
    assert_array_equal(dec.visual.reshape(-1, 3), tokens)


def test_fuse_identity_placement():
    visual = np.arange(8, dtype=np.float32).reshape(2, 2, 2)
    fused = fuse(DecoupledTokens(visual=visual, textual=np.zeros((0, 2), np.float32)),
                 np.arange(4), 4)
    assert_array_equal(fused, visual.reshape(4, 2))


def test_fuse_single_visual_token():
    dec = DecoupledTokens(visual=np.full((1, 1, 2), 7.0, np.float32),
                          textual=np.full((1, 2), 3.0, np.float32))
    fused = fuse(dec, [0], 2)
    assert_array_equal(fused, [[7.0, 7.0], [3.0, 3.0]])


def test_decouple_rejects_bad_counts():
    tokens = np.zeros((6, 2), dtype=np.float32)
    rec = _record(tokens, [0, 1, 2], frames=2, spatial=2)
    with pytest.raises(FormatError):
        decouple(rec)
    rec2 = _record(tokens, [0, 1, 2, 9], frames=2, spatial=2)
    with pytest.raises(FormatError):
        decouple(rec2)


def test_roundtrip_seeded_24x8():
    rng = np.random.default_rng(42)
    rec = _random_record(rng, frames=3, spatial=4, text_len=12, dim=8)
    assert rec.tokens.shape == (24, 8)
    dec = decouple(rec)
    fused = fuse(dec, rec.placeholder_indices, rec.tokens.shape[0])
    assert_array_equal(fused, rec.tokens)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 6),
       st.integers(1, 5), st.integers(0, 2 ** 31 - 1))
def test_roundtrip_property(frames, spatial, text_len, dim, seed):
    rng = np.random.default_rng(seed)
    rec = _random_record(rng, frames, spatial, text_len, dim)
    dec = decouple(rec)
    # every output row equals some input row
    fused_rows = {r.tobytes() for r in rec.tokens}
    for row in dec.visual.reshape(-1, dim):
        assert row.tobytes() in fused_rows
    for row in dec.textual:
        assert row.tobytes() in fused_rows
    assert_array_equal(fuse(dec, rec.placeholder_indices, rec.tokens.shape[0]),
                       rec.tokens)
    # decouple(fuse(x)) == x for the same layout
    rebuilt = _record(fuse(dec, rec.placeholder_indices, rec.tokens.shape[0]),
                      rec.placeholder_indices, frames, spatial)
    dec2 = decouple(rebuilt)
    assert_array_equal(dec2.visual, dec.visual)
    assert_array_equal(dec2.textual, dec.textual)


# -- synthesis + validation ----------------------------------------------------

def test_synth_validates_clean(tmp_path):
    cfg = SynthConfig(classes=4, per_class=6, frames=2, spatial_len=2,
                      text_len=5, dim=16, seed=3)
    manifest = synth_generate(tmp_path / "arch", cfg)
    assert validate(manifest) == []
    reloaded = load_manifest(tmp_path / "arch")
    assert validate(reloaded) == []
    assert len(reloaded.videos) == 24


def test_synth_deterministic_bytes(tmp_path):
    cfg = SynthConfig(classes=3, per_class=4, frames=2, spatial_len=2,
                      text_len=4, dim=8, seed=7)
    synth_generate(tmp_path / "a", cfg)
    synth_generate(tmp_path / "b", cfg)
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_zero_noise_separable(tmp_path):
    cfg = SynthConfig(classes=3, per_class=4, frames=2, spatial_len=2,
                      text_len=4, dim=16, beta=1.0, gamma=1.0, sigma=0.0,
                      train_classes=0, seed=5)
    manifest = synth_generate(tmp_path / "arch", cfg)
    archive = Archive(manifest)
    # same-class videos carry identical class-mean components: nearest
    # prototype by pooled cosine is always right
    pooled = {}
    for cls in archive.classes("test"):
        vids = archive.videos("test", cls)
        pooled[cls] = [archive.record(v).tokens.mean(axis=0) for v in vids]
    for cls, feats in pooled.items():
        proto = {c: np.mean(f, axis=0) for c, f in pooled.items()}
        for q in feats:
            scores = {c: float(q @ p / (np.linalg.norm(q) * np.linalg.norm(p)))
                      for c, p in proto.items()}
            assert max(scores, key=scores.get) == cls


def test_validate_flags_split_overlap(tmp_path):
    cfg = SynthConfig(classes=2, per_class=4, frames=1, spatial_len=2,
                      text_len=2, dim=4, seed=1)
    manifest = synth_generate(tmp_path / "arch", cfg)
    manifest.videos[0].split = "test"   # class 0 is a train class elsewhere
    problems = validate(manifest)
    assert any("both train and test" in p and "class0" in p for p in problems)


def test_validate_flags_truncated_tensor(tmp_path):
    cfg = SynthConfig(classes=2, per_class=2, frames=1, spatial_len=2,
                      text_len=2, dim=4, seed=1)
    manifest = synth_generate(tmp_path / "arch", cfg)
    victim = Path(manifest.root) / manifest.videos[0].tensor_file
    victim.write_bytes(victim.read_bytes()[:-1])
    problems = validate(manifest)
    assert any(victim.name in p for p in problems)


def test_validate_flags_shape_mismatch(tmp_path):
    cfg = SynthConfig(classes=2, per_class=2, frames=1, spatial_len=2,
                      text_len=2, dim=4, seed=1)
    manifest = synth_generate(tmp_path / "arch", cfg)
    manifest.videos[0].tokens_shape = (99, 4)
    problems = validate(manifest)
    assert any("shape" in p for p in problems)


def test_manifest_json_is_sorted_and_versioned(tmp_path):
    cfg = SynthConfig(classes=2, per_class=2, frames=1, spatial_len=1,
                      text_len=1, dim=4, seed=1)
    manifest = synth_generate(tmp_path / "arch", cfg)
    raw = json.loads((Path(manifest.root) / "manifest.json").read_text())
    assert raw["format_version"] == 1
    assert set(raw["split_classes"]) == {"train", "val", "test"}
