"""Seed-deterministic synthetic token archives for desk-scale experiments.

Each class owns a random unit mean direction per branch, drawn inside a
shared low-rank semantic subspace so that a learned projection can transfer
from train classes to held-out test classes. Visual tokens additionally carry
a class-independent per-frame drift, and most noise energy lives in a fixed
nuisance subspace, part of it drawn once per video so plain pooling cannot
average it away.

``textual_informativeness`` (beta) >> ``visual_informativeness`` (gamma)
emulates an appearance-dominated regime where the textual branch wins; the
reverse emulates a motion-dominated regime. With ``reliability_coupling`` > 0
a branch's informativeness also sets how *reliable* its tokens are: per-branch
noise energy becomes sigma^2 * (1 - coupling * informativeness^2), so the
informative branch matches stably (small token distances) the way trustworthy
decoder output does, while the uninformative branch is noise-dominated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .archive import (ArchiveManifest, DecoupledTokens, ManifestEntry, fuse,
                      save_manifest, write_tensor)
from .errors import DomainError


@dataclass
class SynthConfig:
    classes: int = 10
    per_class: int = 20
    frames: int = 8
    spatial_len: int = 4
    text_len: int = 12
    dim: int = 64
    beta: float = 0.7            # textual informativeness, in [0, 1]
    gamma: float = 0.7           # visual informativeness, in [0, 1]
    sigma: float = 0.8           # total per-token noise scale
    drift: float = 0.5           # per-frame class-independent drift scale
    semantic_rank: int = 4       # rank of the subspace holding class means
    noise_rank: int | None = None  # rank of the structured-noise subspace
    iso_noise_frac: float = 0.3  # fraction of per-token noise kept isotropic
    video_noise_frac: float = 0.5  # fraction of noise energy drawn once per video
    reliability_coupling: float = 0.0  # 0: plain sigma*noise; 1: informative branch is low-noise
    train_classes: int | None = None  # default: classes // 2; rest go to test
    val_frac: float = 0.25       # fraction of each train class's videos held for val
    seed: int = 0

    def check(self) -> None:
        if min(self.classes, self.per_class, self.frames,
               self.spatial_len, self.dim) < 1:
            raise DomainError("classes, per_class, frames, spatial_len, dim must be positive")
        if self.text_len < 0:
            raise DomainError("text_len must be nonnegative")
        if self.sigma < 0:
            raise DomainError("sigma must be nonnegative")
        for name in ("beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be in [0, 1], got {v}")
        if self.train_classes is not None and not 0 <= self.train_classes <= self.classes:
            raise DomainError("train_classes out of range")


def _orthonormal(rng: np.random.Generator, dim: int, rank: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dim, max(rank, 1))))
    return q[:, :rank]


def _unit(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


class _NoiseModel:
    """Unit-energy noise: a per-video nuisance vector shared by all of the
    video's tokens plus per-token structured + isotropic components."""

    def __init__(self, rng, dim, rank, iso_frac, video_frac):
        self.basis = _orthonormal(rng, dim, rank)
        self.rank = rank
        self.dim = dim
        self.w_video = video_frac
        w_token = np.sqrt(max(0.0, 1.0 - video_frac ** 2))
        self.w_iso = w_token * iso_frac
        self.w_struct = w_token * float(np.sqrt(max(0.0, 1.0 - iso_frac ** 2)))

    def _structured(self, rng) -> np.ndarray:
        return self.basis @ (rng.standard_normal(self.rank) / np.sqrt(self.rank))

    def video_sample(self, rng) -> np.ndarray:
        return self.w_video * self._structured(rng)

    def token_sample(self, rng) -> np.ndarray:
        iso = rng.standard_normal(self.dim) / np.sqrt(self.dim)
        return self.w_struct * self._structured(rng) + self.w_iso * iso


def synth_generate(out_dir, config: SynthConfig) -> ArchiveManifest:
    """Generate an archive under ``out_dir`` and return its manifest."""
    config.check()
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    dim = cfg.dim
    rank = max(1, min(cfg.semantic_rank, dim))
    noise_rank = cfg.noise_rank if cfg.noise_rank is not None else max(2, min(dim // 4, 16))
    noise_rank = max(1, min(noise_rank, dim))

    basis_v = _orthonormal(rng, dim, rank)
    basis_t = _orthonormal(rng, dim, rank)
    noise_v = _NoiseModel(rng, dim, noise_rank, cfg.iso_noise_frac,
                          cfg.video_noise_frac)
    noise_t = _NoiseModel(rng, dim, noise_rank, cfg.iso_noise_frac,
                          cfg.video_noise_frac)
    drift_dirs = np.stack([_unit(rng, dim) for _ in range(cfg.frames)])
    # optionally couple reliability to informativeness: the branch carrying
    # the signal also matches stably, token-for-token
    couple = cfg.reliability_coupling
    sigma_v = cfg.sigma * float(np.sqrt(max(0.0, 1.0 - couple * cfg.gamma ** 2)))
    sigma_t = cfg.sigma * float(np.sqrt(max(0.0, 1.0 - couple * cfg.beta ** 2)))

    n_train = cfg.classes // 2 if cfg.train_classes is None else cfg.train_classes
    val_per_class = int(round(cfg.per_class * cfg.val_frac)) if n_train else 0
    val_per_class = min(val_per_class, max(cfg.per_class - 2, 0))

    visual_count = cfg.frames * cfg.spatial_len
    length = cfg.text_len + visual_count
    prefix = cfg.text_len // 3
    placeholder = np.arange(prefix, prefix + visual_count, dtype=np.int64)

    manifest = ArchiveManifest(root=root, dim=dim, videos=[])
    width = len(str(cfg.classes - 1))
    vwidth = len(str(cfg.per_class - 1))
    for ci in range(cfg.classes):
        label = f"class{ci:0{width}d}"
        mean_v = basis_v @ _unit(rng, rank)
        mean_t = basis_t @ _unit(rng, rank)
        for vi in range(cfg.per_class):
            if ci < n_train:
                split = "val" if vi < val_per_class else "train"
            else:
                split = "test"
            video_nuis_v = noise_v.video_sample(rng)
            video_nuis_t = noise_t.video_sample(rng)
            visual = np.empty((cfg.frames, cfg.spatial_len, dim))
            for f in range(cfg.frames):
                for s in range(cfg.spatial_len):
                    visual[f, s] = (cfg.gamma * mean_v
                                    + cfg.drift * drift_dirs[f]
                                    + sigma_v * (video_nuis_v
                                                 + noise_v.token_sample(rng)))
            textual = np.empty((cfg.text_len, dim))
            for p in range(cfg.text_len):
                textual[p] = (cfg.beta * mean_t
                              + sigma_t * (video_nuis_t
                                           + noise_t.token_sample(rng)))
            fused = fuse(DecoupledTokens(visual=visual.astype(np.float32),
                                         textual=textual.astype(np.float32)),
                         placeholder, length)
            video_id = f"{label}_v{vi:0{vwidth}d}"
            fname = f"{video_id}.fstk"
            write_tensor(root / fname, fused)
            manifest.videos.append(ManifestEntry(
                video_id=video_id, class_label=label, split=split,
                prompt_mode="unknown", tensor_file=fname,
                tokens_shape=(length, dim),
                placeholder_indices=placeholder.tolist(),
                frames=cfg.frames, spatial_len=cfg.spatial_len,
                text_len=cfg.text_len, source_layer=-1,
                source_model="synthetic"))
    save_manifest(manifest)
    return manifest
