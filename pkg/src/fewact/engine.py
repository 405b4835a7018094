"""Episode orchestration: forward pass, training loop, evaluation, reports.

The head path per episode is: decouple each video, project tokens to the
working width, run the dual-branch enhancer, build refined class prototypes
against the whole query batch, then score every (query, class) pair with the
configured metric. Negated distances are the classification logits. The
pooled-cosine baselines (``avg``/``dec-avg``) are training-free and operate on
raw archive tokens, bypassing the head entirely.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .archive import Archive, decouple
from .attention import AttentionParams
from .enhance import (EnhanceFlags, EnhanceParams, downsample, enhance_textual,
                      enhance_visual, init_enhance_params)
from .episodes import EpisodeSpec, sample_episode
from .errors import ConfigError, EngineError
from .metrics import (bimhm_distance, hausdorff_distance, mpmm_distance,
                      pooled_cosine_score, token_min_distances)
from .optim import AdamState, adam_step, default_milestones
from .prototypes import (AlphaGate, adaptive_alpha, combine, global_prototype,
                         init_prototype, local_prototype, pad_rows)
from .tensor import Tensor, backward, no_grad, softmax_last_axis, stack, where

METRICS = ("mpmm", "bimhm", "hausdorff", "avg", "dec-avg")
HEAD_METRICS = ("mpmm", "bimhm", "hausdorff")
BRANCHES = ("both", "visual", "textual")
PROB_FLOOR = 1e-12
VAL_SEED_OFFSET = 1_000_003
GATE_TEXT_ROWS = 8


@dataclass
class RunConfig:
    """Everything that determines a run besides the archive itself."""

    metric: str = "mpmm"
    branch: str = "both"
    ways: int = 5
    shots: int = 1
    queries_per_class: int | None = None   # default: same as shots
    episodes: int = 1000
    train_episodes: int = 0
    u: int = 10
    dprime: int | None = 256               # None: no channel projection
    heads: int = 1
    st_sa: bool = True
    v_ca: bool = True
    t_ca: bool = True
    lpc: bool = True
    gpc: bool = True
    alpha_mode: str = "fixed"              # fixed | learnable | adaptive
    alpha: float | None = None             # None: 0.1 for unknown-prompt archives, 0.9 otherwise
    lr: float = 1e-3
    milestones: tuple | None = None        # None: decay x0.1 at 50% and 75%
    val_every: int = 500
    val_episodes: int = 100
    seed: int = 0
    threads: int = 1
    prompt_mode: str | None = None         # restrict episodes to one prompt mode

    def resolved_queries(self) -> int:
        return self.shots if self.queries_per_class is None else self.queries_per_class

    def check(self) -> None:
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}; choose from {METRICS}")
        if self.branch not in BRANCHES:
            raise ConfigError(f"unknown branch {self.branch!r}; choose from {BRANCHES}")
        if self.metric == "avg" and self.branch != "both":
            raise ConfigError("metric 'avg' pools fused tokens and requires --branch both")
        if self.metric not in HEAD_METRICS and self.train_episodes > 0:
            raise ConfigError(f"metric {self.metric!r} is training-free; "
                              "training requires mpmm, bimhm, or hausdorff")
        if self.ways < 2:
            raise ConfigError("ways must be >= 2")
        if self.shots < 1 or self.resolved_queries() < 1:
            raise ConfigError("shots and queries-per-class must be >= 1")
        if self.u < 1:
            raise ConfigError("u must be >= 1")
        if self.alpha_mode not in ("fixed", "learnable", "adaptive"):
            raise ConfigError(f"unknown alpha mode {self.alpha_mode!r}")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.episodes < 1 or self.train_episodes < 0:
            raise ConfigError("episode counts must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.dprime is not None and self.dprime < 1:
            raise ConfigError("dprime must be >= 1 (omit it to disable projection)")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["milestones"] is not None:
            d["milestones"] = [list(m) for m in d["milestones"]]
        return d


@dataclass
class HeadParams:
    """All trainable state: the enhancer weights plus the mixing scalar."""

    enhance: EnhanceParams
    alpha: Tensor

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        return [("alpha", self.alpha)] + self.enhance.named_tensors()

    def trainable(self, learnable_alpha: bool) -> list[Tensor]:
        ts = [t for _, t in self.enhance.named_tensors()]
        if learnable_alpha:
            ts.append(self.alpha)
        return ts

    def snapshot(self) -> dict:
        return {name: t.data.copy() for name, t in self.named_tensors()}

    def restore(self, snap: dict) -> None:
        for name, t in self.named_tensors():
            if t.data.ndim == 0:
                t.data.fill(float(snap[name]))
            else:
                t.data[:] = snap[name]


def resolve_alpha_init(archive: Archive, cfg: RunConfig) -> float:
    """Explicit value wins; otherwise 0.1 for all-unknown-prompt archives, 0.9
    when any labeled-prompt records are present."""
    if cfg.alpha is not None:
        return cfg.alpha
    modes = {e.prompt_mode for e in archive.manifest.videos}
    return 0.1 if modes <= {"unknown"} else 0.9


def init_head_params(rng: np.random.Generator, feature_dim: int,
                     cfg: RunConfig, alpha_init: float) -> HeadParams:
    enhance = init_enhance_params(rng, feature_dim, cfg.dprime, heads=cfg.heads)
    alpha = Tensor(np.array(float(alpha_init)),
                   requires_grad=(cfg.alpha_mode == "learnable"))
    return HeadParams(enhance=enhance, alpha=alpha)


# -- forward -------------------------------------------------------------------


@dataclass
class EpisodeForward:
    logits: Tensor            # (B_Q, ways); higher = more likely
    probs: Tensor             # softmax over classes per query row
    gate: AlphaGate | None
    alpha_used: float | None
    notes: list = field(default_factory=list)


def forward_episode(archive: Archive, episode: EpisodeSpec, params: HeadParams | None,
                    cfg: RunConfig) -> EpisodeForward:
    if cfg.metric in HEAD_METRICS:
        return _forward_head(archive, episode, params, cfg)
    return _forward_pooled(archive, episode, cfg)


def _decoupled_f64(archive: Archive, video_id: str):
    dec = decouple(archive.record(video_id))
    return (dec.visual.astype(np.float64), dec.textual.astype(np.float64))


def _forward_pooled(archive: Archive, episode: EpisodeSpec, cfg: RunConfig) -> EpisodeForward:
    """Training-free pooled-cosine baselines on raw archive tokens."""
    decoupled = cfg.metric == "dec-avg"
    means = {}
    for vid in set(episode.query_ids) | {v for row in episode.support_ids for v in row}:
        visual, textual = _decoupled_f64(archive, vid)
        v_mean = visual.reshape(-1, visual.shape[-1]).mean(axis=0)
        t_mean = textual.mean(axis=0) if textual.shape[0] else None
        all_rows = np.concatenate([visual.reshape(-1, visual.shape[-1]), textual])
        means[vid] = (v_mean, t_mean, all_rows.mean(axis=0))
    protos = []
    for row in episode.support_ids:
        v = np.mean([means[vid][0] for vid in row], axis=0)
        t_rows = [means[vid][1] for vid in row if means[vid][1] is not None]
        t = np.mean(t_rows, axis=0) if t_rows else None
        fused = np.mean([means[vid][2] for vid in row], axis=0)
        protos.append((v, t, fused))
    rows = []
    with no_grad():
        for qid in episode.query_ids:
            qv, qt, qf = means[qid]
            scores = []
            for pv, pt, pf in protos:
                if decoupled:
                    s = pooled_cosine_score(pv[None, :],
                                            None if pt is None else pt[None, :],
                                            qv[None, :],
                                            None if qt is None else qt[None, :],
                                            decoupled=True, branch=cfg.branch)
                else:
                    s = pooled_cosine_score(pf[None, :], None, qf[None, :], None,
                                            decoupled=False)
                scores.append(s)
            rows.append(stack(scores, axis=0))
        logits = stack(rows, axis=0)
        probs = softmax_last_axis(logits)
    return EpisodeForward(logits=logits, probs=probs, gate=None, alpha_used=None)


def _forward_head(archive: Archive, episode: EpisodeSpec, params: HeadParams,
                  cfg: RunConfig) -> EpisodeForward:
    flags = EnhanceFlags(st_sa=cfg.st_sa, v_ca=cfg.v_ca, t_ca=cfg.t_ca)
    notes = []

    feats = {}
    for vid in {v for row in episode.support_ids for v in row} | set(episode.query_ids):
        visual, textual = _decoupled_f64(archive, vid)
        t_v = downsample(Tensor(visual), params.enhance)
        t_t = downsample(Tensor(textual), params.enhance)
        f_v, t_v_spt = enhance_visual(t_v, t_t, params.enhance, flags)
        if cfg.v_ca and textual.shape[0] == 0:
            notes.append(f"{vid}: no textual tokens, visual cross-attention skipped")
        f_t = enhance_textual(t_t, t_v_spt, params.enhance, flags)
        feats[vid] = (f_v, f_t)

    use_visual = cfg.branch in ("both", "visual")
    use_textual = cfg.branch in ("both", "textual")
    text_len = max(feats[v][1].shape[0] for v in feats)
    if use_textual and text_len == 0:
        if cfg.branch == "textual":
            raise EngineError("branch 'textual' requested but the episode has "
                              "no textual tokens")
        use_textual = False
        notes.append("episode has no textual tokens; metric runs visual-only")
    if use_textual:
        feats = {vid: (fv, pad_rows(ft, text_len)) for vid, (fv, ft) in feats.items()}

    protos_v = [init_prototype(stack([feats[v][0] for v in row], axis=0))
                for row in episode.support_ids] if use_visual else None
    protos_t = [init_prototype(stack([feats[v][1] for v in row], axis=0))
                for row in episode.support_ids] if use_textual else None
    queries_v = [feats[q][0] for q in episode.query_ids]
    queries_t = [feats[q][1] for q in episode.query_ids]

    gate = None
    if cfg.alpha_mode == "adaptive":
        gate = adaptive_alpha(
            [p.data for p in protos_v] if use_visual else None,
            [p.data for p in protos_t] if use_textual else None,
            [q.data for q in queries_v] if use_visual else None,
            [q.data for q in queries_t] if use_textual else None,
            text_rows=GATE_TEXT_ROWS)
        alpha = gate.alpha
        if gate.fallback:
            notes.append(f"adaptive alpha fallback: {gate.fallback}")
    elif cfg.alpha_mode == "learnable":
        alpha = params.alpha
    else:
        alpha = float(params.alpha.data)

    refined_v = _refine(protos_v, queries_v, alpha, cfg) if use_visual else None
    refined_t = _refine(protos_t, queries_t, alpha, cfg) if use_textual else None

    rows = []
    for g in range(len(episode.query_ids)):
        scores = []
        for n in range(episode.ways):
            s_v = refined_v[n] if use_visual else None
            s_t = refined_t[n] if use_textual else None
            q_v = queries_v[g] if use_visual else None
            q_t = queries_t[g] if use_textual else None
            if cfg.metric == "mpmm":
                d_s, d_q = token_min_distances(s_v, s_t, q_v, q_t)
                scores.append(mpmm_distance(d_s, d_q, cfg.u))
            elif cfg.metric == "bimhm":
                scores.append(bimhm_distance(s_v, s_t, q_v, q_t))
            else:
                scores.append(hausdorff_distance(s_v, s_t, q_v, q_t))
        rows.append(stack(scores, axis=0))
    distances = stack(rows, axis=0)
    logits = -distances
    probs = softmax_last_axis(logits)
    alpha_used = float(alpha.data) if isinstance(alpha, Tensor) else float(alpha)
    return EpisodeForward(logits=logits, probs=probs, gate=gate,
                          alpha_used=alpha_used, notes=notes)


def _refine(protos, queries, alpha, cfg: RunConfig):
    if not (cfg.lpc or cfg.gpc):
        return protos
    f_q = stack(queries, axis=0)
    out = []
    for p in protos:
        if cfg.lpc and cfg.gpc:
            p_loc, _ = local_prototype(p, f_q)
            p_glb, _ = global_prototype(p, f_q)
            out.append(combine(p, p_loc, p_glb, alpha))
        elif cfg.lpc:
            p_loc, _ = local_prototype(p, f_q)
            out.append((p + p_loc) * 0.5)
        else:
            p_glb, _ = global_prototype(p, f_q)
            out.append((p + p_glb) * 0.5)
    return out


def episode_loss(probs: Tensor, labels) -> tuple[Tensor, bool]:
    """Mean negative log-probability of the true class over queries.

    Probabilities are clamped at 1e-12 before the log; the flag reports
    whether the clamp fired.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n_q, ways = probs.shape
    flat = probs.reshape(n_q * ways)
    p_true = flat.take(np.arange(n_q) * ways + labels, axis=0)
    clamped = bool((p_true.data < PROB_FLOOR).any())
    floored = where(p_true.data >= PROB_FLOOR, p_true,
                    Tensor(np.full(n_q, PROB_FLOOR)))
    return -floored.log().mean(), clamped


def episode_accuracy(probs: Tensor, labels) -> float:
    pred = np.argmax(probs.data, axis=1)
    return float(np.mean(pred == np.asarray(labels)))


# -- training ------------------------------------------------------------------


@dataclass
class TrainReport:
    config: dict
    episodes_run: int
    losses: list
    val_curve: list              # [episode, accuracy] pairs
    best_val_accuracy: float | None
    best_at_episode: int | None
    clamp_count: int
    notes: list
    wall_clock_s: float

    def to_dict(self) -> dict:
        d = asdict(self)
        timing = {"wall_clock_s": d.pop("wall_clock_s")}
        return {"kind": "train", "report": d, "timing": timing}


def train(archive: Archive, cfg: RunConfig) -> tuple[HeadParams, TrainReport]:
    """Episodic training: one optimizer step per episode, best-on-val retained."""
    cfg.check()
    if cfg.metric not in HEAD_METRICS:
        raise ConfigError(f"metric {cfg.metric!r} has no trainable parameters")
    start = time.time()
    alpha_init = resolve_alpha_init(archive, cfg)
    params = init_head_params(np.random.default_rng(cfg.seed), archive.dim,
                              cfg, alpha_init)
    trainables = params.trainable(cfg.alpha_mode == "learnable")
    milestones = cfg.milestones if cfg.milestones is not None \
        else default_milestones(cfg.train_episodes)
    state = AdamState(lr=cfg.lr, milestones=tuple(milestones))
    qpc = cfg.resolved_queries()
    losses: list[float] = []
    val_curve: list[list] = []
    notes: list[str] = []
    clamp_count = 0
    best: dict | None = None
    best_acc: float | None = None
    best_at: int | None = None
    val_ok = _split_usable(archive, "val", cfg)
    if cfg.train_episodes > 0 and not val_ok:
        notes.append("val split unusable for this episode shape; keeping final params")

    def run_validation(after_episode: int):
        nonlocal best, best_acc, best_at
        accs = _accuracy_over_episodes(archive, cfg, params, "val",
                                       cfg.val_episodes, cfg.seed + VAL_SEED_OFFSET)
        acc = float(np.mean(accs))
        val_curve.append([after_episode, acc])
        if best_acc is None or acc > best_acc:
            best_acc, best_at, best = acc, after_episode, params.snapshot()

    for e in range(cfg.train_episodes):
        ep_seed = cfg.seed ^ e
        episode = sample_episode(archive, "train", cfg.ways, cfg.shots, qpc,
                                 ep_seed, cfg.prompt_mode)
        fwd = forward_episode(archive, episode, params, cfg)
        loss, clamped = episode_loss(fwd.probs, episode.query_labels)
        value = loss.item()
        if not np.isfinite(value):
            raise EngineError(f"non-finite loss at training episode {e} "
                              f"(episode seed {ep_seed})")
        clamp_count += int(clamped)
        losses.append(value)
        grads = backward(loss, trainables)
        adam_step(state, trainables, grads)
        if cfg.alpha_mode == "learnable":
            np.clip(params.alpha.data, 0.0, 1.0, out=params.alpha.data)
        if val_ok and cfg.val_every > 0 and (e + 1) % cfg.val_every == 0:
            run_validation(e + 1)

    if cfg.train_episodes > 0 and val_ok and \
            (cfg.val_every <= 0 or cfg.train_episodes % cfg.val_every != 0):
        run_validation(cfg.train_episodes)
    if best is not None:
        params.restore(best)
    report = TrainReport(config=cfg.to_dict(), episodes_run=cfg.train_episodes,
                         losses=losses, val_curve=val_curve,
                         best_val_accuracy=best_acc, best_at_episode=best_at,
                         clamp_count=clamp_count, notes=notes,
                         wall_clock_s=time.time() - start)
    return params, report


def _split_usable(archive: Archive, split: str, cfg: RunConfig) -> bool:
    classes = archive.classes(split, cfg.prompt_mode)
    if len(classes) < cfg.ways:
        return False
    need = cfg.shots + cfg.resolved_queries()
    enough = [c for c in classes
              if len(archive.videos(split, c, cfg.prompt_mode)) >= need]
    return len(enough) >= cfg.ways


def _accuracy_over_episodes(archive, cfg, params, split, count, base_seed):
    accs = []
    with no_grad():
        for i in range(count):
            episode = sample_episode(archive, split, cfg.ways, cfg.shots,
                                     cfg.resolved_queries(), base_seed ^ i,
                                     cfg.prompt_mode)
            fwd = forward_episode(archive, episode, params, cfg)
            accs.append(episode_accuracy(fwd.probs, episode.query_labels))
    return accs


# -- evaluation ----------------------------------------------------------------


@dataclass
class EvalReport:
    config: dict
    split: str
    episodes_run: int
    mean_accuracy: float
    ci95: float
    alpha_low_fraction: float | None
    alpha_high_fraction: float | None
    per_episode: list
    notes: list
    wall_clock_s: float

    def to_dict(self) -> dict:
        d = asdict(self)
        timing = {"wall_clock_s": d.pop("wall_clock_s")}
        return {"kind": "eval", "report": d, "timing": timing}


def _eval_episode(archive, cfg, params, seed, split):
    episode = sample_episode(archive, split, cfg.ways, cfg.shots,
                             cfg.resolved_queries(), seed, cfg.prompt_mode)
    with no_grad():
        fwd = forward_episode(archive, episode, params, cfg)
    rec = {"seed": seed,
           "accuracy": episode_accuracy(fwd.probs, episode.query_labels)}
    if fwd.alpha_used is not None:
        rec["alpha"] = fwd.alpha_used
    if fwd.gate is not None and fwd.gate.d_visual is not None:
        rec["gate_d_visual"] = fwd.gate.d_visual
        rec["gate_d_textual"] = fwd.gate.d_textual
    return rec


_WORKER_ARCHIVE: dict = {}


def _eval_worker(job):
    archive_dir, cfg_dict, param_blob, split, seeds = job
    key = str(archive_dir)
    if key not in _WORKER_ARCHIVE:
        _WORKER_ARCHIVE[key] = Archive.open(archive_dir)
    archive = _WORKER_ARCHIVE[key]
    cfg = config_from_dict(cfg_dict)
    params = None
    if param_blob is not None:
        params = _params_from_blob(param_blob, cfg)
    return [_eval_episode(archive, cfg, params, s, split) for s in seeds]


def evaluate(archive: Archive, cfg: RunConfig, params: HeadParams | None,
             episodes: int | None = None, split: str = "test") -> EvalReport:
    """Mean accuracy with a 95% interval over seeded episodes.

    Episode i uses seed ``cfg.seed ^ i`` so results are independent of
    evaluation order; parallel workers reduce in episode-index order.
    """
    cfg.check()
    if cfg.metric in HEAD_METRICS and params is None:
        raise ConfigError("head metrics need parameters; train first or pass "
                          "an initialized head")
    start = time.time()
    count = cfg.episodes if episodes is None else episodes
    seeds = [cfg.seed ^ i for i in range(count)]
    if cfg.threads > 1 and count >= 4:
        chunks = np.array_split(np.asarray(seeds), cfg.threads * 4)
        blob = None if params is None else _params_to_blob(params)
        jobs = [(str(archive.manifest.root), cfg.to_dict(), blob, split,
                 [int(s) for s in chunk]) for chunk in chunks if len(chunk)]
        records = []
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            for part in pool.map(_eval_worker, jobs):
                records.extend(part)
    else:
        records = [_eval_episode(archive, cfg, params, s, split) for s in seeds]
    accs = np.array([r["accuracy"] for r in records])
    mean = float(accs.mean())
    ci = float(1.96 * accs.std(ddof=1) / np.sqrt(len(accs))) if len(accs) > 1 else 0.0
    alphas = [r.get("alpha") for r in records if "alpha" in r]
    low = high = None
    if cfg.alpha_mode == "adaptive" and alphas:
        low = float(np.mean([a <= 0.5 for a in alphas]))
        high = float(np.mean([a > 0.5 for a in alphas]))
    return EvalReport(config=cfg.to_dict(), split=split, episodes_run=count,
                      mean_accuracy=mean, ci95=ci, alpha_low_fraction=low,
                      alpha_high_fraction=high, per_episode=records, notes=[],
                      wall_clock_s=time.time() - start)


# -- checkpoints ------------------------------------------------------------------

CHECKPOINT_NAME = "checkpoint.json"
CHECKPOINT_VERSION = 1


def save_checkpoint(out_dir, params: HeadParams) -> None:
    """Persist named parameter tensors (f32 storage) plus a small manifest."""
    import json

    from .archive import write_tensor

    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, t in params.named_tensors():
        fname = name.replace(".", "_") + ".fstk"
        write_tensor(root / fname, np.atleast_1d(t.data))
        files[name] = fname
    meta = {"format_version": CHECKPOINT_VERSION,
            "feature_dim": params.enhance.feature_dim,
            "width": params.enhance.width,
            "has_projection": params.enhance.w_down is not None,
            "heads": params.enhance.spatial_sa.heads,
            "tensors": files}
    (root / CHECKPOINT_NAME).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(ckpt_dir, cfg: RunConfig) -> HeadParams:
    import json

    from .archive import read_tensor
    from .errors import FormatError

    root = Path(ckpt_dir)
    meta = json.loads((root / CHECKPOINT_NAME).read_text(encoding="utf-8"))
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {meta.get('format_version')}")
    tensors = {}
    for name, fname in meta["tensors"].items():
        arr = read_tensor(root / fname).astype(np.float64)
        if name == "alpha":
            arr = arr.reshape(())
        tensors[name] = arr
    blob = {"feature_dim": meta["feature_dim"], "width": meta["width"],
            "has_projection": meta["has_projection"], "heads": meta["heads"],
            "tensors": tensors}
    return _params_from_blob(blob, cfg)


# -- config / params (de)serialization -------------------------------------------


def config_from_dict(d: dict) -> RunConfig:
    d = dict(d)
    if d.get("milestones") is not None:
        d["milestones"] = tuple((int(s), float(m)) for s, m in d["milestones"])
    return RunConfig(**d)


def _params_to_blob(params: HeadParams) -> dict:
    return {"feature_dim": params.enhance.feature_dim,
            "width": params.enhance.width,
            "has_projection": params.enhance.w_down is not None,
            "heads": params.enhance.spatial_sa.heads,
            "tensors": params.snapshot()}


def _params_from_blob(blob: dict, cfg: RunConfig) -> HeadParams:
    names = blob["tensors"]
    width = blob["width"] if blob["has_projection"] else None

    def attn(prefix):
        kw = {k: Tensor(np.asarray(names[f"{prefix}.{k}"], dtype=np.float64),
                        requires_grad=True)
              for k in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")}
        return AttentionParams(heads=blob["heads"], **kw)

    enhance = EnhanceParams(
        feature_dim=blob["feature_dim"], width=blob["width"],
        w_down=Tensor(np.asarray(names["down.w"], dtype=np.float64),
                      requires_grad=True) if width else None,
        b_down=Tensor(np.asarray(names["down.b"], dtype=np.float64),
                      requires_grad=True) if width else None,
        spatial_sa=attn("spatial_sa"), temporal_sa=attn("temporal_sa"),
        visual_ca=attn("visual_ca"), textual_ca=attn("textual_ca"))
    alpha = Tensor(np.asarray(names["alpha"], dtype=np.float64),
                   requires_grad=(cfg.alpha_mode == "learnable"))
    return HeadParams(enhance=enhance, alpha=alpha)
