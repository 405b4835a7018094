"""Command-line entry point.

Subcommands: gen-synth, validate, train, eval, sweep, report. Every run
writes its outputs (and a config.json echo) under --out and nowhere else.
Exit codes: 0 success, 1 validation/config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .archive import Archive, load_manifest, validate
from .engine import (HEAD_METRICS, RunConfig, evaluate, init_head_params,
                     load_checkpoint, resolve_alpha_init, save_checkpoint,
                     train)
from .errors import ConfigError, DomainError, EngineError, FormatError, ShapeError
from .reporting import report_text, sweep_table_text, write_json
from .synth import SynthConfig, synth_generate


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with code 1 (config error)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser, eval_episodes_default=1000,
                   u_as_list=False):
    p.add_argument("--archive", required=True, help="archive directory")
    p.add_argument("--out", required=True, help="output directory for all artifacts")
    p.add_argument("--ways", type=int, default=5, help="classes per episode")
    p.add_argument("--shots", type=int, default=1, help="support videos per class")
    p.add_argument("--queries-per-class", type=int, default=None,
                   help="query videos per class (default: same as --shots)")
    p.add_argument("--metric", default="mpmm",
                   choices=["mpmm", "bimhm", "hausdorff", "avg", "dec-avg"],
                   help="matching metric; avg/dec-avg are training-free baselines")
    p.add_argument("--branch", default="both", choices=["both", "visual", "textual"],
                   help="token branches used for matching")
    if u_as_list:
        p.add_argument("--u", type=str, default="10,20,30,40,50,60",
                       help="comma-separated u values to sweep")
    else:
        p.add_argument("--u", type=int, default=10,
                       help="top-u count for the mpmm metric; reference setting "
                            "is 50 for 5-way 5-shot appearance-heavy runs, 10 "
                            "otherwise")
    p.add_argument("--dprime", type=int, default=256,
                   help="working channel width after projection; reference "
                        "setting is 256; pass 0 to disable the projection")
    p.add_argument("--heads", type=int, default=1, help="attention heads per block")
    p.add_argument("--alpha-mode", default="fixed",
                   choices=["fixed", "learnable", "adaptive"],
                   help="how the local/global prototype mix is chosen")
    p.add_argument("--alpha", type=float, default=None,
                   help="mixing value (or init when learnable); default is 0.1 "
                        "for archives with unknown prompts and 0.9 otherwise")
    p.add_argument("--no-stsa", action="store_true",
                   help="disable the spatiotemporal self-attention stage")
    p.add_argument("--no-vca", action="store_true",
                   help="disable visual-lead cross-attention")
    p.add_argument("--no-tca", action="store_true",
                   help="disable textual-lead cross-attention")
    p.add_argument("--no-lpc", action="store_true",
                   help="disable token-level (local) prototype refinement")
    p.add_argument("--no-gpc", action="store_true",
                   help="disable video-level (global) prototype refinement")
    p.add_argument("--seed", type=int, default=0, help="base RNG seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker processes for evaluation")
    p.add_argument("--prompt-mode", default=None,
                   choices=["unknown", "known-support", "known-query"],
                   help="restrict episodes to records with this prompt mode")
    p.add_argument("--episodes", type=int, default=eval_episodes_default,
                   help="episode count for this command")


def _config_from_args(args, train_episodes=0, episodes=None) -> RunConfig:
    return RunConfig(
        metric=args.metric, branch=args.branch, ways=args.ways, shots=args.shots,
        queries_per_class=args.queries_per_class,
        episodes=episodes if episodes is not None else args.episodes,
        train_episodes=train_episodes,
        u=args.u, dprime=(None if args.dprime == 0 else args.dprime),
        heads=args.heads,
        st_sa=not args.no_stsa, v_ca=not args.no_vca, t_ca=not args.no_tca,
        lpc=not args.no_lpc, gpc=not args.no_gpc,
        alpha_mode=args.alpha_mode, alpha=args.alpha,
        lr=getattr(args, "lr", 1e-3),
        val_every=getattr(args, "val_every", 500),
        val_episodes=getattr(args, "val_episodes", 100),
        seed=args.seed, threads=args.threads, prompt_mode=args.prompt_mode)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fresh_or_checkpoint_params(archive: Archive, cfg: RunConfig, checkpoint):
    if cfg.metric not in HEAD_METRICS:
        return None
    if checkpoint:
        return load_checkpoint(checkpoint, cfg)
    return init_head_params(np.random.default_rng(cfg.seed), archive.dim, cfg,
                            resolve_alpha_init(archive, cfg))


# -- subcommands ---------------------------------------------------------------


def cmd_gen_synth(args) -> int:
    out = _out_dir(args)
    cfg = SynthConfig(classes=args.classes, per_class=args.per_class,
                      frames=args.frames, spatial_len=args.spatial_len,
                      text_len=args.text_len, dim=args.dim, beta=args.beta,
                      gamma=args.gamma, sigma=args.sigma, drift=args.drift,
                      semantic_rank=args.semantic_rank,
                      video_noise_frac=args.video_noise_frac,
                      reliability_coupling=args.reliability_coupling,
                      train_classes=args.train_classes, seed=args.seed)
    manifest = synth_generate(out, cfg)
    # path-free echo so identical flags yield byte-identical archive directories
    write_json(out / "config.json", {"command": "gen-synth", "config": vars(cfg)})
    print(f"wrote {len(manifest.videos)} videos to {out}")
    return 0


def cmd_validate(args) -> int:
    manifest = load_manifest(args.archive)
    problems = validate(manifest)
    if args.out:
        out = _out_dir(args)
        write_json(out / "validation.json", {"violations": problems})
    for p in problems:
        print(p, file=sys.stderr)
    print(f"{len(problems)} violation(s)")
    return 1 if problems else 0


def cmd_train(args) -> int:
    out = _out_dir(args)
    archive = Archive.open(args.archive)
    cfg = _config_from_args(args, train_episodes=args.episodes,
                            episodes=max(args.val_episodes, 1))
    write_json(out / "config.json", {"command": "train", "config": cfg.to_dict()})
    params, report = train(archive, cfg)
    save_checkpoint(out / "checkpoint", params)
    payload = report.to_dict()
    write_json(out / "train_report.json", payload)
    (out / "train_report.txt").write_text(report_text(payload), encoding="utf-8")
    print(report_text(payload), end="")
    return 0


def cmd_eval(args) -> int:
    out = _out_dir(args)
    archive = Archive.open(args.archive)
    cfg = _config_from_args(args)
    write_json(out / "config.json", {"command": "eval", "config": cfg.to_dict(),
                                     "checkpoint": args.checkpoint,
                                     "split": args.split})
    params = _fresh_or_checkpoint_params(archive, cfg, args.checkpoint)
    report = evaluate(archive, cfg, params, split=args.split)
    payload = report.to_dict()
    write_json(out / "report.json", payload)
    (out / "report.txt").write_text(report_text(payload), encoding="utf-8")
    print(report_text(payload), end="")
    return 0


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    archive = Archive.open(args.archive)
    try:
        u_values = [int(v) for v in args.u.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--u expects a comma-separated integer list: {exc}")
    if not u_values:
        raise ConfigError("--u list is empty")
    args.u = u_values[0]
    base_cfg = _config_from_args(args)
    write_json(out / "config.json", {"command": "sweep", "config": base_cfg.to_dict(),
                                     "u_values": u_values,
                                     "train_episodes": args.train_episodes,
                                     "retrain": args.retrain,
                                     "checkpoint": args.checkpoint,
                                     "split": args.split})

    def trained_params(cfg: RunConfig):
        if cfg.metric not in HEAD_METRICS:
            return None
        if args.checkpoint:
            return load_checkpoint(args.checkpoint, cfg)
        if args.train_episodes > 0:
            train_cfg = config_with(cfg, train_episodes=args.train_episodes)
            params, _ = train(archive, train_cfg)
            return params
        return init_head_params(np.random.default_rng(cfg.seed), archive.dim,
                                cfg, resolve_alpha_init(archive, cfg))

    shared = None if args.retrain else trained_params(config_with(base_cfg, u=u_values[0]))
    points = []
    for u in u_values:
        cfg = config_with(base_cfg, u=u)
        params = trained_params(cfg) if args.retrain else shared
        report = evaluate(archive, cfg, params, split=args.split)
        points.append({"u": u, "report": report.to_dict()["report"],
                       "timing": report.to_dict()["timing"]})
    payload = {"kind": "sweep", "points": [{k: p[k] for k in ("u", "report")}
                                           for p in points]}
    write_json(out / "sweep.json", payload)
    text = sweep_table_text(payload)
    (out / "sweep.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def config_with(cfg: RunConfig, **overrides) -> RunConfig:
    d = cfg.to_dict()
    d.update(overrides)
    from .engine import config_from_dict
    return config_from_dict(d)


def cmd_report(args) -> int:
    import json
    run = Path(args.out)
    for name in ("report.json", "sweep.json", "train_report.json"):
        path = run / name
        if path.exists():
            payload = json.loads(path.read_text(encoding="utf-8"))
            print(report_text(payload), end="")
            return 0
    raise FormatError(f"no report found under {run}")


# -- parser ---------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="fewact",
                     description="Episodic few-shot action recognition over "
                                 "multimodal token archives.")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    g = sub.add_parser("gen-synth", help="generate a synthetic archive",
                       formatter_class=fmt)
    g.add_argument("--out", required=True, help="archive directory to create")
    g.add_argument("--classes", type=int, default=10)
    g.add_argument("--per-class", type=int, default=20)
    g.add_argument("--frames", type=int, default=8)
    g.add_argument("--spatial-len", type=int, default=4)
    g.add_argument("--text-len", type=int, default=12)
    g.add_argument("--dim", type=int, default=64)
    g.add_argument("--beta", type=float, default=0.7,
                   help="textual informativeness in [0,1]")
    g.add_argument("--gamma", type=float, default=0.7,
                   help="visual informativeness in [0,1]")
    g.add_argument("--sigma", type=float, default=0.8, help="noise scale")
    g.add_argument("--drift", type=float, default=0.5,
                   help="per-frame temporal drift scale")
    g.add_argument("--semantic-rank", type=int, default=4,
                   help="rank of the class-mean subspace")
    g.add_argument("--video-noise-frac", type=float, default=0.5,
                   help="fraction of noise energy drawn once per video")
    g.add_argument("--reliability-coupling", type=float, default=0.0,
                   help="couple branch noise to informativeness (0..1)")
    g.add_argument("--train-classes", type=int, default=None,
                   help="classes assigned to train (+val); default: half")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_synth)

    v = sub.add_parser("validate", help="check an archive against the format",
                       formatter_class=fmt)
    v.add_argument("--archive", required=True)
    v.add_argument("--out", default=None, help="optional directory for validation.json")
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("train", help="episodic training on the train split",
                       formatter_class=fmt)
    _add_run_flags(t, eval_episodes_default=2000)
    t.add_argument("--lr", type=float, default=1e-3, help="base learning rate")
    t.add_argument("--val-every", type=int, default=500,
                   help="validation cadence in episodes (0 disables)")
    t.add_argument("--val-episodes", type=int, default=100,
                   help="episodes per validation pass")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate on a split", formatter_class=fmt)
    _add_run_flags(e)
    e.add_argument("--checkpoint", default=None,
                   help="checkpoint directory; omitted = freshly initialized head")
    e.add_argument("--split", default="test", choices=["train", "val", "test"])
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="evaluate across a list of u values",
                       formatter_class=fmt)
    _add_run_flags(s, u_as_list=True)
    s.add_argument("--checkpoint", default=None,
                   help="shared checkpoint for all sweep points")
    s.add_argument("--train-episodes", type=int, default=0,
                   help="train this many episodes before sweeping (ignored "
                        "when --checkpoint is given)")
    s.add_argument("--retrain", action="store_true",
                   help="retrain per sweep point instead of sharing one head")
    s.add_argument("--split", default="test", choices=["train", "val", "test"])
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="render a saved report as a table",
                       formatter_class=fmt)
    r.add_argument("--out", required=True, help="run directory holding the report")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, DomainError, FormatError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EngineError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
