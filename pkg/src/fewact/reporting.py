"""Report serialization: JSON plus aligned plain-text tables."""

from __future__ import annotations

import json
from pathlib import Path


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def render_table(headers: list, rows: list) -> str:
    """Aligned plain-text table; every cell is str()-ed."""
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for r_i, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if r_i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def eval_report_text(payload: dict) -> str:
    rep = payload["report"]
    rows = [["split", rep["split"]],
            ["episodes", rep["episodes_run"]],
            ["accuracy", f"{100 * rep['mean_accuracy']:.2f}%"],
            ["ci95", f"+/-{100 * rep['ci95']:.2f}"]]
    if rep.get("alpha_low_fraction") is not None:
        rows.append(["alpha=0.1 episodes", f"{100 * rep['alpha_low_fraction']:.1f}%"])
        rows.append(["alpha=0.9 episodes", f"{100 * rep['alpha_high_fraction']:.1f}%"])
    cfg = rep["config"]
    for key in ("metric", "branch", "ways", "shots", "u", "seed"):
        rows.append([key, cfg[key]])
    return render_table(["field", "value"], rows)


def train_report_text(payload: dict) -> str:
    rep = payload["report"]
    rows = [["episodes", rep["episodes_run"]],
            ["final loss", f"{rep['losses'][-1]:.5f}" if rep["losses"] else "n/a"],
            ["best val accuracy",
             f"{100 * rep['best_val_accuracy']:.2f}%" if rep["best_val_accuracy"]
             is not None else "n/a"],
            ["best at episode", rep["best_at_episode"]],
            ["clamped losses", rep["clamp_count"]]]
    return render_table(["field", "value"], rows)


def report_text(payload: dict) -> str:
    if payload.get("kind") == "train":
        return train_report_text(payload)
    if payload.get("kind") == "eval":
        return eval_report_text(payload)
    if payload.get("kind") == "sweep":
        return sweep_table_text(payload)
    return json.dumps(payload, indent=2, sort_keys=True)


def sweep_table_text(payload: dict) -> str:
    rows = [[p["u"], p["report"]["episodes_run"],
             f"{100 * p['report']['mean_accuracy']:.2f}%",
             f"+/-{100 * p['report']['ci95']:.2f}"]
            for p in payload["points"]]
    return render_table(["u", "episodes", "accuracy", "ci95"], rows)
