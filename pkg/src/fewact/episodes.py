"""N-way K-shot episode sampling from an archive split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archive import Archive
from .errors import EngineError


@dataclass
class EpisodeSpec:
    """Support/query selection for one task; fully determined by ``seed``."""

    ways: int
    shots: int
    queries_per_class: int
    classes: list            # episode class labels, index = episode label
    support_ids: list        # ways x shots video ids
    query_ids: list          # class-major query video ids
    query_labels: list       # episode label per query
    seed: int

    def check(self) -> None:
        assert len(set(self.classes)) == self.ways
        support = {v for row in self.support_ids for v in row}
        assert all(len(row) == self.shots for row in self.support_ids)
        assert not support & set(self.query_ids)


def sample_episode(archive: Archive, split: str, ways: int, shots: int,
                   queries_per_class: int, seed: int,
                   prompt_mode: str | None = None) -> EpisodeSpec:
    """Uniform class sample without replacement, then uniform videos."""
    classes = archive.classes(split, prompt_mode)
    if len(classes) < ways:
        raise EngineError(f"split {split!r} has {len(classes)} classes; "
                          f"{ways}-way episodes need at least {ways}")
    rng = np.random.default_rng(seed)
    picked = [classes[i] for i in rng.choice(len(classes), size=ways, replace=False)]
    need = shots + queries_per_class
    support_ids, query_ids, query_labels = [], [], []
    for label, cls in enumerate(picked):
        vids = archive.videos(split, cls, prompt_mode)
        if len(vids) < need:
            raise EngineError(f"class {cls!r} in split {split!r} has {len(vids)} "
                              f"videos; need {need} (shots {shots} + queries "
                              f"{queries_per_class})")
        idx = rng.choice(len(vids), size=need, replace=False)
        chosen = [vids[i] for i in idx]
        support_ids.append(chosen[:shots])
        query_ids.extend(chosen[shots:])
        query_labels.extend([label] * queries_per_class)
    spec = EpisodeSpec(ways=ways, shots=shots, queries_per_class=queries_per_class,
                       classes=picked, support_ids=support_ids,
                       query_ids=query_ids, query_labels=query_labels, seed=seed)
    spec.check()
    return spec
