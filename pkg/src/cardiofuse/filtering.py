"""Uncertainty-quantile filtering of training samples.

Landmark uncertainties are pooled across modalities and split into Q
equal-frequency quantile bins; the most uncertain bin is retired one at a
time, dropping every training sample with any landmark in a retired bin.
Filtering stops once validation AUROC has failed to improve for two
consecutive iterations, and the subset with the best AUROC wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MIN_IMPROVEMENT = 1e-4
PATIENCE = 2


@dataclass
class FilterReport:
    Q: int
    removed_bins: int
    removed_subject_ids: list[str]
    validation_auroc_trace: list[tuple[int, float]]
    best_auroc: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "Q": self.Q,
                "removed_bins": self.removed_bins,
                "removed_subject_ids": self.removed_subject_ids,
                "validation_auroc_trace": [list(t) for t in self.validation_auroc_trace],
                "best_auroc": self.best_auroc,
            },
            sort_keys=True, indent=2,
        )


def _pooled_landmarks(subjects, per_modality: bool):
    """(uncertainty, subject_id, modality, landmark_id) tuples, pooled or split.

    Returns a dict keyed by pool name ('all' or the modality) so quantiles
    can optionally be computed per modality.
    """
    pools: dict[str, list[tuple[float, str, str, int]]] = {}
    for s in subjects:
        for modality, lm in sorted(s.landmarks.items()):
            key = modality if per_modality else "all"
            for j, u in enumerate(lm.uncertainties):
                pools.setdefault(key, []).append((float(u), s.id, modality, j))
    return pools


def filter_training_samples(train_subjects, Q: int, eval_fn,
                            min_improvement: float = MIN_IMPROVEMENT,
                            patience: int = PATIENCE,
                            per_modality: bool = False) -> FilterReport:
    """Iterative quantile filtering driven by a validation-AUROC callback.

    ``eval_fn`` receives the list of candidate training subject ids and
    returns a validation AUROC.  Ties in uncertainty break on
    (uncertainty, subject_id, landmark_id) so runs are deterministic.
    """
    if Q < 2:
        raise ValueError("Q must be at least 2")
    subjects = list(train_subjects)
    pools = _pooled_landmarks(subjects, per_modality)
    if not pools:
        raise ValueError("no landmarks available for filtering")
    for key, entries in pools.items():
        if Q > len(entries):
            raise ValueError(
                f"Q={Q} exceeds the {len(entries)} pooled landmarks ({key})"
            )

    # ascending uncertainty; bin Q-1 is the most uncertain
    bin_of: dict[tuple[str, str, int], int] = {}
    for entries in pools.values():
        entries.sort()
        chunks = np.array_split(np.arange(len(entries)), Q)
        for b, chunk in enumerate(chunks):
            for i in chunk:
                u, sid, modality, j = entries[i]
                bin_of[(sid, modality, j)] = b

    all_ids = [s.id for s in subjects]
    baseline = float(eval_fn(all_ids))
    trace = [(0, baseline)]
    best_auroc, best_rho, best_removed = baseline, 0, []

    stale = 0
    for rho in range(1, Q + 1):
        retired = set(range(Q - rho, Q))
        removed = [
            s.id for s in subjects
            if any(bin_of[(s.id, m, j)] in retired
                   for m, lm in sorted(s.landmarks.items())
                   for j in range(len(lm.uncertainties)))
        ]
        removed_set = set(removed)
        kept = [sid for sid in all_ids if sid not in removed_set]
        kept_labels = {s.label for s in subjects if s.id not in removed_set}
        if not kept or len(kept_labels) < 2:
            break  # filtering must leave a trainable set behind
        score = float(eval_fn(kept))
        trace.append((rho, score))
        if score > best_auroc + min_improvement:
            best_auroc, best_rho, best_removed = score, rho, removed
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break

    return FilterReport(
        Q=Q,
        removed_bins=best_rho,
        removed_subject_ids=best_removed,
        validation_auroc_trace=trace,
        best_auroc=best_auroc,
    )
