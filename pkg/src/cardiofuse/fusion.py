"""Fusion strategies over imaging and tabular branches.

- early: mode-3 concatenation of raw imaging tensors before MPCA;
- intermediate: per-modality MPCA with shared latent dims, concatenated in
  latent space;
- late: weighted mean of per-branch z-scored decision scores;
- hybrid: early or intermediate on the imaging pair, then late with the
  tabular branch.

``run_plan`` executes the full DAG with every fit confined to the train
split.  Test labels are never read; callers join returned test scores with
labels at metric time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mpca
from .data import StudyTable, Subject
from .svm import (DEFAULT_C_GRID, LinearClassifier, decision_scores,
                  grid_search_cv, train_linear)

STRATEGIES = ("early", "intermediate", "late", "hybrid_early",
              "hybrid_intermediate")

EHR = "ehr"


@dataclass
class FusionPlan:
    strategy: str
    modalities: list[str]
    late_weights: list[float] | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        imaging = [m for m in self.modalities if m != EHR]
        if self.strategy in ("early", "intermediate") and EHR in self.modalities:
            raise ValueError("tensor-space fusion cannot include tabular data;"
                             " use late or hybrid")
        if self.strategy.startswith("hybrid") and EHR not in self.modalities:
            raise ValueError("hybrid fusion needs the tabular branch")
        if not imaging and self.strategy != "late":
            raise ValueError("plan needs at least one imaging modality")


@dataclass
class PipelineConfig:
    kappa: int = mpca.DEFAULT_KAPPA
    variance_fraction: float = mpca.DEFAULT_VARIANCE_FRACTION
    mpca_iters: int = 1
    c_grid: tuple = DEFAULT_C_GRID
    fixed_c: float | None = None
    cv_folds: int = 10
    svm_epochs: int = 300
    seed: int = 0
    ehr_features: list[str] | None = None  # names selected upstream (GAT)


@dataclass
class BranchResult:
    name: str
    chosen_c: float
    kappa: int | None
    scores: dict[str, np.ndarray]  # split tag -> per-subject decision scores
    classifier: LinearClassifier | None = None


@dataclass
class RunResult:
    plan: FusionPlan
    branches: list[BranchResult]
    ids: dict[str, list[str]]               # split tag -> subject ids
    fused_scores: dict[str, np.ndarray]     # split tag -> fused scores
    train_labels: np.ndarray
    segments: list[int | None]              # per test subject

    def manifest(self) -> dict:
        return {
            "strategy": self.plan.strategy,
            "modalities": list(self.plan.modalities),
            "branch_count": len(self.branches),
            "branches": [
                {"name": b.name, "chosen_c": b.chosen_c, "kappa": b.kappa}
                for b in self.branches
            ],
        }


def early_concat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Mode-3 concatenation of two same-shape tensors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"cannot concatenate dims {a.shape} and {b.shape}")
    return np.concatenate([a, b], axis=2)


# latent concatenation is the same index map, applied to projected tensors
intermediate_concat = early_concat


def late_fuse(score_vectors, weights=None,
              train_stats=None) -> np.ndarray:
    """Weighted mean of per-branch standardized decision scores.

    ``train_stats`` is a list of (mean, std) per branch, normally computed
    on the branch's training scores so no branch's scale dominates.
    """
    score_vectors = [np.asarray(s, dtype=np.float64) for s in score_vectors]
    lengths = {len(s) for s in score_vectors}
    if len(lengths) != 1:
        raise ValueError("branch score vectors differ in length")
    n_branches = len(score_vectors)
    if weights is None:
        weights = np.full(n_branches, 1.0 / n_branches)
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != n_branches or np.any(weights < 0):
        raise ValueError("weights must be nonnegative, one per branch")
    total = weights.sum()
    if total == 0:
        raise ValueError("weights sum to zero")
    weights = weights / total
    if train_stats is None:
        train_stats = [(float(np.mean(s)), float(np.std(s)))
                       for s in score_vectors]
    fused = np.zeros(len(score_vectors[0]))
    for w, s, (mean, std) in zip(weights, score_vectors, train_stats):
        fused += w * (s - mean) / max(std, 1e-12)
    return fused


def _splits(study: StudyTable) -> dict[str, list[Subject]]:
    return {
        "train": study.by_split("train"),
        "validation": study.by_split("validation"),
        "test": study.by_split("test"),
    }


def _imaging_features(splits, modalities: list[str], mode: str,
                      config: PipelineConfig):
    """Extract flat Fisher-selected features per split for one imaging branch."""
    def gather(subjects):
        out = []
        for s in subjects:
            ts = [s.tensors[m] for m in modalities]
            for m in modalities:
                if m not in s.tensors:
                    raise ValueError(f"subject {s.id}: missing modality {m}")
            out.append(ts)
        return out

    train_stacks = gather(splits["train"])
    y_train = np.asarray([s.label for s in splits["train"]], dtype=np.int64)

    if mode == "early" or len(modalities) == 1:
        def compose(stacks):
            t = stacks[0]
            for other in stacks[1:]:
                t = early_concat(t, other)
            return t
        train_tensors = [compose(ts) for ts in train_stacks]
        model = mpca.fit(train_tensors, variance_fraction=config.variance_fraction,
                         max_iters=config.mpca_iters)
        models = [model]
        def features(subjects):
            tensors = [compose(ts) for ts in gather(subjects)]
            return mpca.transform_flat(model, tensors)
    elif mode == "intermediate":
        per_mod = [[ts[i] for ts in train_stacks] for i in range(len(modalities))]
        first_pass = [
            mpca.fit(tensors, variance_fraction=config.variance_fraction,
                     max_iters=config.mpca_iters)
            for tensors in per_mod
        ]
        # shared latent dims so the latent concatenation lines up
        shared = tuple(
            max(m.target_dims[d] for m in first_pass) for d in range(3)
        )
        models = [
            mpca.fit(tensors, variance_fraction=config.variance_fraction,
                     max_iters=config.mpca_iters, target_dims=shared)
            for tensors in per_mod
        ]
        def features(subjects):
            stacks = gather(subjects)
            rows = []
            for ts in stacks:
                latents = [mpca.transform(models[i], ts[i])
                           for i in range(len(modalities))]
                combined = latents[0]
                for lat in latents[1:]:
                    combined = intermediate_concat(combined, lat)
                rows.append(combined.ravel())
            return np.stack(rows)
    else:
        raise ValueError(f"unknown imaging fusion mode {mode!r}")

    f_train = features(splits["train"])
    order, _ = mpca.fisher_rank(f_train, y_train)
    kappa = min(config.kappa, f_train.shape[1])

    def selected(subjects):
        if not subjects:
            return np.zeros((0, kappa))
        return mpca.select_top(features(subjects), order, kappa)

    return selected, kappa, models


def _ehr_features(splits, study: StudyTable, config: PipelineConfig):
    names = study.feature_names
    if config.ehr_features is not None:
        missing = [n for n in config.ehr_features if n not in names]
        if missing:
            raise ValueError(f"unknown EHR features: {missing}")
        cols = [names.index(n) for n in config.ehr_features]
    else:
        cols = list(range(len(names)))

    def selected(subjects):
        if not subjects:
            return np.zeros((0, len(cols)))
        return np.stack([s.tabular[cols] for s in subjects])

    return selected, None


def _branch_specs(plan: FusionPlan) -> list[tuple[str, list[str], str]]:
    """(name, modalities, mode) per branch for the plan's DAG."""
    imaging = [m for m in plan.modalities if m != EHR]
    if plan.strategy == "early":
        return [("early(" + "+".join(imaging) + ")", imaging, "early")]
    if plan.strategy == "intermediate":
        return [("intermediate(" + "+".join(imaging) + ")", imaging,
                 "intermediate")]
    if plan.strategy == "late":
        specs = [(m, [m], "early") for m in imaging]
        if EHR in plan.modalities:
            specs.append((EHR, [EHR], EHR))
        return specs
    mode = "early" if plan.strategy == "hybrid_early" else "intermediate"
    return [
        (f"{mode}(" + "+".join(imaging) + ")", imaging, mode),
        (EHR, [EHR], EHR),
    ]


def run_plan(plan: FusionPlan, study: StudyTable,
             config: PipelineConfig | None = None) -> RunResult:
    """Train every branch of the plan and emit fused decision scores."""
    config = config or PipelineConfig()
    splits = _splits(study)
    if not splits["train"]:
        raise ValueError("study has no train split")
    for m in plan.modalities:
        if m == EHR:
            if any(s.tabular is None for s in study.subjects):
                raise ValueError("plan needs tabular data for every subject")
        elif any(m not in s.tensors for s in splits["train"] + splits["test"]):
            raise ValueError(f"plan references missing modality {m!r}")

    y_train = np.asarray([s.label for s in splits["train"]], dtype=np.int64)
    branches = []
    for name, modalities, mode in _branch_specs(plan):
        if mode == EHR:
            selected, kappa = _ehr_features(splits, study, config)
        else:
            selected, kappa, _ = _imaging_features(splits, modalities, mode,
                                                   config)
        x_train = selected(splits["train"])
        if config.fixed_c is not None:
            chosen_c = config.fixed_c
        else:
            cv = grid_search_cv(x_train, y_train, grid=config.c_grid,
                                folds=config.cv_folds, seed=config.seed,
                                epochs=config.svm_epochs)
            chosen_c = cv.chosen_c
        clf = train_linear(x_train, y_train, C=chosen_c,
                           epochs=config.svm_epochs, seed=config.seed)
        scores = {
            tag: decision_scores(clf, selected(subjects))
            for tag, subjects in splits.items()
        }
        branches.append(BranchResult(name=name, chosen_c=float(chosen_c),
                                     kappa=kappa, scores=scores,
                                     classifier=clf))

    train_stats = [
        (float(np.mean(b.scores["train"])), float(np.std(b.scores["train"])))
        for b in branches
    ]
    weights = plan.late_weights
    fused = {
        tag: late_fuse([b.scores[tag] for b in branches], weights=weights,
                       train_stats=train_stats)
        if len(splits[tag]) else np.zeros(0)
        for tag in splits
    }
    return RunResult(
        plan=plan,
        branches=branches,
        ids={tag: [s.id for s in subjects] for tag, subjects in splits.items()},
        fused_scores=fused,
        train_labels=y_train,
        segments=[s.segment for s in splits["test"]],
    )
