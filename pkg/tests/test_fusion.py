"""Fusion strategy tests: concatenation index maps, late-fusion oracle,
plan validation, and run_plan behavior on a small synthetic study.
"""

import numpy as np
import pytest

from cardiofuse import pipeline, synthetic
from cardiofuse.data import (StudyTable, carve_validation,
                             chronological_split, clean_tabular, load_study)
from cardiofuse.fusion import (FusionPlan, PipelineConfig, early_concat,
                               intermediate_concat, late_fuse, run_plan)
from cardiofuse.metrics import auroc
from cardiofuse.tensor3 import frobenius_sq

SA, FC, EHR = "short_axis", "four_chamber", "ehr"


class TestConcat:
    def test_duplicate_halves(self):
        a = np.random.default_rng(0).normal(size=(3, 3, 2))
        out = early_concat(a, a)
        np.testing.assert_array_equal(out[:, :, :2], a)
        np.testing.assert_array_equal(out[:, :, 2:], a)

    def test_entrywise_placement_2x2x1(self):
        a = np.arange(4, dtype=np.float64).reshape(2, 2, 1)
        b = np.arange(10, 14, dtype=np.float64).reshape(2, 2, 1)
        out = early_concat(a, b)
        assert out.shape == (2, 2, 2)
        for i in range(2):
            for j in range(2):
                assert out[i, j, 0] == a[i, j, 0]
                assert out[i, j, 1] == b[i, j, 0]

    def test_frobenius_additivity(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(4, 4, 3))
        b = rng.normal(size=(4, 4, 3))
        assert frobenius_sq(early_concat(a, b)) == pytest.approx(
            frobenius_sq(a) + frobenius_sq(b), rel=1e-12)

    def test_bijection_on_random_tensors(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(3, 4, 2))
        b = rng.normal(size=(3, 4, 2))
        out = early_concat(a, b)
        inputs = sorted(np.concatenate([a.ravel(), b.ravel()]).tolist())
        assert sorted(out.ravel().tolist()) == inputs

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            early_concat(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))

    def test_intermediate_is_same_index_map(self):
        assert intermediate_concat is early_concat


class TestLateFuse:
    def test_single_branch_preserves_ranking(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(size=30)
        labels = rng.integers(0, 2, 30)
        labels[0], labels[1] = 0, 1
        fused = late_fuse([scores], weights=[1.0])
        assert auroc(fused, labels) == auroc(scores, labels)

    def test_identical_branches_preserve_ranking(self):
        rng = np.random.default_rng(4)
        scores = rng.normal(size=25)
        fused = late_fuse([scores, scores.copy()])
        np.testing.assert_array_equal(np.argsort(fused), np.argsort(scores))

    def test_weight_one_zero_reproduces_branch0(self):
        rng = np.random.default_rng(5)
        s0 = rng.normal(size=40)
        s1 = rng.normal(size=40)
        labels = rng.integers(0, 2, 40)
        labels[0], labels[1] = 0, 1
        fused = late_fuse([s0, s1], weights=[1.0, 0.0])
        assert abs(auroc(fused, labels) - auroc(s0, labels)) < 1e-12

    def test_complementary_errors_beat_both_branches(self):
        """Two branches ~0.75 with independent errors fuse strictly
        higher, verified by brute-force pair counting."""
        rng = np.random.default_rng(6)
        n = 400
        labels = rng.integers(0, 2, n)
        s0 = labels + rng.normal(0, 0.9, n)
        s1 = labels + rng.normal(0, 0.9, n)

        def pair_count(scores):
            pos = scores[labels == 1]
            neg = scores[labels == 0]
            wins = sum((p > neg).sum() + 0.5 * (p == neg).sum() for p in pos)
            return wins / (len(pos) * len(neg))

        a0, a1 = pair_count(s0), pair_count(s1)
        assert 0.65 < a0 < 0.85 and 0.65 < a1 < 0.85
        fused = late_fuse([s0, s1])
        af = pair_count(fused)
        assert af > max(a0, a1)
        assert af == pytest.approx(auroc(fused, labels), abs=1e-12)

    def test_branch_scales_do_not_dominate(self):
        rng = np.random.default_rng(7)
        labels = rng.integers(0, 2, 100)
        good = labels + rng.normal(0, 0.3, 100)          # strong, small scale
        weak = 1000.0 * rng.normal(size=100)             # noise, huge scale
        fused = late_fuse([good, weak])
        assert auroc(fused, labels) > 0.8

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            late_fuse([np.zeros(3), np.zeros(4)])
        with pytest.raises(ValueError):
            late_fuse([np.zeros(3)], weights=[0.0])
        with pytest.raises(ValueError):
            late_fuse([np.zeros(3), np.zeros(3)], weights=[-1.0, 2.0])


class TestFusionPlan:
    def test_valid_strategies(self):
        FusionPlan("early", [SA, FC])
        FusionPlan("late", [SA, EHR])
        FusionPlan("hybrid_intermediate", [SA, FC, EHR])

    def test_tensor_fusion_rejects_ehr(self):
        for strategy in ("early", "intermediate"):
            with pytest.raises(ValueError):
                FusionPlan(strategy, [SA, EHR])

    def test_hybrid_requires_ehr(self):
        with pytest.raises(ValueError):
            FusionPlan("hybrid_early", [SA, FC])

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            FusionPlan("stacking", [SA])


@pytest.fixture(scope="module")
def small_study(tmp_path_factory):
    root = tmp_path_factory.mktemp("study")
    spec = synthetic.SyntheticSpec(seed=1, n_subjects=60, dims=(12, 12, 4),
                                   corrupted_fraction=0.0,
                                   heavy_missing_columns=0,
                                   missing_cell_fraction=0.0)
    synthetic.generate_synthetic(spec, root)
    table = load_study(root)
    chronological_split(table, train_fraction=0.7, test_segments=2)
    carve_validation(table, fraction=0.2, seed=0)
    clean_tabular(table)
    return table


FAST = PipelineConfig(fixed_c=0.1, svm_epochs=40, kappa=30)


class TestRunPlan:
    def test_degenerate_early_equals_unimodal(self, small_study):
        r1 = run_plan(FusionPlan("early", [SA]), small_study, FAST)
        r2 = run_plan(FusionPlan("late", [SA]), small_study, FAST)
        np.testing.assert_allclose(r1.fused_scores["test"],
                                   r2.fused_scores["test"], atol=1e-12)

    def test_hybrid_has_two_branches_in_manifest(self, small_study):
        result = run_plan(FusionPlan("hybrid_intermediate", [SA, FC, EHR]),
                          small_study, FAST)
        manifest = result.manifest()
        assert manifest["branch_count"] == 2
        assert manifest["strategy"] == "hybrid_intermediate"
        names = [b["name"] for b in manifest["branches"]]
        assert names == [f"intermediate({SA}+{FC})", EHR]

    def test_missing_modality_rejected(self, small_study):
        import dataclasses
        study = StudyTable(
            subjects=[dataclasses.replace(
                s, tensors={SA: s.tensors[SA]} if SA in s.tensors else {})
                for s in small_study.subjects],
            feature_names=list(small_study.feature_names),
        )
        with pytest.raises(ValueError):
            run_plan(FusionPlan("early", [SA, FC]), study, FAST)

    def test_intermediate_latent_dims_shared(self, small_study):
        result = run_plan(FusionPlan("intermediate", [SA, FC]), small_study,
                          FAST)
        assert result.branches[0].kappa is not None

    def test_deterministic(self, small_study):
        plan = FusionPlan("hybrid_early", [SA, FC, EHR])
        r1 = run_plan(plan, small_study, FAST)
        r2 = run_plan(plan, small_study, FAST)
        np.testing.assert_array_equal(r1.fused_scores["test"],
                                      r2.fused_scores["test"])

    def test_never_reads_test_labels(self, small_study):
        """Access-logging harness: test-split labels are poisoned with a
        sentinel; run_plan must complete without touching them."""
        import dataclasses
        study = StudyTable(
            subjects=[dataclasses.replace(s) for s in small_study.subjects],
            feature_names=list(small_study.feature_names),
        )

        class Poisoned(int):
            def __new__(cls):
                return super().__new__(cls, 0)

            def __index__(self):
                raise AssertionError("test label read during training")

            def __int__(self):
                raise AssertionError("test label read during training")

        original = {}
        for s in study.subjects:
            if s.split == "test":
                original[s.id] = s.label
                s.label = Poisoned()
        result = run_plan(FusionPlan("late", [SA, EHR]), study, FAST)
        # the scores exist for the test split even though labels were sealed
        assert len(result.fused_scores["test"]) == len(original)
