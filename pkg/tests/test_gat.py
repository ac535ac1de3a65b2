"""GAT tests: graph construction against a brute-force cosine oracle, a
pencil-and-paper forward pass, finite-difference gradient checks,
permutation equivariance, and ablation ranking.
"""

import numpy as np
import pytest

from cardiofuse import gat
from cardiofuse.gat import GatConfig, SubjectGraph
from cardiofuse.metrics import auroc


def small_graph(seed=0, n=6, d=4, target_degree=2, informative=True):
    rng = np.random.default_rng(seed)
    labels = np.array([0, 1] * (n // 2) + [0] * (n % 2))
    x = rng.normal(size=(n, d))
    if informative:
        x[:, 0] += 2.0 * labels
    train = np.ones(n, dtype=bool)
    train[-2:] = False
    val = ~train
    return gat.build_graph(x, target_degree, labels, train, val)


class TestBuildGraph:
    def test_identical_rows_weight_one(self):
        x = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
        g = gat.build_graph(x, 1, standardize=False)
        off_diag = g.adjacency & ~np.eye(2, dtype=bool)
        assert off_diag[0, 1] and off_diag[1, 0]
        assert g.edge_weights[0, 1] == pytest.approx(1.0)

    def test_orthogonal_rows_empty_with_warning(self):
        x = np.eye(4)
        with pytest.warns(UserWarning):
            g = gat.build_graph(x, 2, standardize=False)
        assert not np.any(g.adjacency & ~np.eye(4, dtype=bool))

    def test_mean_degree_near_target_vs_bruteforce(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(100, 8))
        g = gat.build_graph(x, 10, standardize=False)
        # brute-force oracle: recount edges from the full cosine matrix
        norm = x / np.linalg.norm(x, axis=1, keepdims=True)
        sims = norm @ norm.T
        expected = (sims > g.threshold) & ~np.eye(100, dtype=bool)
        np.testing.assert_array_equal(
            g.adjacency & ~np.eye(100, dtype=bool), expected)
        assert abs(gat.mean_degree(g) - 10) <= 1.0

    def test_undirected(self):
        g = small_graph(seed=2, n=20, target_degree=4)
        np.testing.assert_array_equal(g.adjacency, g.adjacency.T)
        np.testing.assert_allclose(g.edge_weights, g.edge_weights.T)

    def test_self_loops_present_with_unit_weight(self):
        g = small_graph(seed=3)
        assert np.all(np.diag(g.adjacency))
        np.testing.assert_allclose(np.diag(g.edge_weights), 1.0)

    def test_all_zero_row_rejected(self):
        x = np.vstack([np.zeros(3), np.ones((3, 3))])
        with pytest.raises(ValueError):
            gat.build_graph(x, 1, standardize=False)

    def test_target_degree_too_large(self):
        with pytest.raises(ValueError):
            gat.build_graph(np.ones((3, 2)), 3)


class TestForward:
    def test_attention_rows_sum_to_one(self):
        g = small_graph(seed=4, n=10, target_degree=3)
        cfg = GatConfig(hidden_dims=(5, 4), heads=2, seed=0)
        params = gat.init_params(cfg, g.n_features, np.random.default_rng(0))
        _, cache = gat.forward(params, cfg, g, return_cache=True)
        for layer in cache["heads"]:
            for head in layer:
                row_sums = head["alpha"].sum(axis=1)
                np.testing.assert_allclose(row_sums, 1.0, atol=1e-10)

    def test_zero_attention_vectors_give_uniform_attention(self):
        g = small_graph(seed=5, n=8, target_degree=2)
        cfg = GatConfig(hidden_dims=(4,), heads=1, seed=0)
        params = gat.init_params(cfg, g.n_features, np.random.default_rng(1))
        params["l0.h0.a_s"][:] = 0.0
        params["l0.h0.a_d"][:] = 0.0
        params["l0.h0.a_e"][:] = 0.0
        _, cache = gat.forward(params, cfg, g, return_cache=True)
        alpha = cache["heads"][0][0]["alpha"]
        for v in range(g.n_nodes):
            nbrs = np.flatnonzero(g.adjacency[v])
            np.testing.assert_allclose(alpha[v, nbrs], 1.0 / len(nbrs),
                                       atol=1e-12)

    def test_path_graph_manual_forward(self):
        """Step-by-step oracle on a 5-node path, 2-dim features, 1 head."""
        n = 5
        x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0],
                      [-1.0, 0.5], [0.5, -0.5]])
        adjacency = np.eye(n, dtype=bool)
        weights = np.eye(n)
        for i in range(n - 1):
            adjacency[i, i + 1] = adjacency[i + 1, i] = True
            weights[i, i + 1] = weights[i + 1, i] = 0.5
        g = SubjectGraph(node_features=x, edge_weights=weights,
                         adjacency=adjacency, threshold=0.0,
                         labels=np.zeros(n, dtype=np.int64),
                         train_mask=np.ones(n, dtype=bool),
                         val_mask=np.zeros(n, dtype=bool),
                         feature_names=["f0", "f1"])
        cfg = GatConfig(hidden_dims=(2,), heads=1, edge_dim=2,
                        leaky_slope=0.25)
        w = np.array([[0.3, -0.2], [0.1, 0.4]])
        a_s = np.array([0.5, -0.3])
        a_d = np.array([0.2, 0.1])
        a_e = np.array([0.4, 0.6])
        w_e = np.array([1.0, -0.5])
        dec_w = np.array([[1.0, 0.0], [0.0, 1.0]])
        params = {"l0.h0.W": w, "l0.h0.a_s": a_s, "l0.h0.a_d": a_d,
                  "l0.h0.a_e": a_e, "l0.h0.w_e": w_e,
                  "dec.W": dec_w, "dec.b": np.zeros(2)}

        # pencil-and-paper evaluation, node by node
        z = x @ w.T
        c = a_e @ w_e
        expected_h = np.zeros((n, 2))
        for v in range(n):
            nbrs = np.flatnonzero(adjacency[v])
            logits = []
            for u in nbrs:
                raw = a_s @ z[v] + a_d @ z[u] + weights[v, u] * c
                logits.append(raw if raw > 0 else 0.25 * raw)
            logits = np.array(logits)
            alpha = np.exp(logits - logits.max())
            alpha /= alpha.sum()
            expected_h[v] = sum(a * z[u] for a, u in zip(alpha, nbrs))
        expected_logits = expected_h @ dec_w.T

        out = gat.forward(params, cfg, g)
        np.testing.assert_allclose(out, expected_logits, atol=1e-9)

    def test_permutation_equivariance_bit_exact(self):
        g = small_graph(seed=6, n=9, target_degree=3)
        cfg = GatConfig(hidden_dims=(6, 5), heads=2, seed=0)
        params = gat.init_params(cfg, g.n_features, np.random.default_rng(2))
        logits = gat.forward(params, cfg, g, order_invariant=True)

        perm = np.random.default_rng(3).permutation(g.n_nodes)
        g_perm = SubjectGraph(
            node_features=g.node_features[perm],
            edge_weights=g.edge_weights[np.ix_(perm, perm)],
            adjacency=g.adjacency[np.ix_(perm, perm)],
            threshold=g.threshold,
            labels=g.labels[perm],
            train_mask=g.train_mask[perm],
            val_mask=g.val_mask[perm],
            feature_names=g.feature_names,
        )
        logits_perm = gat.forward(params, cfg, g_perm, order_invariant=True)
        assert np.array_equal(logits_perm, logits[perm])


class TestGradients:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_central_finite_differences(self, seed):
        g = small_graph(seed=seed, n=7, d=3, target_degree=2)
        cfg = GatConfig(hidden_dims=(4, 3), heads=2, edge_dim=3,
                        dropout=0.0, seed=seed)
        rng = np.random.default_rng(seed + 10)
        params = gat.init_params(cfg, g.n_features, rng)
        _, grads = gat.loss_and_grads(params, cfg, g)

        eps = 1e-5
        for name, p in params.items():
            p_flat = np.atleast_1d(np.asarray(p, dtype=np.float64)).ravel()
            g_flat = np.atleast_1d(grads[name]).ravel()
            numeric = np.empty_like(p_flat)
            for i in range(len(p_flat)):
                orig = p_flat[i]
                p_flat[i] = orig + eps
                plus, _ = gat.loss_and_grads(
                    {**params, name: p_flat.reshape(np.shape(p))}, cfg, g)
                p_flat[i] = orig - eps
                minus, _ = gat.loss_and_grads(
                    {**params, name: p_flat.reshape(np.shape(p))}, cfg, g)
                p_flat[i] = orig
                numeric[i] = (plus - minus) / (2 * eps)
            diff = np.linalg.norm(g_flat - numeric)
            denom = max(np.linalg.norm(numeric), np.linalg.norm(g_flat), 1e-8)
            # a near-zero true gradient leaves only cancellation noise in the
            # central difference; accept on absolute agreement there
            assert diff / denom < 1e-4 or diff < 1e-8, \
                f"{name}: rel {diff / denom}, abs {diff}"


class TestTraining:
    def test_loss_decreases(self):
        g = small_graph(seed=7, n=20, target_degree=4)
        model = gat.train(g, GatConfig(hidden_dims=(8,), heads=2, epochs=50,
                                       dropout=0.0, seed=0))
        assert model.loss_history[-1] < model.loss_history[0]

    def test_two_cluster_graph_high_train_accuracy(self):
        rng = np.random.default_rng(8)
        n = 40
        labels = np.array([0] * 20 + [1] * 20)
        x = rng.normal(size=(n, 6)) + 3.0 * labels[:, None]
        train = np.ones(n, dtype=bool)
        train[::5] = False
        g = gat.build_graph(x, 6, labels, train, ~train)
        model = gat.train(g, GatConfig(epochs=400, seed=0))
        logits = gat.forward(model.params, model.config, g)
        preds = np.argmax(logits, axis=1)
        assert np.mean(preds[train] == labels[train]) >= 0.95

    def test_single_class_train_mask_rejected(self):
        g = small_graph(seed=9, n=8, target_degree=2)
        g.labels[:] = 0
        with pytest.raises(ValueError):
            gat.train(g, GatConfig(epochs=1))

    def test_seeded_determinism(self):
        g = small_graph(seed=10, n=12, target_degree=3)
        cfg = GatConfig(hidden_dims=(8, 6), heads=2, epochs=20, seed=5)
        m1 = gat.train(g, cfg)
        m2 = gat.train(g, cfg)
        for name in m1.params:
            np.testing.assert_array_equal(m1.params[name], m2.params[name])


class TestAblation:
    def _trained(self, seed=11):
        rng = np.random.default_rng(seed)
        n = 60
        labels = rng.integers(0, 2, n)
        x = rng.normal(size=(n, 8))
        x[:, 0] += 3.0 * labels  # feature 0 carries the entire signal
        train = np.ones(n, dtype=bool)
        train[-20:] = False
        g = gat.build_graph(x, 5, labels, train, ~train)
        model = gat.train(g, GatConfig(hidden_dims=(16,), heads=2,
                                       epochs=150, seed=0))
        return model, g

    def test_determining_feature_ranked_first(self):
        model, g = self._trained()
        report = gat.ablation_importance(model, g, theta=3)
        assert report.ranking[0] == 0

    def test_all_zero_column_delta_exactly_zero(self):
        model, g = self._trained()
        g.node_features[:, 5] = 0.0
        report = gat.ablation_importance(model, g, theta=3)
        assert report.deltas[5] == 0.0

    def test_theta_full_returns_all_ranked(self):
        model, g = self._trained()
        report = gat.ablation_importance(model, g, theta=g.n_features)
        assert len(report.selected) == g.n_features
        assert sorted(report.ranking.tolist()) == list(range(g.n_features))
        # ranking really is delta-descending
        deltas = report.deltas[report.ranking]
        assert all(deltas[i] >= deltas[i + 1] for i in range(len(deltas) - 1))

    def test_untrained_model_rejected(self):
        model, g = self._trained()
        model.trained = False
        with pytest.raises(ValueError):
            gat.ablation_importance(model, g)

    def test_report_deterministic_and_csv_shape(self):
        model, g = self._trained()
        r1 = gat.ablation_importance(model, g, theta=4)
        r2 = gat.ablation_importance(model, g, theta=4)
        np.testing.assert_array_equal(r1.deltas, r2.deltas)
        np.testing.assert_array_equal(r1.ranking, r2.ranking)
        lines = r1.to_csv().strip().split("\n")
        assert lines[0] == "feature_name,delta_auroc,rank,selected"
        assert len(lines) == 1 + g.n_features
        assert sum(line.endswith(",1") for line in lines[1:]) == 4

    def test_baseline_matches_direct_auroc(self):
        model, g = self._trained()
        report = gat.ablation_importance(model, g, theta=3)
        scores = gat.predict_scores(model, g)
        expected = auroc(scores[g.val_mask], g.labels[g.val_mask])
        assert report.baseline_auroc == pytest.approx(expected, abs=1e-12)
