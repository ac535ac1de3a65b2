"""Linear hinge-loss classification and the evaluation stack.

Train the Pegasos-style linear classifier (with 10-fold grid-search CV
over C), then walk through the evaluation report: AUROC, accuracy, MCC,
and the decision-curve analysis that expresses clinical utility as net
benefit across treatment thresholds.
"""

import numpy as np

from cardiofuse import metrics, svm

rng = np.random.default_rng(0)

# Two overlapping Gaussian classes in 8 dimensions.
n = 300
labels = rng.integers(0, 2, n)
x = rng.normal(size=(n, 8)) + 0.9 * labels[:, None]
train, test = np.arange(200), np.arange(200, n)

cv = svm.grid_search_cv(x[train], labels[train], folds=10, seed=0, epochs=100)
print("grid-search CV (mean fold AUROC per C):")
for C, a in zip(cv.grid, cv.mean_aurocs):
    marker = "  <- chosen" if C == cv.chosen_c else ""
    print(f"  C={C:<6} {a:.4f}{marker}")

clf = svm.train_linear(x[train], labels[train], C=cv.chosen_c, epochs=300)
scores = svm.decision_scores(clf, x[test])

# Platt-style squash turns margins into [0, 1] risks for DCA.
squash = metrics.fit_score_squash(
    svm.decision_scores(clf, x[train]), labels[train])
report = metrics.evaluate(scores, labels[test], squash=squash)
print(f"\ntest AUROC {report.auroc:.4f}  accuracy {report.accuracy:.4f}  "
      f"MCC {report.mcc:.4f}")
print(f"confusion (TP, FP, TN, FN): {report.confusion}")

# Net benefit of acting on the model vs treating everyone / no one.
print("\npt     model     treat-all  treat-none")
for pt, nb_m, nb_a, nb_n in report.dca_curve[9:60:10]:
    print(f"{pt:.2f}  {nb_m:+.4f}   {nb_a:+.4f}    {nb_n:+.4f}")

# The report serializes to stable JSON (what the CLI writes to disk).
print(f"\nEvalReport JSON is {len(report.to_json())} bytes, "
      f"round-trips: {metrics.EvalReport.from_json(report.to_json()) == report}")
