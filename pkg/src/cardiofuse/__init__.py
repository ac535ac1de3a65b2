"""Interpretable multimodal prediction pipeline for cardiovascular hemodynamics.

Building blocks:

- :mod:`cardiofuse.tensor3` -- third-order tensor algebra (unfold/fold,
  mode products, Frobenius norm).
- :mod:`cardiofuse.registration` -- landmark-driven affine registration of
  cine stacks to a common image space.
- :mod:`cardiofuse.filtering` -- uncertainty-quantile training-sample
  filtering.
- :mod:`cardiofuse.mpca` -- multilinear PCA feature extraction with Fisher
  ranking.
- :mod:`cardiofuse.gat` -- graph-attention feature selection for tabular
  data (numpy forward + hand-rolled reverse mode).
- :mod:`cardiofuse.svm` -- linear-margin classifier with grid-search CV.
- :mod:`cardiofuse.fusion` -- early / intermediate / late / hybrid fusion
  plans over imaging and tabular branches.
- :mod:`cardiofuse.metrics` -- AUROC, MCC, decision-curve net benefit.
- :mod:`cardiofuse.data` -- on-disk formats, dataset assembly and splits.
- :mod:`cardiofuse.synthetic` -- seeded synthetic dataset generator.
- :mod:`cardiofuse.cli` -- batch front-end (`cardiofuse run`, ...).
"""

__version__ = "0.1.0"
