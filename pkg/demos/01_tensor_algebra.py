"""Third-order tensor algebra: unfolding, mode products, and why they matter.

A cine cardiac stack is a (height, width, frame) tensor. Everything the
MPCA stage does is built from two primitives demonstrated here: the mode-n
unfolding (a reshape that exposes one axis as matrix rows) and the mode-n
product (a matrix multiply along one axis).
"""

import numpy as np

from cardiofuse.tensor3 import (frobenius_sq, mode_n_fold, mode_n_product,
                                mode_n_unfold, multi_mode_product)

rng = np.random.default_rng(0)
t = rng.normal(size=(4, 5, 3))

# Unfolding mode n lays out the tensor as an (I_n, product of the rest)
# matrix. Folding is its exact inverse.
for n in (1, 2, 3):
    m = mode_n_unfold(t, n)
    print(f"mode-{n} unfolding shape: {m.shape}")
    assert np.array_equal(mode_n_fold(m, n, t.shape), t)
print("unfold/fold round-trips are bit-exact\n")

# The mode-n product replaces axis n by the row space of a matrix.
# Multiplying by the identity changes nothing; multiplying all three modes
# by orthonormal matrices is a rotation, so energy is preserved.
u1, _ = np.linalg.qr(rng.normal(size=(4, 4)))
u2, _ = np.linalg.qr(rng.normal(size=(5, 5)))
u3, _ = np.linalg.qr(rng.normal(size=(3, 3)))
rotated = multi_mode_product(t, {1: u1, 2: u2, 3: u3})
print(f"||t||^2          = {frobenius_sq(t):.10f}")
print(f"||rotated t||^2  = {frobenius_sq(rotated):.10f}")

# Truncating the matrices instead (fewer rows than columns) projects the
# tensor into a smaller core -- that is all MPCA does, with learned bases.
core = multi_mode_product(t, {1: u1[:2].copy(), 2: u2[:2].copy()})
print(f"\nprojected core shape: {core.shape} "
      f"(kept {frobenius_sq(core) / frobenius_sq(t):.1%} of the energy)")

# Mode products along different modes commute, which is what makes the
# alternating MPCA refinement well defined.
a = mode_n_product(mode_n_product(t, u1, 1), u2, 2)
b = mode_n_product(mode_n_product(t, u2, 2), u1, 1)
print(f"mode-1 then mode-2 vs mode-2 then mode-1: "
      f"max diff {np.abs(a - b).max():.2e}")
