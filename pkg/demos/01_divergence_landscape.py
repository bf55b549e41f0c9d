"""Tour of the four disagreement notions on single predictions.

Shows why argmax-only comparison is too coarse: two sharp classifiers and a
hesitant one can all "agree" on the top class while their predictive
distributions sit far apart. Then samples the 3-class simplex landscape and
the binary error curves that the `grid` CLI subcommand exports.
"""

import numpy as np

from divshift import Notion, binary_error_curve, dis, error_pointwise, simplex_grid

confident_a = (0.99, 0.005, 0.005)
confident_b = (0.97, 0.02, 0.01)
hesitant = (0.40, 0.35, 0.25)

print("pairwise disagreement (same argmax everywhere):")
print(f"{'pair':<28}{'top1':>8}{'hd':>10}{'jsd':>10}{'kld':>10}")
for name, p, q in [
    ("confident_a vs confident_b", confident_a, confident_b),
    ("confident_a vs hesitant", confident_a, hesitant),
]:
    values = [dis(n, p, q) for n in Notion]
    print(f"{name:<28}" + "".join(f"{v:>10.4f}" for v in values))

# Top-1 treats both pairs as identical (0); the divergences do not.

print("\npointwise error of p = (0.6, 0.4) against y = 0:")
for notion in Notion:
    print(f"  {notion.value:<6} {error_pointwise(notion, (0.6, 0.4), 0):.7f}")

# The Hellinger landscape against the fixed anchor (0.35, 0.325, 0.325):
# zero exactly at the anchor, growing toward the simplex corners.
grid = simplex_grid(Notion.HD, 50)
print(f"\nsimplex grid: {grid.shape[0]} points, "
      f"value range [{grid[:, 2].min():.4f}, {grid[:, 2].max():.4f}]")
anchor_rows = grid[grid[:, 2] == 0.0]
print(f"zero rows (the anchor itself): {anchor_rows[:, :2].tolist()}")

# Binary error curves: all notions vanish at full confidence on the truth;
# at zero confidence HD tops out at 1, JSD at ln 2, and KLD blows up into
# the epsilon clamp.
print("\nerror at f_y -> 0 and f_y -> 1 for K = 2:")
for notion in Notion:
    curve = binary_error_curve(notion, 100)
    print(f"  {notion.value:<6} err(0) = {curve[0, 1]:>10.4f}   err(1) = {curve[-1, 1]:.1f}")

np.set_printoptions(precision=4)
print("\nKLD curve tail (steep penalty for low truth confidence):")
kld = binary_error_curve(Notion.KLD, 10)
print(kld[:4])
