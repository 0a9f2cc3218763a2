# Shape of the annealed Geman-McClure loss as alpha shrinks.
# Writes loss_profiles.csv (one column per alpha); plots it if matplotlib is around.
import csv
import sys

import numpy as np

from splitgnc.solver import gnc_loss_profiles, irls_weights

r = np.linspace(0.0, 3.0, 301)
alphas = [100.0, 10.0, 1.0, 0.1, 0.01]
prof = gnc_loss_profiles(r, alphas)

# large alpha: close to r^2. small alpha: flat beyond ~sqrt(alpha)
for a, row in zip(alphas, prof):
    print(f"alpha={a:<6} loss(0.5)={row[50]:.4f} loss(3)={row[-1]:.4f} weight(3)={irls_weights([3.0], a)[0]:.2e}")

with open("loss_profiles.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["r"] + [f"alpha={a}" for a in alphas])
    for i, x in enumerate(r):
        w.writerow([f"{x:.3f}"] + [f"{v:.6g}" for v in prof[:, i]])
print("wrote loss_profiles.csv")

# %% optional figure
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit(0)
fig, ax = plt.subplots(figsize=(5, 3.5))
for a, row in zip(alphas, prof):
    ax.plot(r, row, label=f"alpha={a}")
ax.set_ylim(0, 4)
ax.set_xlabel("|r|")
ax.set_ylabel("loss")
ax.legend()
fig.tight_layout()
fig.savefig("loss_profiles.png", dpi=120)
print("wrote loss_profiles.png")
