# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # A free packet, three ways
#
# The same Gaussian packet evolved by the (rho, Phi) field equations, by
# maximum-entropy walkers riding the field drift, and by the linear
# Schrodinger solver at the regraduated constant.

# %%
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from entropic_dynamics import pipelines as pl
from entropic_dynamics.config import load_scenario

ROOT = Path.cwd() if (Path.cwd() / "configs").exists() else Path.cwd().parent
sc = load_scenario(ROOT / "configs" / "free_packet.cfg").scenario
sc

# %%
rep = pl.compare(sc, size=20_000, snapshots=4)
for row in rep.rows:
    print(dict(zip(rep.header, np.round(row, 8))))

# %% [markdown]
# The field and wave densities agree to the solver tolerance; the walker
# histogram agrees up to sampling noise, which shrinks like M^(-1/2).

# %%
walk = pl.run_walkers(sc, size=20_000, snapshots=1)
wave = pl.run_wave(sc, snapshots=1)
x = sc.grid.axis(0)
fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(x, walk.fields[-1].rho, label="fields")
ax.plot(x, wave.final.density, "--", label="wave")
ax.step(x, walk.densities[-1].values, where="mid", alpha=0.5, label="walkers")
ax.set_xlim(-8, 8)
ax.set_xlabel("x")
ax.legend()

# %% [markdown]
# Position variance against the closed form sigma0^2 + (hbar t / 2 m sigma0)^2.

# %%
t = np.array([r[0] for r in rep.rows])
fig, ax = plt.subplots(figsize=(7, 4))
for col, style in (("var_fields", "-"), ("var_wave", "--"), ("var_walkers", "o")):
    ax.plot(t, [r[rep.header.index(col)] for r in rep.rows], style, label=col)
ax.plot(t, pl.analytic_variance(sc, t), ":", color="k", label="closed form")
ax.set_xlabel("t")
ax.legend()
