# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Gauge invariance
#
# Shifting phi by chi/eta, Phi by chi and A by grad chi changes the
# drift potential and the phase but none of the observables: the kernel,
# the density, the current velocity and the ensemble Hamiltonian.

# %%
from pathlib import Path

import numpy as np

from entropic_dynamics import pipelines as pl
from entropic_dynamics.config import load_scenario
from entropic_dynamics.fields import initial_state, velocity_fields
from entropic_dynamics.gauge import transform
from entropic_dynamics.kernel import GaugeField

ROOT = Path.cwd() if (Path.cwd() / "configs").exists() else Path.cwd().parent
sc = load_scenario(ROOT / "configs" / "gauge.cfg").scenario
chis = pl.default_gauge_functions(sc)
chis

# %%
for name, rep in pl.gauge_check(sc, n_steps=200, chis=chis):
    print(f"{name:10s} {rep.pipeline:6s} max deviation {rep.max_deviation:.2e}   "
          + ", ".join(f"{k} moved by {v:.2f}" for k, v in rep.changed.items()))

# %% [markdown]
# Pointwise: the current velocity before and after a sinusoidal shift.

# %%
s0 = initial_state(sc)
gauge = GaugeField.from_scenario(sc)
s1, gauge1 = transform(s0, gauge, chis["sinusoidal"], sc)
v0 = velocity_fields(s0, sc, gauge).current
v1 = velocity_fields(s1, sc, gauge1).current
print("max |Phi shift|", np.max(np.abs(s1.Phi - s0.Phi)), " max |dv|", np.max(np.abs(v1 - v0)))
