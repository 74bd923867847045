"""
A single leaky integrate-and-fire neuron
========================================

Drive one LIF unit with a constant current and compare the simulated spike
times with the closed-form first-passage time of the membrane ODE.
"""
import math

import numpy as np

from spncn.neuron import LifConfig, LifState, lif_step

cfg = LifConfig(dt=0.25, tau_m=20.0, gamma_m=1.0, v_thr=0.5, t_r=1.0)
J = 0.8

# With a leak the membrane relaxes toward R*J/gamma = 0.8, crossing 0.5 at
# t = -tau_m * ln(1 - v_thr/J).
t_star = -cfg.tau_m * math.log(1 - cfg.v_thr / J)
print(f"analytic first spike at {t_star:.2f} ms")

state = LifState.zeros(1)
spikes = []
for k in range(2000):
    state, s = lif_step(state, np.array([J]), cfg)
    if s[0]:
        spikes.append((k + 1) * cfg.dt)

print("simulated spikes (ms):", [round(t, 2) for t in spikes[:5]], "...")
isi = np.diff(spikes)
print(f"inter-spike interval {isi.mean():.2f} ms (refractory hold {cfg.refractory_steps} steps)")
