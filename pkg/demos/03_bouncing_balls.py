"""
Chasing a bouncing-ball video
=============================

Three balls move in a 16x16 box. At each frame the network predicts the
sensory trace from its top-down weights, and we score it with the
prequential squared error (pSE). The reference predictor just repeats the
previous frame.

This is a short run. The preset uses 2000 frames and takes several minutes.
"""
from spncn import experiments
from spncn.config import parse_config

cfg = parse_config("preset:bouncing", {"frames": "300", "learn_frames": "200", "out": "runs/demo_ball"})
res = experiments.run_experiment(cfg)[0]

rows = res.metrics.rows
for k in (0, 50, 100, 199, 250, 299):
    r = rows[k]
    print(f"frame {k:4d} [{r['phase']:6s}]  pSE {float(r['pse']):.3f}  Frame(t-1) pSE {float(r['baseline_pse']):.3f}")

s = res.summary
print(f"ratio at the learning cut {s['pse_ratio_at_cut']:.2f}, at the end {s['pse_ratio']:.2f}")
print("fraction of steps with a weight update per layer:",
      [round(s[f"update_fraction_l{l}"], 3) for l in (1, 2)])
