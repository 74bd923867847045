"""
X versus O
==========

The smallest classification task: two 16x16 glyphs. The network sees each
glyph with its label for a few presentations, then guesses the labels of a
fixed 13-pattern sequence with learning switched off.
"""
from spncn import experiments
from spncn.config import parse_config
from spncn.streams import XO_TEST_SEQUENCE

cfg = parse_config("preset:xo", {"trials": "3", "out": "runs/demo_xo"})
results = experiments.run_experiment(cfg)

for res in results:
    preds = [row["pred"] for row in res.metrics.rows if row["phase"] == "test"]
    guess = "".join("X" if p == 0 else "O" for p in preds)
    print(f"trial {res.trial}: truth {XO_TEST_SEQUENCE}  guess {guess}  "
          f"accuracy {res.summary['test_accuracy']:.0%}")

# Files written per run: metrics_trial<i>.csv, summary.csv, checkpoint.bin,
# resolved_config.
print("outputs in", cfg.out)
