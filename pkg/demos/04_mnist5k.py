"""
Digits on a desk budget
=======================

The bundled mlxtend subset holds 5000 real MNIST digits
(``pip install spncn[mnist5k]``). Train a small SpNCN on a few hundred of
them in one online pass and read the class off the label units.

Point ``train_images`` etc. at the IDX files for the full-size run
(``spncn run --config preset:mnist``).
"""
from spncn import experiments
from spncn.config import parse_config

# Desk settings: half-length windows, a smaller step and a fresh network
# state for every digit. The full-size preset keeps its own values.
overrides = {"data_format": "mnist5k", "layers": "500, 500", "n_train": "1000", "n_test": "200",
             "T_st": "50", "T_test": "50", "init_scale": "0.15", "alpha_u": "0.001",
             "hard_reset_per_sample": "true", "trials": "1", "export_embeddings": "true",
             "out": "runs/demo_mnist5k"}
cfg = parse_config("preset:mnist", overrides)
res = experiments.run_experiment(cfg)[0]
print(f"test error {res.summary['test_error']:.1%} after {cfg.n_train} samples")

# embeddings.csv has one row per test digit: label, then the top layer's
# rate code, ready for t-SNE or a linear probe.
print("embeddings in", cfg.out + "/embeddings.csv")
