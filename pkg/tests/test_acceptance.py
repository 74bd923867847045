"""Acceptance criteria, one verdict line each.

Full-size MNIST criteria need the four IDX files in ``$SPNCN_MNIST_DIR``
(standard names, gzip or not) and report NOT RUN without them. The
``mnist5k`` lines are desk-scale proxies on the 5000 digits bundled with
mlxtend. They check the same orderings on far less data and are reported
under their own names, never as the full criteria.
"""
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from spncn import experiments
from spncn.config import parse_config

ROOT = Path(__file__).resolve().parent.parent

# df-BFA's own neuron and step-size settings; the SpNCN values starve it
# of hidden spikes and make its output layer chase the latest label
BFA = {"model": "snn_bfa", "v_thr": "0.05", "init_scale": "0.3", "alpha_u": "0.0003"}


def _mnist_files():
    root = os.environ.get("SPNCN_MNIST_DIR")
    if not root:
        return None
    names = {"train_images": "train-images-idx3-ubyte", "train_labels": "train-labels-idx1-ubyte",
             "test_images": "t10k-images-idx3-ubyte", "test_labels": "t10k-labels-idx1-ubyte"}
    found = {}
    for key, stem in names.items():
        for cand in (Path(root) / stem, Path(root) / (stem + ".gz")):
            if cand.is_file():
                found[key] = str(cand)
                break
        else:
            return None
    return found


def _need_mnist(report, name):
    files = _mnist_files()
    if files is None:
        report(name, None, "MNIST IDX files not found (set SPNCN_MNIST_DIR)")
        pytest.skip("MNIST IDX files not available")
    return files


def _need_mnist5k(report, name):
    try:
        import mlxtend  # noqa: F401
    except ImportError:
        report(name, None, "mlxtend not installed")
        pytest.skip("mlxtend not installed")


def _run(preset, tmp_path, **overrides):
    overrides.setdefault("out", str(tmp_path / preset))
    cfg = parse_config(f"preset:{preset}", {k: str(v) for k, v in overrides.items()})
    return experiments.run_experiment(cfg)


# -- X-O ---------------------------------------------------------------------

def test_xo_all_trials_perfect(report, tmp_path):
    t0 = time.perf_counter()
    results = _run("xo", tmp_path, trials=10)
    elapsed = time.perf_counter() - t0
    accs = [r.summary["test_accuracy"] for r in results]
    ok = len(accs) == 10 and all(a == 1.0 for a in accs) and elapsed < 60
    report("X-O 100% in 10/10 trials, < 60 s", ok,
           f"accuracies {accs}, {elapsed:.1f} s")
    assert ok


# -- bouncing balls ----------------------------------------------------------

@pytest.fixture(scope="module")
def bouncing(tmp_path_factory):
    out = tmp_path_factory.mktemp("bouncing")
    t0 = time.perf_counter()
    res = _run("bouncing", out)[0]
    return res.summary, time.perf_counter() - t0


def test_bouncing_pse_ratio(report, bouncing):
    s, elapsed = bouncing
    first, second = s["pse_ratio_at_cut"], s["pse_ratio"]
    ok = first <= 0.8 and second <= 0.8
    report("bouncing balls pSE ratio <= 0.8 in both halves", ok,
           f"learning half {s['pse_at_cut']:.4f}/{s['baseline_pse_at_cut']:.4f} = {first:.3f}, "
           f"frozen half {s['pse']:.4f}/{s['baseline_pse']:.4f} = {second:.3f}, {elapsed:.0f} s")
    below = s["pse_at_cut"] < s["baseline_pse_at_cut"] and s["pse"] < s["baseline_pse"]
    report("bouncing balls pSE strictly below Frame(t-1) in both halves", below,
           f"ratios {first:.3f}, {second:.3f}")
    assert ok and below


def test_bouncing_update_sparsity(report, bouncing):
    s, _ = bouncing
    f1, f2 = s["update_fraction_l1"], s["update_fraction_l2"]
    ok = f1 < 0.25 and f2 < 0.25 and s["update_events_l2"] < s["update_events_l1"]
    report("bouncing balls updates < 25% of steps per layer, layer 2 < layer 1", ok,
           f"layer 1 {s['update_events_l1']:.0f} ({f1:.1%}), layer 2 {s['update_events_l2']:.0f} ({f2:.1%}) "
           f"of {s['learn_steps']:.0f} steps")
    assert ok


# -- full-size MNIST (needs the IDX files) -----------------------------------

@pytest.mark.slow
def test_mnist_fast_variant(report, tmp_path):
    name = "MNIST fast variant (10k samples) test error <= 15%"
    files = _need_mnist(report, name)
    res = _run("mnist_fast", tmp_path, **files)
    err = res[0].summary["test_error"]
    report(name, err <= 0.15, f"test error {err:.2%}")
    assert err <= 0.15


@pytest.mark.slow
def test_mnist_full_and_bfa(report, tmp_path):
    name = "MNIST one-pass SpNCN <= 6.5%, df-BFA <= 12%, SpNCN < df-BFA per seed"
    files = _need_mnist(report, name)
    ours = _run("mnist", tmp_path, out=tmp_path / "spncn", **files)
    theirs = _run("mnist", tmp_path, out=tmp_path / "bfa", **files, **BFA)
    a = np.array([r.summary["test_error"] for r in ours])
    b = np.array([r.summary["test_error"] for r in theirs])
    ok = a.mean() <= 0.065 and b.mean() <= 0.12 and bool(np.all(a < b))
    report(name, ok, f"SpNCN {a.mean():.2%} +- {a.std():.2%}, df-BFA {b.mean():.2%} +- {b.std():.2%}")
    assert ok


@pytest.mark.slow
def test_semi_supervised(report, tmp_path):
    name = "semi-supervised 99% unlabeled: SpNCN < df-BFA, SpNCN <= 2x its labeled error"
    files = _need_mnist(report, name)
    semi = _run("semi", tmp_path, out=tmp_path / "semi", **files)
    full = _run("semi", tmp_path, out=tmp_path / "full", p_u=0, **files)
    bfa = _run("semi", tmp_path, out=tmp_path / "bfa", **files, **BFA)
    e_semi, e_full, e_bfa = (np.mean([r.summary["test_error"] for r in rs]) for rs in (semi, full, bfa))
    ok = e_semi < e_bfa and e_semi <= 2 * e_full
    report(name, ok, f"SpNCN {e_semi:.2%} (labeled {e_full:.2%}), df-BFA {e_bfa:.2%}")
    assert ok


@pytest.mark.slow
def test_continual(report, tmp_path):
    name = "Split MNIST ACC: SpNCN > df-BFA in >= 9 of 10 seeds"
    files = _need_mnist(report, name)
    ours = _run("continual", tmp_path, out=tmp_path / "spncn", **files)
    theirs = _run("continual", tmp_path, out=tmp_path / "bfa", **files, **BFA)
    wins = sum(a.summary["acc"] > b.summary["acc"] for a, b in zip(ours, theirs))
    report(name, wins >= 9, f"{wins}/10 seeds")
    assert wins >= 9


# -- desk-scale proxies on the bundled 5000 digits ---------------------------

# shorter windows and a smaller step than the full-size presets; tuned on the
# proxy itself (see the decisions ledger), the baseline overrides its own keys
PROXY = {"data_format": "mnist5k", "n_train": 1000, "n_test": 300, "T_st": 50, "T_test": 50, "trials": 1,
         "init_scale": 0.15, "alpha_u": 0.001, "hard_reset_per_sample": "true"}


@pytest.mark.slow
def test_mnist5k_proxy_spncn_beats_bfa(report, tmp_path):
    name = "proxy (mnist5k, 1000 samples, 2x500): SpNCN error < df-BFA error"
    _need_mnist5k(report, name)
    ours = _run("mnist", tmp_path, out=tmp_path / "spncn", layers="500,500", **PROXY)[0]
    theirs = _run("mnist", tmp_path, out=tmp_path / "bfa", layers="500,500", **{**PROXY, **BFA})[0]
    a, b = ours.summary["test_error"], theirs.summary["test_error"]
    report(name, a < b, f"SpNCN {a:.2%}, df-BFA {b:.2%}")
    assert a < b


@pytest.mark.slow
def test_mnist5k_proxy_semi(report, tmp_path):
    name = "proxy (mnist5k, 4000 samples, 400-200, 99% unlabeled): SpNCN < df-BFA, <= 2x labeled"
    _need_mnist5k(report, name)
    kw = dict(PROXY, n_train=4000)
    semi = _run("semi", tmp_path, out=tmp_path / "semi", **kw)[0].summary["test_error"]
    full = _run("semi", tmp_path, out=tmp_path / "full", p_u=0, **kw)[0].summary["test_error"]
    bfa = _run("semi", tmp_path, out=tmp_path / "bfa", **{**kw, **BFA})[0].summary["test_error"]
    ok = semi < bfa and semi <= 2 * full
    report(name, ok, f"SpNCN {semi:.2%} (labeled {full:.2%}), df-BFA {bfa:.2%}")
    assert ok


# -- property suite ----------------------------------------------------------

PROPERTIES = {
    "trace boundedness": "tests/test_neuron.py::test_trace_boundedness",
    "refractory enforcement": "tests/test_neuron.py::test_refractory_enforcement_four_steps",
    "analytic LIF spike timing": "tests/test_neuron.py::test_analytic_first_spike_time",
    "LIF leak fixed point": "tests/test_neuron.py::test_leak_fixed_point",
    "ST-LRA vs finite differences": "tests/test_network.py::test_gradient_identity",
    "dE = -beta dW^T": "tests/test_network.py::test_transpose_tracking",
    "event-driven zero delta": "tests/test_network.py::test_event_driven_zero_delta_on_silent_ticks",
    "column norms <= 20": "tests/test_network.py::test_norm_bound_after_apply",
    "lambda=0 hybrid is pure ST-LRA": "tests/test_network.py::test_hybrid_lambda_zero_is_pure",
    "Poisson rate within 4 sigma": "tests/test_encode_metrics.py::test_poisson_empirical_rate",
    "incremental pSE vs brute force": "tests/test_encode_metrics.py::test_pse_matches_brute_force",
    "ball in box over 1e6 steps": "tests/test_streams.py::test_ball_in_box_million_steps",
    "df-DRTP signal invariance": "tests/test_baselines.py::test_drtp_signal_ignores_state",
    "bit-identical reruns": "tests/test_network.py::test_bit_identical_reruns",
}


def test_property_suite(report):
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *PROPERTIES.values()], cwd=ROOT, capture_output=True, text=True)
    failed = {line.split(" ")[1].split(" - ")[0] for line in proc.stdout.splitlines()
              if line.startswith("FAILED ")}
    for label, node in PROPERTIES.items():
        report(f"property: {label}", node not in failed and proc.returncode in (0, 1), node)
    assert proc.returncode == 0, proc.stdout[-2000:]
