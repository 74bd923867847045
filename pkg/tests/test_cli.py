import csv

import numpy as np
import pytest

from spncn import checkpoint, experiments
from spncn.cli import main
from spncn.config import ExperimentConfig, build_config, parse_config, parse_text, preset_names
from spncn.exceptions import ConfigError, ShapeError
from spncn.network import SpncnConfig, build


def small_xo(tmp_path, **kw):
    values = dict(task="xo", model="spncn", layers=(12, 6), xo_train=2, T_st=2.0, T_ist=1.0, T_test=2.0,
                  max_pixel=1.0, K=64.0, trials=2, out=str(tmp_path / "run"))
    values.update(kw)
    return ExperimentConfig(**values)


# -- config ------------------------------------------------------------------

def test_mnist_preset():
    cfg = parse_config("preset:mnist")
    assert cfg.dt == 0.25 and cfg.T_st == 100 and cfg.alpha_u == 0.0025 and cfg.beta == 1.0
    assert cfg.t_r == 1 and cfg.K == 63.75 and cfg.layers == (1000, 1000, 1000, 1000)


def test_bouncing_preset():
    cfg = parse_config("preset:bouncing")
    assert cfg.task == "bouncing" and cfg.dt == 0.1 and cfg.T_st == 30
    assert cfg.layers == (400, 100) and cfg.frames == 2000 and cfg.learn_frames == 1000


def test_semi_and_continual_presets():
    semi = parse_config("preset:semi")
    assert semi.layers == (400, 200) and semi.p_u == 0.99
    cont = parse_config("preset:continual")
    assert cont.task == "continual" and cont.layers == (1000, 1000, 1000) and cont.p_f > 0


def test_every_preset_parses():
    names = preset_names()
    assert {"xo", "bouncing", "mnist", "mnist_fast", "semi", "continual"} <= set(names)
    for name in names:
        parse_config(f"preset:{name}")


def test_unknown_key_named(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("task = xo\nmodel = spncn\nlayers = 4\nlearning_rate = 3\n")
    with pytest.raises(ConfigError, match="learning_rate"):
        parse_config(p)


def test_missing_required_named(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("task = xo\nlayers = 4\n")
    with pytest.raises(ConfigError, match="model"):
        parse_config(p)


def test_type_error_named():
    with pytest.raises(ConfigError, match="alpha_u"):
        build_config({"task": "xo", "model": "spncn", "layers": "4", "alpha_u": "fast"})
    with pytest.raises(ConfigError, match="mirror_init"):
        build_config({"task": "xo", "model": "spncn", "layers": "4", "mirror_init": "maybe"})


def test_bad_enum_values():
    with pytest.raises(ConfigError):
        build_config({"task": "regress", "model": "spncn", "layers": "4"})
    with pytest.raises(ConfigError):
        build_config({"task": "xo", "model": "mlp", "layers": "4"})


def test_flags_override_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("task = xo\nmodel = spncn\nlayers = 4\nseed = 1\n")
    cfg = parse_config(p, {"seed": "9", "layers": "5, 3"})
    assert cfg.seed == 9 and cfg.layers == (5, 3)


def test_bad_line(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("task xo\n")
    with pytest.raises(ConfigError, match=":1:"):
        parse_config(p)


@pytest.mark.parametrize("name", ["xo", "bouncing", "mnist", "semi", "continual"])
def test_config_round_trip(name):
    cfg = parse_config(f"preset:{name}")
    again = build_config(parse_text(cfg.to_text()))
    assert again == cfg
    assert again.to_text() == cfg.to_text()


def test_resolved_config_lists_every_field():
    text = ExperimentConfig().to_text()
    keys = {line.split("=")[0].strip() for line in text.splitlines()}
    assert keys == set(ExperimentConfig.__dataclass_fields__)


# -- checkpoint --------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    cfg = SpncnConfig((7, 5, 3))
    params, _ = build(cfg, 0)
    path = tmp_path / "ck.bin"
    checkpoint.save_checkpoint(path, params.matrices(), "seed = 0\n")
    text, mats = checkpoint.load_checkpoint(path)
    assert text == "seed = 0\n"
    for k, M in params.matrices().items():
        assert np.array_equal(mats[k], M)
    other, _ = build(cfg, 1)
    checkpoint.restore_into(other, path)
    for k, M in params.matrices().items():
        assert np.array_equal(other.matrices()[k], M)


def test_checkpoint_layout(tmp_path):
    path = tmp_path / "ck.bin"
    M = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    checkpoint.save_checkpoint(path, {"W1": M}, "")
    raw = path.read_bytes()
    assert raw[:8] == b"SPNCNCK1"
    # data block is row-major little-endian float64
    assert np.array_equal(np.frombuffer(raw[-48:], dtype="<f8"), M.ravel())


def test_checkpoint_rejects_shape_mismatch(tmp_path):
    path = tmp_path / "ck.bin"
    params, _ = build(SpncnConfig((7, 5, 3)), 0)
    checkpoint.save_checkpoint(path, params.matrices())
    wrong, _ = build(SpncnConfig((7, 6, 3)), 0)
    with pytest.raises(ShapeError):
        checkpoint.restore_into(wrong, path)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "ck.bin"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        checkpoint.load_checkpoint(path)
    params, _ = build(SpncnConfig((3, 2)), 0)
    checkpoint.save_checkpoint(path, params.matrices())
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(ValueError):
        checkpoint.load_checkpoint(path)


# -- outputs -----------------------------------------------------------------

def test_empty_rows_header_only(tmp_path):
    p = tmp_path / "m.csv"
    experiments.write_metrics_csv([], p)
    assert p.read_text() == ",".join(experiments.METRIC_FIELDS) + "\n"


def test_embedding_rows(tmp_path):
    p = tmp_path / "e.csv"
    experiments.export_embeddings([np.zeros(5), np.ones(5)], [3, 4], p)
    rows = list(csv.reader(p.open()))
    assert [len(r) for r in rows] == [6, 6] and rows[1][0] == "4"


def test_run_writes_artifacts(tmp_path):
    cfg = small_xo(tmp_path)
    experiments.run_experiment(cfg)
    out = tmp_path / "run"
    for name in ("metrics_trial0.csv", "metrics_trial1.csv", "summary.csv", "checkpoint.bin", "resolved_config"):
        assert (out / name).is_file()
    assert build_config(parse_text((out / "resolved_config").read_text())) == cfg
    summary = list(csv.reader((out / "summary.csv").open()))
    assert summary[0][:4] == ["metric", "mean", "std", "n"]
    rows = list(csv.DictReader((out / "metrics_trial0.csv").open()))
    assert [r["phase"] for r in rows] == ["train"] * 2 + ["test"] * 13


def test_rerun_byte_identical(tmp_path):
    cfg = small_xo(tmp_path)
    names = ("metrics_trial0.csv", "metrics_trial1.csv", "summary.csv", "checkpoint.bin", "resolved_config")
    experiments.run_experiment(cfg)
    first = {n: (tmp_path / "run" / n).read_bytes() for n in names}
    experiments.run_experiment(cfg)
    for n in names:
        assert (tmp_path / "run" / n).read_bytes() == first[n]


def test_trial_isolation(tmp_path):
    cfg = small_xo(tmp_path)
    both = experiments.run_experiment(cfg)
    alone = experiments.run_trial(cfg, 1)
    assert both[1].metrics.rows == alone.metrics.rows


def test_classify_embeddings(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.integers(0, 2, size=(12, 9)).astype(float)
    y = np.arange(12) % 3
    from spncn.streams import Dataset
    data = (Dataset(X[:9], y[:9]), Dataset(X[9:], y[9:]))
    cfg = ExperimentConfig(task="classify", model="spncn", layers=(7, 5), n_classes=3, T_st=2.0, T_test=2.0,
                           max_pixel=1.0, K=64.0, export_embeddings=True, out=str(tmp_path / "c"))
    experiments.run_experiment(cfg, data)
    rows = list(csv.reader((tmp_path / "c" / "embeddings.csv").open()))
    assert len(rows) == 3 and all(len(r) == 5 + 1 for r in rows)


# -- command line ------------------------------------------------------------

def test_cli_run(tmp_path, capsys):
    code = main(["run", "--config", "preset:xo", "--trials", "1", "--out", str(tmp_path / "o"),
                 "--set", "xo_train=2", "--set", "T_st=2", "--set", "T_ist=1", "--set", "T_test=2",
                 "--set", "layers=8,4"])
    assert code == 0
    assert (tmp_path / "o" / "summary.csv").is_file()
    assert "test_accuracy" in capsys.readouterr().out


def test_cli_config_error(tmp_path, capsys):
    code = main(["run", "--config", "preset:xo", "--set", "bogus=1", "--out", str(tmp_path)])
    assert code == 2
    assert "bogus" in capsys.readouterr().err


def test_cli_missing_dataset(tmp_path, capsys):
    code = main(["run", "--config", "preset:mnist", "--out", str(tmp_path),
                 "--set", f"train_images={tmp_path / 'nope'}"])
    assert code == 3


def test_cli_presets(capsys):
    assert main(["presets"]) == 0
    assert "xo" in capsys.readouterr().out.split()


def test_trial_seed_protocol(tmp_path):
    # trial i of base seed b is the same run as trial 0 of seed b + i
    later = experiments.run_trial(small_xo(tmp_path, seed=0), 3)
    first = experiments.run_trial(small_xo(tmp_path, seed=3), 0)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "trial"} for r in rows]
    assert strip(later.metrics.rows) == strip(first.metrics.rows)
