"""Experiment protocols: X-O, bouncing balls, classification, semi-supervised and split-task streams."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import streams
from .baselines import SnnConfig, SpikingBaseline
from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .encode import rate_code_embedding
from .exceptions import ConfigError, DatasetError
from .metrics import FramePredictor, PseAccumulator, RunMetrics, acc_continual, accuracy, squared_error
from .network import SpNCN, SpncnConfig, classify_readout

log = logging.getLogger(__name__)

METRIC_FIELDS = ("trial", "index", "phase", "sim_time_ms", "label", "pred", "labeled",
                 "sq_error", "pse", "baseline_sq_error", "baseline_pse", "updates", "spikes")


@dataclass
class TrialResult:
    trial: int
    metrics: RunMetrics
    summary: dict
    model: object
    embeddings: list = field(default_factory=list)   # (label, vector)
    wall_clock_s: float = 0.0


def trial_seeds(seed: int, trial: int, n: int = 4) -> list[np.random.SeedSequence]:
    """Independent child streams for one trial.

    Trial ``i`` of a run with base seed ``b`` uses seed ``b + i``, so trial 3 of
    seed 0 reproduces trial 0 of seed 3.
    """
    return np.random.SeedSequence(seed + trial).spawn(n)


def build_model(cfg: ExperimentConfig, n_in: int, n_classes: int, seed):
    lif = cfg.lif_config()
    enc = cfg.encoder_config()
    layers = tuple(int(n) for n in cfg.layers)
    if cfg.model == "spncn":
        net_cfg = SpncnConfig(
            layer_sizes=(n_in + n_classes,) + layers, label_size=n_classes, kappa=cfg.kappa,
            gamma_J=cfg.gamma_J, beta=cfg.beta, alpha_u=cfg.alpha_u, lam=cfg.lam, w_bound=cfg.w_bound,
            reuse_error_delta=cfg.reuse_error_delta, init_scale=cfg.init_scale, mirror_init=cfg.mirror_init,
            w_max=cfg.w_max, w_min=cfg.w_min)
        return SpNCN(net_cfg, lif, cfg.trace_config(), enc, seed=seed)
    if n_classes == 0:
        raise ConfigError(f"{cfg.model} is supervised and needs labelled data")
    snn_cfg = SnnConfig(layer_sizes=(n_in,) + layers + (n_classes,), rule=cfg.model.split("_")[1],
                        kappa=cfg.kappa, gamma=cfg.gamma_J, alpha_u=cfg.alpha_u, w_bound=cfg.w_bound,
                        init_scale=cfg.init_scale, fb_scale=cfg.fb_scale)
    return SpikingBaseline(snn_cfg, lif, enc, seed=seed)


def _join(values) -> str:
    return ";".join(str(int(v)) for v in values)


def _spike_counts(result) -> list[int]:
    return [int(a.sum()) for a in result.spike_sum[1:]]


def _embedding_layer(cfg: ExperimentConfig) -> int:
    n_layers = len(cfg.layers)
    return n_layers if cfg.embed_layer == 0 else cfg.embed_layer


# ---------------------------------------------------------------------------
# data

def load_data(cfg: ExperimentConfig) -> tuple[streams.Dataset, streams.Dataset]:
    if cfg.data_format == "mnist5k":
        train, test = _mnist5k()
    elif cfg.data_format == "csv":
        train = streams.load_csv_vectors(cfg.train_images, labeled=True)
        test = streams.load_csv_vectors(cfg.test_images, labeled=True)
    else:
        for p in (cfg.train_images, cfg.train_labels, cfg.test_images, cfg.test_labels):
            if not p or not Path(p).exists():
                raise DatasetError(f"dataset file not found: {p!r}")
        train = streams.load_idx(cfg.train_images, cfg.train_labels)
        test = streams.load_idx(cfg.test_images, cfg.test_labels)
    if cfg.n_train:
        train = train.subset(slice(0, cfg.n_train))
    if cfg.n_test:
        test = test.subset(slice(0, cfg.n_test))
    return train, test


def _mnist5k() -> tuple[streams.Dataset, streams.Dataset]:
    """5000 real MNIST training digits bundled with mlxtend; 400/100 per class train/test."""
    try:
        from mlxtend.data import mnist_data
    except ImportError:
        raise DatasetError("data_format = mnist5k needs the optional 'mlxtend' package") from None
    X, y = mnist_data()
    per_class = [np.flatnonzero(y == c) for c in range(10)]
    # round-robin over classes so any prefix (n_train, n_test) stays balanced
    train_idx = np.stack([idx[:400] for idx in per_class], axis=1).ravel()
    test_idx = np.stack([idx[400:500] for idx in per_class], axis=1).ravel()
    return (streams.Dataset(X[train_idx].astype(float), y[train_idx].astype(np.int64)),
            streams.Dataset(X[test_idx].astype(float), y[test_idx].astype(np.int64)))


# ---------------------------------------------------------------------------
# protocols

class _Recorder:
    def __init__(self, trial: int, n_layers: int):
        self.trial = trial
        self.metrics = RunMetrics()
        self.index = 0
        self.sim_time = 0.0

    def add(self, phase, result, ticks_ms, label=None, pred=None, labeled=None, sq_error=None,
            pse=None, baseline_sq_error=None, baseline_pse=None):
        self.sim_time += ticks_ms
        self.metrics.add(trial=self.trial, index=self.index, phase=phase, sim_time_ms=round(self.sim_time, 6),
                         label="" if label is None else label, pred="" if pred is None else pred,
                         labeled="" if labeled is None else int(labeled),
                         sq_error=_num(sq_error), pse=_num(pse), baseline_sq_error=_num(baseline_sq_error),
                         baseline_pse=_num(baseline_pse), updates=_join(result.update_events[1:]),
                         spikes=_join(_spike_counts(result)))
        self.index += 1


def _num(v):
    return "" if v is None else repr(float(v))


def run_xo(cfg: ExperimentConfig, trial: int) -> TrialResult:
    seeds = trial_seeds(cfg.seed, trial)
    data = streams.xo_dataset()
    model = build_model(cfg, data.dim, 2, seeds[0])
    rng = np.random.default_rng(seeds[1])
    order_rng = np.random.default_rng(seeds[2])
    rec = _Recorder(trial, len(cfg.layers))
    for _ in range(cfg.xo_train):
        c = int(order_rng.integers(2))
        r = model.present(data.X[c], c, cfg.T_st, cfg.T_ist, rng, learn=True)
        rec.add("train", r, cfg.T_st + cfg.T_ist, label=c, pred=classify_readout(r.y_hat), labeled=True)
    preds, labels = [], []
    for ch in streams.XO_TEST_SEQUENCE:
        c = 0 if ch == "X" else 1
        r = model.predict(data.X[c], cfg.T_test, rng, reset=True)
        p = classify_readout(r.y_hat)
        preds.append(p)
        labels.append(c)
        rec.add("test", r, cfg.T_test, label=c, pred=p, labeled=False)
    acc = accuracy(preds, labels)
    return TrialResult(trial, rec.metrics, {"test_accuracy": acc, "test_error": 1.0 - acc}, model)


def run_bouncing(cfg: ExperimentConfig, trial: int) -> TrialResult:
    seeds = trial_seeds(cfg.seed, trial)
    frames = streams.bouncing_ball_frames(cfg.frames, np.random.default_rng(seeds[2]),
                                          n_balls=cfg.n_balls, radius=cfg.ball_radius)
    model = build_model(cfg, frames.shape[1], 0, seeds[0])
    rng = np.random.default_rng(seeds[1])
    rec = _Recorder(trial, len(cfg.layers))
    ours, base = PseAccumulator(cfg.pse_alpha), PseAccumulator(cfg.pse_alpha)
    frame_t1 = FramePredictor(frames.shape[1])
    n_layers = len(cfg.layers)
    events = np.zeros(n_layers)
    learn_ticks = 0
    pse_at_cut = base_at_cut = None
    for k in range(cfg.frames):
        learn = k < cfg.learn_frames
        r = model.present(frames[k], None, cfg.T_st, cfg.T_ist, rng, learn=learn)
        err = squared_error(r.x_hat, r.x_target)
        b_err = squared_error(frame_t1.predict(), r.x_target)
        frame_t1.observe(r.x_target)
        ours.update(err)
        base.update(b_err)
        if learn:
            events += r.update_events[1:]
            learn_ticks += r.n_ticks
        if k == cfg.learn_frames - 1:
            pse_at_cut, base_at_cut = ours.value, base.value
        rec.add("train" if learn else "frozen", r, cfg.T_st + cfg.T_ist, sq_error=err, pse=ours.value,
                baseline_sq_error=b_err, baseline_pse=base.value)
    summary = {"pse": ours.value, "baseline_pse": base.value, "pse_ratio": ours.value / base.value,
               "pse_at_cut": pse_at_cut, "baseline_pse_at_cut": base_at_cut,
               "learn_steps": learn_ticks}
    if pse_at_cut is not None:
        summary["pse_ratio_at_cut"] = pse_at_cut / base_at_cut
    for l in range(n_layers):
        summary[f"update_events_l{l + 1}"] = float(events[l])
        summary[f"update_fraction_l{l + 1}"] = float(events[l] / learn_ticks) if learn_ticks else 0.0
    return TrialResult(trial, rec.metrics, summary, model)


def _evaluate(model, cfg: ExperimentConfig, test: streams.Dataset, rng, rec, embed: bool):
    preds = []
    embeddings = []
    layer = _embedding_layer(cfg)
    for i in range(len(test)):
        r = model.predict(test.X[i], cfg.T_test, rng, reset=True)
        p = classify_readout(r.y_hat)
        preds.append(p)
        rec.add("test", r, cfg.T_test, label=int(test.y[i]), pred=p, labeled=False)
        if embed:
            embeddings.append((int(test.y[i]), rate_code_embedding(r.spike_sum[layer], r.n_ticks, 1.0)))
    return np.array(preds), embeddings


def _train_stream(model, cfg: ExperimentConfig, stream, rng, rec):
    supervised_only = cfg.model != "spncn"
    for sample in stream:
        if supervised_only and sample.y is None:
            continue
        if cfg.hard_reset_per_sample:
            model.reset()
        r = model.present(sample.x, sample.y, cfg.T_st, cfg.T_ist, rng, learn=True)
        pred = classify_readout(r.y_hat) if r.y_hat.size else None
        rec.add("train", r, cfg.T_st + cfg.T_ist, label=sample.y, pred=pred, labeled=sample.y is not None)


def run_classify(cfg: ExperimentConfig, trial: int, data=None) -> TrialResult:
    seeds = trial_seeds(cfg.seed, trial)
    train, test = data if data is not None else load_data(cfg)
    model = build_model(cfg, train.dim, cfg.n_classes, seeds[0])
    rng = np.random.default_rng(seeds[1])
    stream = streams.shuffled(train, seeds[2])
    if cfg.p_u > 0:
        stream = streams.mask_labels(stream, cfg.p_u, seeds[3])
    rec = _Recorder(trial, len(cfg.layers))
    _train_stream(model, cfg, stream, rng, rec)
    preds, emb = _evaluate(model, cfg, test, rng, rec, cfg.export_embeddings)
    acc = accuracy(preds, test.y)
    return TrialResult(trial, rec.metrics, {"test_accuracy": acc, "test_error": 1.0 - acc}, model, emb)


def run_continual(cfg: ExperimentConfig, trial: int, data=None) -> TrialResult:
    seeds = trial_seeds(cfg.seed, trial)
    train, test = data if data is not None else load_data(cfg)
    model = build_model(cfg, train.dim, cfg.n_classes, seeds[0])
    rng = np.random.default_rng(seeds[1])
    stream = streams.split_task_stream(train, cfg.task_pairs, cfg.p_f, seeds[2])
    if cfg.p_u > 0:
        stream = streams.mask_labels(stream, cfg.p_u, seeds[3])
    rec = _Recorder(trial, len(cfg.layers))
    _train_stream(model, cfg, stream, rng, rec)
    task_acc = []
    embeddings = []
    for split in streams.task_splits(test, cfg.task_pairs):
        preds, emb = _evaluate(model, cfg, split, rng, rec, cfg.export_embeddings)
        task_acc.append(accuracy(preds, split.y))
        embeddings.extend(emb)
    summary = {"acc": acc_continual(task_acc)}
    for k, a in enumerate(task_acc):
        summary[f"task{k}_accuracy"] = a
    return TrialResult(trial, rec.metrics, summary, model, embeddings)


PROTOCOLS = {
    "xo": run_xo,
    "bouncing": run_bouncing,
    "classify": run_classify,
    "semi": run_classify,
    "continual": run_continual,
}


def run_trial(cfg: ExperimentConfig, trial: int, data=None) -> TrialResult:
    t0 = time.perf_counter()
    fn = PROTOCOLS[cfg.task]
    result = fn(cfg, trial, data) if data is not None else fn(cfg, trial)
    result.wall_clock_s = time.perf_counter() - t0
    return result


# ---------------------------------------------------------------------------
# output

def write_metrics_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def export_embeddings(vectors, labels, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for label, vec in zip(labels, vectors):
            w.writerow([int(label)] + [repr(float(v)) for v in vec])


def write_summary(results: list[TrialResult], path) -> dict:
    keys = []
    for r in results:
        for k in r.summary:
            if k not in keys:
                keys.append(k)
    table = {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "mean", "std", "n"] + [f"trial{r.trial}" for r in results])
        for k in keys:
            vals = [r.summary.get(k) for r in results]
            good = np.array([v for v in vals if v is not None], dtype=float)
            mean = float(good.mean()) if good.size else float("nan")
            std = float(good.std()) if good.size else float("nan")
            table[k] = (mean, std)
            w.writerow([k, repr(mean), repr(std), good.size] + ["" if v is None else repr(float(v)) for v in vals])
    return table


def run_experiment(cfg: ExperimentConfig, data=None) -> list[TrialResult]:
    """Run every trial and write metrics, summary, checkpoint and config into ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config").write_text(cfg.to_text())
    if data is None and cfg.task in ("classify", "semi", "continual"):
        data = load_data(cfg)
    results = []
    for trial in range(cfg.trials):
        res = run_trial(cfg, trial, data)
        log.info("trial %d finished in %.1fs: %s", trial, res.wall_clock_s, res.summary)
        write_metrics_csv(res.metrics.rows, out / f"metrics_trial{trial}.csv")
        results.append(res)
    write_summary(results, out / "summary.csv")
    save_checkpoint(out / "checkpoint.bin", results[0].model.params.matrices(), cfg.to_text())
    if cfg.export_embeddings and results[0].embeddings:
        labels, vecs = zip(*results[0].embeddings)
        export_embeddings(vecs, labels, out / "embeddings.csv")
    return results
