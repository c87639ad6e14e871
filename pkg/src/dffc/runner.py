"""Training orchestration: four run modes, hardness wiring, metrics.

Modes:

* ``vanilla``   - full dataset every epoch, no curriculum;
* ``babystep``  - static easiest-first curriculum over the quality prior;
* ``dih``       - dynamic curriculum with the quality prior disabled
                  (``alpha_f`` = 0);
* ``dffc``      - the full dynamic curriculum (loss EMA + quality prior,
                  augmented easy pool).

A run is single-threaded and bit-reproducible from its config. Per-epoch
diagnostics (entry streams, recorded losses, pool id sets) are kept on
the returned log so tests can assert the wiring directly.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from dffc import forgeries, hardness, pacing
from dffc.augment import AugmentationSpec, augment_pixels
from dffc.errors import ConfigError
from dffc.forgeries import DatasetConfig, ToySample
from dffc.model import (
    LrSchedule,
    ModelParams,
    bce_loss,
    cosine_lr,
    forward_batch,
    gradients,
    init_params,
    sgd_step,
)

log = logging.getLogger("dffc")

MODES = ("vanilla", "dih", "dffc", "babystep")

METRICS_HEADER = (
    "epoch,eta,pool_size,train_loss_mean,test_acc,test_auc,"
    "acc_easy,acc_mid,acc_hard,mean_dfh"
)
POOL_LOG_HEADER = "epoch,hard_size,easy_size,overlap,dfh_min,dfh_max"

TRACE_START_EPOCH = 3
#: Scale applied on top of per-pixel standardization.  The one-hidden-layer
#: net starts from a small uniform init; a larger input scale compensates so
#: that class margins keep growing once the cosine schedule has decayed.
INPUT_GAIN = 5.0
TRACE_GROUP_SIZE = 5
EXTREMES_FRACTION = 0.1


@dataclass(frozen=True)
class RunConfig:
    mode: str = "dffc"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    eta_max: float = 0.1
    eta_min: float = 0.001
    total_epochs: int = 20
    milestones: tuple[int, ...] = (2, 5, 8, 12, 15)
    alpha_k: float = 0.9
    easy_pool_size: int = 1000
    gamma: float = 0.9
    alpha_f: float = 0.5
    augment: AugmentationSpec = field(default_factory=AugmentationSpec)
    augment_all: bool = False
    batch_size: int = 64
    hidden_units: int = 32
    seed: int = 0
    babystep_start_fraction: float = 0.25
    babystep_growth_factor: float = 1.5
    babystep_step_length: int = 3

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "dih" and self.alpha_f != 0.0:
            raise ConfigError("mode 'dih' requires alpha_f=0 (quality prior disabled)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.hidden_units < 1:
            raise ConfigError("hidden_units must be >= 1")
        if self.total_epochs < 1:
            raise ConfigError("total_epochs must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        object.__setattr__(self, "milestones", tuple(int(m) for m in self.milestones))

    def lr_schedule(self) -> LrSchedule:
        return LrSchedule(self.eta_max, self.eta_min, self.total_epochs)

    def pacing_schedule(self, n_samples: int) -> pacing.PacingSchedule:
        return pacing.PacingSchedule(
            milestones=self.milestones,
            alpha_k=self.alpha_k,
            easy_pool_size=self.easy_pool_size,
            n_samples=n_samples,
            total_epochs=self.total_epochs,
        )


@dataclass
class MetricsLog:
    rows: list[dict]
    pool_rows: list[dict]
    dfh_traces: dict[int, dict]
    trace_groups: dict[str, list[int]]
    extremes: dict
    final_params: ModelParams
    train_hardness: hardness.HardnessState
    test_hardness: hardness.HardnessState
    # Diagnostics for tests; not serialized.
    entry_streams: list[list[tuple[int, int | None]]] = field(default_factory=list)
    loss_streams: list[np.ndarray] = field(default_factory=list)
    hard_id_sets: list[frozenset[int]] = field(default_factory=list)
    easy_id_sets: list[frozenset[int]] = field(default_factory=list)


def tercile_assignments(priors: np.ndarray) -> np.ndarray:
    """0 = easy (low prior), 1 = mid, 2 = hard, split at the 1/3 and 2/3 quantiles."""
    cuts = np.quantile(priors, [1.0 / 3.0, 2.0 / 3.0])
    return np.digitize(priors, cuts)


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-statistic AUC with midranks for ties."""
    labels = np.asarray(labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined for a single-class label set")
    ranks = rankdata(scores)  # midranks
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(
    params: ModelParams,
    test_set: list[ToySample],
    prior_terciles: np.ndarray,
    normalization: tuple[np.ndarray, np.ndarray] | None = None,
) -> dict:
    """Accuracy at threshold 0.5, tied-rank AUC, accuracy per quality tercile.

    ``normalization`` is the (mean, std) pixel transform the model was
    trained under, if any.
    """
    if not test_set:
        raise ValueError("empty test set")
    X = np.stack([s.image.ravel() for s in test_set])
    if normalization is not None:
        X = (X - normalization[0]) / normalization[1]
    y = np.array([s.target for s in test_set])
    scores = forward_batch(params, X)
    correct = (scores >= 0.5) == (y == 1.0)
    acc_by_tercile = [
        float(correct[prior_terciles == bucket].mean()) for bucket in (0, 1, 2)
    ]
    return {
        "accuracy": float(correct.mean()),
        "auc": roc_auc(scores, y),
        "acc_by_tercile": acc_by_tercile,
        "scores": scores,
    }


def _build_pool(
    config: RunConfig,
    schedule: pacing.PacingSchedule | None,
    state: hardness.HardnessState,
    prior: np.ndarray,
    t: int,
    n: int,
) -> pacing.EpochPool:
    if config.mode == "vanilla":
        return pacing.full_pool(n, t, config.seed)
    if config.mode == "babystep":
        ids = pacing.babystep_pool(
            prior,
            t,
            config.babystep_start_fraction,
            config.babystep_growth_factor,
            config.babystep_step_length,
        )
        return pacing.pool_from_ids(ids, t, config.seed)
    return pacing.build_epoch_pool(schedule, hardness.dfh_all(state), t, config.seed)


def _select_traces(
    scores: np.ndarray, seed: int
) -> dict[str, list[int]]:
    order = np.argsort(scores, kind="stable")
    n = len(order)
    k = min(TRACE_GROUP_SIZE, n // 3) or 1
    bottom = [int(i) for i in order[:k]]
    top = [int(i) for i in order[-k:]]
    mid_lo, mid_hi = n // 3, max(n // 3 + 1, 2 * n // 3)
    pool = [int(i) for i in order[mid_lo:mid_hi] if int(i) not in set(bottom + top)]
    rng = np.random.default_rng((seed, 7))
    median = (
        sorted(
            int(pool[i])
            for i in rng.choice(len(pool), size=min(k, len(pool)), replace=False)
        )
        if pool
        else []
    )
    return {"top": top, "bottom": bottom, "median": median}


def run_training(
    config: RunConfig,
    dataset: tuple[list[ToySample], list[ToySample]] | None = None,
) -> MetricsLog:
    train, test = dataset if dataset is not None else forgeries.generate_dataset(config.dataset)
    n = len(train)
    d = train[0].image.size

    prior, normalizer = forgeries.quality_priors(train)
    test_prior, _ = forgeries.quality_priors(test, normalizer=normalizer)
    terciles = tercile_assignments(test_prior)

    state = hardness.HardnessState.fresh(prior, config.gamma, config.alpha_f)
    # Evaluation-set mirror of the hardness recursion (every sample counts
    # as in-pool each epoch); diagnostic only, never drives selection.
    test_state = hardness.HardnessState.fresh(test_prior, config.gamma, config.alpha_f)

    params = init_params(d, config.hidden_units, config.seed)
    lr = config.lr_schedule()
    schedule = (
        config.pacing_schedule(n) if config.mode in ("dih", "dffc") else None
    )
    # Per-pixel standardization from training statistics; raw [0, 1]
    # pixels leave the net in a barely-trainable regime under the small
    # uniform init.  The extra gain speeds up margin growth, which the
    # short 20-epoch budget with a decaying learning rate needs.
    raw_train = np.stack([s.image.ravel() for s in train])
    pixel_mean = raw_train.mean(axis=0)
    pixel_std = (raw_train.std(axis=0) + 1e-8) / INPUT_GAIN
    X_train = (raw_train - pixel_mean) / pixel_std
    y_train = np.array([s.target for s in train])
    X_test = (np.stack([s.image.ravel() for s in test]) - pixel_mean) / pixel_std
    y_test = np.array([s.target for s in test])

    out = MetricsLog(
        rows=[],
        pool_rows=[],
        dfh_traces={},
        trace_groups={},
        extremes={},
        final_params=params,
        train_hardness=state,
        test_hardness=test_state,
    )

    for t in range(1, config.total_epochs + 1):
        eta = cosine_lr(lr, t)
        selection_scores = hardness.dfh_all(state)
        pool = _build_pool(config, schedule, state, prior, t, n)
        entries = pool.entries
        # A pool entry is a "hard original" iff it entered through the hard
        # pool (easy-pool copies are always augmented).  Only those drive
        # DIH updates, even under --augment-all where the originals also
        # get an augmentation seed attached below.
        hard_original = tuple(not e.is_augmented for e in entries)
        if config.augment_all:
            entries = tuple(
                e
                if e.is_augmented
                else replace(
                    e,
                    augmentation_seed=pacing.derive_augmentation_seed(
                        config.seed, t, e.sample_id, salt=1
                    ),
                )
                for e in entries
            )

        # Assemble the epoch's pixel matrix (augmenting where required).
        X_epoch = np.empty((len(entries), d))
        for i, entry in enumerate(entries):
            if entry.is_augmented:
                pixels = augment_pixels(
                    train[entry.sample_id].image, config.augment, entry.augmentation_seed
                ).ravel()
                X_epoch[i] = (pixels - pixel_mean) / pixel_std
            else:
                X_epoch[i] = X_train[entry.sample_id]
        y_epoch = y_train[[e.sample_id for e in entries]]

        # Mini-batch SGD; losses are recorded before each batch's update.
        epoch_losses = np.empty(len(entries))
        for start in range(0, len(entries), config.batch_size):
            stop = start + config.batch_size
            Xb, yb = X_epoch[start:stop], y_epoch[start:stop]
            probs = forward_batch(params, Xb)
            epoch_losses[start:stop] = bce_loss(probs, yb)
            params = sgd_step(params, gradients(params, Xb, yb), eta)

        # Hardness updates: only originals that sit in the hard pool (all
        # samples during warm-up / vanilla; the selected subset otherwise).
        for i, entry in enumerate(entries):
            if hard_original[i] and entry.sample_id in pool.hard_ids:
                s_t = hardness.instantaneous_hardness(
                    float(epoch_losses[i]), eta, config.eta_max
                )
                hardness.update_dih(state, entry.sample_id, s_t, in_hard_pool=True)

        # Evaluation-set mirror update.
        test_losses = bce_loss(forward_batch(params, X_test), y_test)
        for i, loss_i in enumerate(test_losses):
            s_t = hardness.instantaneous_hardness(float(loss_i), eta, config.eta_max)
            hardness.update_dih(test_state, i, s_t, in_hard_pool=True)

        metrics = evaluate(params, test, terciles, normalization=(pixel_mean, pixel_std))
        dfh_now = hardness.dfh_all(state)
        out.rows.append(
            {
                "epoch": t,
                "eta": eta,
                "pool_size": len(pool.hard_ids),
                "train_loss_mean": float(epoch_losses.mean()),
                "test_acc": metrics["accuracy"],
                "test_auc": metrics["auc"],
                "acc_easy": metrics["acc_by_tercile"][0],
                "acc_mid": metrics["acc_by_tercile"][1],
                "acc_hard": metrics["acc_by_tercile"][2],
                "mean_dfh": float(dfh_now.mean()),
            }
        )
        selected = sorted(pool.hard_ids | pool.easy_ids)
        out.pool_rows.append(
            {
                "epoch": t,
                "hard_size": len(pool.hard_ids),
                "easy_size": len(pool.easy_ids),
                "overlap": pool.overlap,
                "dfh_min": float(selection_scores[selected].min()),
                "dfh_max": float(selection_scores[selected].max()),
            }
        )

        if t == TRACE_START_EPOCH:
            out.trace_groups = _select_traces(dfh_now, config.seed)
            for ids in out.trace_groups.values():
                for sid in ids:
                    out.dfh_traces[sid] = {"start_epoch": t, "values": []}
        if t >= TRACE_START_EPOCH:
            for sid, trace in out.dfh_traces.items():
                trace["values"].append(float(dfh_now[sid]))

        out.entry_streams.append([(e.sample_id, e.augmentation_seed) for e in entries])
        out.loss_streams.append(epoch_losses)
        out.hard_id_sets.append(pool.hard_ids)
        out.easy_id_sets.append(pool.easy_ids)
        log.info(
            "epoch %d: eta=%.5f pool=%d loss=%.4f acc=%.4f auc=%.4f",
            t, eta, len(pool.hard_ids), out.rows[-1]["train_loss_mean"],
            metrics["accuracy"], metrics["auc"],
        )

    out.final_params = params
    out.extremes = forgeries.dfh_extremes_report(
        test, hardness.dfh_all(test_state), EXTREMES_FRACTION
    )
    return out


def compare_modes(configs: list[RunConfig]) -> list[dict]:
    """Run each config and report its final-epoch headline metrics.

    All configs must share the dataset seed so rows are comparable.
    """
    if not configs:
        raise ConfigError("compare_modes needs at least one config")
    dataset_seeds = {c.dataset.seed for c in configs}
    if len(dataset_seeds) != 1:
        raise ConfigError(f"configs must share a dataset seed, got {sorted(dataset_seeds)}")
    rows = []
    for config in configs:
        result = run_training(config)
        final = result.rows[-1]
        rows.append(
            {
                "mode": config.mode,
                "augment_all": config.augment_all,
                "seed": config.seed,
                "final_acc": final["test_acc"],
                "final_auc": final["test_auc"],
                "acc_hard": final["acc_hard"],
            }
        )
    return rows


def summarize_comparison(rows: list[dict]) -> list[dict]:
    """Mean and standard deviation over seeds per (mode, augment_all) group."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["mode"], row["augment_all"]), []).append(row)
    summary = []
    for (mode, aug), members in groups.items():
        entry = {"mode": mode, "augment_all": aug, "n_seeds": len(members)}
        for key in ("final_acc", "final_auc", "acc_hard"):
            vals = np.array([m[key] for m in members])
            entry[f"{key}_mean"] = float(vals.mean())
            entry[f"{key}_std"] = float(vals.std())
        summary.append(entry)
    return summary


# ---------------------------------------------------------------------------
# Serialization of run artifacts.

def metrics_csv_text(logres: MetricsLog) -> str:
    buf = io.StringIO()
    buf.write(METRICS_HEADER + "\n")
    for row in logres.rows:
        buf.write(
            ",".join(
                str(row[key])
                for key in (
                    "epoch", "eta", "pool_size", "train_loss_mean", "test_acc",
                    "test_auc", "acc_easy", "acc_mid", "acc_hard", "mean_dfh",
                )
            )
            + "\n"
        )
    return buf.getvalue()


def pool_log_csv_text(logres: MetricsLog) -> str:
    buf = io.StringIO()
    buf.write(POOL_LOG_HEADER + "\n")
    for row in logres.pool_rows:
        buf.write(
            ",".join(
                str(row[key])
                for key in ("epoch", "hard_size", "easy_size", "overlap", "dfh_min", "dfh_max")
            )
            + "\n"
        )
    return buf.getvalue()


def dfh_trace_json(logres: MetricsLog) -> str:
    return json.dumps(
        {str(sid): trace for sid, trace in sorted(logres.dfh_traces.items())},
        indent=1,
    )


def comparison_csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mode", "augment_all", "seed", "final_acc", "final_auc", "acc_hard"])
    for row in rows:
        writer.writerow(
            [row["mode"], row["augment_all"], row["seed"],
             row["final_acc"], row["final_auc"], row["acc_hard"]]
        )
    return buf.getvalue()
