"""Training loop, AdaGrad updates, evaluation, and checkpoint files.

Every source of randomness is keyed by (run seed, purpose, epoch), never by a
continuing stream, so an interrupted run resumed from a checkpoint replays
the remaining epochs bit for bit.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import time
import zipfile
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .autodiff import Graph
from .corpus import Vocab, build_instances, noise_pool_of, stable_seed
from .encoders import EncoderConfig
from .errors import CheckpointError, ConfigError, NumericError
from .decoding import beam_decode, greedy_decode
from .metrics import MetricsReport, aggregate
from .model import PtrNetParams, sequence_log_prob

CHECKPOINT_FORMAT = "ordernet-checkpoint-v1"

NOISE_MODES = ("none", "always_one", "half")


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters; the numeric defaults are the standard table."""

    learning_rate: float = 0.5
    reg_lambda: float = 1e-5
    hidden_dim: int = 200
    filter_lengths: tuple = (3, 4, 5)
    feature_maps: int = 128
    recurrent_dim: int = 200
    embed_dim: int = 100
    beam_size: int = 64
    batch_size: int = 128
    epochs: int = 10
    seed: int = 1
    encoder: str = "lstm"
    noise_mode: str = "none"
    fixed_length: bool = True
    min_count: int = 1
    adagrad_epsilon: float = 1e-6
    clip_norm: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "filter_lengths", tuple(self.filter_lengths))
        if self.noise_mode not in NOISE_MODES:
            raise ConfigError(f"unknown noise mode {self.noise_mode!r}")
        if self.fixed_length and self.noise_mode != "none":
            raise ConfigError("noise injection requires variable-length mode")

    def encoder_config(self):
        return EncoderConfig(
            kind=self.encoder,
            embed_dim=self.embed_dim,
            filter_lengths=self.filter_lengths,
            feature_maps=self.feature_maps,
            recurrent_dim=self.recurrent_dim,
        )

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["filter_lengths"] = list(self.filter_lengths)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Model:
    """A parameter set plus everything needed to apply it to raw text."""

    config: TrainConfig
    vocab: Vocab
    params: PtrNetParams

    @classmethod
    def create(cls, config, vocab, pretrained=None):
        params = PtrNetParams.create(
            config.encoder_config(), config.hidden_dim, len(vocab),
            config.seed, pretrained)
        return cls(config, vocab, params)


class AdaGradState:
    """Per-parameter squared-gradient accumulators."""

    def __init__(self, params, learning_rate, epsilon):
        self.learning_rate = learning_rate
        self.epsilon = epsilon
        self.accumulators = {p.name: np.zeros_like(p.value) for p in params}


def adagrad_step(params, state):
    """One update: G += g^2, theta -= lr * g / (sqrt(G) + eps); grads reset."""
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient in {p.name!r}")
        acc = state.accumulators[p.name]
        acc += p.grad * p.grad
        p.value -= state.learning_rate * p.grad / (np.sqrt(acc) + state.epsilon)
        p.grad[...] = 0.0


def clip_gradients(params, max_norm):
    """Scale all gradients so their global norm is at most max_norm."""
    total = 0.0
    for p in params:
        total += float(np.dot(p.grad.reshape(-1), p.grad.reshape(-1)))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            p.grad *= factor
    return norm


def train_epoch(model, documents, epoch, opt_state, noise_pool=None):
    """One pass over fresh instances of every document; returns mean batch loss.

    Instance permutations are keyed by (seed, epoch, document), and the batch
    order by (seed, epoch), so any epoch can be replayed in isolation.
    """
    cfg = model.config
    params = model.params.all_params()
    instances = build_instances(
        documents, model.vocab, cfg.seed, epoch,
        noise_mode=cfg.noise_mode, fixed_length=cfg.fixed_length,
        noise_pool=noise_pool)
    order = np.random.default_rng(
        stable_seed(cfg.seed, "batch_order", epoch)).permutation(len(instances))

    batch_losses = []
    for lo in range(0, len(order), cfg.batch_size):
        batch = [instances[i] for i in order[lo:lo + cfg.batch_size]]
        m = len(batch)
        data_loss = 0.0
        for inst in batch:
            graph = Graph()
            lp = sequence_log_prob(graph, inst.inputs, inst.target, model.params)
            graph.backward(lp, seed=-1.0 / m)
            data_loss += -float(lp.value) / m
        reg = 0.0
        if cfg.reg_lambda:
            for p in params:
                p.grad += cfg.reg_lambda * p.value
                reg += float(np.dot(p.value.reshape(-1), p.value.reshape(-1)))
        clip_gradients(params, cfg.clip_norm)
        adagrad_step(params, opt_state)
        batch_losses.append(data_loss + 0.5 * cfg.reg_lambda * reg)
    return float(np.mean(batch_losses))


# ----- evaluation -----

_WORKER_MODEL = None


def _worker_init(model, strategy, beam_size):
    global _WORKER_MODEL
    _WORKER_MODEL = (model, strategy, beam_size)


def _worker_decode(inst):
    model, strategy, beam_size = _WORKER_MODEL
    return _decode_instance(model, inst, strategy, beam_size)


def _decode_instance(model, inst, strategy, beam_size):
    variable = inst.has_stop
    if strategy == "greedy":
        return greedy_decode(inst.inputs, model.params, variable)
    best, _ = beam_decode(inst.inputs, model.params, beam_size, variable)
    return best


def decode_instances(model, instances, strategy="greedy", beam_size=None, jobs=1):
    """Predicted orders for a list of instances, in input order."""
    if strategy not in ("greedy", "beam"):
        raise ConfigError(f"unknown decode strategy {strategy!r}")
    beam_size = beam_size or model.config.beam_size
    if jobs > 1 and len(instances) > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=jobs, initializer=_worker_init,
                initargs=(model, strategy, beam_size)) as pool:
            return list(pool.map(_worker_decode, instances,
                                 chunksize=max(1, len(instances) // (jobs * 4))))
    return [_decode_instance(model, inst, strategy, beam_size) for inst in instances]


def evaluate(model, instances, strategy="greedy", beam_size=None, jobs=1):
    """Decode every instance and aggregate the order metrics."""
    orders = decode_instances(model, instances, strategy, beam_size, jobs)
    pairs = []
    for inst, order in zip(instances, orders):
        if not inst.has_stop:
            assert sorted(order.positions) == list(range(inst.n_inputs)), \
                "fixed-length decoding must emit a permutation"
        pairs.append((list(order.positions), inst.gold_positions))
    return aggregate(pairs)


# ----- checkpoints -----

def checkpoint_save(path, model, opt_state=None, meta=None):
    """Write a self-describing npz checkpoint (parameters, optimizer, config)."""
    arrays = {
        "meta/format": np.array(CHECKPOINT_FORMAT),
        "meta/config": np.array(json.dumps(model.config.to_dict(), sort_keys=True)),
        "meta/vocab": np.array(model.vocab.id_to_token),
        "meta/extra": np.array(json.dumps(meta or {}, sort_keys=True)),
    }
    for p in model.params.all_params():
        arrays[f"param/{p.name}"] = p.value
    if opt_state is not None:
        for name, acc in opt_state.accumulators.items():
            arrays[f"opt/{name}"] = acc
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def checkpoint_load(path):
    """Rebuild (model, opt_state, meta) from a checkpoint file.

    Shape or naming mismatches raise CheckpointError listing the difference.
    """
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with data:
        names = set(data.files)
        if "meta/format" not in names or str(data["meta/format"]) != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path} is not a recognized checkpoint")
        config = TrainConfig.from_dict(json.loads(str(data["meta/config"])))
        tokens = [str(t) for t in data["meta/vocab"]]
        meta = json.loads(str(data["meta/extra"]))
        vocab = Vocab(tokens[2:])
        model = Model.create(config, vocab)

        expected = {f"param/{p.name}": p for p in model.params.all_params()}
        stored = {n for n in names if n.startswith("param/")}
        if stored != set(expected):
            raise CheckpointError(
                f"{path} parameter names disagree: missing {sorted(set(expected) - stored)}, "
                f"unexpected {sorted(stored - set(expected))}")
        for name, p in expected.items():
            value = data[name]
            if value.shape != p.value.shape:
                raise CheckpointError(
                    f"{path}: {name} has shape {value.shape}, expected {p.value.shape}")
            p.value[...] = value

        opt_state = None
        if any(n.startswith("opt/") for n in names):
            opt_state = AdaGradState(model.params.all_params(),
                                     config.learning_rate, config.adagrad_epsilon)
            for pname, acc in opt_state.accumulators.items():
                key = f"opt/{pname}"
                if key not in names or data[key].shape != acc.shape:
                    raise CheckpointError(f"{path}: optimizer state for {pname!r} is missing or misshaped")
                acc[...] = data[key]
    return model, opt_state, meta


# ----- full run -----

@dataclass
class EpochRecord:
    epoch: int
    loss: float
    pm_f: float
    lsr_f: float
    pmr: float
    seconds: float

    def line(self):
        return (f"{self.epoch}\t{self.loss:.6f}\t{self.pm_f:.4f}"
                f"\t{self.lsr_f:.4f}\t{self.pmr:.4f}\t{self.seconds:.2f}")


def train(model, train_docs, dev_docs, opt_state=None, start_epoch=1,
          epochs=None, on_epoch=None, checkpoint_path=None, stop_when=None):
    """Run training epochs with per-epoch dev evaluation.

    Keeps the checkpoint of the best dev pairwise F when checkpoint_path is
    given.  stop_when(record) may end the run early.  Returns the list of
    EpochRecord entries.
    """
    cfg = model.config
    if opt_state is None:
        opt_state = AdaGradState(model.params.all_params(),
                                 cfg.learning_rate, cfg.adagrad_epsilon)
    noise_pool = noise_pool_of(train_docs) if cfg.noise_mode != "none" else None
    end_epoch = (epochs if epochs is not None else cfg.epochs)

    history = []
    best_f = -1.0
    for epoch in range(start_epoch, end_epoch + 1):
        started = time.monotonic()
        loss = train_epoch(model, train_docs, epoch, opt_state, noise_pool)
        dev_instances = build_instances(
            dev_docs, model.vocab, cfg.seed, 0,
            noise_mode=cfg.noise_mode, fixed_length=cfg.fixed_length,
            noise_pool=noise_pool_of(dev_docs) if cfg.noise_mode != "none" else None)
        report = evaluate(model, dev_instances)
        record = EpochRecord(epoch, loss, report.pm.f, report.lsr.f, report.pmr,
                             time.monotonic() - started)
        history.append(record)
        if checkpoint_path is not None:
            if report.pm.f > best_f:
                best_f = report.pm.f
                checkpoint_save(checkpoint_path, model, opt_state,
                                meta={"epoch": epoch, "dev_pm_f": report.pm.f})
        if on_epoch is not None:
            on_epoch(record)
        if stop_when is not None and stop_when(record):
            break
    return history
