"""Character-level recurrent VAE over equation-structure strings.

Encoder: embedding -> stacked GRU (bidirectional when more than one layer)
-> final states of every layer and direction -> affine heads for the
posterior mean and log-variance.  Decoder: ``tanh`` projection of ``z`` to
each layer's initial state, stacked unidirectional GRU fed with the previous
token's embedding concatenated with ``z``, affine projection to vocabulary
logits.  Loss per batch is the summed token cross-entropy plus the Gaussian
KL term, both averaged over sequences.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..expr import validate
from . import gru
from .optim import OPTIMIZERS, make_optimizer

log = logging.getLogger(__name__)

__all__ = [
    "VOCAB",
    "PAD",
    "SOS",
    "EOS",
    "VaeConfig",
    "VaeModel",
    "TrainReport",
    "SequenceTooLong",
    "UnknownToken",
    "NonPositiveSigma",
    "CorpusEmpty",
    "NonFiniteLoss",
    "tokenize",
    "detokenize",
    "encode",
    "kl_divergence",
    "loss_and_grads",
    "train",
    "sample",
    "reconstruct",
    "uve",
]

VOCAB = ("<pad>", "<sos>", "<eos>", "Z", "C", "a", "o", "(", ")", " ")
PAD, SOS, EOS = 0, 1, 2
_INDEX = {ch: i for i, ch in enumerate(VOCAB) if i > EOS}


class SequenceTooLong(ValueError):
    pass


class UnknownToken(ValueError):
    pass


class NonPositiveSigma(ValueError):
    pass


class CorpusEmpty(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite in epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class VaeConfig:
    enc_hidden: int = 64
    dec_hidden: int = 64
    enc_layers: int = 1
    dec_layers: int = 1
    enc_dropout: float = 0.0
    dec_dropout: float = 0.0
    n_batch: int = 32
    learning_rate: float = 0.005
    optimizer: str = "RMSprop"
    latent_dim: int = 16
    max_len: int = 96  # symbols, excluding <sos>/<eos>
    seed: int = 0
    embed_dim: int = 16
    max_epochs: int = 150
    patience: int = 10
    min_delta: float = 1e-4
    clip_norm: float = 5.0

    def __post_init__(self):
        for name in ("enc_hidden", "dec_hidden", "enc_layers", "dec_layers", "n_batch", "latent_dim", "max_len", "embed_dim"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("enc_dropout", "dec_dropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {sorted(OPTIMIZERS)}")
        if not 1 <= self.max_epochs <= 150:
            raise ValueError("max_epochs must lie in 1..150")

    @property
    def enc_directions(self) -> int:
        return 2 if self.enc_layers > 1 else 1

    @property
    def summary_size(self) -> int:
        return self.enc_layers * self.enc_directions * self.enc_hidden


@dataclass
class TrainReport:
    recon: list[float] = field(default_factory=list)
    kl: list[float] = field(default_factory=list)
    total: list[float] = field(default_factory=list)
    uve: int = 0
    early_stop_epoch: int = 0  # 1-based epoch whose parameters were kept
    steps: int = 0
    stopped_early: bool = False


def _dirs(cfg: VaeConfig) -> tuple[str, ...]:
    return ("f", "b") if cfg.enc_directions == 2 else ("f",)


def param_names(cfg: VaeConfig) -> list[str]:
    """Parameter names in the declared (checkpoint) order."""
    names = ["embed"]
    for l in range(cfg.enc_layers):
        for d in _dirs(cfg):
            names += [f"enc.{l}.{d}.{k}" for k in ("Wx", "Wh", "bx", "bh")]
    names += ["mu.W", "mu.b", "logvar.W", "logvar.b", "dec.init.W", "dec.init.b"]
    for l in range(cfg.dec_layers):
        names += [f"dec.{l}.{k}" for k in ("Wx", "Wh", "bx", "bh")]
    names += ["out.W", "out.b"]
    return names


def init_params(cfg: VaeConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    V, E, He, Hd, Lz = len(VOCAB), cfg.embed_dim, cfg.enc_hidden, cfg.dec_hidden, cfg.latent_dim
    p: dict[str, np.ndarray] = {"embed": rng.normal(0.0, 0.1, (V, E))}
    for l in range(cfg.enc_layers):
        n_in = E if l == 0 else He * cfg.enc_directions
        for d in _dirs(cfg):
            for k, v in gru.init_params(rng, n_in, He).items():
                p[f"enc.{l}.{d}.{k}"] = v
    S = cfg.summary_size
    for head in ("mu", "logvar"):
        p[f"{head}.W"] = rng.normal(0.0, 1.0 / math.sqrt(S), (S, Lz))
        p[f"{head}.b"] = np.zeros(Lz)
    p["dec.init.W"] = rng.normal(0.0, 1.0 / math.sqrt(Lz), (Lz, cfg.dec_layers * Hd))
    p["dec.init.b"] = np.zeros(cfg.dec_layers * Hd)
    for l in range(cfg.dec_layers):
        n_in = E + Lz if l == 0 else Hd
        for k, v in gru.init_params(rng, n_in, Hd).items():
            p[f"dec.{l}.{k}"] = v
    p["out.W"] = rng.normal(0.0, 1.0 / math.sqrt(Hd), (Hd, V))
    p["out.b"] = np.zeros(V)
    return {name: p[name] for name in param_names(cfg)}


@dataclass
class VaeModel:
    cfg: VaeConfig
    params: dict[str, np.ndarray]

    @classmethod
    def create(cls, cfg: VaeConfig) -> "VaeModel":
        return cls(cfg, init_params(cfg, np.random.default_rng(cfg.seed)))

    def copy(self) -> "VaeModel":
        return VaeModel(self.cfg, copy.deepcopy(self.params))

    def sub(self, prefix: str) -> dict[str, np.ndarray]:
        n = len(prefix)
        return {k[n:]: v for k, v in self.params.items() if k.startswith(prefix)}


# -- tokens ------------------------------------------------------------------


def tokenize(text: str, max_len: int | None = None) -> list[int]:
    """Symbol ids of ``text`` wrapped in <sos> ... <eos>."""
    ids = [SOS]
    for i, ch in enumerate(text):
        if ch not in _INDEX:
            raise UnknownToken(f"symbol {ch!r} at position {i} is not in the vocabulary")
        ids.append(_INDEX[ch])
    if max_len is not None and len(text) > max_len:
        raise SequenceTooLong(f"{len(text)} symbols exceed max_len={max_len}")
    ids.append(EOS)
    return ids


def detokenize(ids) -> str:
    out = []
    for i in ids:
        i = int(i)
        if i == EOS:
            break
        if i > EOS:
            out.append(VOCAB[i])
    return "".join(out)


def _pad(seqs: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    T = max(len(s) for s in seqs)
    tokens = np.full((T, len(seqs)), PAD, dtype=np.int64)
    for n, s in enumerate(seqs):
        tokens[: len(s), n] = s
    return tokens, (tokens != PAD).astype(np.float64)


# -- forward / backward ------------------------------------------------------


def _dropout(x, rate, rng):
    if rate <= 0.0 or rng is None:
        return x, None
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep, keep


def _encoder(model: VaeModel, tokens, mask, rng):
    cfg = model.cfg
    p = model.params
    X = p["embed"][tokens]
    T = tokens.shape[0]
    caches = []
    finals = []
    for l in range(cfg.enc_layers):
        X, keep = _dropout(X, cfg.enc_dropout, rng)
        outs = []
        layer_caches = []
        for d in _dirs(cfg):
            sub = model.sub(f"enc.{l}.{d}.")
            h0 = np.zeros((tokens.shape[1], cfg.enc_hidden))
            Hs, cache = gru.forward(X, mask, h0, sub, reverse=(d == "b"))
            outs.append(Hs)
            layer_caches.append(cache)
            finals.append(Hs[T - 1] if d == "f" else Hs[0])
        caches.append((keep, layer_caches))
        X = np.concatenate(outs, axis=2) if len(outs) > 1 else outs[0]
    summary = np.concatenate(finals, axis=1)
    mu = summary @ p["mu.W"] + p["mu.b"]
    logvar = summary @ p["logvar.W"] + p["logvar.b"]
    return mu, logvar, summary, caches


def _encoder_backward(model: VaeModel, tokens, dmu, dlogvar, summary, caches, grads):
    cfg = model.cfg
    p = model.params
    He = cfg.enc_hidden
    grads["mu.W"] = summary.T @ dmu
    grads["mu.b"] = dmu.sum(axis=0)
    grads["logvar.W"] = summary.T @ dlogvar
    grads["logvar.b"] = dlogvar.sum(axis=0)
    dsummary = dmu @ p["mu.W"].T + dlogvar @ p["logvar.W"].T
    T, N = tokens.shape
    dirs = _dirs(cfg)
    dX_above = None
    k = len(dirs) * cfg.enc_layers
    for l in reversed(range(cfg.enc_layers)):
        keep, layer_caches = caches[l]
        dX = None
        for j in reversed(range(len(dirs))):
            d = dirs[j]
            k -= 1
            dHs = np.zeros((T, N, He))
            if dX_above is not None:
                dHs += dX_above[:, :, j * He : (j + 1) * He]
            dHs[T - 1 if d == "f" else 0] += dsummary[:, k * He : (k + 1) * He]
            sub = model.sub(f"enc.{l}.{d}.")
            dXd, _, g = gru.backward(dHs, layer_caches[j], sub)
            for name, v in g.items():
                grads[f"enc.{l}.{d}.{name}"] = v
            dX = dXd if dX is None else dX + dXd
        if keep is not None:
            dX = dX * keep
        dX_above = dX
    dE = np.zeros_like(p["embed"])
    np.add.at(dE, tokens, dX_above)
    grads["embed"] = dE


def loss_and_grads(model: VaeModel, batch: list[str], noise, rng=None, with_grads: bool = True):
    """Reconstruction loss, KL term and gradients for one batch.

    ``noise`` is the (N, latent_dim) standard-normal draw of the
    reparameterisation; ``rng`` enables dropout (training mode).
    """
    cfg = model.cfg
    p = model.params
    seqs = [tokenize(s, cfg.max_len) for s in batch]
    tokens, mask = _pad(seqs)
    N = len(batch)

    mu, logvar, summary, enc_caches = _encoder(model, tokens, mask, rng)
    std = np.exp(0.5 * logvar)
    z = mu + std * noise
    kl = -0.5 * np.sum(1.0 + logvar - mu**2 - np.exp(logvar)) / N

    # decoder: inputs <sos> x, targets x <eos>
    dec_tokens = tokens[:-1]
    targets = tokens[1:]
    tmask = mask[1:]
    Td = dec_tokens.shape[0]
    Hd = cfg.dec_hidden
    init_pre = z @ p["dec.init.W"] + p["dec.init.b"]
    init = np.tanh(init_pre)
    emb = p["embed"][dec_tokens]
    X = np.concatenate([emb, np.broadcast_to(z, (Td,) + z.shape)], axis=2)
    dec_caches = []
    for l in range(cfg.dec_layers):
        X, keep = _dropout(X, cfg.dec_dropout, rng)
        Hs, cache = gru.forward(X, tmask, init[:, l * Hd : (l + 1) * Hd], model.sub(f"dec.{l}."))
        dec_caches.append((keep, cache))
        X = Hs
    logits = X @ p["out.W"] + p["out.b"]
    logits -= logits.max(axis=2, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=2, keepdims=True))
    picked = np.take_along_axis(logp, targets[:, :, None], axis=2)[:, :, 0]
    recon = -np.sum(picked * tmask) / N
    if not with_grads:
        return recon, kl, None

    grads: dict[str, np.ndarray] = {}
    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, targets[:, :, None], np.take_along_axis(dlogits, targets[:, :, None], axis=2) - 1.0, axis=2)
    dlogits *= tmask[:, :, None] / N
    top = X
    grads["out.W"] = top.reshape(-1, Hd).T @ dlogits.reshape(-1, len(VOCAB))
    grads["out.b"] = dlogits.sum(axis=(0, 1))
    dX = dlogits @ p["out.W"].T
    dinit = np.zeros_like(init)
    for l in reversed(range(cfg.dec_layers)):
        keep, cache = dec_caches[l]
        dXin, dh0, g = gru.backward(dX, cache, model.sub(f"dec.{l}."))
        for name, v in g.items():
            grads[f"dec.{l}.{name}"] = v
        dinit[:, l * Hd : (l + 1) * Hd] = dh0
        dX = dXin if keep is None else dXin * keep
    E = cfg.embed_dim
    dE = np.zeros_like(p["embed"])
    np.add.at(dE, dec_tokens, dX[:, :, :E])
    dz = dX[:, :, E:].sum(axis=0)
    dinit_pre = dinit * (1.0 - init**2)
    grads["dec.init.W"] = z.T @ dinit_pre
    grads["dec.init.b"] = dinit_pre.sum(axis=0)
    dz += dinit_pre @ p["dec.init.W"].T

    dmu = dz + mu / N
    dlogvar = dz * noise * 0.5 * std - 0.5 * (1.0 - np.exp(logvar)) / N
    _encoder_backward(model, tokens, dmu, dlogvar, summary, enc_caches, grads)
    grads["embed"] += dE
    return recon, kl, {name: grads[name] for name in param_names(cfg)}


# -- public operations -------------------------------------------------------


def encode(model: VaeModel, x: str, noise=None):
    """Posterior sample for ``x``: returns (z, mu, sigma) with z = mu + sigma * noise."""
    tokens, mask = _pad([tokenize(x, model.cfg.max_len)])
    mu, logvar, _, _ = _encoder(model, tokens, mask, None)
    mu, sigma = mu[0], np.exp(0.5 * logvar[0])
    noise = np.zeros_like(mu) if noise is None else np.asarray(noise, dtype=np.float64)
    return noise * sigma + mu, mu, sigma


def kl_divergence(mu, sigma) -> float:
    """KL( N(mu, diag(sigma^2)) || N(0, I) )."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise NonPositiveSigma("sigma must be strictly positive")
    var = sigma**2
    return float(-0.5 * np.sum(1.0 + np.log(var) - mu**2 - var))


def _clip(grads, max_norm):
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def train(
    cfg: VaeConfig,
    corpus,
    max_steps: int | None = None,
    uve_samples: int = 100,
    uve_temperature: float = 1.0,
    model: VaeModel | None = None,
):
    """Fit a model to ``corpus`` and return (model, report).

    Training runs for at most ``cfg.max_epochs`` epochs and stops when the
    epoch-mean total loss has not improved by ``cfg.min_delta`` for
    ``cfg.patience`` epochs, or after ``max_steps`` optimiser steps.  The
    parameters of the best epoch are returned.  The report's UVE counts
    ``uve_samples`` prior draws decoded at ``uve_temperature``; greedy
    decoding from the prior tends to repeat a single string.
    """
    corpus = list(corpus)
    if not corpus:
        raise CorpusEmpty("training corpus is empty")
    bad = [s for s in corpus if not validate(s)]
    if bad:
        raise ValueError(f"{len(bad)} corpus entries are not valid structures, e.g. {bad[0]!r}")
    for s in corpus:
        tokenize(s, cfg.max_len)

    rng = np.random.default_rng(cfg.seed)
    model = VaeModel.create(cfg) if model is None else model
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    report = TrainReport()
    best_total = math.inf
    best_params = copy.deepcopy(model.params)
    stale = 0
    steps = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(corpus))
        sums = np.zeros(3)
        seen = 0
        for start in range(0, len(corpus), cfg.n_batch):
            batch = [corpus[i] for i in order[start : start + cfg.n_batch]]
            noise = rng.standard_normal((len(batch), cfg.latent_dim))
            recon, kl, grads = loss_and_grads(model, batch, noise, rng)
            total = recon + kl
            if not math.isfinite(total):
                raise NonFiniteLoss(epoch)
            _clip(grads, cfg.clip_norm)
            opt.step(model.params, grads)
            sums += np.array([recon, kl, total]) * len(batch)
            seen += len(batch)
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        recon, kl, total = sums / seen
        report.recon.append(float(recon))
        report.kl.append(float(kl))
        report.total.append(float(total))
        if total < best_total - cfg.min_delta or epoch == 1:
            best_total = total
            best_params = copy.deepcopy(model.params)
            report.early_stop_epoch = epoch
            stale = 0
        else:
            stale += 1
        log.debug("epoch %d recon %.4f kl %.4f total %.4f", epoch, recon, kl, total)
        if max_steps is not None and steps >= max_steps:
            break
        if stale >= cfg.patience:
            report.stopped_early = True
            break
    report.steps = steps
    model.params = best_params
    if uve_samples:
        report.uve = uve(sample(model, uve_samples, cfg.seed, uve_temperature), set(corpus))
    return model, report


def _decode(model: VaeModel, z: np.ndarray, max_len: int, temperature: float = 0.0, rng=None) -> list[str]:
    cfg = model.cfg
    p = model.params
    Hd = cfg.dec_hidden
    N = len(z)
    init = np.tanh(z @ p["dec.init.W"] + p["dec.init.b"])
    hs = [init[:, l * Hd : (l + 1) * Hd] for l in range(cfg.dec_layers)]
    layers = [model.sub(f"dec.{l}.") for l in range(cfg.dec_layers)]
    prev = np.full(N, SOS)
    done = np.zeros(N, dtype=bool)
    out = np.full((max_len, N), EOS)
    for t in range(max_len):
        x = np.concatenate([p["embed"][prev], z], axis=1)
        for l, sub in enumerate(layers):
            hs[l] = gru.step(x, hs[l], sub)
            x = hs[l]
        logits = x @ p["out.W"] + p["out.b"]
        logits[:, [PAD, SOS]] = -np.inf
        if temperature > 0.0:
            scaled = logits / temperature
            scaled -= scaled.max(axis=1, keepdims=True)
            prob = np.exp(scaled)
            prob /= prob.sum(axis=1, keepdims=True)
            u = rng.random((N, 1))
            nxt = np.minimum((prob.cumsum(axis=1) < u).sum(axis=1), len(VOCAB) - 1)
        else:
            nxt = logits.argmax(axis=1)
        nxt = np.where(done, EOS, nxt)
        out[t] = nxt
        done |= nxt == EOS
        prev = nxt
        if done.all():
            break
    return [detokenize(out[:, n]) for n in range(N)]


def sample(model: VaeModel, count: int, seed: int = 0, temperature: float = 0.0, max_len: int | None = None) -> list[str]:
    """Decode ``count`` strings from z ~ N(0, I); greedy unless ``temperature`` > 0."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, model.cfg.latent_dim))
    return _decode(model, z, model.cfg.max_len if max_len is None else max_len, temperature, rng)


def reconstruct(model: VaeModel, x: str) -> str:
    """Greedy decoding from the posterior mean of ``x``."""
    _, mu, _ = encode(model, x)
    return _decode(model, mu[None, :], model.cfg.max_len)[0]


def uve(samples, corpus) -> int:
    """Number of distinct samples that are valid structures and absent from ``corpus``."""
    corpus = set(corpus)
    return sum(1 for s in set(samples) if validate(s) and s not in corpus)
