"""Skip-gram negative sampling over walk corpora.

Per (center u, context v) pair with negatives n_1..n_K the loss is

    -log sigma(u.v) - sum_k log sigma(-u.n_k)

and each pair takes one SGD step on the center's in-vector and the
out-vectors of the context and negatives.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from ..corpus import CitationGraph
from ..embed_store import EmbeddingMatrix
from . import _rng
from .walks import WalkCorpus

logger = logging.getLogger(__name__)

NOISE_MODES = ("unigram_pow", "config_model")


@dataclass
class SgnsConfig:
    dim: int = 128
    negatives: int = 5
    epochs: int = 5
    initial_step: float = 0.025
    min_step: float = 1e-4
    noise_mode: str = "unigram_pow"
    unigram_power: float = 0.75
    seed: int = 0

    def validate(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES}")


# ---------------------------------------------------------------------------
# pair loss: reference implementation (numpy) and the in-place kernel step
# ---------------------------------------------------------------------------

def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def pair_loss(u, v, negs) -> float:
    """Loss of one positive pair with its negatives; ``negs`` is (K, d)."""
    negs = np.atleast_2d(negs)
    return float(-_log_sigmoid(u @ v) - np.sum(_log_sigmoid(-(negs @ u))))


def pair_loss_grad(u, v, negs):
    """Analytic gradients (d/du, d/dv, d/dnegs) of :func:`pair_loss`."""
    negs = np.atleast_2d(negs)
    sp = 1.0 / (1.0 + np.exp(-(u @ v)))
    sn = 1.0 / (1.0 + np.exp(-(negs @ u)))
    gu = -(1.0 - sp) * v + sn @ negs
    gv = -(1.0 - sp) * u
    gn = sn[:, None] * u[None, :]
    return gu, gv, gn


@njit(inline="always", error_model="numpy")
def _sigmoid_and_nll(f):
    """(sigma(f), -log sigma(f)) from a single exp, stable for both signs."""
    e = math.exp(-abs(f))
    if f >= 0:
        return 1.0 / (1.0 + e), math.log1p(e)
    return e / (1.0 + e), f * -1.0 + math.log1p(e)


@njit(cache=True, fastmath=True, inline="always", error_model="numpy")
def sgns_step(W, C, center, ctx, negs, n_negs, lr, neu1e):
    """One SGD step for (center, ctx) with ``negs[:n_negs]``; returns the pair loss."""
    d = W.shape[1]
    w = W[center]
    neu1e[:] = 0.0
    loss = 0.0
    for k in range(n_negs + 1):
        if k == 0:
            c = C[ctx]
            label = 1.0
        else:
            c = C[negs[k - 1]]
            label = 0.0
        f = 0.0
        for a in range(d):
            f += w[a] * c[a]
        sig, nll = _sigmoid_and_nll(f)
        # -log sigma(-f) = -log sigma(f) + f
        loss += nll if k == 0 else nll + f
        g = lr * (label - sig)
        for a in range(d):
            neu1e[a] += g * c[a]
            c[a] += g * w[a]
    for a in range(d):
        w[a] += neu1e[a]
    return loss


@njit(inline="always")
def _draw(prob, alias, state):
    state, k = _rng.randint(state, prob.shape[0])
    state, u = _rng.uniform(state)
    if u < prob[k]:
        return state, k
    return state, alias[k]


def alias_table(p: np.ndarray):
    """Walker alias table (prob, alias) for O(1) exact sampling from ``p``."""
    n = len(p)
    scaled = np.asarray(p, dtype=float) * n / np.sum(p)
    prob = np.zeros(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s_, l_ = small.pop(), large.pop()
        prob[s_] = scaled[s_]
        alias[s_] = l_
        scaled[l_] -= 1.0 - scaled[s_]
        (small if scaled[l_] < 1.0 else large).append(l_)
    for i in large + small:
        prob[i] = 1.0
    return prob, alias


@njit(cache=True, fastmath=True, error_model="numpy")
def _train_range(walks, w_lo, w_hi, W, C, prob, alias, window, negatives, lr0, lr_min,
                 progress0, progress_span, state):
    L = walks.shape[1]
    d = W.shape[1]
    neu1e = np.empty(d)
    negs = np.empty(negatives, dtype=np.int64)
    n_tokens = (w_hi - w_lo) * L
    loss = 0.0
    pairs = 0
    t = 0
    for wi in range(w_lo, w_hi):
        for i in range(L):
            frac = progress0 + progress_span * t / n_tokens
            lr = max(lr0 * (1.0 - frac), lr_min)
            t += 1
            center = walks[wi, i]
            lo = max(0, i - window)
            hi = min(L, i + window + 1)
            for j in range(lo, hi):
                if j == i:
                    continue
                ctx = walks[wi, j]
                n_negs = 0
                for _ in range(negatives):
                    state, neg = _draw(prob, alias, state)
                    if neg != ctx:
                        negs[n_negs] = neg
                        n_negs += 1
                loss += sgns_step(W, C, center, ctx, negs, n_negs, lr, neu1e)
                pairs += 1
    return loss, pairs


@njit(cache=True, error_model="numpy")
def _train_serial(walks, W, C, prob, alias, window, negatives, lr0, lr_min,
                  progress0, progress_span, seed, epoch):
    state = _rng.stream(seed, epoch)
    return _train_range(walks, 0, walks.shape[0], W, C, prob, alias, window, negatives,
                        lr0, lr_min, progress0, progress_span, state)


@njit(parallel=True, cache=True, error_model="numpy")
def _train_parallel(walks, bounds, W, C, prob, alias, window, negatives, lr0, lr_min,
                    progress0, progress_span, seed, epoch):
    n_chunks = bounds.shape[0] - 1
    losses = np.zeros(n_chunks)
    pairs = np.zeros(n_chunks, dtype=np.int64)
    # hogwild: chunks update W and C without locks
    for c in prange(n_chunks):
        state = _rng.stream(seed, epoch * n_chunks + c)
        lc, pc = _train_range(walks, bounds[c], bounds[c + 1], W, C, prob, alias, window, negatives,
                              lr0, lr_min, progress0, progress_span, state)
        losses[c] = lc
        pairs[c] = pc
    return losses.sum(), pairs.sum()


def noise_distribution(corpus: WalkCorpus, cfg: SgnsConfig, g: CitationGraph = None) -> np.ndarray:
    """Negative-sampling distribution over node indices (sums to 1).

    ``unigram_pow``: walk-corpus frequency raised to ``unigram_power``.
    ``config_model``: degree(i) / sum(degree), the configuration-model
    stationary distribution.
    """
    if cfg.noise_mode == "unigram_pow":
        w = corpus.node_counts().astype(float) ** cfg.unigram_power
    elif cfg.noise_mode == "config_model":
        if g is None:
            raise ValueError("config_model noise needs the graph")
        w = g.degree.astype(float)
    else:
        raise ValueError(f"unknown noise_mode {cfg.noise_mode!r}")
    total = w.sum()
    if total <= 0:
        raise ValueError("noise distribution has no mass")
    return w / total


PROBE_PAIRS = 4096


def probe_set(walks: WalkCorpus, prob: np.ndarray, negatives: int, seed: int,
              size: int = PROBE_PAIRS):
    """Fixed (centers, contexts, negatives) sample used to score every epoch on the same pairs."""
    rng = np.random.default_rng([seed, 0x9E37])
    seq = walks.walks
    n_w, length = seq.shape
    wi = rng.integers(0, n_w, size)
    pos = rng.integers(0, length, size)
    off = rng.integers(1, walks.window + 1, size) * rng.choice([-1, 1], size)
    ctx_pos = pos + off
    ok = (ctx_pos >= 0) & (ctx_pos < length)
    centers = seq[wi[ok], pos[ok]]
    contexts = seq[wi[ok], ctx_pos[ok]]
    negs = rng.choice(len(prob), size=(centers.size, negatives), p=prob)
    return centers, contexts, negs


def probe_loss(W, C, probe) -> float:
    """Mean SGNS pair loss of (W, C) on a fixed probe sample."""
    centers, contexts, negs = probe
    u = W[centers]
    f_pos = np.einsum("ij,ij->i", u, C[contexts])
    f_neg = np.einsum("ij,ikj->ik", u, C[negs])
    return float(np.mean(-_log_sigmoid(f_pos) - np.sum(_log_sigmoid(-f_neg), axis=1)))


def fit_sgns(walks: WalkCorpus, cfg: SgnsConfig, g: CitationGraph = None, workers: int = 1):
    """Run training; returns (in-vectors, [(epoch, probe loss, online loss), ...]).

    The online loss is averaged over the epoch's updates as they happen; it
    rewards a large step (recent overlapping windows are remembered) so it can
    rise while the step decays.  The probe loss scores the end-of-epoch model
    on one fixed sample of pairs and is the convergence signal.
    """
    cfg.validate()
    if walks.walks.size == 0:
        raise ValueError("empty walk corpus")
    n = walks.n_nodes
    noise = noise_distribution(walks, cfg, g)
    prob, alias = alias_table(noise)
    probe = probe_set(walks, noise, cfg.negatives, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    W = (rng.random((n, cfg.dim)) - 0.5) / cfg.dim
    C = np.zeros((n, cfg.dim))
    # shuffled so the step-size schedule is not aligned with node order
    seq = np.ascontiguousarray(walks.walks[rng.permutation(walks.walks.shape[0])], dtype=np.int64)
    n_chunks = max(1, int(workers))
    bounds = np.linspace(0, seq.shape[0], n_chunks + 1).astype(np.int64)
    seed = np.uint64(cfg.seed)

    history = []
    prev_threads = numba.get_num_threads()
    if n_chunks > 1:
        numba.set_num_threads(max(1, min(n_chunks, numba.config.NUMBA_NUM_THREADS)))
    try:
        for epoch in range(cfg.epochs):
            p0, span = epoch / cfg.epochs, 1.0 / cfg.epochs
            if n_chunks == 1:
                loss, pairs = _train_serial(seq, W, C, prob, alias, walks.window, cfg.negatives,
                                            cfg.initial_step, cfg.min_step, p0, span, seed, epoch)
            else:
                loss, pairs = _train_parallel(seq, bounds, W, C, prob, alias, walks.window,
                                              cfg.negatives, cfg.initial_step, cfg.min_step,
                                              p0, span, seed, epoch)
            online = loss / max(pairs, 1)
            if not (np.isfinite(online) and np.all(np.isfinite(W)) and np.all(np.isfinite(C))):
                raise FloatingPointError(
                    f"SGNS diverged in epoch {epoch}: mean loss {online!r}, "
                    f"initial_step {cfg.initial_step}, "
                    f"{int(np.sum(~np.isfinite(W)))} non-finite in-vector entries")
            fixed = probe_loss(W, C, probe)
            history.append((epoch, fixed, float(online)))
            logger.info("sgns epoch %d probe loss %.6f online loss %.6f", epoch, fixed, online)
    finally:
        numba.set_num_threads(prev_threads)
    W[walks.node_counts() == 0] = 0.0
    return W, history


def write_telemetry(target, history) -> None:
    """Write ``epoch,loss,online_loss`` rows to a path or an open text stream."""
    if target is None:
        return
    if hasattr(target, "write"):
        _write_rows(target, history)
    else:
        with open(target, "w", newline="") as fh:
            _write_rows(fh, history)


def _write_rows(fh, history):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["epoch", "loss", "online_loss"])
    for epoch, loss, online in history:
        w.writerow([epoch, repr(loss), repr(online)])


def train_sgns(walks: WalkCorpus, cfg: SgnsConfig, g: CitationGraph = None,
               workers: int = 1, telemetry=None, method_tag: str = "sgns") -> EmbeddingMatrix:
    """Train in-vectors on a walk corpus.

    The step size decays linearly from ``initial_step`` to ``min_step`` over
    all epochs.  With ``workers == 1`` the result is bit-reproducible for a
    fixed seed; more workers train lock-free chunks in parallel.  Nodes absent
    from the corpus get zero vectors.  ``telemetry`` (path or text stream)
    receives per-epoch ``epoch,loss,online_loss`` CSV rows (see :func:`fit_sgns`).
    """
    W, history = fit_sgns(walks, cfg, g, workers)
    write_telemetry(telemetry, history)
    return EmbeddingMatrix(walks.ids, W, method_tag)
