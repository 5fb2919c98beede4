"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way (dense
matrices, per-entry finite differences, per-class counting loops) so that
agreement with the package is evidence, not circularity. Only `featurize`
is shared with the package; it has its own hand-computed tests.
"""
from __future__ import annotations

import random

import numpy as np

from fewintent.contrastive import Pair, PairBatch
from fewintent.encoder import NgramConfig, featurize

# ---------------------------------------------------------------------------
# contrastive loss / gradient oracle


def build_phi(texts: list[str], config: NgramConfig) -> np.ndarray:
    """Dense (n_texts, feature_dim) count matrix, one row per text."""
    phi = np.zeros((len(texts), config.feature_dim))
    for row, text in enumerate(texts):
        fv = featurize(text, config)
        for idx, val in zip(fv.indices, fv.values):
            phi[row, idx] = val
    return phi


def ref_embeddings(W: np.ndarray, phi: np.ndarray) -> np.ndarray:
    U = phi @ W.T
    E = np.zeros_like(U)
    for t in range(U.shape[0]):
        norm = np.linalg.norm(U[t])
        if norm == 0.0:
            E[t, 0] = 1.0  # constant fallback direction
        else:
            E[t] = U[t] / norm
    return E


def ref_loss(
    W: np.ndarray,
    phi: np.ndarray,
    pair_rows: list[tuple[int, int]],
    targets: list[int],
) -> float:
    E = ref_embeddings(W, phi)
    total = 0.0
    for (a, b), y in zip(pair_rows, targets):
        c = float(E[a] @ E[b])
        total += (c - y) ** 2
    return total / len(targets)


def fd_grad(
    W: np.ndarray,
    phi: np.ndarray,
    pair_rows: list[tuple[int, int]],
    targets: list[int],
    h: float = 1e-5,
) -> np.ndarray:
    """Central finite differences over every parameter entry."""
    g = np.zeros_like(W)
    for i in range(W.shape[0]):
        for j in range(W.shape[1]):
            Wp = W.copy()
            Wp[i, j] += h
            Wm = W.copy()
            Wm[i, j] -= h
            g[i, j] = (
                ref_loss(Wp, phi, pair_rows, targets)
                - ref_loss(Wm, phi, pair_rows, targets)
            ) / (2.0 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-12)
    return float(np.max(np.abs(a - b))) / scale


def make_random_case(
    rng: random.Random,
    n_pairs: int = 6,
    dim: int = 8,
    feature_dim: int = 64,
    include_empty: bool = False,
):
    """Random (W, config, batch, phi, pair_rows, targets) for gradient checks."""
    config = NgramConfig((3, 4, 5), feature_dim)
    alphabet = "abcdefg h"
    texts: list[str] = []
    while len(texts) < n_pairs + 2:
        cand = "".join(rng.choice(alphabet) for _ in range(rng.randint(4, 12)))
        if cand.strip() and cand not in texts:
            texts.append(cand)
    if include_empty:
        texts[0] = ""  # exercises the zero-projection fallback
    pairs = []
    pair_rows = []
    targets = []
    for _ in range(n_pairs):
        a, b = rng.sample(range(len(texts)), 2)
        y = rng.randint(0, 1)
        pairs.append(Pair(texts[a], texts[b], y))
        pair_rows.append((a, b))
        targets.append(y)
    np_rng = np.random.default_rng(rng.randrange(2**32))
    W = np_rng.normal(scale=0.5, size=(dim, feature_dim))
    phi = build_phi(texts, config)
    batch = PairBatch(tuple(pairs), generation_seed=0)
    return W, config, batch, phi, pair_rows, targets


# ---------------------------------------------------------------------------
# metrics oracle


def naive_metrics(golds, preds, n_classes):
    """Per-class counting done the long way.

    `preds` entries are label ids or None (abstention / unparseable). A None
    prediction costs the gold class a false negative and charges no class a
    false positive.
    """
    tp = [0] * n_classes
    fp = [0] * n_classes
    fn = [0] * n_classes
    for g, p in zip(golds, preds):
        if p is None:
            fn[g] += 1
        elif p == g:
            tp[g] += 1
        else:
            fp[p] += 1
            fn[g] += 1

    def f1(t, f_p, f_n):
        denom = 2 * t + f_p + f_n
        return 2 * t / denom if denom else 0.0

    micro = f1(sum(tp), sum(fp), sum(fn))
    per_class = [f1(tp[c], fp[c], fn[c]) for c in range(n_classes)]
    macro = sum(per_class) / n_classes
    return micro, macro, per_class
