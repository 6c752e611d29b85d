"""Memorization audits (NN distance, C_T, FID) and memorization-rejection GAN training."""

import csv
import io
import json

from ._core import (
    EmbeddingSet,
    histogram_csv,
    load_embeddings,
    loo_mean_distance,
    make_dataset,
    mann_whitney_z,
    nn_distance,
    save_embeddings,
)
from . import _core

__all__ = [
    "EmbeddingSet",
    "ct_score",
    "fid",
    "histogram_csv",
    "load_embeddings",
    "loo_mean_distance",
    "make_dataset",
    "mann_whitney_z",
    "nn_distance",
    "save_embeddings",
    "train",
]


def ct_score(train, test, gen, metric="euclidean", cells="labels", seed=0):
    """C_T report as a dict; negative ``ct`` means gen sits closer to train than test does."""
    return json.loads(_core.ct_score_json(train, test, gen, metric, cells, seed))


def fid(a, b):
    """Frechet distance between Gaussian fits of two sets, as a dict."""
    return json.loads(_core.fid_json(a, b))


def train(dataset, tau, steps=20000, seed=0, n_train=256, sigma=None, eval_every=1000):
    """Trains a toy GAN. Returns ``{"log": [rows], "checkpoint": bytes}``."""
    kwargs = {} if sigma is None else {"sigma": sigma}
    text, checkpoint = _core.train(dataset, tau, steps, seed, n_train, eval_every=eval_every, **kwargs)
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({k: (int(v) if k in ("step", "fallback_count") else float(v)) for k, v in row.items()})
    return {"log": rows, "checkpoint": checkpoint}
