"""Deterministic stratified sampling helpers."""

import math
from fractions import Fraction

from .errors import ValidationError


def floor_share(fraction, n):
    """``floor(fraction * n)`` computed on the decimal value of ``fraction``.

    ``Fraction(str(0.7))`` is exactly 7/10, so binary rounding of 0.7 can
    never push a product such as 0.7 * 10 below 7.
    """
    return math.floor(Fraction(str(fraction)) * n)


def stratified_split(records, rng, fraction=0.7, key=None):
    """Split ids cluster by cluster into ``(train_ids, validation_ids)``.

    Clusters are ``key(record)``, by default ``(stratum, human_score)``.  Each
    cluster sends ``floor(fraction * size)`` ids, drawn uniformly without
    replacement, to training and the rest to validation.  Clusters are visited
    in sorted key order, so the result depends only on the records and ``rng``.
    """
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    if not records:
        raise ValidationError("cannot split an empty manifest")
    if key is None:
        key = lambda r: (r.stratum, r.human_score)  # noqa: E731
    clusters = {}
    for r in records:
        clusters.setdefault(key(r), []).append(r.id)
    train, validation = [], []
    for k in sorted(clusters):
        ids = clusters[k]
        order = rng.permutation(len(ids))
        n_train = floor_share(fraction, len(ids))
        train += [ids[i] for i in order[:n_train]]
        validation += [ids[i] for i in order[n_train:]]
    return train, validation
