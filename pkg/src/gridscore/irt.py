"""Generalized partial credit model scoring and IRT-based sample construction.

Category probabilities for an item with discrimination ``a``, difficulty
``b`` and step deviations ``c = (c1, c2)``::

    P(X = x | theta) ∝ exp( sum_{v=1..x} D * a * (theta - b + c_v) )

with the empty sum for ``x = 0``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasiblePartitionError, ValidationError
from .sampling import floor_share

MODES = ("map", "avg")
CATEGORY_NAMES = ("incorrect", "partial credit", "full credit")


@dataclass(frozen=True)
class ItemParams:
    a: float = 0.62
    b: float = 0.93
    c: tuple = (-0.88, 0.88)
    D: float = 1.7

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if not self.a > 0:
            raise ValidationError(f"discrimination a must be positive, got {self.a}")
        if abs(sum(self.c)) > 1e-9:
            raise ValidationError(f"step deviations must sum to zero, got {self.c}")
        if not self.D > 0:
            raise ValidationError("scaling constant D must be positive")

    @property
    def n_categories(self):
        return len(self.c) + 1


DEFAULT_ITEM = ItemParams()


def _theta_array(theta):
    t = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise ValidationError("theta must be finite")
    return t


def gpcm_probs(theta, item=DEFAULT_ITEM):
    """Category probabilities; returns shape ``(..., n_categories)`` for array ``theta``."""
    t = _theta_array(theta)
    steps = item.D * item.a * (t[..., None] - item.b + np.asarray(item.c))
    z = np.concatenate([np.zeros(t.shape + (1,)), np.cumsum(steps, axis=-1)], axis=-1)
    z -= z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def _scalarize(result, theta):
    return int(result) if np.ndim(theta) == 0 else result


def map_score(theta, item=DEFAULT_ITEM):
    """Modal category; ties go to the lower category."""
    return _scalarize(gpcm_probs(theta, item).argmax(axis=-1), theta)


def expected_score(theta, item=DEFAULT_ITEM):
    p = gpcm_probs(theta, item)
    return p @ np.arange(p.shape[-1], dtype=np.float64)


def eap_score(theta, item=DEFAULT_ITEM):
    """Expected score rounded half-up."""
    return _scalarize(round_half_up(expected_score(theta, item)), theta)


def avg_map_eap_score(theta, item=DEFAULT_ITEM):
    """Mean of the MAP and EAP scores, rounded half-up."""
    m = np.asarray(map_score(theta, item))
    e = np.asarray(eap_score(theta, item))
    return _scalarize(round_half_up((m + e) / 2.0), theta)


def irt_scores(theta, item=DEFAULT_ITEM):
    """``(y_map, y_eap, y_avg)`` as integer arrays."""
    t = np.atleast_1d(_theta_array(theta))
    m = np.asarray(map_score(t, item))
    e = np.asarray(eap_score(t, item))
    return m, e, round_half_up((m + e) / 2.0)


@dataclass
class ScoredStudent:
    id: str
    theta: float
    human_score: int
    y_map: int = None
    y_eap: int = None
    y_avg: int = None

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValidationError(f"{self.id}: theta must be finite")
        if self.human_score not in (0, 1, 2):
            raise ValidationError(f"{self.id}: human score must be 0, 1 or 2")

    def irt_score(self, mode):
        return self.y_map if mode == "map" else self.y_avg


def score_students(students, item=DEFAULT_ITEM):
    """Fill ``y_map``, ``y_eap`` and ``y_avg`` in place and return the list."""
    if not students:
        return students
    ym, ye, ya = irt_scores([s.theta for s in students], item)
    for s, m, e, a in zip(students, ym, ye, ya):
        s.y_map, s.y_eap, s.y_avg = int(m), int(e), int(a)
    return students


PARTITION_NAMES = ("T_match", "V_match", "V_no_match", "T_rand", "V_rand")


@dataclass
class SamplePartition:
    mode: str
    T_match: list = field(default_factory=list)
    V_match: list = field(default_factory=list)
    V_no_match: list = field(default_factory=list)
    T_rand: list = field(default_factory=list)
    V_rand: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    def groups(self):
        return {name: getattr(self, name) for name in PARTITION_NAMES}

    def sizes(self):
        return {name: len(ids) for name, ids in self.groups().items()}

    def irt_label(self):
        """``id -> "T_match" | "V_match" | "V_no_match" | "excluded"``."""
        labels = {i: "excluded" for i in self.excluded}
        for name in ("T_match", "V_match", "V_no_match"):
            labels.update((i, name) for i in getattr(self, name))
        return labels

    def rand_label(self):
        labels = {i: "excluded" for i in self.excluded}
        for name in ("T_rand", "V_rand"):
            labels.update((i, name) for i in getattr(self, name))
        return labels


def _check_mode(mode):
    mode = mode.lower()
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def mode_filter(students, mode):
    """MAP mode drops every response the human raters gave partial credit."""
    if _check_mode(mode) == "map":
        return [s for s in students if s.human_score != 1]
    return list(students)


def build_irt_partition(students, mode, rng, split=0.7, item=DEFAULT_ITEM):
    """Agreement-based training/validation samples plus a random comparison split.

    Matches (IRT score == human score) are split ``floor(split * n)`` /
    remainder within each human-score category; mismatches form
    ``V_no_match``.  ``T_rand`` draws the same per-category counts as
    ``T_match`` from all (mode-filtered) responses, ignoring agreement.
    """
    mode = _check_mode(mode)
    if not students:
        raise ValidationError("cannot partition an empty manifest")
    if not 0.0 < split < 1.0:
        raise ValidationError(f"split must lie in (0, 1), got {split}")
    if any(s.y_map is None for s in students):
        score_students(students, item)
    kept = mode_filter(students, mode)
    if not kept:
        raise ValidationError("no responses left after filtering")
    part = SamplePartition(mode=mode)
    part.excluded = [s.id for s in students if s.human_score == 1] if mode == "map" else []
    for cat in (0, 1, 2):
        in_cat = [s for s in kept if s.human_score == cat]
        matched = [s.id for s in in_cat if s.irt_score(mode) == cat]
        part.V_no_match += [s.id for s in in_cat if s.irt_score(mode) != cat]
        n_train = floor_share(split, len(matched))
        order = rng.permutation(len(matched))
        part.T_match += [matched[i] for i in order[:n_train]]
        part.V_match += [matched[i] for i in order[n_train:]]
    for cat in (0, 1, 2):
        pool = [s.id for s in kept if s.human_score == cat]
        need = sum(1 for s in kept if s.human_score == cat and s.irt_score(mode) == cat)
        need = floor_share(split, need)
        if need > len(pool):
            raise InfeasiblePartitionError(
                f"category {cat}: T_rand needs {need} responses but only {len(pool)} exist"
            )
        order = rng.permutation(len(pool))
        part.T_rand += [pool[i] for i in order[:need]]
        part.V_rand += [pool[i] for i in order[need:]]
    return part


def match_rate(students, mode, item=DEFAULT_ITEM):
    """Share of (mode-filtered) responses whose IRT score equals the human score."""
    mode = _check_mode(mode)
    if any(s.y_map is None for s in students):
        score_students(students, item)
    kept = mode_filter(students, mode)
    if not kept:
        raise ValidationError("no responses left after filtering")
    return sum(s.irt_score(mode) == s.human_score for s in kept) / len(kept)


def unfiltered_map_match_rate(students, item=DEFAULT_ITEM):
    if any(s.y_map is None for s in students):
        score_students(students, item)
    return sum(s.y_map == s.human_score for s in students) / len(students)


def posterior_summary(students, mode, item=DEFAULT_ITEM):
    """Mean category probabilities by (match status x human category) plus an overall row.

    Rows are ``(label, n, p0, p1, p2)``; strata with no students are omitted.
    """
    mode = _check_mode(mode)
    if not students:
        raise ValidationError("cannot summarise an empty manifest")
    if any(s.y_map is None for s in students):
        score_students(students, item)
    kept = mode_filter(students, mode)
    if not kept:
        raise ValidationError("no responses left after filtering")
    probs = gpcm_probs([s.theta for s in kept], item)
    human = np.array([s.human_score for s in kept])
    irt = np.array([s.irt_score(mode) for s in kept])
    rows = []
    for status, matched in (("Matching", True), ("No match", False)):
        for cat, cat_name in enumerate(CATEGORY_NAMES):
            sel = (human == cat) & ((irt == human) == matched)
            if sel.any():
                rows.append((f"{status}: {cat_name}", int(sel.sum()), *probs[sel].mean(axis=0)))
    rows.append(("Overall", len(kept), *probs.mean(axis=0)))
    return rows
