"""Response records, the manifest CSV, and synthetic dataset generation."""

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..irt import DEFAULT_ITEM, ScoredStudent, gpcm_probs
from ..rng import make_rng
from ..sampling import stratified_split
from ..training import Dataset, pixels_to_input
from .netpbm import read_netpbm, write_pgm
from .preprocess import preprocess
from .render import Style, render_response

MANIFEST_COLUMNS = ("id", "stratum", "path", "human_score", "theta", "true_score", "mislabeled")
DEFAULT_MIX = (0.637, 0.108, 0.255)


@dataclass
class ResponseRecord:
    id: str
    stratum: str
    path: str
    human_score: int
    theta: float
    true_score: int = None
    mislabeled: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.human_score not in (0, 1, 2):
            raise ValidationError(f"{self.id}: human_score must be 0, 1 or 2")
        if self.true_score is not None:
            if self.true_score not in (0, 1, 2):
                raise ValidationError(f"{self.id}: true_score must be 0, 1 or 2")
            if self.mislabeled != (self.human_score != self.true_score):
                raise ValidationError(f"{self.id}: mislabeled flag disagrees with the scores")

    def student(self):
        return ScoredStudent(self.id, self.theta, self.human_score)


def _fmt_float(x):
    return repr(float(x))


def write_manifest(path, records, extra_columns=None):
    """Write records; ``extra_columns`` (default: union of ``extra`` keys) follow the base columns."""
    if extra_columns is None:
        extra_columns = []
        for r in records:
            extra_columns += [k for k in r.extra if k not in extra_columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*MANIFEST_COLUMNS, *extra_columns])
        for r in records:
            w.writerow([
                r.id, r.stratum, r.path, r.human_score, _fmt_float(r.theta),
                "" if r.true_score is None else r.true_score, int(r.mislabeled),
                *(r.extra.get(k, "") for k in extra_columns),
            ])


def _parse_int(value, line, column):
    try:
        return int(value)
    except ValueError:
        raise ValidationError(f"manifest line {line}: column {column!r} is not an integer: {value!r}") from None


def read_manifest(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:len(MANIFEST_COLUMNS)]) != MANIFEST_COLUMNS:
            raise ValidationError(f"{path}: manifest header must start with {','.join(MANIFEST_COLUMNS)}")
        extra_cols = header[len(MANIFEST_COLUMNS):]
        records = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(f"{path} line {line}: expected {len(header)} fields, got {len(row)}")
            rid, stratum, rel, human, theta, true, mis = row[:len(MANIFEST_COLUMNS)]
            try:
                theta_value = float(theta)
            except ValueError:
                raise ValidationError(f"{path} line {line}: theta is not a number: {theta!r}") from None
            records.append(ResponseRecord(
                id=rid,
                stratum=stratum,
                path=rel,
                human_score=_parse_int(human, line, "human_score"),
                theta=theta_value,
                true_score=None if true == "" else _parse_int(true, line, "true_score"),
                mislabeled=bool(_parse_int(mis, line, "mislabeled")),
                extra=dict(zip(extra_cols, row[len(MANIFEST_COLUMNS):])),
            ))
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate response ids")
    return records


@dataclass
class GeneratorConfig:
    """Synthetic dataset settings.

    ``theta_mode=False`` fixes category counts to ``class_mix`` (largest
    remainder rounding) and draws each ability from its posterior given the
    category; ``theta_mode=True`` draws ability from N(0, 1) and the category
    from the item's response probabilities.
    """

    n: int = 1000
    strata: int = 26
    class_mix: tuple = DEFAULT_MIX
    theta_mode: bool = False
    mislabel_rate: float = 0.03
    seed: int = 0
    style: Style = field(default_factory=Style)
    item: object = DEFAULT_ITEM

    def __post_init__(self):
        self.class_mix = tuple(float(p) for p in self.class_mix)
        if self.n < 1:
            raise ValidationError("n must be at least 1")
        if self.strata < 1:
            raise ValidationError("strata must be at least 1")
        if len(self.class_mix) != 3 or min(self.class_mix) < 0 or abs(sum(self.class_mix) - 1) > 1e-9:
            raise ValidationError("class_mix must be three non-negative shares summing to 1")
        if not 0.0 <= self.mislabel_rate <= 1.0:
            raise ValidationError("mislabel_rate must lie in [0, 1]")


def allocate_counts(n, shares):
    """Largest-remainder apportionment of ``n`` items to ``shares``."""
    raw = [n * p for p in shares]
    counts = [math.floor(x) for x in raw]
    order = sorted(range(len(shares)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def _theta_given_score(score, item, rng):
    # Rejection sampling from N(0,1) weighted by P(score | theta).
    while True:
        theta = float(rng.standard_normal())
        if rng.random() < gpcm_probs(theta, item)[score]:
            return theta


def stratum_labels(k):
    width = max(2, len(str(k)))
    return [f"S{i + 1:0{width}d}" for i in range(k)]


def generate_records(config):
    """Draw ids, strata, scores and abilities (no images)."""
    rng = make_rng(config.seed, "manifest")
    n = config.n
    if config.theta_mode:
        thetas = rng.standard_normal(n)
        probs = gpcm_probs(thetas, config.item)
        u = rng.random(n)
        true = (u[:, None] > np.cumsum(probs, axis=1)[:, :-1]).sum(axis=1)
    else:
        counts = allocate_counts(n, config.class_mix)
        true = rng.permutation(np.repeat(np.arange(3), counts))
        thetas = np.array([_theta_given_score(int(s), config.item, rng) for s in true])
    labels = stratum_labels(config.strata)
    strata = rng.permutation(np.arange(n) % config.strata)
    flip = rng.random(n) < config.mislabel_rate
    shift = rng.integers(1, 3, size=n)
    human = np.where(flip, (true + shift) % 3, true)
    width = max(6, len(str(n)))
    return [
        ResponseRecord(
            id=f"r{i + 1:0{width}d}",
            stratum=labels[strata[i]],
            path=os.path.join("images", f"r{i + 1:0{width}d}.pgm"),
            human_score=int(human[i]),
            theta=float(thetas[i]),
            true_score=int(true[i]),
            mislabeled=bool(flip[i]),
        )
        for i in range(n)
    ]


def render_record(record, config):
    return render_response(record.true_score, config.style, make_rng(config.seed, ("render", record.id)))


def generate_dataset(config, out_dir):
    """Write ``manifest.csv`` and ``images/*.pgm`` under ``out_dir``; return the records."""
    records = generate_records(config)
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    for r in records:
        write_pgm(os.path.join(out_dir, r.path), render_record(r, config))
    write_manifest(os.path.join(out_dir, "manifest.csv"), records)
    return records


def generate_in_memory(config):
    """Records plus a ``Dataset`` of rendered images, without touching disk."""
    records = generate_records(config)
    pixels = np.stack([preprocess(render_record(r, config)) for r in records])
    return records, dataset_from_pixels(records, pixels)


def dataset_from_pixels(records, pixels, label="human_score"):
    return Dataset(
        pixels_to_input(pixels),
        [getattr(r, label) for r in records],
        [r.id for r in records],
        [r.stratum for r in records],
    )


def load_dataset(records, base_dir, label="human_score"):
    """Read, preprocess and stack the images referenced by ``records``."""
    pixels = np.stack([preprocess(read_netpbm(os.path.join(base_dir, r.path))) for r in records])
    return dataset_from_pixels(records, pixels, label)


def split_records(records, rng, fraction=0.7):
    """Stratified split by (stratum, human score); returns record lists."""
    train_ids, _ = stratified_split(records, rng, fraction)
    train_set = set(train_ids)
    return [r for r in records if r.id in train_set], [r for r in records if r.id not in train_set]
