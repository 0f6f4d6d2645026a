"""CSV encodings for evaluation reports, predictions, and adjudication output.

Every writer has a matching reader; floats are written with ``repr`` so a
round trip is exact.
"""

import csv
import io
import math

import numpy as np

from .errors import ValidationError
from .training import EvalReport

SECTION_PREFIX = "# section: "


def _f(x):
    return "" if x is None else repr(float(x))


def _write_section(out, name, header, rows):
    out.write(f"{SECTION_PREFIX}{name}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def eval_report_to_csv(report):
    """Serialise an ``EvalReport`` as named CSV blocks.

    Blocks, in order: ``meta`` (key,value), ``overall`` (n,correct,loss,accuracy),
    ``per_category`` (category,n,correct,accuracy), ``per_stratum``
    (stratum,n,correct,accuracy), ``confusion`` (human_score,pred_0..pred_K),
    ``misclassified`` (id).
    """
    out = io.StringIO()
    _write_section(out, "meta", ["key", "value"], sorted(report.meta.items()))
    _write_section(out, "overall", ["n", "correct", "loss", "accuracy"],
                   [[report.n, report.correct, _f(report.loss), _f(report.accuracy)]])
    cat = report.per_category_accuracy
    _write_section(out, "per_category", ["category", "n", "correct", "accuracy"], [
        [k, int(report.category_counts[k]), int(report.confusion[k, k]), _f(cat[k])]
        for k in range(report.confusion.shape[0])
    ])
    _write_section(out, "per_stratum", ["stratum", "n", "correct", "accuracy"], [
        [s, t, c, _f(c / t)] for s, (t, c) in report.strata.items()
    ])
    k = report.confusion.shape[0]
    _write_section(out, "confusion", ["human_score", *(f"pred_{j}" for j in range(k))], [
        [i, *(int(v) for v in report.confusion[i])] for i in range(k)
    ])
    _write_section(out, "misclassified", ["id"], [[i] for i in report.misclassified])
    return out.getvalue()


def _split_sections(text):
    sections = {}
    current = None
    for line in text.splitlines():
        if line.startswith(SECTION_PREFIX):
            current = line[len(SECTION_PREFIX):].strip()
            sections[current] = []
        elif current is None:
            if line.strip():
                raise ValidationError("report text does not start with a section marker")
        else:
            sections[current].append(line)
    return {name: list(csv.reader(lines)) for name, lines in sections.items()}


def eval_report_from_csv(text):
    s = _split_sections(text)
    missing = {"meta", "overall", "per_stratum", "confusion", "misclassified"} - set(s)
    if missing:
        raise ValidationError(f"report is missing sections: {sorted(missing)}")
    meta = dict(tuple(row) for row in s["meta"][1:])
    n, _, loss, _ = s["overall"][1]
    confusion = np.array([[int(v) for v in row[1:]] for row in s["confusion"][1:]], dtype=np.int64)
    strata = {row[0]: (int(row[1]), int(row[2])) for row in s["per_stratum"][1:]}
    return EvalReport(
        n=int(n),
        loss=float(loss),
        confusion=confusion,
        strata=strata,
        misclassified=[row[0] for row in s["misclassified"][1:]],
        meta=meta,
    )


def write_eval_report(path, report):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(eval_report_to_csv(report))


def read_eval_report(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return eval_report_from_csv(fh.read())


PREDICTION_COLUMNS = ("id", "human_score", "model_score", "p0", "p1", "p2")


def write_predictions(path, ids, labels, probs):
    probs = np.asarray(probs)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        for i, y, p in zip(ids, labels, probs):
            w.writerow([i, int(y), int(p.argmax()), *(_f(v) for v in p)])


def read_predictions(path):
    """Return ``{id: probability vector}``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != PREDICTION_COLUMNS:
            raise ValidationError(f"{path}: prediction header must be {','.join(PREDICTION_COLUMNS)}")
        return {row[0]: np.array([float(v) for v in row[3:]]) for row in reader}


DISAGREEMENT_COLUMNS = (
    "id", "stratum", "path", "human_score", "model_score", "confidence",
    "p0", "p1", "p2", "true_score", "model_agrees_with_truth",
)


def disagreement_report(predictions, records):
    """Rows for every response whose predicted score differs from the human score.

    ``predictions`` maps id to a probability vector and must cover exactly the
    ids in ``records``.  Rows are dicts keyed by ``DISAGREEMENT_COLUMNS``,
    sorted by descending model confidence (ties by id).  Returns
    ``(rows, summary)``.
    """
    ids = [r.id for r in records]
    if set(predictions) != set(ids):
        missing = sorted(set(ids) - set(predictions))[:5]
        extra = sorted(set(predictions) - set(ids))[:5]
        raise ValidationError(f"prediction ids do not match manifest (missing {missing}, unexpected {extra})")
    rows = []
    for r in records:
        p = np.asarray(predictions[r.id], dtype=np.float64)
        score = int(p.argmax())
        if score == r.human_score:
            continue
        agrees = "" if r.true_score is None else int(score == r.true_score)
        rows.append({
            "id": r.id, "stratum": r.stratum, "path": r.path,
            "human_score": r.human_score, "model_score": score,
            "confidence": float(p.max()), "p0": float(p[0]), "p1": float(p[1]), "p2": float(p[2]),
            "true_score": "" if r.true_score is None else r.true_score,
            "model_agrees_with_truth": agrees,
        })
    rows.sort(key=lambda row: (-row["confidence"], row["id"]))
    summary = {
        "responses": len(records),
        "disagreements": len(rows),
        "rate": len(rows) / len(records) if records else math.nan,
    }
    return rows, summary


def write_disagreement_report(path, rows, summary):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key in ("responses", "disagreements", "rate"):
            value = summary[key]
            fh.write(f"# {key}: {repr(float(value)) if key == 'rate' else value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DISAGREEMENT_COLUMNS)
        for row in rows:
            w.writerow([
                _f(row[c]) if c in ("confidence", "p0", "p1", "p2") else row[c]
                for c in DISAGREEMENT_COLUMNS
            ])


def read_disagreement_report(path):
    summary = {}
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            summary[key] = float(value) if key == "rate" else int(value)
        else:
            body.append(line)
    reader = csv.DictReader(body)
    rows = []
    for row in reader:
        for c in ("human_score", "model_score"):
            row[c] = int(row[c])
        for c in ("confidence", "p0", "p1", "p2"):
            row[c] = float(row[c])
        if row["true_score"] != "":
            row["true_score"] = int(row["true_score"])
            row["model_agrees_with_truth"] = int(row["model_agrees_with_truth"])
        rows.append(row)
    return rows, summary


COMPARISON_COLUMNS = (
    "model", "description", "optimizer", "epochs", "sample", "n", "loss", "accuracy",
    "misclassified", "accuracy_0", "accuracy_1", "accuracy_2",
)


def comparison_rows(reports):
    """One table row per report, in the layout of a model-comparison table."""
    rows = []
    for rep in reports:
        cat = rep.per_category_accuracy
        rows.append({
            "model": rep.meta.get("model", ""),
            "description": rep.meta.get("description", ""),
            "optimizer": rep.meta.get("optimizer", ""),
            "epochs": rep.meta.get("epochs", ""),
            "sample": rep.meta.get("sample", ""),
            "n": rep.n,
            "loss": rep.loss,
            "accuracy": rep.accuracy,
            "misclassified": len(rep.misclassified),
            **{f"accuracy_{k}": cat.get(k) for k in range(3)},
        })
    return rows


def write_table(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_f(v) if isinstance(v, float) else ("" if v is None else v)
                        for v in (row[c] for c in columns)])


def read_table(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


SUMMARY_COLUMNS = ("sample", "n", "p_incorrect", "p_partial", "p_full")


def posterior_rows(summary):
    return [dict(zip(SUMMARY_COLUMNS, row)) for row in summary]


def write_partition(path, partition):
    """Long format: one ``id,partition`` row per membership (each id appears in two groups)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "partition"])
        for name, ids in partition.items():
            for i in ids:
                w.writerow([i, name])


def read_partition(path):
    """Return ``{partition name: [ids]}`` preserving file order."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "partition"]:
            raise ValidationError(f"{path}: partition header must be id,partition")
        for rid, name in reader:
            out.setdefault(name, []).append(rid)
    return out
