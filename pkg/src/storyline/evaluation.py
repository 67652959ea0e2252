"""Scoring of predicted SVO triplets against human annotations: binary accuracy
and Wu-Palmer similarity, each in most-common and any-word mode."""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import SLOTS
from .dataset_io import AnnotationSet, DataError, Taxonomy, most_common_word

METRICS = ("binary_most", "binary_any", "wup_most", "wup_any")


@dataclass(frozen=True)
class EvalReport:
    # (slot, metric) -> mean score over evaluated videos, in [0, 1]
    cells: dict[tuple[str, str], float]
    evaluated: int
    skipped: int

    def cell(self, slot: str, metric: str) -> float:
        return self.cells[(slot, metric)]


def _slot_words(annotations: AnnotationSet, slot: str) -> set[str]:
    col = SLOTS.index(slot)
    return {t[col] for t in annotations.triplets}


def binary_score(pred: str, annotations: AnnotationSet, slot: str,
                 mode: str = "most") -> int:
    """1 iff the prediction matches the modal word (most) or any annotated word (any)."""
    if mode == "most":
        return int(pred == most_common_word(annotations, slot))
    if mode == "any":
        return int(pred in _slot_words(annotations, slot))
    raise ValueError(f"unknown mode {mode!r}")


def wup(taxonomy: Taxonomy, a: str, b: str) -> float:
    """Wu-Palmer similarity with node-count depths, depth(root) = 1.

    Identical words score 1 regardless of the taxonomy; a word missing from
    the taxonomy scores 0 against anything else.
    """
    if a == b:
        return 1.0
    if a not in taxonomy or b not in taxonomy:
        return 0.0
    lca = taxonomy.lca(a, b)
    return 2.0 * taxonomy.depth[lca] / (taxonomy.depth[a] + taxonomy.depth[b])


def wup_score(taxonomy: Taxonomy, pred: str, annotations: AnnotationSet,
              slot: str, mode: str = "most") -> float:
    if mode == "most":
        return wup(taxonomy, pred, most_common_word(annotations, slot))
    if mode == "any":
        return max(wup(taxonomy, pred, w) for w in _slot_words(annotations, slot))
    raise ValueError(f"unknown mode {mode!r}")


def evaluate(predictions: dict[str, tuple[str, str, str]],
             annotations: dict[str, AnnotationSet],
             taxonomy: Taxonomy,
             test_ids: list[str] | None = None) -> EvalReport:
    """Mean score per slot and metric over the test set.

    `test_ids` defaults to the predicted ids. Test videos without annotations
    are counted as skipped; a prediction outside the test set, or a test video
    with annotations but no prediction, is an error.
    """
    if test_ids is None:
        test_ids = list(predictions)
    known = set(test_ids)
    stray = sorted(set(predictions) - known)
    if stray:
        raise DataError(f"predictions for unknown video ids: {stray[:5]}")

    sums = {(slot, metric): 0.0 for slot in SLOTS for metric in METRICS}
    evaluated = 0
    skipped = 0
    for vid in test_ids:
        ann = annotations.get(vid)
        if ann is None or not ann.triplets:
            skipped += 1
            continue
        if vid not in predictions:
            raise DataError(f"no prediction for annotated video {vid!r}")
        evaluated += 1
        triplet = predictions[vid]
        for col, slot in enumerate(SLOTS):
            pred = triplet[col]
            sums[(slot, "binary_most")] += binary_score(pred, ann, slot, "most")
            sums[(slot, "binary_any")] += binary_score(pred, ann, slot, "any")
            sums[(slot, "wup_most")] += wup_score(taxonomy, pred, ann, slot, "most")
            sums[(slot, "wup_any")] += wup_score(taxonomy, pred, ann, slot, "any")
    cells = {key: (sums[key] / evaluated if evaluated else 0.0) for key in sums}
    return EvalReport(cells=cells, evaluated=evaluated, skipped=skipped)


def format_cell(report: EvalReport, slot: str, family: str) -> str:
    """Render one table cell as percent 'most(any)', e.g. '74.96(86.18)'."""
    most = 100.0 * report.cell(slot, f"{family}_most")
    any_ = 100.0 * report.cell(slot, f"{family}_any")
    return f"{most:.2f}({any_:.2f})"


def render_table(rows: list[tuple[str, EvalReport]]) -> str:
    """Tables in the papers' most(any) layout, one row per labeled report."""
    lines = []
    width = max(12, *(len(label) for label, _ in rows)) + 2
    for family, title in (("binary", "Binary accuracy, most(any)"),
                          ("wup", "WUP score, most(any)")):
        lines.append(title)
        lines.append(f"{'Method':<{width}}{'S%':>16}{'V%':>16}{'O%':>16}")
        for label, report in rows:
            cells = "".join(f"{format_cell(report, slot, family):>16}" for slot in SLOTS)
            lines.append(f"{label:<{width}}{cells}")
        lines.append("")
    return "\n".join(lines)


def report_to_json(report: EvalReport, config: dict | None = None) -> str:
    payload = {
        "slots": {
            slot: {metric: report.cell(slot, metric) for metric in METRICS}
            for slot in SLOTS
        },
        "evaluated": report.evaluated,
        "skipped": report.skipped,
    }
    if config is not None:
        payload["config"] = config
    return json.dumps(payload, indent=2, sort_keys=True)
