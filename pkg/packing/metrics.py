"""
Detection and planning metrics and evaluation report assembly.

Detection uses per-scene presence: a ground-truth class is a true positive
when any resolved prediction names it. Tallies are summed per class over
scenes, then P/R/F1 are averaged over classes present in ground truth.
"""
import csv
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .catalog import dedup, labels_match, normalize_label
from .exceptions import EvaluationError
from .pipeline import appears
from .scoring import NEG_INF, average_score, decode_extended, encode_extended, format_score

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    size: int
    ground_truth: tuple
    image: str = None


@dataclass(frozen=True)
class Tally:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other):
        return Tally(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def _resolve_prediction(label, truth, aliases, catalog):
    name = normalize_label(label)
    name = aliases.get(name, name)
    for t in truth:
        if labels_match(name, t):
            return t
    if catalog is not None:
        resolved = catalog.resolve(name)
        if resolved is not None:
            return resolved
    return name


def match_labels(predicted, truth, aliases=None, catalog=None):
    """Per-class ``Tally`` for one scene; repeated labels count once."""
    aliases = {normalize_label(k): normalize_label(v) for k, v in (aliases or {}).items()}
    truth_classes = dedup(aliases.get(normalize_label(t), normalize_label(t)) for t in truth)
    resolved = set(_resolve_prediction(p, truth_classes, aliases, catalog) for p in predicted if normalize_label(p))

    tallies = {}
    for t in truth_classes:
        tallies[t] = Tally(tp=1) if t in resolved else Tally(fn=1)
    for r in sorted(resolved - set(truth_classes)):
        tallies[r] = Tally(fp=1)
    return tallies


def accumulate(scene_tallies):
    total = defaultdict(Tally)
    for tallies in scene_tallies:
        for cls, tally in tallies.items():
            total[cls] = total[cls] + tally
    return dict(total)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class DetectionScores:
    per_class: dict
    ap: float
    ar: float
    af1: float

    def to_document(self):
        return {
            "ap": self.ap,
            "ar": self.ar,
            "af1": self.af1,
            "per_class": {
                cls: {
                    "precision": s.precision, "recall": s.recall, "f1": s.f1,
                    "tp": s.tp, "fp": s.fp, "fn": s.fn,
                }
                for cls, s in sorted(self.per_class.items())
            },
        }


def _ratio(num, den):
    return num / den if den else 0.0


def class_scores(tally):
    precision = _ratio(tally.tp, tally.tp + tally.fp)
    recall = _ratio(tally.tp, tally.tp + tally.fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return ClassScores(precision, recall, f1, tally.tp, tally.fp, tally.fn)


def f1_scores(tallies):
    """Per-class P/R/F1 and their unweighted means over ground-truth classes."""
    per_class = {cls: class_scores(t) for cls, t in tallies.items()}
    truth_classes = sorted(cls for cls, t in tallies.items() if t.tp + t.fn > 0)
    if not truth_classes:
        raise EvaluationError("No ground-truth classes to evaluate")
    n = len(truth_classes)
    return DetectionScores(
        per_class,
        math.fsum(per_class[c].precision for c in truth_classes) / n,
        math.fsum(per_class[c].recall for c in truth_classes) / n,
        math.fsum(per_class[c].f1 for c in truth_classes) / n,
    )


def scene_success(detected, planned):
    """Fraction of detected items appearing in the accepted plan; 0 without one."""
    if planned is None or not detected:
        return 0.0
    candidates = [normalize_label(p) for p in planned]
    return sum(1 for d in detected if appears(d, candidates)) / len(detected)


def success_rate(outcomes):
    """Mean per-scene fraction of detected items that survive into the accepted plan."""
    outcomes = list(outcomes)
    if not outcomes:
        raise EvaluationError("Success rate needs at least one scene")
    return math.fsum(scene_success(o.detected, o.planned) for o in outcomes) / len(outcomes)


def parse_rate(outcomes):
    """Fraction of scenes that ended with an accepted plan."""
    outcomes = list(outcomes)
    if not outcomes:
        raise EvaluationError("Parse rate needs at least one scene")
    return sum(1 for o in outcomes if o.planned is not None) / len(outcomes)


def _mean(values):
    values = [v for v in values if v is not None]
    return math.fsum(values) / len(values) if values else None


@dataclass(frozen=True)
class EvalReport:
    mode: str
    provenance: dict
    planning: dict
    by_scene_size: dict
    scenes: list
    detection: dict = None
    baseline: dict = field(default=None)

    def to_document(self):
        return {
            "mode": self.mode,
            "provenance": self.provenance,
            "detection": self.detection,
            "planning": self.planning,
            "baseline": self.baseline,
            "by_scene_size": self.by_scene_size,
            "scenes": self.scenes,
        }

    @classmethod
    def from_document(cls, document):
        try:
            return cls(
                mode=document["mode"],
                provenance=document["provenance"],
                planning=document["planning"],
                by_scene_size=document["by_scene_size"],
                scenes=document["scenes"],
                detection=document.get("detection"),
                baseline=document.get("baseline"),
            )
        except (KeyError, TypeError) as exc:
            raise EvaluationError(f"Malformed report document: {exc}") from exc

    def dumps(self):
        return json.dumps(self.to_document(), indent=2, sort_keys=True) + "\n"

    @property
    def average_score(self):
        return decode_extended(self.planning["ac"])


def _score_summary(scores):
    if not scores:
        return None, 0
    avg = average_score(scores)
    return avg.value, avg.infinite_count


def assemble_report(scenes, outcomes, provenance, detect=True, aliases=None, catalog=None,
                    success_definition="items"):
    """
    Build the evaluation report for ``outcomes`` (``SceneOutcome`` objects).

    ``scenes`` and ``outcomes`` must cover the same scene ids.
    """
    scene_ids = sorted(s.scene_id for s in scenes)
    outcome_ids = sorted(o.scene_id for o in outcomes)
    if scene_ids != outcome_ids:
        raise EvaluationError(
            f"Scene set mismatch: {len(scene_ids)} scenes vs {len(outcome_ids)} outcomes"
        )
    if not outcomes:
        raise EvaluationError("Cannot assemble a report without scenes")
    by_id = {s.scene_id: s for s in scenes}
    outcomes = sorted(outcomes, key=lambda o: o.scene_id)

    detection = None
    scene_tallies = {}
    if detect:
        for o in outcomes:
            scene_tallies[o.scene_id] = match_labels(o.detected, by_id[o.scene_id].ground_truth, aliases, catalog)
        detection = f1_scores(accumulate(scene_tallies.values())).to_document()

    scored = [o.score for o in outcomes if o.score is not None]
    ac, infinite_count = _score_summary(scored)
    items_rate = success_rate(outcomes)
    runs_rate = parse_rate(outcomes)
    attempts = Counter(str(o.attempts) for o in outcomes)
    planning = {
        "ac": encode_extended(ac),
        "infinite_count": infinite_count,
        "scored_scenes": len(scored),
        "satisfaction_rate": _mean(o.satisfaction for o in outcomes),
        "success_rate": items_rate if success_definition == "items" else runs_rate,
        "success_rate_definition": success_definition,
        "success_rate_items": items_rate,
        "parse_rate": runs_rate,
        "exhausted_scenes": sum(1 for o in outcomes if o.planned is None),
        "attempts_histogram": dict(sorted(attempts.items(), key=lambda kv: int(kv[0]))),
        "time_per_scene": math.fsum(o.latency for o in outcomes) / len(outcomes),
    }

    baseline = None
    baseline_values = [o.baseline for o in outcomes if o.baseline is not None]
    if baseline_values:
        value, infinite = _score_summary(baseline_values)
        baseline = {"random_ac": encode_extended(value), "infinite_count": infinite, "scenes": len(baseline_values)}

    by_size = defaultdict(list)
    for o in outcomes:
        by_size[o.size].append(o)
    series = {}
    for size in sorted(by_size):
        group = by_size[size]
        group_scores = [o.score for o in group if o.score is not None]
        value, infinite = _score_summary(group_scores)
        entry = {
            "scenes": len(group),
            "ac": encode_extended(value),
            "infinite_count": infinite,
            "satisfaction_rate": _mean(o.satisfaction for o in group),
            "success_rate": success_rate(group),
        }
        if detect:
            entry["af1"] = f1_scores(accumulate(scene_tallies[o.scene_id] for o in group)).af1
        series[str(size)] = entry

    logger.info(f"Assembled report over {len(outcomes)} scenes: aC={format_score(ac)}")
    return EvalReport(
        mode="full" if detect else "planning",
        provenance=provenance,
        planning=planning,
        by_scene_size=series,
        scenes=[o.to_document() for o in outcomes],
        detection=detection,
        baseline=baseline,
    )


def _series(report):
    # keys are strings in documents; "10" must follow "6"
    return sorted(report.by_scene_size.items(), key=lambda kv: int(kv[0]))


def _pct(value):
    return "n/a" if value is None else f"{100 * value:6.2f}%"


def render_table(report):
    """Aligned plain-text summary of a report."""
    lines = []
    planning = report.planning
    if report.detection:
        d = report.detection
        lines.append(f"AP {_pct(d['ap'])}   AR {_pct(d['ar'])}   AF1 {_pct(d['af1'])}")
    lines.append(
        f"aC {format_score(decode_extended(planning['ac'])):>10}   "
        f"SR {_pct(planning['success_rate'])}   "
        f"satisfaction {_pct(planning['satisfaction_rate'])}   "
        f"-inf scenes {planning['infinite_count']}"
    )
    if report.baseline:
        lines.append(f"random baseline aC {format_score(decode_extended(report.baseline['random_ac']))}")
    lines.append("")
    header = f"{'size':>4}  {'scenes':>6}  {'aC':>10}  {'satisfaction':>12}  {'SR':>8}"
    if report.detection:
        header += f"  {'AF1':>8}"
    lines.append(header)
    for size, entry in _series(report):
        row = (
            f"{size:>4}  {entry['scenes']:>6}  {format_score(decode_extended(entry['ac'])):>10}  "
            f"{_pct(entry['satisfaction_rate']):>12}  {_pct(entry['success_rate']):>8}"
        )
        if report.detection:
            row += f"  {_pct(entry['af1']):>8}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def write_series_csv(report, path):
    """scene_size, aC, satisfaction_rate rows for external plotting."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["scene_size", "ac", "satisfaction_rate"])
        for size, entry in _series(report):
            ac = decode_extended(entry["ac"])
            writer.writerow([
                size,
                "" if ac is None else ("-inf" if ac == NEG_INF else repr(ac)),
                "" if entry["satisfaction_rate"] is None else repr(entry["satisfaction_rate"]),
            ])
