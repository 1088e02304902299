"""
Comparison of alignments against a reference alignment
and supervised calibration of the selection parameters
"""

from dataclasses import dataclass, replace
from typing import Iterable, Tuple

from kgalign.logging import logger
from kgalign.model import Alignment, KnowledgeGraph, MappingKey
from kgalign.selector import Mode, SelectorConfig, select
from kgalign.utils import ContractViolation


@dataclass(frozen=True)
class EvalReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float

    @property
    def supervised_objective(self) -> int:
        """
        Sum of the reference indicator over the selected
        mappings, which is just the true positive count
        """
        return self.true_positives

    def __str__(self) -> str:
        return "P={:.6f} R={:.6f} F1={:.6f} (TP={} FP={} FN={})".format(
            self.precision,
            self.recall,
            self.f1,
            self.true_positives,
            self.false_positives,
            self.false_negatives,
        )


def _ratio(num: int, denom: int) -> float:
    if denom == 0:
        return 1.0
    return num / denom


def evaluate(m: Alignment, reference: Alignment) -> EvalReport:
    """
    Score `m` against `reference`, matching mappings on
    source, target and relation and ignoring confidences
    """

    found, expected = set(m.keys()), set(reference.keys())
    tp = len(found & expected)
    fp = len(found - expected)
    fn = len(expected - found)

    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return EvalReport(tp, fp, fn, precision, recall, f1)


def conflict_recall(m: Alignment, keys: Iterable[MappingKey]) -> float:
    """
    Fraction of `keys` kept in `m`, used to check how many
    mappings of the planted conflicts survive a repair
    """

    keys = set(keys)
    if not keys:
        return 1.0
    return sum(1 for key in keys if key in m) / len(keys)


def grid(step: float):
    if not 0 < step <= 1:
        raise ContractViolation(f"Grid step {step} out of range (0, 1]")

    values, i = [], 0
    while True:
        value = round(i * step, 6)
        if value > 1:
            break
        values.append(value)
        i += 1
    if values[-1] < 1:
        values.append(1.0)
    return values


def calibrate(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    candidates: Alignment,
    reference: Alignment,
    cfg: SelectorConfig,
    grid_step: float = 0.01,
) -> Tuple[float, EvalReport]:
    """
    Sweep one selection parameter over [0, 1] and keep the
    value whose selection best agrees with the reference.

    In threshold mode the swept parameter is theta. In every
    other mode it is a confidence floor applied to the
    candidates before selection.

    Args:
        kg1:
            Source graph
        kg2:
            Target graph
        candidates:
            Candidate alignment to select from
        reference:
            Reference alignment, must be non-empty
        cfg:
            Selector configuration. Its mode decides which
            parameter gets swept, its other fields are
            held fixed.
        grid_step:
            Spacing of the swept grid
    Returns:
        The smallest parameter value reaching the highest
        F1, and the evaluation at that value
    """

    if not len(reference):
        raise ContractViolation("Can't calibrate against an empty reference")

    best_value, best_report = None, None
    for value in grid(grid_step):
        if cfg.mode is Mode.THRESHOLD:
            selection = select(
                kg1, kg2, candidates, replace(cfg, theta=value)
            )
        else:
            selection = select(kg1, kg2, candidates.filter(value), cfg)

        report = evaluate(selection.alignment, reference)
        logger.debug(f"Parameter {value}: {report}")
        if best_report is None or report.f1 > best_report.f1:
            best_value, best_report = value, report

    logger.info(
        "Calibrated {} mode to parameter {}, F1={:.6f}".format(
            cfg.mode.value, best_value, best_report.f1
        )
    )
    return best_value, best_report
