"""
TOML run reports written by the command line tools.
The schema is documented in docs/reports.md.
"""

from enum import Enum
from typing import Any, Dict, Iterable, List

import toml

from kgalign import __version__
from kgalign.model import Alignment, MappingKey
from kgalign.reasoner import ClosureResult, UnsatReport, bottom_counts, consist
from kgalign.selector import ScoredMapping, Selection, objective_value

_PRECISION = 6


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    elif isinstance(value, str):
        return str(value)
    elif isinstance(value, float):
        return round(value, _PRECISION)
    elif isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    elif isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _keys(support: Iterable[MappingKey]) -> List[str]:
    return [str(key) for key in sorted(support)]


def _justifications(justifications) -> List[List[str]]:
    return sorted(_keys(j) for j in justifications)


def run_table(command: str) -> Dict[str, str]:
    return {"tool": "kgalign", "version": __version__, "command": command}


def mapping_record(scored: ScoredMapping) -> Dict[str, Any]:
    mapping = scored.mapping
    return {
        "source": str(mapping.source),
        "target": str(mapping.target),
        "relation": mapping.relation.symbol,
        "confidence": round(mapping.confidence, _PRECISION),
        "status": scored.status.value,
        "score": round(scored.objective_score, _PRECISION),
        "justifications": _justifications(scored.justifications),
    }


def unsat_record(report: UnsatReport) -> Dict[str, Any]:
    return {
        "concept": str(report.concept),
        "justifications": _justifications(report.justifications),
        "involved": _keys(report.involved_mappings),
    }


def repair_report(
    inputs: Dict[str, Dict],
    config: Dict[str, Any],
    selection: Selection,
    timings: Dict[str, float],
) -> Dict[str, Any]:
    mode = config["mode"]
    accepted = sum(1 for s in selection.scored if s.accepted)
    cr = selection.closure
    return {
        "run": run_table("repair"),
        "inputs": inputs,
        "config": _plain(config),
        "summary": {
            "objective_value": round(
                objective_value(mode, selection), _PRECISION
            ),
            "accepted": accepted,
            "rejected": len(selection.scored) - accepted,
            "unsat": len(cr.unsat),
            "truncated": cr.truncated,
            "iterations": selection.iterations,
            "iterations_exhausted": selection.exhausted,
            "flagged": selection.flagged,
        },
        "mappings": [mapping_record(s) for s in selection.scored],
        "unsat": [unsat_record(r) for r in cr.unsat],
        "timing": _timing(timings),
    }


def diagnose_report(
    inputs: Dict[str, Dict],
    config: Dict[str, Any],
    alignment: Alignment,
    cr: ClosureResult,
    timings: Dict[str, float],
) -> Dict[str, Any]:
    counts = bottom_counts(alignment, cr)
    entities = [
        {
            "iri": str(iri),
            "bottom": count,
            "consist": consist(iri, alignment, cr),
        }
        for iri, count in sorted(counts.items())
    ]
    return {
        "run": run_table("diagnose"),
        "inputs": inputs,
        "config": _plain(config),
        "summary": {
            "mappings": len(alignment),
            "unsat": len(cr.unsat),
            "truncated": cr.truncated,
        },
        "unsat": [unsat_record(r) for r in cr.unsat],
        "entities": entities,
        "timing": _timing(timings),
    }


def _timing(timings: Dict[str, float]) -> Dict[str, float]:
    table = {f"{name}_ms": round(ms, 3) for name, ms in timings.items()}
    table["total_ms"] = round(sum(timings.values()), 3)
    return table


def dumps(report: Dict[str, Any]) -> str:
    return toml.dumps(report)
