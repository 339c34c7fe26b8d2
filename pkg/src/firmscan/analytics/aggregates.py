"""Ledger aggregates: rankings, histograms and memory-related shares.

Rankings sort by count descending and break ties by id ascending.

"""
from typing import Dict, List, NamedTuple, Union

import pandas as pd

from firmscan import globals as project_globals
from firmscan.globals import MEMORY_CLASSES, SEVERITIES
from firmscan.exceptions import EmptyLedger
from firmscan.analytics.occurrences import Ledger, occurrences_frame


class CweCount(NamedTuple):
    cwe_id: str
    count: int
    mem_class: str


class CpeCount(NamedTuple):
    component_cpe: str
    count: int
    severity_counts: Dict[str, int]
    class_counts: Dict[str, int]


def _check_n(n: int):
    if n < 1:
        raise ValueError(f'Ranking size must be at least 1, got {n}.')


def _counts(frame: pd.DataFrame, column: str, labels) -> Dict[str, int]:
    counts = frame[column].value_counts()
    return {label: int(counts.get(label, 0)) for label in labels}


def severity_histogram(occurrences: Ledger) -> Dict[str, int]:
    """Occurrence count per severity bucket, every bucket present."""
    return _counts(occurrences_frame(occurrences), 'severity', SEVERITIES)


def memory_histogram(occurrences: Ledger) -> Dict[str, int]:
    """Occurrence count per memory class, every class present."""
    return _counts(occurrences_frame(occurrences), 'mem_class', MEMORY_CLASSES)


def _ranked(counts: pd.Series) -> pd.Series:
    ranked = counts.rename('count').reset_index()
    ranked.columns = ['id', 'count']
    ranked = ranked.sort_values(['count', 'id'], ascending=[False, True])
    return ranked.set_index('id')['count']


def top_cwes(occurrences: Ledger, n: int = project_globals.TOP_CWES_COUNT) -> List[CweCount]:
    """The ``n`` most frequent CWEs.

    Each CWE is reported with the memory class most of its occurrences
    were given (ties broken by class order).

    """
    _check_n(n)
    frame = occurrences_frame(occurrences)
    if frame.empty:
        return []
    ranked = _ranked(frame['cwe_id'].value_counts()).head(n)
    class_order = {c: i for i, c in enumerate(MEMORY_CLASSES)}
    result = []
    for cwe_id, count in ranked.items():
        classes = frame.loc[frame['cwe_id'] == cwe_id, 'mem_class'].value_counts()
        mem_class = min(classes.index, key=lambda c: (-classes[c], class_order[c]))
        result.append(CweCount(cwe_id, int(count), mem_class))
    return result


def top_cpes(occurrences: Ledger, n: int = project_globals.TOP_CPES_COUNT) -> List[CpeCount]:
    """The ``n`` components with most occurrences, split by severity and memory class."""
    _check_n(n)
    frame = occurrences_frame(occurrences)
    if frame.empty:
        return []
    ranked = _ranked(frame['component_cpe'].value_counts()).head(n)
    result = []
    for cpe, count in ranked.items():
        rows = frame[frame['component_cpe'] == cpe]
        result.append(CpeCount(cpe, int(count),
                               _counts(rows, 'severity', SEVERITIES),
                               _counts(rows, 'mem_class', MEMORY_CLASSES)))
    return result


def class_histogram_by_cpe(occurrences: Ledger) -> pd.DataFrame:
    """Memory class counts per component CPE, one column per class."""
    frame = occurrences_frame(occurrences)
    table = pd.crosstab(frame['component_cpe'], frame['mem_class'])
    return table.reindex(columns=list(MEMORY_CLASSES), fill_value=0).sort_index()


def memory_share(occurrences: Ledger, by_component: bool = False) -> Union[float, Dict[str, float]]:
    """Fraction of occurrences classified as memory-related.

    Parameters
    ----------
    occurrences
        The ledger.
    by_component
        Return one share per component CPE instead of a single share.

    Raises
    ------
    EmptyLedger
        If there are no occurrences.

    """
    frame = occurrences_frame(occurrences)
    if frame.empty:
        raise EmptyLedger('Memory share needs at least one occurrence.')
    memory = frame['mem_class'].isin(project_globals.MEMORY_RELATED_CLASSES)
    if not by_component:
        return float(memory.sum() / len(frame))
    shares = memory.groupby(frame['component_cpe']).mean()
    return {cpe: float(share) for cpe, share in shares.sort_index().items()}
