"""The occurrence ledger: one row per (firmware, component, CVE)."""
from dataclasses import astuple, dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Union

from loguru import logger
import pandas as pd

from firmscan import globals as project_globals
from firmscan.globals import MEMORY_CLASSES, OCCURRENCE_COLUMNS, SEVERITIES
from firmscan.exceptions import LedgerParseError, UnresolvedVersion
from firmscan.classification.classifier import MemoryClassifier
from firmscan.inventory.cpe import format_cpe
from firmscan.vulndb.index import VulnIndex
from firmscan.vulndb.matching import match_cpe
from firmscan.vulndb.records import CveRecord
from firmscan.vulndb.severity import cvss_severity


@dataclass(frozen=True, order=True)
class Occurrence:
    firmware_id: str
    component_cpe: str
    cve_id: str
    cwe_id: str
    severity: str
    mem_class: str
    classification_source: str = ''

    @property
    def is_memory_related(self) -> bool:
        return self.mem_class in project_globals.MEMORY_RELATED_CLASSES


Ledger = Union[Sequence[Occurrence], pd.DataFrame]


def cwe_label(cwe_id: str) -> str:
    """Reporting label of a linked CWE; the NVD sentinels get short labels."""
    return {
        project_globals.CWE_NOINFO: project_globals.CWE_NOINFO_LABEL,
        project_globals.CWE_OTHER: project_globals.CWE_OTHER_LABEL,
    }.get(cwe_id, cwe_id)


def _occurrence_cwe(record: CveRecord, driving_cwe: str = None) -> str:
    if driving_cwe:
        return driving_cwe
    return cwe_label(record.cwe_ids[0]) if record.cwe_ids else project_globals.CWE_NOINFO_LABEL


def build_occurrences(firmware_id: str, components: Iterable, index: VulnIndex,
                      classifier: MemoryClassifier) -> List[Occurrence]:
    """Matches, classifies and grades every CVE of every component.

    A CVE shared by two components of the same firmware yields two rows.
    Components without a literal version are skipped with a warning.

    Parameters
    ----------
    firmware_id
        Label of the firmware the components belong to.
    components
        Objects with a ``cpe`` attribute.
    index
        The vulnerability index.
    classifier
        Memory classifier used for every matched record.

    Returns
    -------
        The ledger rows, sorted.

    """
    occurrences = []
    for component in components:
        try:
            records = match_cpe(index, component.cpe)
        except UnresolvedVersion as e:
            logger.warning(f'{firmware_id}: skipping component: {e}')
            continue
        cpe = format_cpe(component.cpe)
        for record in records:
            result = classifier.classify(record)
            severity, _, _ = cvss_severity(record)
            occurrences.append(Occurrence(firmware_id=firmware_id,
                                          component_cpe=cpe,
                                          cve_id=record.id,
                                          cwe_id=_occurrence_cwe(record, result.cwe_id),
                                          severity=severity,
                                          mem_class=result.mem_class,
                                          classification_source=result.source))
    return sorted(occurrences)


def occurrences_frame(occurrences: Ledger) -> pd.DataFrame:
    """The ledger as a data frame with exactly the ledger columns."""
    if isinstance(occurrences, pd.DataFrame):
        return occurrences[OCCURRENCE_COLUMNS]
    return pd.DataFrame([astuple(o) for o in occurrences], columns=OCCURRENCE_COLUMNS)


def write_occurrences_csv(occurrences: Ledger, path: Union[str, Path]):
    frame = occurrences_frame(occurrences).sort_values(['firmware_id', 'component_cpe', 'cve_id'])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        frame.to_csv(f, index=False, lineterminator='\n')


def read_occurrences_csv(path: Union[str, Path]) -> List[Occurrence]:
    """Reads a ledger written by :func:`write_occurrences_csv`.

    Raises
    ------
    OSError
        If the file cannot be read.
    LedgerParseError
        If the columns, severities or memory classes are not as written.

    """
    if not Path(path).is_file():
        raise FileNotFoundError(f'No such occurrences file: {path}')
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise LedgerParseError(f'Cannot parse {path}: {e}') from e
    if list(frame.columns) != OCCURRENCE_COLUMNS:
        raise LedgerParseError(f'{path} has columns {list(frame.columns)}, expected {OCCURRENCE_COLUMNS}.')
    bad_severity = ~frame['severity'].isin(SEVERITIES)
    if bad_severity.any():
        raise LedgerParseError(f'{path} has unknown severity {frame.loc[bad_severity, "severity"].iloc[0]!r}.')
    bad_class = ~frame['mem_class'].isin(MEMORY_CLASSES)
    if bad_class.any():
        raise LedgerParseError(f'{path} has unknown memory class {frame.loc[bad_class, "mem_class"].iloc[0]!r}.')
    return [Occurrence(*row) for row in frame.itertuples(index=False, name=None)]
