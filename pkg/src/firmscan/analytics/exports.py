"""Machine-readable report files.

Every writer sorts its rows and keys so that reproducible runs produce
byte-identical files.

"""
import json
from pathlib import Path
from typing import Optional, Union

from loguru import logger
import pandas as pd

from firmscan import globals as project_globals
from firmscan.globals import MEMORY_CLASSES, SEVERITIES
from firmscan.analytics.aggregates import top_cpes, top_cwes
from firmscan.analytics.corpus import CorpusReport
from firmscan.analytics.impact import ImpactReport
from firmscan.analytics.occurrences import Ledger, write_occurrences_csv


def dump_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


def write_json(data: dict, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(data), encoding='utf-8')


def _write_frame(frame: pd.DataFrame, path: Path):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        frame.to_csv(f, index=False, lineterminator='\n')


def top_cwes_frame(occurrences: Ledger, n: int = project_globals.TOP_CWES_COUNT) -> pd.DataFrame:
    return pd.DataFrame([c._asdict() for c in top_cwes(occurrences, n)],
                        columns=['cwe_id', 'count', 'mem_class'])


def top_cpes_frame(occurrences: Ledger, split: str, n: int = project_globals.TOP_CPES_COUNT) -> pd.DataFrame:
    """Top components with one count column per severity (``split='severity'``)
    or per memory class (``split='class'``)."""
    if split == 'severity':
        labels, attribute = list(SEVERITIES), 'severity_counts'
    elif split == 'class':
        labels, attribute = list(MEMORY_CLASSES), 'class_counts'
    else:
        raise ValueError(f'Unknown split {split!r}.')
    rows = [{'component_cpe': c.component_cpe, 'count': c.count, **getattr(c, attribute)}
            for c in top_cpes(occurrences, n)]
    return pd.DataFrame(rows, columns=['component_cpe', 'count'] + labels)


def write_reports(out_dir: Union[str, Path], corpus: CorpusReport, impact: Optional[ImpactReport],
                  occurrences: Ledger):
    """Writes the corpus report files into ``out_dir``.

    The impact report is omitted when the corpus has no occurrences.

    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f'Writing corpus reports to {out_dir}.')
    write_json(corpus.to_dict(), out_dir / project_globals.CORPUS_FILE)
    if impact is not None:
        write_json(impact.to_dict(), out_dir / project_globals.IMPACT_FILE)
    write_occurrences_csv(occurrences, out_dir / project_globals.OCCURRENCES_FILE)
    _write_frame(top_cwes_frame(occurrences), out_dir / project_globals.TOP_CWES_FILE)
    _write_frame(top_cpes_frame(occurrences, 'severity'), out_dir / project_globals.TOP_CPES_BY_SEVERITY_FILE)
    _write_frame(top_cpes_frame(occurrences, 'class'), out_dir / project_globals.TOP_CPES_BY_CLASS_FILE)
