from collections import Counter
from typing import Optional

from loguru import logger

from firmscan import globals as project_globals
from firmscan.globals import CLASSIFICATION_SOURCES, CONFIDENCE, MEMORY_CLASSES
from firmscan.exceptions import ClassificationConflict, LlmError, MalformedCweId
from firmscan.classification.llm import LlmClient
from firmscan.classification.rules import ClassificationResult, RuleTable, classify_cwe, classify_description
from firmscan.vulndb.records import CveRecord


class MemoryClassifier:
    """Resolves the memory class of CVE records.

    Resolution order: the first linked CWE found in the rule table, then the
    remote classifier when one is configured, then the description keyword
    heuristic, and finally a low-confidence not-memory default when there is
    no description.

    Attributes
    ----------
    counts
        How often each resolution path was taken, keyed by classification
        source, plus ``LlmFailure`` for remote errors that fell back.

    """

    def __init__(self, table: RuleTable, llm: LlmClient = None, strict: bool = False,
                 llm_fallback: bool = True):
        self.table = table
        self.llm = llm
        self.strict = strict
        self.llm_fallback = llm_fallback
        self.counts = Counter()

    def _table_hit(self, record: CveRecord) -> Optional[ClassificationResult]:
        hits = []
        for cwe_id in record.cwe_ids:
            if cwe_id in (project_globals.CWE_NOINFO, project_globals.CWE_OTHER):
                continue
            try:
                result = classify_cwe(cwe_id, self.table)
            except MalformedCweId:
                logger.debug(f'{record.id}: ignoring malformed CWE id {cwe_id!r}.')
                continue
            if result is not None:
                if not self.strict:
                    return result
                hits.append(result)
        if len({hit.mem_class for hit in hits}) > 1:
            details = ', '.join(f'{hit.cwe_id}={hit.mem_class}' for hit in hits)
            raise ClassificationConflict(f'{record.id} links CWEs of different memory classes: {details}.')
        return hits[0] if hits else None

    def _describe(self, record: CveRecord) -> ClassificationResult:
        if self.llm is not None:
            try:
                return self.llm.classify(record.description)
            except LlmError as e:
                if not self.llm_fallback:
                    raise
                self.counts['LlmFailure'] += 1
                logger.warning(f'{record.id}: remote classifier failed ({e.kind}: {e}); '
                               f'using the description keywords.')
        return classify_description(record.description)

    def classify(self, record: CveRecord) -> ClassificationResult:
        """Classifies one record.

        Raises
        ------
        ClassificationConflict
            In strict mode, when linked CWEs map to different classes.
        LlmError
            When the remote classifier fails and fallback is disabled.

        """
        result = self._table_hit(record)
        if result is None:
            if record.description and record.description.strip():
                result = self._describe(record)
            else:
                result = ClassificationResult(mem_class=MEMORY_CLASSES.NOT_MEMORY,
                                              source=CLASSIFICATION_SOURCES.DEFAULT,
                                              reasoning='No rule table CWE and no description.',
                                              confidence=CONFIDENCE.LOW)
        self.counts[result.source] += 1
        return result


def classify_cve(record: CveRecord, table: RuleTable, llm: LlmClient = None,
                 llm_fallback: bool = True) -> ClassificationResult:
    """Classifies one record.

    Raises
    ------
    LlmError
        When ``llm`` fails and ``llm_fallback`` is off; with fallback on the
        description keywords are used instead.

    """
    return MemoryClassifier(table, llm=llm, llm_fallback=llm_fallback).classify(record)
