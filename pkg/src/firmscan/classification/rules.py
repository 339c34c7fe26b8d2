"""CWE rule table and the deterministic classification paths."""
from dataclasses import dataclass
import json
from pathlib import Path
import re
from typing import Dict, List, Optional, Tuple, Union

from firmscan import globals as project_globals
from firmscan import paths
from firmscan.globals import CLASSIFICATION_SOURCES, CONFIDENCE, MEMORY_CLASSES
from firmscan.exceptions import EmptyDescription, MalformedCweId, RuleTableError

CWE_ID = re.compile(r'CWE-(\d+)')


@dataclass(frozen=True)
class ClassificationResult:
    mem_class: str
    source: str
    reasoning: str
    confidence: str
    cwe_id: Optional[str] = None

    def __post_init__(self):
        if self.mem_class not in MEMORY_CLASSES:
            raise ValueError(f'Unknown memory class {self.mem_class!r}.')
        if self.source == CLASSIFICATION_SOURCES.RULE_TABLE and self.confidence != CONFIDENCE.HIGH:
            raise ValueError('Rule table results are always high confidence.')
        if self.source == CLASSIFICATION_SOURCES.DEFAULT and self.confidence != CONFIDENCE.LOW:
            raise ValueError('Default results are always low confidence.')

    @property
    def is_memory_related(self) -> bool:
        return self.mem_class in project_globals.MEMORY_RELATED_CLASSES


@dataclass(frozen=True)
class RuleTable:
    mapping: Dict[str, str]
    label: str = 'v1'

    def __len__(self) -> int:
        return len(self.mapping)

    def get(self, cwe_id: str) -> Optional[str]:
        return self.mapping.get(cwe_id)


def _unique_pairs(pairs: List[Tuple[str, str]]) -> Dict[str, str]:
    mapping = {}
    for key, value in pairs:
        if key in mapping and mapping[key] != value:
            raise RuleTableError(f'{key} maps to both {mapping[key]!r} and {value!r}.')
        mapping[key] = value
    return mapping


def load_rule_table(path: Union[str, Path] = None) -> RuleTable:
    """Loads a ``{"CWE-<n>": "<class>"}`` rule table file.

    Classes may be given by full label or short alias (``spatial``,
    ``temporal``, ``other``, ``not-memory``).

    Raises
    ------
    RuleTableError
        If a CWE maps to two classes, an id is malformed or a class is unknown.

    """
    path = Path(path) if path is not None else paths.RULE_TABLE_PATH
    try:
        raw = json.loads(path.read_text(), object_pairs_hook=_unique_pairs)
    except ValueError as e:
        raise RuleTableError(f'Cannot read rule table {path}: {e}') from e
    mapping = {}
    for cwe_id, label in raw.items():
        if not CWE_ID.fullmatch(cwe_id):
            raise RuleTableError(f'Malformed CWE id {cwe_id!r} in {path}.')
        mem_class = project_globals.MEMORY_CLASS_ALIASES.get(label, label)
        if mem_class not in MEMORY_CLASSES:
            raise RuleTableError(f'Unknown memory class {label!r} for {cwe_id} in {path}.')
        mapping[cwe_id] = mem_class
    version = re.search(r'\.(v\d+)\.json$', path.name)
    return RuleTable(mapping=mapping, label=version.group(1) if version else path.stem)


def classify_cwe(cwe_id: str, table: RuleTable) -> Optional[ClassificationResult]:
    """Looks a CWE up in the rule table.

    Returns
    -------
        A high-confidence rule table result, or ``None`` when the CWE is not
        in the table.

    Raises
    ------
    MalformedCweId
        If ``cwe_id`` is not of the form ``CWE-<n>``.

    """
    if not isinstance(cwe_id, str) or not CWE_ID.fullmatch(cwe_id):
        raise MalformedCweId(f'Malformed CWE id {cwe_id!r}.')
    mem_class = table.get(cwe_id)
    if mem_class is None:
        return None
    return ClassificationResult(mem_class=mem_class,
                                source=CLASSIFICATION_SOURCES.RULE_TABLE,
                                reasoning=f'{cwe_id} is {mem_class} in rule table {table.label}.',
                                confidence=CONFIDENCE.HIGH,
                                cwe_id=cwe_id)


def classify_description(text: str) -> ClassificationResult:
    """Keyword heuristic over a vulnerability description.

    Trigger phrases are matched case-insensitively as substrings. Temporal
    triggers win over spatial ones, which win over other-memory ones.
    Results are always low confidence.

    Raises
    ------
    EmptyDescription
        If ``text`` is empty or only white space.

    """
    if not text or not text.strip():
        raise EmptyDescription('Cannot classify an empty description.')
    lowered = text.lower()
    for mem_class, triggers in project_globals.KEYWORD_TRIGGERS:
        for trigger in triggers:
            if trigger in lowered:
                return ClassificationResult(mem_class=mem_class,
                                            source=CLASSIFICATION_SOURCES.KEYWORD,
                                            reasoning=f'Description mentions "{trigger}".',
                                            confidence=CONFIDENCE.LOW)
    return ClassificationResult(mem_class=MEMORY_CLASSES.NOT_MEMORY,
                                source=CLASSIFICATION_SOURCES.KEYWORD,
                                reasoning='Description mentions no memory-safety trigger phrase.',
                                confidence=CONFIDENCE.LOW)
