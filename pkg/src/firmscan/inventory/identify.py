"""Component identification over an extracted filesystem tree.

Four evidence strategies run over the tree: opkg package databases, version
strings inside binaries, shared library file names and well-known install
paths. Their results are merged per ``(vendor, product)``.

"""
from dataclasses import dataclass
import json
from pathlib import Path
import re
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple, Union

from loguru import logger

from firmscan import globals as project_globals
from firmscan import paths
from firmscan.globals import ENTRY_KINDS, EVIDENCE_SOURCES
from firmscan.extraction.tree import FilesystemTree, FsEntry
from firmscan.inventory.cpe import ANY, Cpe23, Value, to_cpe
from firmscan.inventory.opkg import parse_opkg_status
from firmscan.utilities import display_path

ContentReader = Callable[[str], bytes]

STRATEGIES = ('opkg', 'version_string', 'shared_library', 'known_path')
PRINTABLE_RUN = re.compile(rb'[\x20-\x7e]{%d,}' % project_globals.VERSION_SCAN_MIN_RUN)
VERSION_REVISION = re.compile(r'^(.*?\d)-')
VERSION_EPOCH = re.compile(r'^\d+:')


@dataclass(frozen=True)
class Evidence:
    source: str
    path: str
    excerpt: str = ''


@dataclass(frozen=True)
class Component:
    cpe: Cpe23
    display_name: str
    version_raw: str
    evidence: Tuple[Evidence, ...]

    def __post_init__(self):
        object.__setattr__(self, 'evidence', tuple(self.evidence))
        if not self.evidence:
            raise ValueError(f'Component {self.display_name} has no evidence.')

    @property
    def key(self) -> Tuple[str, str]:
        return self.cpe.key


class KnownComponent(NamedTuple):
    strategy: str
    pattern: re.Pattern
    vendor: str
    product: str
    version_group: Optional[int]
    display_name: str


class KnownComponentTable(NamedTuple):
    entries: List[KnownComponent]

    def for_strategy(self, strategy: str) -> List[KnownComponent]:
        return [e for e in self.entries if e.strategy == strategy]


def load_known_components(path: Union[str, Path] = None) -> KnownComponentTable:
    """Loads the known-component mapping file.

    Parameters
    ----------
    path
        A JSON array of mapping objects. Defaults to the packaged table.

    Raises
    ------
    ValueError
        If an entry names an unknown strategy or an invalid pattern.

    """
    path = Path(path) if path is not None else paths.KNOWN_COMPONENTS_PATH
    entries = []
    for item in json.loads(path.read_text()):
        if item['strategy'] not in STRATEGIES:
            raise ValueError(f'Unknown identification strategy {item["strategy"]!r} in {path}.')
        try:
            pattern = re.compile(item['pattern'])
        except re.error as e:
            raise ValueError(f'Invalid pattern {item["pattern"]!r} in {path}: {e}') from e
        entries.append(KnownComponent(item['strategy'], pattern, item['vendor'], item['product'],
                                      item.get('version_group'), item.get('display_name') or item['product']))
    return KnownComponentTable(entries)


def normalize_version(raw: str) -> str:
    """Reduces a packaged version to its upstream version.

    A leading ``<epoch>:`` is dropped and the string is cut at the first
    ``-`` that directly follows a digit, so ``1.33.2-1`` becomes ``1.33.2``.

    """
    version = VERSION_EPOCH.sub('', raw.strip())
    match = VERSION_REVISION.match(version)
    return match.group(1) if match else version


class _Candidate(NamedTuple):
    vendor: str
    product: str
    version_raw: str
    display_name: str
    evidence: Evidence


def _excerpt(text: str) -> str:
    return text[:project_globals.EVIDENCE_EXCERPT_LENGTH]


def _from_opkg(tree: FilesystemTree, reader: ContentReader, table: KnownComponentTable) -> List[_Candidate]:
    known = table.for_strategy('opkg')
    candidates = []
    for status_path in project_globals.OPKG_STATUS_PATHS:
        entry = tree.get(status_path)
        if entry is None or entry.kind != ENTRY_KINDS.FILE:
            continue
        result = parse_opkg_status(reader(entry.content_digest).decode('utf-8', errors='replace'))
        if result.skipped_count:
            logger.debug(f'Skipped {result.skipped_count} malformed stanza(s) in {status_path}.')
        for package in result.packages:
            mapping = next((k for k in known if k.pattern.fullmatch(package.name)), None)
            if mapping is not None:
                vendor, product, display_name = mapping.vendor, mapping.product, mapping.display_name
            else:
                vendor = product = package.name.lower()
                display_name = package.name
            evidence = Evidence(EVIDENCE_SOURCES.OPKG_STATUS, entry.path,
                                _excerpt(f'Package: {package.name} Version: {package.version}'))
            candidates.append(_Candidate(vendor, product, package.version, display_name, evidence))
    return candidates


def _from_version_strings(tree: FilesystemTree, reader: ContentReader,
                          table: KnownComponentTable) -> List[_Candidate]:
    known = table.for_strategy('version_string')
    candidates = []
    for entry in tree.files():
        if not entry.size or entry.size > project_globals.VERSION_SCAN_MAX_FILE_SIZE:
            continue
        runs = [run.decode('ascii') for run in PRINTABLE_RUN.findall(reader(entry.content_digest))]
        for mapping in known:
            for run in runs:
                match = mapping.pattern.search(run)
                if match is None:
                    continue
                evidence = Evidence(EVIDENCE_SOURCES.VERSION_STRING, entry.path, _excerpt(run[match.start():]))
                candidates.append(_Candidate(mapping.vendor, mapping.product, match.group(mapping.version_group),
                                             mapping.display_name, evidence))
                break
    return candidates


def _match_entries(tree: FilesystemTree, strategy: str, source: str, table: KnownComponentTable,
                   subject: Callable[[FsEntry], str]) -> List[_Candidate]:
    known = table.for_strategy(strategy)
    candidates = []
    for entry in tree.entries:
        if entry.kind == ENTRY_KINDS.DIR:
            continue
        text = subject(entry)
        for mapping in known:
            match = mapping.pattern.fullmatch(text)
            if match is None:
                continue
            version = match.group(mapping.version_group) if mapping.version_group else ''
            evidence = Evidence(source, entry.path, _excerpt(display_path(entry.path)))
            candidates.append(_Candidate(mapping.vendor, mapping.product, version, mapping.display_name, evidence))
    return candidates


def _merge(candidates: List[_Candidate]) -> List[Component]:
    precedence = {source: rank for rank, source in enumerate(EVIDENCE_SOURCES)}

    def rank(candidate: _Candidate):
        return precedence[candidate.evidence.source], not candidate.version_raw, candidate.evidence.path

    grouped: Dict[Tuple[str, str], List[_Candidate]] = {}
    for candidate in candidates:
        grouped.setdefault((candidate.vendor.lower(), candidate.product.lower()), []).append(candidate)

    components = []
    for group in grouped.values():
        group.sort(key=rank)
        best = group[0]
        version: Value = normalize_version(best.version_raw) if best.version_raw else ANY
        supporting = [c for c in group if not c.version_raw or c.version_raw == best.version_raw]
        evidence = tuple(dict.fromkeys(c.evidence for c in supporting))
        components.append(Component(cpe=to_cpe(best.vendor, best.product, version),
                                    display_name=best.display_name,
                                    version_raw=best.version_raw,
                                    evidence=evidence))
    return sorted(components, key=lambda c: (c.cpe.product, c.cpe.vendor))


def identify_components(tree: FilesystemTree, content_reader: ContentReader = None,
                        table: KnownComponentTable = None) -> List[Component]:
    """Lists the software components found in a filesystem tree.

    Parameters
    ----------
    tree
        The extracted root filesystem.
    content_reader
        Resolves a content digest to file bytes. Defaults to the tree's
        own blob store.
    table
        The known-component mapping. Defaults to the packaged table.

    Returns
    -------
        One component per ``(vendor, product)`` sorted by product name. The
        version comes from the highest-precedence evidence carrying one;
        components without any version keep an ANY version.

    """
    content_reader = content_reader if content_reader is not None else tree.read_content
    table = table if table is not None else load_known_components()

    candidates = (_from_opkg(tree, content_reader, table)
                  + _from_version_strings(tree, content_reader, table)
                  + _match_entries(tree, 'shared_library', EVIDENCE_SOURCES.SHARED_LIBRARY_NAME, table,
                                   lambda e: e.name)
                  + _match_entries(tree, 'known_path', EVIDENCE_SOURCES.KNOWN_PATH, table, lambda e: e.path))
    components = _merge(candidates)
    logger.debug(f'Identified {len(components)} component(s) from {len(candidates)} piece(s) of evidence.')
    return components
