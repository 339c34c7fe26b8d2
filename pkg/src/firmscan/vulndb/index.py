"""The persistent CVE index."""
from dataclasses import dataclass, field
import json
from pathlib import Path
from typing import Dict, List, NamedTuple, Tuple, Union

from loguru import logger

from firmscan import globals as project_globals
from firmscan.exceptions import IndexVersionMismatch
from firmscan.vulndb.records import CveRecord


class FeedMeta(NamedTuple):
    source_label: str
    record_count: int
    ingested_at: str


def build_product_index(records: Dict[str, CveRecord]) -> Dict[Tuple[str, str], List[str]]:
    product_index: Dict[Tuple[str, str], List[str]] = {}
    for cve_id in sorted(records):
        for configuration in records[cve_id].configurations:
            ids = product_index.setdefault(configuration.base.key, [])
            if not ids or ids[-1] != cve_id:
                ids.append(cve_id)
    return product_index


@dataclass(frozen=True)
class VulnIndex:
    """CVE records keyed by id plus a ``(vendor, product)`` lookup.

    The product index is derived from the records and covers every
    configuration of every record. Vendor and product keys are lowercase.

    """
    records: Dict[str, CveRecord]
    feed_meta: FeedMeta
    duplicate_count: int = 0
    product_index: Dict[Tuple[str, str], List[str]] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'product_index', build_product_index(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def lookup(self, vendor: str, product: str) -> List[CveRecord]:
        """Records with at least one configuration for the product, sorted by id."""
        return [self.records[i] for i in self.product_index.get((vendor.lower(), product.lower()), [])]


def save_index(index: VulnIndex, path: Union[str, Path]):
    """Writes an index as a versioned JSON document.

    Raises
    ------
    OSError
        If the file cannot be written.

    """
    path = Path(path)
    document = {
        'format_version': project_globals.INDEX_FORMAT_VERSION,
        'feed_meta': index.feed_meta._asdict(),
        'duplicate_count': index.duplicate_count,
        'records': [index.records[i].to_dict() for i in sorted(index.records)],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=1, sort_keys=True))
    logger.debug(f'Wrote {len(index)} records to {path}.')


def load_index(path: Union[str, Path]) -> VulnIndex:
    """Reads an index written by :func:`save_index`.

    Raises
    ------
    OSError
        If the file cannot be read.
    IndexVersionMismatch
        If the file is empty, not an index or has another format version.

    """
    path = Path(path)
    text = path.read_text()
    try:
        document = json.loads(text)
    except ValueError as e:
        raise IndexVersionMismatch(f'{path} is not a firmscan index: {e}') from e
    if not isinstance(document, dict) or document.get('format_version') != project_globals.INDEX_FORMAT_VERSION:
        found = document.get('format_version') if isinstance(document, dict) else None
        raise IndexVersionMismatch(f'{path} has index format version {found}, '
                                   f'expected {project_globals.INDEX_FORMAT_VERSION}.')
    try:
        records = {r.id: r for r in (CveRecord.from_dict(item) for item in document['records'])}
        index = VulnIndex(records=records,
                          feed_meta=FeedMeta(**document['feed_meta']),
                          duplicate_count=document.get('duplicate_count', 0))
    except (KeyError, TypeError, ValueError) as e:
        raise IndexVersionMismatch(f'{path} holds a damaged index: {e}') from e
    logger.debug(f'Loaded {len(index)} records from {path}.')
    return index
