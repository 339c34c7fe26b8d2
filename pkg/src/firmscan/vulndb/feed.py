"""Ingestion of NVD CVE API 2.0 JSON documents.

.. admonition::

   Logging in this module should be done at the ``debug`` level.

"""
from datetime import datetime, timezone
import json
from typing import Iterable, List, Optional, Tuple, Union

from loguru import logger

from firmscan import globals as project_globals
from firmscan.exceptions import CpeError, FeedParseError
from firmscan.inventory.cpe import parse_cpe
from firmscan.vulndb.index import FeedMeta, VulnIndex
from firmscan.vulndb.records import CVE_ID, CpeMatchRange, CveRecord, CvssScore, VersionBound

Document = Union[bytes, str, dict]


def _english_description(cve: dict) -> str:
    descriptions = cve.get('descriptions')
    if not isinstance(descriptions, list) or not descriptions:
        raise ValueError('missing descriptions')
    english = [d.get('value', '') for d in descriptions if d.get('lang') == 'en']
    return (english or [descriptions[0].get('value', '')])[0]


def _cwe_ids(cve: dict) -> Tuple[str, ...]:
    values = []
    for weakness in cve.get('weaknesses', []):
        for description in weakness.get('description', []):
            value = description.get('value', '')
            if value and value not in values:
                values.append(value)
    cwe_ids = [v for v in values if v.startswith('CWE-')]
    if cwe_ids:
        return tuple(cwe_ids)
    if project_globals.CWE_OTHER in values:
        return (project_globals.CWE_OTHER,)
    return (project_globals.CWE_NOINFO,)


def _metric(metrics: dict, keys: Tuple[str, ...]) -> Optional[CvssScore]:
    for key in keys:
        entries = metrics.get(key) or []
        if not entries:
            continue
        chosen = next((m for m in entries if m.get('type') == 'Primary'), entries[0])
        data = chosen['cvssData']
        score = data['baseScore']
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise ValueError(f'non-numeric base score {score!r}')
        return CvssScore(score=float(score), vector=data.get('vectorString', ''),
                         version=data.get('version', ''))
    return None


def _bound(match: dict, including: str, excluding: str) -> Optional[VersionBound]:
    if match.get(including):
        return VersionBound(match[including], True)
    if match.get(excluding):
        return VersionBound(match[excluding], False)
    return None


def _walk_nodes(nodes: list) -> Iterable[dict]:
    for node in nodes:
        yield from node.get('cpeMatch', [])
        yield from _walk_nodes(node.get('children', []))


def _configurations(cve: dict) -> List[CpeMatchRange]:
    """Flattens every vulnerable cpeMatch of every node into one OR list."""
    ranges = []
    for configuration in cve.get('configurations', []):
        for match in _walk_nodes(configuration.get('nodes', [])):
            if not match.get('vulnerable', True):
                continue
            base = parse_cpe(match['criteria'])
            start = _bound(match, 'versionStartIncluding', 'versionStartExcluding')
            end = _bound(match, 'versionEndIncluding', 'versionEndExcluding')
            if base.has_version and (start or end):
                logger.debug(f'Ignoring version range on literal-version criteria {match["criteria"]}.')
                start = end = None
            item = CpeMatchRange(base, start, end)
            if item not in ranges:
                ranges.append(item)
    return ranges


def parse_cve(cve: dict) -> CveRecord:
    """Builds a record from one ``vulnerabilities[].cve`` object."""
    cve_id = cve.get('id')
    if not isinstance(cve_id, str) or not CVE_ID.fullmatch(cve_id):
        raise ValueError(f'invalid CVE id {cve_id!r}')
    metrics = cve.get('metrics', {})
    return CveRecord(id=cve_id,
                     description=_english_description(cve),
                     cwe_ids=_cwe_ids(cve),
                     cvss31=_metric(metrics, ('cvssMetricV31', 'cvssMetricV30')),
                     cvss2=_metric(metrics, ('cvssMetricV2',)),
                     configurations=tuple(_configurations(cve)))


def _load_document(document: Document, position: int) -> dict:
    if isinstance(document, dict):
        return document
    try:
        return json.loads(document)
    except ValueError as e:
        raise FeedParseError(f'Malformed JSON: {e}', document=position) from e


def ingest_nvd_feed(documents: Iterable[Document], source_label: str = 'nvd',
                    ingested_at: str = None) -> VulnIndex:
    """Builds a vulnerability index from NVD API 2.0 documents.

    Parameters
    ----------
    documents
        JSON documents (bytes, text or already decoded) with a
        ``vulnerabilities`` array.
    source_label
        Label recorded in the index metadata.
    ingested_at
        Ingestion timestamp to record. Defaults to the current UTC time.

    Returns
    -------
        One record per CVE id. When an id repeats, the last occurrence
        wins and the repetition is counted in ``duplicate_count``.

    Raises
    ------
    FeedParseError
        If a document is not JSON or lacks required fields. The error
        carries the document and vulnerability position.

    """
    records = {}
    duplicates = 0
    for position, document in enumerate(documents):
        data = _load_document(document, position)
        vulnerabilities = data.get('vulnerabilities') if isinstance(data, dict) else None
        if not isinstance(vulnerabilities, list):
            raise FeedParseError('Document has no vulnerabilities array', document=position)
        for item_position, item in enumerate(vulnerabilities):
            try:
                record = parse_cve(item['cve'])
            except (KeyError, TypeError, ValueError, AttributeError, CpeError) as e:
                raise FeedParseError(f'Malformed vulnerability: {type(e).__name__}: {e}',
                                     document=position, item=item_position) from e
            if record.id in records:
                duplicates += 1
            records[record.id] = record
        logger.debug(f'Document {position}: {len(vulnerabilities)} vulnerabilities.')

    if ingested_at is None:
        ingested_at = datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')
    meta = FeedMeta(source_label=source_label, record_count=len(records), ingested_at=ingested_at)
    return VulnIndex(records=records, feed_meta=meta, duplicate_count=duplicates)
