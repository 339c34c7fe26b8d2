from typing import Optional, Tuple

from firmscan.globals import SEVERITIES
from firmscan.vulndb.records import CveRecord


def severity_v3(score: float) -> str:
    """CVSS v3.x qualitative rating."""
    if score == 0.0:
        return SEVERITIES.NONE
    if score < 4.0:
        return SEVERITIES.LOW
    if score < 7.0:
        return SEVERITIES.MEDIUM
    if score < 9.0:
        return SEVERITIES.HIGH
    return SEVERITIES.CRITICAL


def severity_v2(score: float) -> str:
    """CVSS v2 rating; there is no Critical band."""
    if score < 4.0:
        return SEVERITIES.LOW
    if score < 7.0:
        return SEVERITIES.MEDIUM
    return SEVERITIES.HIGH


def cvss_severity(record: CveRecord) -> Tuple[str, Optional[float], Optional[str]]:
    """Severity bucket of a record.

    Returns
    -------
        ``(bucket, score used, CVSS version used)``. CVSS v3 is preferred
        over v2; without either the bucket is ``SEVERITIES.NONE`` and the
        score and version are ``None``.

    """
    if record.cvss31 is not None:
        return severity_v3(record.cvss31.score), record.cvss31.score, record.cvss31.version or '3.1'
    if record.cvss2 is not None:
        return severity_v2(record.cvss2.score), record.cvss2.score, record.cvss2.version or '2.0'
    return SEVERITIES.NONE, None, None
