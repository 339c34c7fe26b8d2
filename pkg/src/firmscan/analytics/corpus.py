"""Per-firmware reports and their corpus-wide summary."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from firmscan import globals as project_globals
from firmscan.globals import SEVERITIES
from firmscan.exceptions import EmptyLedger
from firmscan.analytics.aggregates import (CpeCount, CweCount, memory_histogram, severity_histogram,
                                           top_cpes, top_cwes)
from firmscan.analytics.occurrences import Occurrence


@dataclass(frozen=True)
class FirmwareReport:
    """The analysis result of one firmware image or SBOM."""
    firmware_id: str
    source: str
    digest: str
    occurrences: Tuple[Occurrence, ...]
    component_count: int
    vendor: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            'firmware_id': self.firmware_id,
            'source': self.source,
            'digest': self.digest,
            'vendor': self.vendor,
            'component_count': self.component_count,
            'occurrence_total': len(self.occurrences),
            'severity_histogram': severity_histogram(self.occurrences),
            'memory_histogram': memory_histogram(self.occurrences),
        }


@dataclass(frozen=True)
class VendorSummary:
    firmware_count: int
    occurrence_total: int
    memory_share: Optional[float]


@dataclass(frozen=True)
class CorpusReport:
    firmware_count: int
    occurrence_total: int
    top_cwes: List[CweCount]
    top_cpes: List[CpeCount]
    severity_histogram: Dict[str, int]
    memory_histogram: Dict[str, int]
    per_firmware_mean_by_severity: Dict[str, float]
    mean_occurrences_per_firmware: float
    high_or_critical_total: int
    high_or_critical_per_firmware: float
    per_vendor: Dict[str, VendorSummary] = field(default_factory=dict)
    failed_inputs: List[Tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'firmware_count': self.firmware_count,
            'occurrence_total': self.occurrence_total,
            'mean_occurrences_per_firmware': round(self.mean_occurrences_per_firmware, 2),
            'high_or_critical_total': self.high_or_critical_total,
            'high_or_critical_per_firmware': round(self.high_or_critical_per_firmware, 2),
            'severity_histogram': self.severity_histogram,
            'memory_histogram': self.memory_histogram,
            'per_firmware_mean_by_severity': {k: round(v, 2)
                                              for k, v in self.per_firmware_mean_by_severity.items()},
            'top_cwes': [c._asdict() for c in self.top_cwes],
            'top_cpes': [c._asdict() for c in self.top_cpes],
            'per_vendor': {vendor: {'firmware_count': s.firmware_count,
                                    'occurrence_total': s.occurrence_total,
                                    'memory_share': s.memory_share}
                           for vendor, s in sorted(self.per_vendor.items())},
            'failed_inputs': [{'input': name, 'error': message} for name, message in self.failed_inputs],
        }


def _per_vendor(reports: Sequence[FirmwareReport]) -> Dict[str, VendorSummary]:
    grouped = {}
    for report in reports:
        if report.vendor:
            grouped.setdefault(report.vendor, []).append(report)
    result = {}
    for vendor, members in sorted(grouped.items()):
        rows = [o for r in members for o in r.occurrences]
        share = sum(o.is_memory_related for o in rows) / len(rows) if rows else None
        result[vendor] = VendorSummary(len(members), len(rows), share)
    return result


def corpus_summary(per_firmware_reports: Sequence[FirmwareReport],
                   failed_inputs: Sequence[Tuple[str, str]] = ()) -> CorpusReport:
    """Merges per-firmware ledgers into corpus-wide aggregates.

    Per-firmware means divide totals by the number of reports, so firmware
    with no occurrences still count.

    Parameters
    ----------
    per_firmware_reports
        One report per successfully analysed input.
    failed_inputs
        ``(input name, error message)`` pairs for inputs that were skipped.

    Raises
    ------
    EmptyLedger
        If no report is given.

    """
    if not per_firmware_reports:
        raise EmptyLedger('A corpus summary needs at least one firmware report.')
    occurrences = sorted(o for r in per_firmware_reports for o in r.occurrences)
    firmware_count = len(per_firmware_reports)
    severities = severity_histogram(occurrences)
    high_or_critical = severities[SEVERITIES.HIGH] + severities[SEVERITIES.CRITICAL]
    return CorpusReport(
        firmware_count=firmware_count,
        occurrence_total=len(occurrences),
        top_cwes=top_cwes(occurrences, project_globals.TOP_CWES_COUNT),
        top_cpes=top_cpes(occurrences, project_globals.TOP_CPES_COUNT),
        severity_histogram=severities,
        memory_histogram=memory_histogram(occurrences),
        per_firmware_mean_by_severity={b: n / firmware_count for b, n in severities.items()},
        mean_occurrences_per_firmware=len(occurrences) / firmware_count,
        high_or_critical_total=high_or_critical,
        high_or_critical_per_firmware=high_or_critical / firmware_count,
        per_vendor=_per_vendor(per_firmware_reports),
        failed_inputs=sorted(failed_inputs),
    )
