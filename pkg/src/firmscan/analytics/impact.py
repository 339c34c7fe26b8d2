"""Estimated effect of Secure-by-Design memory protection on a ledger.

With full protection every memory-related occurrence is removed and the
remaining ledger holds only not-memory-related occurrences. A coverage below
one models probabilistic protection: the expected share ``1 - coverage`` of
memory-related occurrences survives in each severity bucket.

"""
from dataclasses import dataclass
import math
from typing import Dict

from jinja2 import Template

from firmscan import paths
from firmscan.globals import SEVERITIES
from firmscan.exceptions import EmptyLedger
from firmscan.analytics.occurrences import Ledger, occurrences_frame
from firmscan import globals as project_globals


@dataclass(frozen=True)
class ImpactReport:
    before: Dict[str, float]
    after: Dict[str, float]
    firmware_count: int
    eliminated_share: float
    reduction_factor: float
    per_firmware_before: Dict[str, float]
    per_firmware_after: Dict[str, float]
    protection_coverage: float = 1.0

    @property
    def total_before(self) -> float:
        return sum(self.before.values())

    @property
    def total_after(self) -> float:
        return sum(self.after.values())

    def to_dict(self) -> dict:
        """JSON-ready form; means rounded to two decimals, infinity as ``"inf"``."""
        def tidy(value: float):
            return int(value) if float(value).is_integer() else value

        return {
            'before': {k: tidy(v) for k, v in self.before.items()},
            'after': {k: tidy(v) for k, v in self.after.items()},
            'total_before': tidy(self.total_before),
            'total_after': tidy(self.total_after),
            'firmware_count': self.firmware_count,
            'per_firmware_before': {k: round(v, 2) for k, v in self.per_firmware_before.items()},
            'per_firmware_after': {k: round(v, 2) for k, v in self.per_firmware_after.items()},
            'eliminated_share': self.eliminated_share,
            'reduction_factor': 'inf' if math.isinf(self.reduction_factor) else self.reduction_factor,
            'protection_coverage': self.protection_coverage,
        }


def estimate_sbd_impact(occurrences: Ledger, protection_coverage: float = 1.0,
                        firmware_count: int = None) -> ImpactReport:
    """Recounts a ledger as if memory-safety protection were in place.

    Parameters
    ----------
    occurrences
        The ledger. It is not modified.
    protection_coverage
        Fraction of memory-related occurrences the protection removes,
        in ``(0, 1]``.
    firmware_count
        Number of firmware analysed, including those without occurrences.
        Defaults to the number of distinct firmware in the ledger.

    Returns
    -------
        Per-severity counts before and after, per-firmware means, the
        eliminated share and the reduction factor (infinite when nothing
        remains).

    Raises
    ------
    EmptyLedger
        If there are no occurrences.
    ValueError
        If the coverage is outside ``(0, 1]`` or ``firmware_count`` is
        below the number of firmware in the ledger.

    """
    if not 0.0 < protection_coverage <= 1.0:
        raise ValueError(f'Protection coverage must be in (0, 1], got {protection_coverage}.')
    frame = occurrences_frame(occurrences)
    if frame.empty:
        raise EmptyLedger('Impact estimation needs at least one occurrence.')

    memory = frame['mem_class'].isin(project_globals.MEMORY_RELATED_CLASSES)
    before_counts = frame['severity'].value_counts()
    memory_counts = frame.loc[memory, 'severity'].value_counts()
    before = {b: int(before_counts.get(b, 0)) for b in SEVERITIES}
    if protection_coverage == 1.0:
        after = {b: before[b] - int(memory_counts.get(b, 0)) for b in SEVERITIES}
    else:
        after = {b: before[b] - protection_coverage * float(memory_counts.get(b, 0)) for b in SEVERITIES}

    ledger_firmware = int(frame['firmware_id'].nunique())
    if firmware_count is None:
        firmware_count = ledger_firmware
    elif firmware_count < ledger_firmware:
        raise ValueError(f'Firmware count {firmware_count} is below the {ledger_firmware} firmware in the ledger.')
    total_before, total_after = sum(before.values()), sum(after.values())
    return ImpactReport(
        before=before,
        after=after,
        firmware_count=firmware_count,
        eliminated_share=1.0 - total_after / total_before,
        reduction_factor=total_before / total_after if total_after > 0 else math.inf,
        per_firmware_before={b: before[b] / firmware_count for b in SEVERITIES},
        per_firmware_after={b: after[b] / firmware_count for b in SEVERITIES},
        protection_coverage=protection_coverage,
    )


def render_impact_table(report: ImpactReport) -> str:
    """Human-readable before/after table with the reduction factor."""
    with (paths.TEMPLATE_DIR / paths.IMPACT_TABLE_TEMPLATE).open() as infile:
        template = Template(infile.read())
    factor = 'inf' if math.isinf(report.reduction_factor) else f'{report.reduction_factor:.2f}'
    return template.render(report=report, severities=list(SEVERITIES), factor=factor)
