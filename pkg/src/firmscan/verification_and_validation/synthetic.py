"""Synthetic occurrence ledgers with known ground truth.

Each generator fixes the aggregate it is meant to exercise exactly (counts,
shares or rankings) and uses a seeded random stream only for the details
that must not matter: row order, firmware assignment, the memory-related
subclass and CWE labels.

"""
from dataclasses import replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import stats

from firmscan.globals import MEMORY_CLASSES, SEVERITIES
from firmscan.analytics.occurrences import Occurrence

MEMORY_CWES = ('CWE-119', 'CWE-120', 'CWE-125', 'CWE-416', 'CWE-476', 'CWE-787')
OTHER_CWES = ('CWE-20', 'CWE-22', 'CWE-78', 'CWE-79', 'CWE-200', 'CWE-noinfo')
SYNTHETIC_CPE = 'cpe:2.3:a:synthetic:component:1.0:*:*:*:*:*:*:*'

# Per-firmware means over a 502-image corpus before and after removing every
# memory-related occurrence.
GATEWAY_FIRMWARE_COUNT = 502
GATEWAY_BEFORE_MEANS = {SEVERITIES.CRITICAL: 2.0, SEVERITIES.HIGH: 8.0, SEVERITIES.MEDIUM: 23.5,
                        SEVERITIES.LOW: 2.0}
GATEWAY_AFTER_MEANS = {SEVERITIES.CRITICAL: 0.0, SEVERITIES.HIGH: 1.4, SEVERITIES.MEDIUM: 7.6,
                       SEVERITIES.LOW: 1.0}

# Memory-related vulnerabilities out of 10,000 per component.
COMPONENT_MEMORY_SHARES = {
    'cpe:2.3:a:openssl:openssl:1.0.2:*:*:*:*:*:*:*': (5813, 10000),
    'cpe:2.3:a:busybox:busybox:1.33.2:*:*:*:*:*:*:*': (8213, 10000),
    'cpe:2.3:a:tcpdump:tcpdump:4.9.2:*:*:*:*:*:*:*': (10000, 10000),
}


def _row(n: int, firmware_id: str, cpe: str, cwe_id: str, severity: str, mem_class: str) -> Occurrence:
    return Occurrence(firmware_id=firmware_id, component_cpe=cpe, cve_id=f'CVE-2099-{n:06d}',
                      cwe_id=cwe_id, severity=severity, mem_class=mem_class,
                      classification_source='Synthetic')


def _memory_rows(rng: np.random.Generator, start: int, memory: int, total: int, firmware_ids: Sequence[str],
                 severity: str, cpe: str = SYNTHETIC_CPE) -> List[Occurrence]:
    rows = []
    for i in range(total):
        firmware_id = firmware_ids[(start + i) % len(firmware_ids)]
        if i < memory:
            mem_class = str(rng.choice(MEMORY_CLASSES[1:]))
            cwe_id = str(rng.choice(MEMORY_CWES))
        else:
            mem_class = MEMORY_CLASSES.NOT_MEMORY
            cwe_id = str(rng.choice(OTHER_CWES))
        rows.append(_row(start + i, firmware_id, cpe, cwe_id, severity, mem_class))
    return rows


def firmware_ids(count: int) -> List[str]:
    return [f'fw-{n:04d}.bin' for n in range(count)]


def gateway_impact_corpus(seed: int = 502) -> List[Occurrence]:
    """A 502-firmware ledger matching the gateway per-firmware severity means.

    Bucket totals are the means times the firmware count, rounded; the
    memory-related rows of each bucket are the difference between the before
    and after totals.

    """
    rng = np.random.default_rng(seed)
    ids = firmware_ids(GATEWAY_FIRMWARE_COUNT)
    rows, start = [], 0
    for severity, mean in GATEWAY_BEFORE_MEANS.items():
        total = int(round(mean * GATEWAY_FIRMWARE_COUNT))
        after = int(round(GATEWAY_AFTER_MEANS[severity] * GATEWAY_FIRMWARE_COUNT))
        rows.extend(_memory_rows(rng, start, total - after, total, ids, severity))
        start += total
    rng.shuffle(rows)
    return rows


def memory_share_corpus(total: int, share: float, firmware_count: int = 10,
                        seed: int = 74) -> List[Occurrence]:
    """A ledger in which exactly ``round(total * share)`` rows are memory-related."""
    rng = np.random.default_rng(seed)
    memory = int(round(total * share))
    severities = rng.choice(SEVERITIES[1:], size=total)
    ids = firmware_ids(firmware_count)
    rows = _memory_rows(rng, 0, memory, total, ids, SEVERITIES.MEDIUM)
    return [replace(row, severity=str(s)) for row, s in zip(rows, severities)]


def component_share_corpus(shares: Dict[str, Tuple[int, int]] = None, firmware_count: int = 20,
                           seed: int = 4) -> List[Occurrence]:
    """A ledger with an exact memory-related share per component CPE."""
    shares = shares if shares is not None else COMPONENT_MEMORY_SHARES
    rng = np.random.default_rng(seed)
    ids = firmware_ids(firmware_count)
    rows, start = [], 0
    for cpe, (memory, total) in sorted(shares.items()):
        rows.extend(_memory_rows(rng, start, memory, total, ids, SEVERITIES.HIGH, cpe))
        start += total
    return rows


def zipf_cwe_counts(cwe_ids: Sequence[str], total: int, exponent: float = 1.1) -> Dict[str, int]:
    """Occurrence count per CWE following a Zipf law over the given order.

    The first CWE is the most frequent. Counts are the Zipf probabilities
    times ``total``, floored.

    """
    weights = stats.zipfian(exponent, len(cwe_ids)).pmf(np.arange(1, len(cwe_ids) + 1))
    counts = np.floor(weights * total).astype(int)
    return {cwe_id: int(count) for cwe_id, count in zip(cwe_ids, counts)}


def zipf_cwe_corpus(cwe_ids: Sequence[str], total: int, exponent: float = 1.1, firmware_count: int = 50,
                    seed: int = 10) -> Tuple[List[Occurrence], List[Tuple[str, int]]]:
    """A ledger whose CWE frequencies follow a Zipf law.

    Returns
    -------
        The shuffled rows and the ground-truth ranking as ``(cwe_id, count)``
        pairs, count descending with ties broken by id.

    """
    rng = np.random.default_rng(seed)
    counts = zipf_cwe_counts(cwe_ids, total, exponent)
    ids = firmware_ids(firmware_count)
    rows, n = [], 0
    for cwe_id, count in counts.items():
        for _ in range(count):
            rows.append(_row(n, str(rng.choice(ids)), SYNTHETIC_CPE, cwe_id, str(rng.choice(SEVERITIES)),
                             str(rng.choice(MEMORY_CLASSES))))
            n += 1
    rng.shuffle(rows)
    ranking = sorted(((c, k) for c, k in counts.items() if k > 0), key=lambda item: (-item[1], item[0]))
    return rows, ranking


def random_ledger(size: int, firmware_count: int = 100, component_count: int = 30,
                  seed: int = 10000) -> List[Occurrence]:
    """Arbitrary rows for property checks of the aggregates."""
    rng = np.random.default_rng(seed)
    cpes = [f'cpe:2.3:a:vendor{k % 7}:product{k}:1.{k}:*:*:*:*:*:*:*' for k in range(component_count)]
    ids = firmware_ids(firmware_count)
    cwes = MEMORY_CWES + OTHER_CWES
    return [_row(n, str(rng.choice(ids)), str(rng.choice(cpes)), str(rng.choice(cwes)),
                 str(rng.choice(SEVERITIES)), str(rng.choice(MEMORY_CLASSES)))
            for n in range(size)]
