from typing import List

from firmscan.exceptions import UnresolvedVersion
from firmscan.inventory.cpe import ANY, Cpe23, format_cpe
from firmscan.vulndb.index import VulnIndex
from firmscan.vulndb.records import CpeMatchRange, CveRecord
from firmscan.vulndb.versions import compare_versions


def version_in_range(configuration: CpeMatchRange, version: str) -> bool:
    """Whether a literal version satisfies one configuration.

    A literal base version must compare equal. An ANY base version matches
    every version inside the optional bounds. An NA base version matches
    nothing.

    """
    base_version = configuration.base.version
    if isinstance(base_version, str):
        return compare_versions(version, base_version) == 0
    if base_version is not ANY:
        return False
    start, end = configuration.version_start, configuration.version_end
    if start is not None:
        order = compare_versions(version, start.value)
        if order < 0 or (order == 0 and not start.inclusive):
            return False
    if end is not None:
        order = compare_versions(version, end.value)
        if order > 0 or (order == 0 and not end.inclusive):
            return False
    return True


def configuration_matches(configuration: CpeMatchRange, cpe: Cpe23) -> bool:
    return configuration.base.key == cpe.key and version_in_range(configuration, cpe.version)


def match_cpe(index: VulnIndex, cpe: Cpe23) -> List[CveRecord]:
    """Finds the CVE records affecting a concrete product version.

    Parameters
    ----------
    index
        The vulnerability index.
    cpe
        A CPE with literal vendor, product and version.

    Returns
    -------
        Records with at least one matching configuration, sorted by id.

    Raises
    ------
    UnresolvedVersion
        If the CPE version is ANY or NA.

    """
    if not cpe.has_version or not isinstance(cpe.vendor, str) or not isinstance(cpe.product, str):
        raise UnresolvedVersion(f'{format_cpe(cpe)} has no literal vendor, product and version to match.')
    return [record for record in index.lookup(cpe.vendor, cpe.product)
            if any(configuration_matches(c, cpe) for c in record.configurations)]
