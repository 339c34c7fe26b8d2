from dataclasses import dataclass
import re
from typing import Optional, Tuple

from firmscan import globals as project_globals
from firmscan.inventory.cpe import Cpe23, format_cpe, parse_cpe

CVE_ID = re.compile(r'CVE-\d{4}-\d{4,}')


@dataclass(frozen=True)
class CvssScore:
    score: float
    vector: str = ''
    version: str = ''

    def __post_init__(self):
        if not 0.0 <= self.score <= 10.0:
            raise ValueError(f'CVSS score {self.score} outside [0.0, 10.0].')

    def to_dict(self) -> dict:
        return {'score': self.score, 'vector': self.vector, 'version': self.version}

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> Optional['CvssScore']:
        return cls(**data) if data is not None else None


@dataclass(frozen=True)
class VersionBound:
    value: str
    inclusive: bool


@dataclass(frozen=True)
class CpeMatchRange:
    """One vulnerable configuration: a CPE with an optional version range.

    Bounds are only set when the base CPE has no literal version.

    """
    base: Cpe23
    version_start: Optional[VersionBound] = None
    version_end: Optional[VersionBound] = None

    def __post_init__(self):
        if self.base.has_version and (self.version_start or self.version_end):
            raise ValueError(f'{format_cpe(self.base)} has a literal version and a version range.')

    def to_dict(self) -> dict:
        data = {'criteria': format_cpe(self.base)}
        for name, bound in (('start', self.version_start), ('end', self.version_end)):
            if bound is not None:
                data[name] = {'value': bound.value, 'inclusive': bound.inclusive}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'CpeMatchRange':
        start, end = data.get('start'), data.get('end')
        return cls(base=parse_cpe(data['criteria']),
                   version_start=VersionBound(**start) if start else None,
                   version_end=VersionBound(**end) if end else None)


@dataclass(frozen=True)
class CveRecord:
    """A CVE with its weaknesses, CVSS scores and vulnerable configurations.

    ``cwe_ids`` holds ``CWE-<n>`` identifiers in feed order, or the NVD
    sentinels when the feed gives no usable weakness.

    """
    id: str
    description: str
    cwe_ids: Tuple[str, ...] = (project_globals.CWE_NOINFO,)
    cvss31: Optional[CvssScore] = None
    cvss2: Optional[CvssScore] = None
    configurations: Tuple[CpeMatchRange, ...] = ()

    def __post_init__(self):
        if not CVE_ID.fullmatch(self.id):
            raise ValueError(f'Invalid CVE id {self.id!r}.')
        object.__setattr__(self, 'cwe_ids', tuple(self.cwe_ids))
        object.__setattr__(self, 'configurations', tuple(self.configurations))

    @property
    def has_cwe_info(self) -> bool:
        return any(cwe.startswith('CWE-') for cwe in self.cwe_ids)

    def to_dict(self) -> dict:
        return {
            'id': self.id,
            'description': self.description,
            'cwe_ids': list(self.cwe_ids),
            'cvss31': self.cvss31.to_dict() if self.cvss31 else None,
            'cvss2': self.cvss2.to_dict() if self.cvss2 else None,
            'configurations': [c.to_dict() for c in self.configurations],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'CveRecord':
        return cls(id=data['id'],
                   description=data['description'],
                   cwe_ids=tuple(data['cwe_ids']),
                   cvss31=CvssScore.from_dict(data.get('cvss31')),
                   cvss2=CvssScore.from_dict(data.get('cvss2')),
                   configurations=tuple(CpeMatchRange.from_dict(c) for c in data['configurations']))
