"""CPE 2.3 names and their formatted-string binding.

Attribute values are held unescaped. A value is either a literal string or
one of the :class:`Logical` values ``ANY`` (``*``) and ``NA`` (``-``).

"""
from dataclasses import dataclass, fields
import enum
import re
from typing import List, Tuple, Union

from firmscan.exceptions import InvalidAttribute, MalformedCpe

PREFIX = 'cpe:2.3:'
FIELD_COUNT = 13
PARTS = ('a', 'o', 'h')
UNQUOTED = re.compile(r'[A-Za-z0-9._\-]')
CONTROL = re.compile(r'[\x00-\x1f\x7f]')


class Logical(enum.Enum):
    ANY = '*'
    NA = '-'

    def __repr__(self):
        return f'Logical.{self.name}'


ANY = Logical.ANY
NA = Logical.NA

Value = Union[str, Logical]


@dataclass(frozen=True)
class Cpe23:
    part: str
    vendor: Value
    product: Value
    version: Value = ANY
    update: Value = ANY
    edition: Value = ANY
    language: Value = ANY
    sw_edition: Value = ANY
    target_sw: Value = ANY
    target_hw: Value = ANY
    other: Value = ANY

    def __post_init__(self):
        if self.part not in PARTS:
            raise InvalidAttribute(f'CPE part must be one of {PARTS}, got {self.part!r}.')
        for attribute in fields(self)[1:]:
            value = getattr(self, attribute.name)
            if isinstance(value, Logical):
                continue
            if not isinstance(value, str) or not value:
                raise InvalidAttribute(f'CPE {attribute.name} must be a non-empty string or a logical value.')
            if CONTROL.search(value):
                raise InvalidAttribute(f'CPE {attribute.name} {value!r} contains control characters.')

    @property
    def key(self) -> Tuple[str, str]:
        """Case-folded ``(vendor, product)`` used for index lookups."""
        return _fold(self.vendor), _fold(self.product)

    @property
    def has_version(self) -> bool:
        return isinstance(self.version, str)

    def values(self) -> List[Value]:
        return [getattr(self, f.name) for f in fields(self)]

    def __str__(self) -> str:
        return format_cpe(self)


def _fold(value: Value) -> str:
    return value.lower() if isinstance(value, str) else value.value


def _escape(value: Value) -> str:
    if isinstance(value, Logical):
        return value.value
    if value == '-':
        return '\\-'
    return ''.join(c if UNQUOTED.fullmatch(c) else '\\' + c for c in value)


def format_cpe(cpe: Cpe23) -> str:
    """Binds a CPE to its canonical formatted string (13 fields, ``*`` for ANY)."""
    return 'cpe:2.3:' + ':'.join([cpe.part] + [_escape(v) for v in cpe.values()[1:]])


def _split_fields(text: str) -> List[str]:
    parts, current, escaped = [], [], False
    for char in text:
        if escaped:
            current.append('\\' + char)
            escaped = False
        elif char == '\\':
            escaped = True
        elif char == ':':
            parts.append(''.join(current))
            current = []
        else:
            current.append(char)
    if escaped:
        raise MalformedCpe(f'Dangling escape at the end of {text!r}.')
    parts.append(''.join(current))
    return parts


def _unbind(raw: str, strict: bool, text: str) -> Value:
    if raw == '*' or (raw == '' and not strict):
        return ANY
    if raw == '-':
        return NA
    if raw == '':
        raise MalformedCpe(f'Empty attribute in {text!r}.')
    value, index = [], 0
    while index < len(raw):
        char = raw[index]
        if char == '\\':
            value.append(raw[index + 1])
            index += 2
            continue
        if char in '*?':
            raise MalformedCpe(f'Wildcard {char!r} inside attribute {raw!r} of {text!r} is not supported.')
        value.append(char)
        index += 1
    return ''.join(value)


def parse_cpe(text: str, strict: bool = False) -> Cpe23:
    """Parses a CPE 2.3 formatted string.

    Parameters
    ----------
    text
        The formatted string, starting with ``cpe:2.3:``.
    strict
        When false, missing trailing fields and empty fields are read as
        ANY. When true, exactly 13 non-empty fields are required.

    Raises
    ------
    MalformedCpe
        On a wrong prefix, a bad field count, a bad escape or an invalid part.

    """
    if not isinstance(text, str) or not text.startswith(PREFIX):
        raise MalformedCpe(f'{text!r} does not start with {PREFIX!r}.')
    parts = _split_fields(text)
    if len(parts) > FIELD_COUNT or (strict and len(parts) != FIELD_COUNT):
        raise MalformedCpe(f'{text!r} has {len(parts)} fields, expected {FIELD_COUNT}.')
    if len(parts) < 5:
        raise MalformedCpe(f'{text!r} is missing the part, vendor or product.')
    parts += [''] * (FIELD_COUNT - len(parts))
    part = parts[2]
    if part not in PARTS:
        raise MalformedCpe(f'{text!r} has invalid part {part!r}.')
    values = [_unbind(raw, strict, text) for raw in parts[3:]]
    try:
        return Cpe23(part, *values)
    except InvalidAttribute as e:
        raise MalformedCpe(f'{text!r}: {e}') from e


def to_cpe(vendor: str, product: str, version: Union[str, Logical] = ANY) -> Cpe23:
    """Builds an application CPE from inventory names.

    Names are lowercased and white-space runs become ``_``; the remaining
    attributes are ANY.

    Raises
    ------
    InvalidAttribute
        If vendor or product is empty or any value contains control characters.

    """
    def clean(name: str, label: str) -> str:
        if CONTROL.search(name):
            raise InvalidAttribute(f'{label} {name!r} contains control characters.')
        name = re.sub(r'\s+', '_', name.strip().lower())
        if not name:
            raise InvalidAttribute(f'{label} must not be empty.')
        return name

    if isinstance(version, str):
        version = clean(version, 'Version') if version.strip() else ANY
    return Cpe23('a', clean(vendor, 'Vendor'), clean(product, 'Product'), version)
