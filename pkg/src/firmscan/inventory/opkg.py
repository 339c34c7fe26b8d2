"""Parsing of opkg package database status files."""
import re
from typing import List, NamedTuple, Optional


class OpkgPackage(NamedTuple):
    name: str
    version: str
    architecture: Optional[str] = None


class OpkgParseResult(NamedTuple):
    packages: List[OpkgPackage]
    skipped_count: int


FIELD = re.compile(r'^([A-Za-z0-9][A-Za-z0-9_-]*):\s*(.*)$')


def _parse_stanza(lines: List[str]) -> dict:
    stanza = {}
    last = None
    for line in lines:
        if line[:1] in (' ', '\t') and last is not None:
            stanza[last] += '\n' + line.strip()
            continue
        match = FIELD.match(line)
        if match is None:
            continue
        last = match.group(1).lower()
        stanza[last] = match.group(2).strip()
    return stanza


def parse_opkg_status(text: str) -> OpkgParseResult:
    """Reads the package stanzas of an opkg ``status`` file.

    Stanzas are separated by blank lines. A stanza without both a
    ``Package`` and a ``Version`` field is skipped and counted.

    Parameters
    ----------
    text
        Contents of the status file.

    Returns
    -------
        The packages in file order and the number of skipped stanzas.

    """
    packages, skipped = [], 0
    for block in re.split(r'\n[ \t]*\n', text.replace('\r\n', '\n')):
        lines = [line for line in block.split('\n') if line.strip()]
        if not lines:
            continue
        stanza = _parse_stanza(lines)
        name, version = stanza.get('package'), stanza.get('version')
        if not name or not version:
            skipped += 1
            continue
        packages.append(OpkgPackage(name, version, stanza.get('architecture') or None))
    return OpkgParseResult(packages, skipped)
