"""In-memory representation of an extracted root filesystem."""
from dataclasses import dataclass, field
import os
from typing import Dict, Iterator, List, Optional, Tuple, Union

from firmscan.globals import ENTRY_KINDS, EMPTY_DIGEST
from firmscan.exceptions import InconsistentTree
from firmscan.utilities import raw_path, sha256_hex


@dataclass(frozen=True)
class FsEntry:
    """One file, directory or symbolic link below the root.

    ``path`` is relative to the root with ``/`` separators and is stored
    as ``str`` decoded with ``surrogateescape``.

    """
    path: str
    kind: str
    size: int = 0
    mode: int = 0
    content_digest: str = ''
    link_target: str = ''

    @property
    def parent(self) -> str:
        return self.path.rpartition('/')[0]

    @property
    def name(self) -> str:
        return self.path.rpartition('/')[2]


def normalize_path(path: Union[str, bytes]) -> str:
    """Normalizes a path to the stored form.

    Leading separators, ``.`` components and empty components are
    dropped, ``..`` removes the previous component but never climbs
    above the root.

    """
    if isinstance(path, bytes):
        path = os.fsdecode(path)
    parts = []
    for part in path.split('/'):
        if part in ('', '.'):
            continue
        if part == '..':
            if parts:
                parts.pop()
            continue
        parts.append(part)
    return '/'.join(parts)


def _sort_key(path: str) -> bytes:
    return raw_path(path)


@dataclass(frozen=True)
class FilesystemTree:
    """An extracted root filesystem.

    Entries are unique, normalized and sorted by their raw path bytes, and
    every entry's parent directory is itself an entry. File contents are
    kept in a digest-keyed blob store that does not take part in equality.

    """
    entries: Tuple[FsEntry, ...]
    root_label: str = field(default='', compare=False)
    blobs: Dict[str, bytes] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'entries', tuple(self.entries))
        kinds = {}
        previous = None
        for entry in self.entries:
            if not entry.path or normalize_path(entry.path) != entry.path:
                raise InconsistentTree(f'Entry path {entry.path!r} is not normalized.')
            key = _sort_key(entry.path)
            if previous is not None and key <= previous:
                raise InconsistentTree(f'Entries are not sorted and unique at {entry.path!r}.')
            previous = key
            if entry.parent and entry.parent not in kinds:
                raise InconsistentTree(f'Parent directory of {entry.path!r} is missing.')
            if entry.parent and kinds[entry.parent] != ENTRY_KINDS.DIR:
                raise InconsistentTree(f'Parent of {entry.path!r} is a {kinds[entry.parent]}, not a directory.')
            if entry.kind == ENTRY_KINDS.FILE and not entry.content_digest:
                raise InconsistentTree(f'File {entry.path!r} has no content digest.')
            if entry.kind == ENTRY_KINDS.DIR and entry.size:
                raise InconsistentTree(f'Directory {entry.path!r} has a non-zero size.')
            kinds[entry.path] = entry.kind

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[FsEntry]:
        return iter(self.entries)

    def get(self, path: str) -> Optional[FsEntry]:
        path = normalize_path(path)
        for entry in self.entries:
            if entry.path == path:
                return entry
        return None

    def files(self) -> List[FsEntry]:
        return [e for e in self.entries if e.kind == ENTRY_KINDS.FILE]

    def read_content(self, digest: str) -> bytes:
        """Returns the content of a file by its SHA-256 digest.

        Raises
        ------
        KeyError
            If no file in the tree has that digest.

        """
        if digest == EMPTY_DIGEST:
            return b''
        return self.blobs[digest]


class TreeBuilder:
    """Accumulates entries from an extractor and produces a valid tree.

    Missing parent directories are created with mode ``0o755``. Adding the
    same path twice keeps the last entry.

    """

    def __init__(self, root_label: str = ''):
        self.root_label = root_label
        self._entries: Dict[str, FsEntry] = {}
        self._blobs: Dict[str, bytes] = {}

    def _put(self, entry: FsEntry):
        if not entry.path:
            return
        self._entries[entry.path] = entry

    def add_dir(self, path: Union[str, bytes], mode: int = 0o755):
        self._put(FsEntry(path=normalize_path(path), kind=ENTRY_KINDS.DIR, mode=mode & 0o7777))

    def add_file(self, path: Union[str, bytes], content: bytes, mode: int = 0o644):
        digest = sha256_hex(content)
        self._blobs.setdefault(digest, content)
        self._put(FsEntry(path=normalize_path(path), kind=ENTRY_KINDS.FILE, size=len(content),
                          mode=mode & 0o7777, content_digest=digest))

    def add_symlink(self, path: Union[str, bytes], target: Union[str, bytes], mode: int = 0o777):
        if isinstance(target, bytes):
            target = os.fsdecode(target)
        self._put(FsEntry(path=normalize_path(path), kind=ENTRY_KINDS.SYMLINK,
                          size=len(raw_path(target)), mode=mode & 0o7777, link_target=target))

    def build(self) -> FilesystemTree:
        entries = dict(self._entries)
        for path in list(entries):
            parent = path.rpartition('/')[0]
            while parent and parent not in entries:
                entries[parent] = FsEntry(path=parent, kind=ENTRY_KINDS.DIR, mode=0o755)
                parent = parent.rpartition('/')[0]
        ordered = sorted(entries.values(), key=lambda e: _sort_key(e.path))
        used = {e.content_digest for e in ordered if e.kind == ENTRY_KINDS.FILE}
        blobs = {digest: data for digest, data in self._blobs.items() if digest in used}
        return FilesystemTree(entries=tuple(ordered), root_label=self.root_label, blobs=blobs)
