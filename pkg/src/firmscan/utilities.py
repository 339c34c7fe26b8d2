import hashlib
import os


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def raw_path(path: str) -> bytes:
    """The raw on-disk bytes of a tree path.

    Tree paths are stored as ``str`` decoded with ``surrogateescape`` so
    non-UTF-8 names survive a round trip; this recovers the original bytes.

    """
    return os.fsencode(path)


def display_path(path: str) -> str:
    """A printable rendering of a tree path (invalid UTF-8 replaced)."""
    return raw_path(path).decode('utf-8', errors='replace')
