"""Choosing and extracting the root filesystem of a firmware image."""
from dataclasses import replace
from typing import List, Tuple
import zlib

from loguru import logger

from firmscan import globals as project_globals
from firmscan.globals import FILESYSTEM_KINDS, SIGNATURE_KINDS
from firmscan.exceptions import (AllExtractionsFailed, ExtractionError, NoFilesystemFound,
                                 UnsupportedFilesystem)
from firmscan.extraction.image import RawFirmware, carve_region
from firmscan.extraction.signatures import SignatureHit, scan_bytes, scan_signatures
from firmscan.extraction.squashfs import extract_squashfs
from firmscan.extraction.tree import FilesystemTree


def inflate_gzip_stream(data: bytes, limit: int = project_globals.GZIP_INFLATE_LIMIT) -> bytes:
    """Inflates one gzip member, refusing to produce more than ``limit`` bytes."""
    decompressor = zlib.decompressobj(16 + zlib.MAX_WBITS)
    try:
        out = decompressor.decompress(data, limit + 1)
    except zlib.error as e:
        raise ExtractionError(f'Cannot inflate gzip stream: {e}') from e
    if len(out) > limit:
        raise ExtractionError(f'Gzip stream inflates past the {limit} byte limit.')
    return out


def _extract_filesystem(kind: str, blob: bytes) -> FilesystemTree:
    if kind == SIGNATURE_KINDS.SQUASHFS:
        return extract_squashfs(blob)
    raise UnsupportedFilesystem(f'{kind} content extraction is not supported.')


def _extract_from_gzip(hit: SignatureHit, blob: bytes) -> Tuple[FilesystemTree, SignatureHit]:
    try:
        inflated = inflate_gzip_stream(blob)
    except ExtractionError as e:
        raise NoFilesystemFound(f'Gzip stream at 0x{hit.offset:x} does not inflate: {e}') from e
    inner_hits = [h for h in scan_bytes(inflated) if h.kind in FILESYSTEM_KINDS]
    if not inner_hits:
        raise NoFilesystemFound(f'Gzip stream at 0x{hit.offset:x} holds no filesystem.')
    errors = []
    for inner in inner_hits:
        try:
            tree = _extract_filesystem(inner.kind, inflated[inner.offset:])
        except ExtractionError as e:
            errors.append(f'{inner.kind}@0x{inner.offset:x}: {e}')
            continue
        detail = f'{inner.kind} at inflated offset 0x{inner.offset:x}'
        return tree, replace(hit, detail=detail)
    raise ExtractionError(f'No filesystem inside the gzip stream could be extracted ({"; ".join(errors)}).')


def extract_root_filesystem(image: RawFirmware) -> Tuple[FilesystemTree, SignatureHit]:
    """Extracts the first extractable filesystem of an image.

    Filesystem hits and gzip streams are tried in offset order. A gzip
    stream is inflated once and its content scanned for filesystems; no
    further nesting is followed.

    Parameters
    ----------
    image
        The firmware image.

    Returns
    -------
        The tree and the hit it was extracted from.

    Raises
    ------
    NoFilesystemFound
        If the image holds no filesystem signature.
    AllExtractionsFailed
        If filesystem signatures were found but none could be extracted.

    """
    candidates = [hit for hit in scan_signatures(image)
                  if hit.kind in FILESYSTEM_KINDS or hit.kind == SIGNATURE_KINDS.GZIP]
    failures: List[Tuple[SignatureHit, Exception]] = []
    for hit in candidates:
        blob = carve_region(image, hit.offset)
        try:
            if hit.kind == SIGNATURE_KINDS.GZIP:
                tree, hit = _extract_from_gzip(hit, blob)
            else:
                tree = _extract_filesystem(hit.kind, blob)
        except ExtractionError as e:
            logger.debug(f'{hit.kind} at 0x{hit.offset:x} in {image.source_id} failed: {e}')
            failures.append((hit, e))
            continue
        logger.debug(f'Extracted {hit.kind} at 0x{hit.offset:x} from {image.source_id}.')
        return tree, hit

    # Gzip streams that do not inflate to a filesystem are not filesystem hits.
    if all(isinstance(error, NoFilesystemFound) for _, error in failures):
        raise NoFilesystemFound(f'No filesystem signature found in {image.source_id}.')
    raise AllExtractionsFailed(failures)
