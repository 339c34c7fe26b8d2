"""On-disk cache of extracted root filesystems.

Each image gets ``<cache>/extracted/<image-digest>/`` with the materialized
tree under ``rootfs/`` and a ``manifest.json`` describing every entry and the
winning signature hit.

"""
from dataclasses import asdict
import json
import os
from pathlib import Path
import shutil
import tempfile
from typing import Optional, Tuple
import uuid

from loguru import logger

from firmscan import globals as project_globals
from firmscan import paths
from firmscan.globals import ENTRY_KINDS
from firmscan.extraction.signatures import SignatureHit
from firmscan.extraction.tree import FilesystemTree, FsEntry
from firmscan.utilities import raw_path, sha256_hex

MANIFEST_FORMAT_VERSION = 1
ROOTFS_DIR = 'rootfs'
PUBLISH_ATTEMPTS = 5


def _materialize_entry(rootfs: bytes, entry: FsEntry, tree: FilesystemTree):
    target = os.path.join(rootfs, raw_path(entry.path))
    if entry.kind == ENTRY_KINDS.DIR:
        os.mkdir(target)
    elif entry.kind == ENTRY_KINDS.SYMLINK:
        os.symlink(raw_path(entry.link_target), target)
    else:
        with open(target, 'wb') as f:
            f.write(tree.read_content(entry.content_digest))


def tree_manifest(tree: FilesystemTree, image_digest: str, hit: Optional[SignatureHit] = None) -> dict:
    """JSON-ready description of a tree and the hit it was extracted from."""
    return {
        'format_version': MANIFEST_FORMAT_VERSION,
        'image_digest': image_digest,
        'root_label': tree.root_label,
        'hit': asdict(hit) if hit is not None else None,
        'entries': [asdict(entry) for entry in tree.entries],
    }


def materialize_tree(tree: FilesystemTree, cache_dir: Path, image_digest: str,
                     hit: Optional[SignatureHit] = None) -> Path:
    """Writes a tree and its manifest into the extraction cache.

    The entry is built under a temporary name and renamed into place. A
    complete entry already cached for the digest is kept as it is; a
    damaged one is replaced.

    Parameters
    ----------
    tree
        The extracted tree.
    cache_dir
        The cache root.
    image_digest
        Digest of the image the tree was extracted from.
    hit
        The signature hit the tree came from, if any.

    Returns
    -------
        The cache directory of the image.

    """
    destination = paths.extraction_cache_dir(cache_dir, image_digest)
    destination.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(dir=destination.parent, prefix=f'.{image_digest[:12]}-'))
    try:
        rootfs = os.fsencode(staging / ROOTFS_DIR)
        os.mkdir(rootfs)
        # Entries are sorted, so parents are always created first.
        for entry in tree.entries:
            _materialize_entry(rootfs, entry, tree)
        manifest = tree_manifest(tree, image_digest, hit)
        (staging / project_globals.MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True))
        for _ in range(PUBLISH_ATTEMPTS):
            if load_cached_tree(cache_dir, image_digest) is not None:
                logger.debug(f'{destination} already holds a complete extraction; keeping it.')
                shutil.rmtree(staging, ignore_errors=True)
                return destination
            if destination.exists():
                _retire(destination)
            try:
                os.rename(staging, destination)
                break
            except OSError:
                # Another writer published the same digest in between.
                continue
        else:
            raise OSError(f'Could not publish the extraction of {image_digest} at {destination}.')
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    logger.debug(f'Materialized {len(tree)} entries at {destination}.')
    return destination


def _retire(destination: Path):
    """Moves a stale cache entry to a fresh name and deletes it there."""
    retired = destination.parent / f'.{destination.name[:12]}-stale-{uuid.uuid4().hex}'
    try:
        os.rename(destination, retired)
    except FileNotFoundError:
        return
    shutil.rmtree(retired, ignore_errors=True)


def load_cached_tree(cache_dir: Path, image_digest: str) -> Optional[Tuple[FilesystemTree, Optional[SignatureHit]]]:
    """Loads a previously materialized tree.

    Returns
    -------
        The tree and its winning hit, or ``None`` when the image is not cached
        or the cached copy is stale or damaged.

    """
    location = paths.extraction_cache_dir(cache_dir, image_digest)
    manifest_path = location / project_globals.MANIFEST_FILE
    if not manifest_path.exists():
        return None
    try:
        manifest = json.loads(manifest_path.read_text())
        if manifest.get('format_version') != MANIFEST_FORMAT_VERSION:
            raise ValueError(f'format version {manifest.get("format_version")}')
        rootfs = os.fsencode(location / ROOTFS_DIR)
        entries, blobs = [], {}
        for item in manifest['entries']:
            entry = FsEntry(**item)
            if entry.kind == ENTRY_KINDS.FILE:
                with open(os.path.join(rootfs, raw_path(entry.path)), 'rb') as f:
                    content = f.read()
                if sha256_hex(content) != entry.content_digest:
                    raise ValueError(f'content of {entry.path!r} changed')
                blobs[entry.content_digest] = content
            entries.append(entry)
        tree = FilesystemTree(entries=tuple(entries), root_label=manifest['root_label'], blobs=blobs)
        hit = SignatureHit(**manifest['hit']) if manifest['hit'] is not None else None
    except (OSError, ValueError, KeyError, TypeError) as e:
        logger.warning(f'Ignoring damaged extraction cache at {location}: {e}')
        return None
    return tree, hit
