"""Native reader for SquashFS 4.0 images compressed with gzip.

.. admonition::

   Logging in this module should be done at the ``debug`` level.

"""
import struct
from typing import Dict, List, Tuple
import zlib

from loguru import logger

from firmscan import globals as project_globals
from firmscan.exceptions import (CorruptSuperblock, ExtractionError, TruncatedImage,
                                 UnsupportedCompressor, UnsupportedFilesystem)
from firmscan.extraction.tree import FilesystemTree, TreeBuilder

SUPERBLOCK = struct.Struct('<4sIIIIHHHHHHQQQQQQQQ')
INODE_HEADER = struct.Struct('<HHHHII')
DIR_HEADER = struct.Struct('<III')
DIR_ENTRY = struct.Struct('<HhHH')
FRAGMENT_ENTRY = struct.Struct('<QII')

GZIP_COMPRESSOR = 1
METADATA_BLOCK_SIZE = 8192
METADATA_UNCOMPRESSED = 0x8000
DATA_BLOCK_UNCOMPRESSED = 0x1000000
NO_FRAGMENT = 0xFFFFFFFF
FRAGMENTS_PER_BLOCK = METADATA_BLOCK_SIZE // FRAGMENT_ENTRY.size


class INODE_TYPES:
    DIR = 1
    FILE = 2
    SYMLINK = 3
    BLOCK_DEVICE = 4
    CHAR_DEVICE = 5
    FIFO = 6
    SOCKET = 7
    EXT_DIR = 8
    EXT_FILE = 9
    EXT_SYMLINK = 10
    EXT_BLOCK_DEVICE = 11
    EXT_CHAR_DEVICE = 12
    EXT_FIFO = 13
    EXT_SOCKET = 14


# Payload layout of the inode types that carry no data we keep.
SPECIAL_INODE_PAYLOADS = {
    INODE_TYPES.BLOCK_DEVICE: struct.Struct('<II'),
    INODE_TYPES.CHAR_DEVICE: struct.Struct('<II'),
    INODE_TYPES.FIFO: struct.Struct('<I'),
    INODE_TYPES.SOCKET: struct.Struct('<I'),
    INODE_TYPES.EXT_BLOCK_DEVICE: struct.Struct('<III'),
    INODE_TYPES.EXT_CHAR_DEVICE: struct.Struct('<III'),
    INODE_TYPES.EXT_FIFO: struct.Struct('<II'),
    INODE_TYPES.EXT_SOCKET: struct.Struct('<II'),
}


class Superblock:

    def __init__(self, blob: bytes):
        if len(blob) < SUPERBLOCK.size:
            raise CorruptSuperblock(f'Need {SUPERBLOCK.size} bytes for a superblock, got {len(blob)}.')
        (self.magic, self.inode_count, self.mtime, self.block_size, self.fragment_count,
         self.compressor, self.block_log, self.flags, self.id_count, self.major, self.minor,
         self.root_inode, self.bytes_used, self.id_table, self.xattr_table, self.inode_table,
         self.directory_table, self.fragment_table, self.export_table) = SUPERBLOCK.unpack_from(blob)

        if self.magic == project_globals.SQUASHFS_MAGIC_BE:
            raise UnsupportedFilesystem('Big-endian SquashFS images are not supported.')
        if self.magic != project_globals.SQUASHFS_MAGIC_LE:
            raise CorruptSuperblock(f'Bad SquashFS magic {self.magic!r}.')
        if (self.major, self.minor) != (4, 0):
            raise CorruptSuperblock(f'Unsupported SquashFS version {self.major}.{self.minor}.')
        if self.compressor != GZIP_COMPRESSOR:
            raise UnsupportedCompressor(f'SquashFS compressor id {self.compressor} is not gzip; '
                                        f'an external unpacker is needed.')
        if not 4096 <= self.block_size <= 1024 * 1024 or self.block_size != 1 << self.block_log:
            raise CorruptSuperblock(f'Invalid block size {self.block_size} (log {self.block_log}).')


def _inflate(data: bytes, limit: int) -> bytes:
    decompressor = zlib.decompressobj()
    try:
        out = decompressor.decompress(data, limit + 1)
    except zlib.error as e:
        raise ExtractionError(f'Cannot inflate block: {e}') from e
    if len(out) > limit:
        raise ExtractionError(f'Block inflates past its {limit} byte limit.')
    return out


class _MetadataCursor:
    """Sequential reader over a chain of metadata blocks."""

    def __init__(self, reader: 'SquashfsReader', table_start: int, block: int, offset: int):
        self.reader = reader
        self.position = table_start + block
        self.offset = offset

    def read(self, length: int) -> bytes:
        out = bytearray()
        while len(out) < length:
            data, next_position = self.reader.metadata_block(self.position)
            if self.offset > len(data):
                raise CorruptSuperblock(f'Metadata offset {self.offset} past block end at {self.position}.')
            chunk = data[self.offset:self.offset + length - len(out)]
            out += chunk
            self.offset += len(chunk)
            if self.offset == len(data) and len(out) < length:
                self.position, self.offset = next_position, 0
        return bytes(out)

    def unpack(self, layout: struct.Struct) -> tuple:
        return layout.unpack(self.read(layout.size))


class SquashfsReader:

    def __init__(self, blob: bytes):
        self.blob = blob
        self.superblock = Superblock(blob)
        self._metadata: Dict[int, Tuple[bytes, int]] = {}
        self._fragments: Dict[int, Tuple[int, int]] = {}

    def _slice(self, start: int, length: int) -> bytes:
        if start < 0 or start + length > len(self.blob):
            raise TruncatedImage(f'Block at {start} of {length} bytes extends past the end of '
                                 f'the {len(self.blob)} byte image.')
        return self.blob[start:start + length]

    def metadata_block(self, position: int) -> Tuple[bytes, int]:
        if position not in self._metadata:
            header, = struct.unpack('<H', self._slice(position, 2))
            size = header & ~METADATA_UNCOMPRESSED & 0xFFFF
            raw = self._slice(position + 2, size)
            data = raw if header & METADATA_UNCOMPRESSED else _inflate(raw, METADATA_BLOCK_SIZE)
            self._metadata[position] = (data, position + 2 + size)
        return self._metadata[position]

    def cursor(self, table_start: int, reference: int) -> _MetadataCursor:
        return _MetadataCursor(self, table_start, reference >> 16, reference & 0xFFFF)

    def fragment(self, index: int) -> Tuple[int, int]:
        if index >= self.superblock.fragment_count:
            raise CorruptSuperblock(f'Fragment {index} out of range.')
        if index not in self._fragments:
            pointer_at = self.superblock.fragment_table + 8 * (index // FRAGMENTS_PER_BLOCK)
            table_start, = struct.unpack('<Q', self._slice(pointer_at, 8))
            cursor = _MetadataCursor(self, table_start, 0, (index % FRAGMENTS_PER_BLOCK) * FRAGMENT_ENTRY.size)
            start, size, _ = cursor.unpack(FRAGMENT_ENTRY)
            self._fragments[index] = (start, size)
        return self._fragments[index]

    def _data_block(self, start: int, size_word: int) -> bytes:
        size = size_word & ~DATA_BLOCK_UNCOMPRESSED
        raw = self._slice(start, size)
        if size_word & DATA_BLOCK_UNCOMPRESSED:
            return raw
        return _inflate(raw, self.superblock.block_size)

    def read_file(self, blocks_start: int, file_size: int, fragment: int, block_offset: int,
                  block_sizes: List[int]) -> bytes:
        block_size = self.superblock.block_size
        out = bytearray()
        position = blocks_start
        for size_word in block_sizes:
            on_disk = size_word & ~DATA_BLOCK_UNCOMPRESSED
            if on_disk == 0:
                out += bytes(min(block_size, file_size - len(out)))
                continue
            out += self._data_block(position, size_word)
            position += on_disk
        if fragment != NO_FRAGMENT:
            start, size_word = self.fragment(fragment)
            tail = self._data_block(start, size_word)
            tail_length = file_size % block_size
            if block_offset + tail_length > len(tail):
                raise CorruptSuperblock(f'Fragment {fragment} is shorter than its file tail.')
            out += tail[block_offset:block_offset + tail_length]
        if len(out) < file_size:
            raise CorruptSuperblock(f'File data is {len(out)} bytes, expected {file_size}.')
        return bytes(out[:file_size])

    def _block_count(self, file_size: int, fragment: int) -> int:
        if fragment == NO_FRAGMENT:
            return -(-file_size // self.superblock.block_size)
        return file_size // self.superblock.block_size

    def read_inode(self, reference: int) -> dict:
        """Decodes the inode at a packed ``(block << 16) | offset`` reference."""
        cursor = self.cursor(self.superblock.inode_table, reference)
        inode_type, permissions, _, _, _, number = cursor.unpack(INODE_HEADER)
        inode = {'type': inode_type, 'mode': permissions, 'number': number}

        if inode_type == INODE_TYPES.DIR:
            start_block, _, file_size, offset, _ = cursor.unpack(struct.Struct('<IIHHI'))
            inode.update(kind='dir', start_block=start_block, file_size=file_size, offset=offset)
        elif inode_type == INODE_TYPES.EXT_DIR:
            _, file_size, start_block, _, _, offset, _ = cursor.unpack(struct.Struct('<IIIIHHI'))
            inode.update(kind='dir', start_block=start_block, file_size=file_size, offset=offset)
        elif inode_type in (INODE_TYPES.FILE, INODE_TYPES.EXT_FILE):
            if inode_type == INODE_TYPES.FILE:
                blocks_start, fragment, block_offset, file_size = cursor.unpack(struct.Struct('<IIII'))
            else:
                blocks_start, file_size, _, _, fragment, block_offset, _ = cursor.unpack(
                    struct.Struct('<QQQIIII'))
            count = self._block_count(file_size, fragment)
            block_sizes = list(struct.unpack(f'<{count}I', cursor.read(4 * count)))
            inode.update(kind='file', content=self.read_file(blocks_start, file_size, fragment,
                                                             block_offset, block_sizes))
        elif inode_type in (INODE_TYPES.SYMLINK, INODE_TYPES.EXT_SYMLINK):
            _, target_size = cursor.unpack(struct.Struct('<II'))
            inode.update(kind='symlink', target=cursor.read(target_size))
        elif inode_type in SPECIAL_INODE_PAYLOADS:
            cursor.unpack(SPECIAL_INODE_PAYLOADS[inode_type])
            inode.update(kind='special')
        else:
            raise CorruptSuperblock(f'Unknown inode type {inode_type} at reference 0x{reference:x}.')
        return inode

    def list_directory(self, inode: dict) -> List[Tuple[bytes, int]]:
        """Returns ``(name, inode reference)`` pairs of a directory inode."""
        remaining = inode['file_size'] - 3
        if remaining <= 0:
            return []
        cursor = _MetadataCursor(self, self.superblock.directory_table, inode['start_block'], inode['offset'])
        children = []
        while remaining > 0:
            count, start, _ = cursor.unpack(DIR_HEADER)
            remaining -= DIR_HEADER.size
            if count >= 256:
                raise CorruptSuperblock(f'Directory header claims {count + 1} entries.')
            for _ in range(count + 1):
                offset, _, _, name_size = cursor.unpack(DIR_ENTRY)
                name = cursor.read(name_size + 1)
                remaining -= DIR_ENTRY.size + name_size + 1
                if b'/' in name or name in (b'.', b'..'):
                    raise CorruptSuperblock(f'Invalid directory entry name {name!r}.')
                children.append((name, (start << 16) | offset))
        if remaining < 0:
            raise CorruptSuperblock('Directory listing overruns its declared size.')
        return children


def extract_squashfs(blob: bytes) -> FilesystemTree:
    """Unpacks a SquashFS 4.0 image compressed with gzip.

    Parameters
    ----------
    blob
        Bytes starting with the superblock. Trailing bytes are ignored.

    Returns
    -------
        Every inode reachable from the root directory. Device, FIFO and
        socket inodes become empty files; symbolic links are never followed.

    Raises
    ------
    CorruptSuperblock
        If the magic, version or a structure in the image is invalid.
    UnsupportedCompressor
        If the image is not gzip-compressed.
    TruncatedImage
        If a block extends past the end of ``blob``.

    """
    reader = SquashfsReader(blob)
    superblock = reader.superblock
    logger.debug(f'SquashFS image: {superblock.inode_count} inodes, block size {superblock.block_size}, '
                 f'{superblock.fragment_count} fragments.')

    root = reader.read_inode(superblock.root_inode)
    if root['kind'] != 'dir':
        raise CorruptSuperblock('Root inode is not a directory.')

    builder = TreeBuilder(root_label=project_globals.SIGNATURE_KINDS.SQUASHFS)
    visited = {superblock.root_inode}
    pending = [(b'', root)]
    while pending:
        prefix, directory = pending.pop()
        for name, reference in reader.list_directory(directory):
            path = prefix + b'/' + name if prefix else name
            inode = reader.read_inode(reference)
            if inode['kind'] == 'dir':
                # Hard links share file inodes; directories never repeat.
                if reference in visited:
                    raise CorruptSuperblock(f'Directory inode 0x{reference:x} is reachable twice.')
                visited.add(reference)
                builder.add_dir(path, inode['mode'])
                pending.append((path, inode))
            elif inode['kind'] == 'file':
                builder.add_file(path, inode['content'], inode['mode'])
            elif inode['kind'] == 'symlink':
                builder.add_symlink(path, inode['target'], inode['mode'])
            else:
                builder.add_file(path, b'', inode['mode'])

    tree = builder.build()
    logger.debug(f'Extracted {len(tree)} entries from SquashFS image.')
    return tree
