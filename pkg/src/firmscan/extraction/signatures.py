"""Magic-number scanning over raw firmware images."""
from dataclasses import dataclass
import struct
from typing import Callable, Iterator, List, Optional, Tuple

from firmscan import globals as project_globals
from firmscan.globals import ENDIANNESS, SIGNATURE_KINDS
from firmscan.extraction.image import RawFirmware


@dataclass(frozen=True, order=True)
class SignatureHit:
    offset: int
    kind: str
    endianness: str
    detail: str = ''


def _find_all(data: bytes, magic: bytes) -> Iterator[int]:
    position = data.find(magic)
    while position != -1:
        yield position
        position = data.find(magic, position + 1)


def _squashfs_detail(data: bytes, offset: int, fmt: str) -> str:
    header = data[offset:offset + 96]
    if len(header) < 96:
        return 'incomplete superblock'
    compressor, = struct.unpack_from(fmt + 'H', header, 20)
    major, minor = struct.unpack_from(fmt + '2H', header, 28)
    bytes_used, = struct.unpack_from(fmt + 'Q', header, 40)
    return f'version {major}.{minor}, compressor {compressor}, {bytes_used} bytes used'


def _squashfs_le(data: bytes, offset: int) -> Optional[Tuple[str, str]]:
    return ENDIANNESS.LITTLE, _squashfs_detail(data, offset, '<')


def _squashfs_be(data: bytes, offset: int) -> Optional[Tuple[str, str]]:
    return ENDIANNESS.BIG, _squashfs_detail(data, offset, '>')


def _jffs2(data: bytes, offset: int) -> Optional[Tuple[str, str]]:
    # Nodes are 4-byte aligned and carry a node type right after the magic.
    if offset % 4 or offset + 4 > len(data):
        return None
    node_type, = struct.unpack_from('<H', data, offset + 2)
    if node_type not in project_globals.JFFS2_NODE_TYPES:
        return None
    return ENDIANNESS.LITTLE, f'node type 0x{node_type:04x}'


def _cramfs(endianness: str, fmt: str) -> Callable[[bytes, int], Optional[Tuple[str, str]]]:
    def detect(data: bytes, offset: int) -> Optional[Tuple[str, str]]:
        if offset + 8 > len(data):
            return endianness, 'incomplete superblock'
        size, = struct.unpack_from(fmt + 'I', data, offset + 4)
        return endianness, f'{size} bytes'
    return detect


def _gzip(data: bytes, offset: int) -> Optional[Tuple[str, str]]:
    # Method must be deflate and the reserved flag bits clear.
    if offset + 4 > len(data):
        return None
    method, flags = data[offset + 2], data[offset + 3]
    if method != 8 or flags & 0xE0:
        return None
    return ENDIANNESS.LITTLE, 'deflate'


def _uboot(data: bytes, offset: int) -> Optional[Tuple[str, str]]:
    header = data[offset:offset + project_globals.UBOOT_HEADER_SIZE]
    if len(header) < project_globals.UBOOT_HEADER_SIZE:
        return ENDIANNESS.BIG, 'incomplete header'
    data_size, = struct.unpack_from('>I', header, 12)
    name = header[32:64].split(b'\x00', 1)[0].decode('ascii', errors='replace')
    return ENDIANNESS.BIG, f'image "{name}", {data_size} data bytes'


def _trx(data: bytes, offset: int) -> Optional[Tuple[str, str]]:
    if offset + 8 > len(data):
        return ENDIANNESS.LITTLE, 'incomplete header'
    length, = struct.unpack_from('<I', data, offset + 4)
    return ENDIANNESS.LITTLE, f'{length} bytes'


SIGNATURES = (
    (SIGNATURE_KINDS.SQUASHFS, project_globals.SQUASHFS_MAGIC_LE, _squashfs_le),
    (SIGNATURE_KINDS.SQUASHFS, project_globals.SQUASHFS_MAGIC_BE, _squashfs_be),
    (SIGNATURE_KINDS.JFFS2, project_globals.JFFS2_MAGIC, _jffs2),
    (SIGNATURE_KINDS.CRAMFS, project_globals.CRAMFS_MAGIC_LE, _cramfs(ENDIANNESS.LITTLE, '<')),
    (SIGNATURE_KINDS.CRAMFS, project_globals.CRAMFS_MAGIC_BE, _cramfs(ENDIANNESS.BIG, '>')),
    (SIGNATURE_KINDS.GZIP, project_globals.GZIP_MAGIC, _gzip),
    (SIGNATURE_KINDS.UBOOT, project_globals.UBOOT_MAGIC, _uboot),
    (SIGNATURE_KINDS.TRX, project_globals.TRX_MAGIC, _trx),
)


def scan_bytes(data: bytes) -> List[SignatureHit]:
    hits = []
    for kind, magic, detect in SIGNATURES:
        for offset in _find_all(data, magic):
            found = detect(data, offset)
            if found is not None:
                endianness, detail = found
                hits.append(SignatureHit(offset=offset, kind=kind, endianness=endianness, detail=detail))
    return sorted(hits)


def scan_signatures(image: RawFirmware) -> List[SignatureHit]:
    """Finds every known filesystem or container magic in an image.

    Overlapping hits are all reported. The scan never fails; unrecognized
    content yields an empty list.

    Parameters
    ----------
    image
        The firmware image to scan.

    Returns
    -------
        Hits sorted by offset ascending (ties by kind).

    """
    return scan_bytes(image.data)
