from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from loguru import logger

from firmscan.exceptions import RangeError
from firmscan.utilities import sha256_hex


@dataclass(frozen=True)
class RawFirmware:
    """A raw firmware image and its identity.

    ``digest`` and ``size`` are derived from ``data`` when not supplied.

    """
    source_id: str
    data: bytes = field(repr=False)
    digest: str = ''
    size: int = -1

    def __post_init__(self):
        digest = sha256_hex(self.data)
        if self.digest and self.digest != digest:
            raise ValueError(f'Digest mismatch for {self.source_id}.')
        object.__setattr__(self, 'digest', digest)
        object.__setattr__(self, 'size', len(self.data))


def load_firmware(path: Union[str, Path]) -> RawFirmware:
    """Reads a firmware image file.

    Parameters
    ----------
    path
        Path to the raw image.

    Returns
    -------
        The image labelled with its file name.

    """
    path = Path(path)
    data = path.read_bytes()
    logger.debug(f'Read {len(data)} bytes from {path}.')
    return RawFirmware(source_id=path.name, data=data)


def carve_region(image: RawFirmware, start: int, end: Optional[int] = None) -> bytes:
    """Returns the exact byte slice ``[start, end)`` of an image.

    Parameters
    ----------
    image
        The firmware image.
    start
        First byte offset.
    end
        One past the last byte offset, or ``None`` for end-of-image.

    Raises
    ------
    RangeError
        If ``0 <= start <= end <= image.size`` does not hold.

    """
    if end is None:
        end = image.size
    if not 0 <= start <= end <= image.size:
        raise RangeError(f'Invalid region [{start}, {end}) for image of size {image.size}.')
    return image.data[start:end]
