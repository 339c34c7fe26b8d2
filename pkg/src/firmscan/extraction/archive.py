"""Loading pre-extracted root filesystems from directories and tar archives."""
import os
from pathlib import Path
import stat
import tarfile
from typing import Union

from loguru import logger

from firmscan.exceptions import UnsupportedArchive
from firmscan.extraction.tree import FilesystemTree, TreeBuilder


def _load_directory(root: Path) -> FilesystemTree:
    builder = TreeBuilder(root_label=root.name)
    for directory, dir_names, file_names in os.walk(root, followlinks=False):
        relative = os.path.relpath(directory, root)
        for name in sorted(dir_names) + sorted(file_names):
            full_path = os.path.join(directory, name)
            path = name if relative == '.' else os.path.join(relative, name)
            info = os.lstat(full_path)
            if stat.S_ISLNK(info.st_mode):
                builder.add_symlink(path, os.readlink(full_path), stat.S_IMODE(info.st_mode))
            elif stat.S_ISDIR(info.st_mode):
                builder.add_dir(path, stat.S_IMODE(info.st_mode))
            elif stat.S_ISREG(info.st_mode):
                with open(full_path, 'rb') as f:
                    builder.add_file(path, f.read(), stat.S_IMODE(info.st_mode))
            else:
                builder.add_file(path, b'', stat.S_IMODE(info.st_mode))
    return builder.build()


def _load_tar(path: Path) -> FilesystemTree:
    builder = TreeBuilder(root_label=path.name)
    with tarfile.open(path, mode='r:*') as archive:
        for member in archive.getmembers():
            if member.isdir():
                builder.add_dir(member.name, member.mode)
            elif member.issym():
                builder.add_symlink(member.name, member.linkname, member.mode)
            elif member.isfile() or member.islnk():
                handle = archive.extractfile(member)
                content = handle.read() if handle is not None else b''
                builder.add_file(member.name, content, member.mode)
            else:
                builder.add_file(member.name, b'', member.mode)
    return builder.build()


def load_tree_from_archive(path: Union[str, Path]) -> FilesystemTree:
    """Reads a pre-extracted root filesystem.

    Parameters
    ----------
    path
        A directory or a (possibly compressed) POSIX tar archive.

    Returns
    -------
        A tree mirroring the directory or archive contents.

    Raises
    ------
    OSError
        If the path cannot be read.
    UnsupportedArchive
        If the path is neither a directory nor a tar archive.

    """
    path = Path(path)
    if path.is_dir():
        tree = _load_directory(path)
    elif not path.exists():
        raise FileNotFoundError(f'No such file or directory: {path}')
    elif tarfile.is_tarfile(path):
        try:
            tree = _load_tar(path)
        except (tarfile.TarError, EOFError) as e:
            raise UnsupportedArchive(f'Cannot read tar archive {path}: {e}') from e
    else:
        raise UnsupportedArchive(f'{path} is neither a directory nor a tar archive.')
    logger.debug(f'Loaded {len(tree)} entries from {path}.')
    return tree
