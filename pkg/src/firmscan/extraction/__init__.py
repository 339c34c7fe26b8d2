from .image import RawFirmware, load_firmware, carve_region
from .signatures import SignatureHit, scan_signatures
from .tree import FsEntry, FilesystemTree, TreeBuilder, normalize_path
from .squashfs import extract_squashfs
from .archive import load_tree_from_archive
from .extract import extract_root_filesystem
from .cache import materialize_tree, load_cached_tree, tree_manifest
