"""Per-input pipeline steps behind the command-line tools.

.. admonition::

   Logging in this module should typically be done at the ``info`` level.
   Skipped inputs are logged at ``warning``.

"""
from concurrent.futures import ThreadPoolExecutor
import json
from pathlib import Path
import tarfile
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from loguru import logger
import pandas as pd

from firmscan import globals as project_globals
from firmscan.globals import CLASSIFIER_MODES
from firmscan.exceptions import FirmscanError, NothingAnalyzed, SbomParseError
from firmscan.analytics import FirmwareReport, build_occurrences
from firmscan.classification import LlmConfig, MemoryClassifier, RuleTable, load_rule_table, shared_client
from firmscan.extraction import (FilesystemTree, SignatureHit, extract_root_filesystem, load_cached_tree,
                                 load_firmware, load_tree_from_archive, materialize_tree, tree_manifest)
from firmscan.inventory import FirmwareMeta, emit_cyclonedx, identify_components, read_sbom
from firmscan.tools.config import RunConfig
from firmscan.utilities import sha256_hex
from firmscan.vulndb import VulnIndex


class INPUT_KINDS:
    IMAGE = 'image'
    DIRECTORY = 'directory'
    ARCHIVE = 'archive'
    SBOM = 'sbom'


class ScanResult(NamedTuple):
    source_id: str
    digest: str
    input_kind: str
    tree: FilesystemTree
    hit: Optional[SignatureHit]
    components: list

    @property
    def firmware_meta(self) -> FirmwareMeta:
        return FirmwareMeta(source_id=self.source_id, digest=self.digest)

    def manifest(self) -> dict:
        manifest = tree_manifest(self.tree, self.digest, self.hit)
        manifest['source'] = self.source_id
        manifest['input_kind'] = self.input_kind
        return manifest


def tree_digest(tree: FilesystemTree) -> str:
    """Content digest of a tree that did not come from a single image file."""
    listing = json.dumps([[e.path, e.kind, e.size, e.mode, e.content_digest, e.link_target] for e in tree],
                         separators=(',', ':'))
    return sha256_hex(listing.encode('utf-8'))


def input_kind(path: Path) -> str:
    if path.is_dir():
        return INPUT_KINDS.DIRECTORY
    if path.suffix.lower() == '.json':
        return INPUT_KINDS.SBOM
    if tarfile.is_tarfile(path):
        return INPUT_KINDS.ARCHIVE
    return INPUT_KINDS.IMAGE


def _extract_image(path: Path, cache_dir: Path) -> Tuple[FilesystemTree, Optional[SignatureHit], str]:
    image = load_firmware(path)
    cached = load_cached_tree(cache_dir, image.digest)
    if cached is not None:
        logger.info(f'{path.name}: {image.digest[:12]} already cached. Skipping extraction.')
        tree, hit = cached
        return tree, hit, image.digest
    tree, hit = extract_root_filesystem(image)
    logger.info(f'{path.name}: extracted {len(tree)} entries from {hit.kind} at offset 0x{hit.offset:x}.')
    try:
        materialize_tree(tree, cache_dir, image.digest, hit)
    except OSError as e:
        logger.warning(f'{path.name}: could not cache the extracted tree: {e}')
    return tree, hit, image.digest


def scan_input(path: Union[str, Path], cache_dir: Path) -> ScanResult:
    """Extracts (or loads) the root filesystem of an input and identifies its components.

    Raises
    ------
    OSError
        If the input cannot be read.
    ExtractionError
        If no root filesystem can be extracted.

    """
    path = Path(path)
    kind = input_kind(path)
    if kind == INPUT_KINDS.DIRECTORY:
        tree, hit = load_tree_from_archive(path), None
        digest = tree_digest(tree)
    elif kind == INPUT_KINDS.ARCHIVE:
        tree, hit = load_tree_from_archive(path), None
        digest = sha256_hex(path.read_bytes())
    else:
        tree, hit, digest = _extract_image(path, cache_dir)
    components = identify_components(tree)
    logger.info(f'{path.name}: identified {len(components)} component(s).')
    return ScanResult(source_id=path.name, digest=digest, input_kind=kind, tree=tree, hit=hit,
                      components=components)


def write_scan(result: ScanResult, out_dir: Path, reproducible: bool) -> Tuple[Path, str]:
    """Writes ``<out>/<digest>/sbom.cdx.json`` and the extraction manifest.

    Returns
    -------
        The SBOM path and document text.

    """
    sbom = emit_cyclonedx(result.components, result.firmware_meta, reproducible=reproducible)
    destination = Path(out_dir) / result.digest
    destination.mkdir(parents=True, exist_ok=True)
    sbom_path = destination / project_globals.SBOM_FILE
    sbom_path.write_text(sbom, encoding='utf-8')
    (destination / project_globals.MANIFEST_FILE).write_text(
        json.dumps(result.manifest(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return sbom_path, sbom


def firmware_components(path: Union[str, Path], cache_dir: Path) -> Tuple[FirmwareMeta, list]:
    """Firmware identity and components of an SBOM or a firmware input."""
    path = Path(path)
    if input_kind(path) == INPUT_KINDS.SBOM:
        try:
            text = path.read_text(encoding='utf-8')
        except UnicodeDecodeError as e:
            raise SbomParseError(f'{path} is not UTF-8 text: {e}') from e
        summary = read_sbom(text)
        return summary.firmware, summary.components
    result = scan_input(path, cache_dir)
    return result.firmware_meta, result.components


def build_classifier(config: RunConfig, table: RuleTable = None) -> MemoryClassifier:
    """A classifier for one worker; the remote client and its cache are shared."""
    table = table if table is not None else load_rule_table()
    llm = None
    if config.classifier_mode == CLASSIFIER_MODES.RULE_THEN_LLM:
        llm = shared_client(LlmConfig(endpoint=config.llm_endpoint, api_key=config.classifier_api_key,
                                      model=config.llm_model))
    return MemoryClassifier(table, llm=llm)


def analyze_input(path: Union[str, Path], index: VulnIndex, classifier: MemoryClassifier, cache_dir: Path,
                  firmware_id: str = None, vendor: str = None) -> FirmwareReport:
    """Runs inventory, matching and classification for one SBOM or firmware input."""
    path = Path(path)
    firmware, components = firmware_components(path, cache_dir)
    firmware_id = firmware_id or path.name
    occurrences = build_occurrences(firmware_id, components, index, classifier)
    logger.info(f'{firmware_id}: {len(occurrences)} occurrence(s) over {len(components)} component(s).')
    return FirmwareReport(firmware_id=firmware_id,
                          source=path.name,
                          digest=firmware.digest,
                          occurrences=tuple(occurrences),
                          component_count=len(components),
                          vendor=vendor)


def read_dataset_manifest(directory: Path) -> Dict[str, str]:
    """Vendor per input name from an optional ``manifest.csv`` (``path,vendor``)."""
    manifest_path = Path(directory) / project_globals.DATASET_MANIFEST_FILE
    if not manifest_path.is_file():
        return {}
    frame = pd.read_csv(manifest_path, dtype=str, keep_default_na=False)
    if not {'path', 'vendor'} <= set(frame.columns):
        logger.warning(f'{manifest_path} lacks path and vendor columns; ignoring it.')
        return {}
    return {Path(p).name: v for p, v in zip(frame['path'], frame['vendor']) if v}


def corpus_inputs(directory: Path) -> List[Path]:
    """Every entry of a corpus directory, sorted, except the dataset manifest and hidden files."""
    return sorted(p for p in Path(directory).iterdir()
                  if p.name != project_globals.DATASET_MANIFEST_FILE and not p.name.startswith('.'))


def run_corpus(directory: Union[str, Path], index: VulnIndex, config: RunConfig,
               table: RuleTable = None) -> Tuple[List[FirmwareReport], List[Tuple[str, str]]]:
    """Analyses every input of a corpus directory with a pool of workers.

    Failed inputs are logged and skipped. Results are ordered by input name
    whatever the number of workers.

    Returns
    -------
        The per-firmware reports and the ``(input name, error)`` failures.

    Raises
    ------
    NothingAnalyzed
        If the directory is empty or every input failed.

    """
    directory = Path(directory)
    inputs = corpus_inputs(directory)
    if not inputs:
        raise NothingAnalyzed(f'{directory} holds no inputs.')
    vendors = read_dataset_manifest(directory)
    table = table if table is not None else load_rule_table()

    def analyze(path: Path) -> Union[FirmwareReport, Tuple[str, str]]:
        try:
            return analyze_input(path, index, build_classifier(config, table), config.cache_dir,
                                 vendor=vendors.get(path.name))
        except (FirmscanError, OSError) as e:
            logger.warning(f'{path.name}: skipped: {type(e).__name__}: {e}')
            return path.name, f'{type(e).__name__}: {e}'

    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        results = list(pool.map(analyze, inputs))

    reports = [r for r in results if isinstance(r, FirmwareReport)]
    failures = [r for r in results if not isinstance(r, FirmwareReport)]
    logger.info(f'Analysed {len(reports)} of {len(inputs)} input(s).')
    if not reports:
        raise NothingAnalyzed(f'All {len(inputs)} input(s) in {directory} failed.')
    return reports, failures
