import os
from pathlib import Path

import firmscan.globals as project_globals

DATA_DIR = (Path(__file__).parent / 'data').resolve()
TEMPLATE_DIR = (Path(__file__).parent / 'tools' / 'templates').resolve()

RULE_TABLE_PATH = DATA_DIR / 'cwe_memory_rules.v1.json'
KNOWN_COMPONENTS_PATH = DATA_DIR / 'known_components.v1.json'

PROMPT_TEMPLATE = 'classification_prompt.j2'
IMPACT_TABLE_TEMPLATE = 'impact_table.j2'


def default_cache_dir() -> Path:
    """The cache root used when no ``--cache-dir`` is given."""
    env = os.environ.get(project_globals.CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / '.cache' / project_globals.PROJECT_NAME


def extraction_cache_dir(cache_dir: Path, image_digest: str) -> Path:
    """Location of the materialized root filesystem for one image.

    Parameters
    ----------
    cache_dir
        The cache root.
    image_digest
        SHA-256 hex digest of the raw firmware image.

    Returns
    -------
        ``<cache>/extracted/<image-digest>/``

    """
    return Path(cache_dir) / 'extracted' / image_digest
