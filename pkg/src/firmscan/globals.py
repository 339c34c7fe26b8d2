from typing import NamedTuple

PROJECT_NAME = 'firmscan'
ENV_PREFIX = 'FIRMSCAN'

CLASSIFIER_API_KEY_ENV = 'FIRMSCAN_CLASSIFIER_API_KEY'
NVD_API_KEY_ENV = 'FIRMSCAN_NVD_API_KEY'
CACHE_DIR_ENV = 'FIRMSCAN_CACHE_DIR'


# Firmware extraction

class __SIGNATURE_KINDS(NamedTuple):
    SQUASHFS: str = 'SquashFS'
    JFFS2: str = 'JFFS2'
    CRAMFS: str = 'CramFS'
    GZIP: str = 'GzipStream'
    UBOOT: str = 'UBootLegacy'
    TRX: str = 'TrxHeader'


SIGNATURE_KINDS = __SIGNATURE_KINDS()
FILESYSTEM_KINDS = (SIGNATURE_KINDS.SQUASHFS, SIGNATURE_KINDS.JFFS2, SIGNATURE_KINDS.CRAMFS)


class __ENDIANNESS(NamedTuple):
    LITTLE: str = 'Little'
    BIG: str = 'Big'


ENDIANNESS = __ENDIANNESS()


class __ENTRY_KINDS(NamedTuple):
    FILE: str = 'File'
    DIR: str = 'Dir'
    SYMLINK: str = 'Symlink'


ENTRY_KINDS = __ENTRY_KINDS()

SQUASHFS_MAGIC_LE = b'hsqs'
SQUASHFS_MAGIC_BE = b'sqsh'
JFFS2_MAGIC = b'\x85\x19'
JFFS2_NODE_TYPES = (0xE001, 0xE002, 0x2003, 0x2004, 0xE006, 0xE008, 0xE009)
CRAMFS_MAGIC_LE = b'\x45\x3d\xcd\x28'
CRAMFS_MAGIC_BE = b'\x28\xcd\x3d\x45'
GZIP_MAGIC = b'\x1f\x8b'
UBOOT_MAGIC = b'\x27\x05\x19\x56'
UBOOT_HEADER_SIZE = 64
TRX_MAGIC = b'HDR0'

GZIP_INFLATE_LIMIT = 256 * 1024 * 1024  # 256 MiB
EMPTY_DIGEST = 'e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855'


# Component inventory

class __EVIDENCE_SOURCES(NamedTuple):
    OPKG_STATUS: str = 'OpkgStatus'
    VERSION_STRING: str = 'VersionString'
    SHARED_LIBRARY_NAME: str = 'SharedLibraryName'
    KNOWN_PATH: str = 'KnownPath'


# Declaration order is evidence precedence, highest first.
EVIDENCE_SOURCES = __EVIDENCE_SOURCES()

OPKG_STATUS_PATHS = ('usr/lib/opkg/status', 'var/lib/opkg/status')
VERSION_SCAN_MAX_FILE_SIZE = 16 * 1024 * 1024  # 16 MiB
VERSION_SCAN_MIN_RUN = 6
EVIDENCE_EXCERPT_LENGTH = 120

CYCLONEDX_SPEC_VERSION = '1.5'
CYCLONEDX_SCHEMA_URI = 'http://cyclonedx.org/schema/bom-1.5.schema.json'
REPRODUCIBLE_TIMESTAMP = '2000-01-01T00:00:00Z'


# Vulnerability database

class __SEVERITIES(NamedTuple):
    NONE: str = 'None'
    LOW: str = 'Low'
    MEDIUM: str = 'Medium'
    HIGH: str = 'High'
    CRITICAL: str = 'Critical'


# Declaration order is the severity order, None < Low < ... < Critical.
SEVERITIES = __SEVERITIES()

CWE_NOINFO = 'NVD-CWE-noinfo'
CWE_OTHER = 'NVD-CWE-Other'
CWE_NOINFO_LABEL = 'CWE-noinfo'
CWE_OTHER_LABEL = 'CWE-Other'

INDEX_FORMAT_VERSION = 1
NVD_API_URL = 'https://services.nvd.nist.gov/rest/json/cves/2.0'
NVD_PAGE_SIZE = 2000


# Memory classification

class __MEMORY_CLASSES(NamedTuple):
    NOT_MEMORY: str = 'not-memory-related'
    SPATIAL: str = 'spatial-memory-related'
    TEMPORAL: str = 'temporal-memory-related'
    OTHER_MEMORY: str = 'other-memory-related'


MEMORY_CLASSES = __MEMORY_CLASSES()
MEMORY_RELATED_CLASSES = MEMORY_CLASSES[1:]

# Short labels accepted in rule table files.
MEMORY_CLASS_ALIASES = {
    'not-memory': MEMORY_CLASSES.NOT_MEMORY,
    'none': MEMORY_CLASSES.NOT_MEMORY,
    'spatial': MEMORY_CLASSES.SPATIAL,
    'temporal': MEMORY_CLASSES.TEMPORAL,
    'other': MEMORY_CLASSES.OTHER_MEMORY,
}


class __CLASSIFICATION_SOURCES(NamedTuple):
    RULE_TABLE: str = 'RuleTable'
    KEYWORD: str = 'Keyword'
    LLM: str = 'Llm'
    DEFAULT: str = 'Default'


CLASSIFICATION_SOURCES = __CLASSIFICATION_SOURCES()


class __CONFIDENCE(NamedTuple):
    HIGH: str = 'High'
    LOW: str = 'Low'


CONFIDENCE = __CONFIDENCE()

# Checked in this order; the first class with a matching trigger wins.
KEYWORD_TRIGGERS = (
    (MEMORY_CLASSES.TEMPORAL, ('use after free', 'use-after-free', 'double free', 'dangling')),
    (MEMORY_CLASSES.SPATIAL, ('out-of-bounds', 'buffer overflow', 'buffer over-read', 'stack overflow',
                              'heap overflow', 'bounds')),
    (MEMORY_CLASSES.OTHER_MEMORY, ('null pointer dereference', 'memory leak', 'uninitialized memory',
                                   'memory corruption')),
)

LLM_MAX_ATTEMPTS = 3
LLM_MAX_IN_FLIGHT = 4
LLM_DEFAULT_MODEL = 'gpt-4o'


# Analytics and reports

class __CLASSIFIER_MODES(NamedTuple):
    RULE: str = 'rule'
    RULE_THEN_LLM: str = 'rule-then-llm'


CLASSIFIER_MODES = __CLASSIFIER_MODES()

OCCURRENCE_COLUMNS = ['firmware_id', 'component_cpe', 'cve_id', 'cwe_id', 'severity', 'mem_class',
                      'classification_source']

TOP_CWES_COUNT = 10
TOP_CPES_COUNT = 5

OCCURRENCES_FILE = 'occurrences.csv'
TOP_CWES_FILE = 'top_cwes.csv'
TOP_CPES_BY_SEVERITY_FILE = 'top_cpes_by_severity.csv'
TOP_CPES_BY_CLASS_FILE = 'top_cpes_by_class.csv'
IMPACT_FILE = 'impact.json'
CORPUS_FILE = 'corpus.json'
REPORT_FILE = 'report.json'
SBOM_FILE = 'sbom.cdx.json'
MANIFEST_FILE = 'manifest.json'
DATASET_MANIFEST_FILE = 'manifest.csv'


class __EXIT_CODES(NamedTuple):
    OK: int = 0
    PARSE: int = 2
    IO: int = 3
    NOTHING_EXTRACTED: int = 4
    CONFIG: int = 5


EXIT_CODES = __EXIT_CODES()
