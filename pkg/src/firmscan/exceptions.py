"""Exception hierarchy shared by every pipeline stage.

Each family carries the process exit code the command-line tools use when
the error reaches them. I/O problems are left as :class:`OSError`.

"""
from typing import List, Tuple

from firmscan.globals import EXIT_CODES


class FirmscanError(Exception):
    """Base class for all firmscan errors."""
    exit_code = 1


# Extraction

class ExtractionError(FirmscanError):
    """A firmware image or filesystem could not be extracted."""
    exit_code = EXIT_CODES.NOTHING_EXTRACTED


class RangeError(ExtractionError, ValueError):
    """Carve bounds fall outside the image."""


class UnsupportedFilesystem(ExtractionError):
    """The filesystem was detected but cannot be unpacked natively."""


class UnsupportedCompressor(UnsupportedFilesystem):
    """The SquashFS image uses a compressor other than gzip."""


class CorruptSuperblock(ExtractionError):
    """The filesystem header has a bad magic or version."""


class TruncatedImage(ExtractionError):
    """A metadata or data block extends past the end of the blob."""


class UnsupportedArchive(ExtractionError):
    """The path is neither a directory nor a readable tar archive."""


class InconsistentTree(ExtractionError, ValueError):
    """Extracted entries do not form a tree, e.g. a file with children."""


class NoFilesystemFound(ExtractionError):
    """No filesystem signature was found in the image."""


class AllExtractionsFailed(ExtractionError):
    """Filesystem signatures were found but none of them could be extracted."""

    def __init__(self, failures: List[Tuple['SignatureHit', Exception]]):
        self.failures = failures
        details = '; '.join(f'{hit.kind}@0x{hit.offset:x}: {type(error).__name__}: {error}'
                            for hit, error in failures)
        super().__init__(f'All {len(failures)} extraction attempt(s) failed ({details}).')


# Inventory

class CpeError(FirmscanError):
    exit_code = EXIT_CODES.PARSE


class MalformedCpe(CpeError, ValueError):
    """A CPE formatted string does not follow the 2.3 binding."""


class InvalidAttribute(CpeError, ValueError):
    """A CPE attribute value contains characters that cannot be bound."""


class SbomError(FirmscanError):
    exit_code = EXIT_CODES.PARSE


class SerializationError(SbomError):
    """An SBOM document could not be produced."""


class SbomValidationError(SerializationError):
    """An SBOM document does not validate against the CycloneDX schema."""


class SbomParseError(SbomError):
    """An SBOM document could not be read."""


# Vulnerability database

class FeedParseError(FirmscanError):
    """An NVD feed document is malformed."""
    exit_code = EXIT_CODES.PARSE

    def __init__(self, message: str, document: int = None, item: int = None):
        self.document = document
        self.item = item
        where = []
        if document is not None:
            where.append(f'document {document}')
        if item is not None:
            where.append(f'vulnerability {item}')
        if where:
            message = f'{message} (at {", ".join(where)})'
        super().__init__(message)


class IndexVersionMismatch(FirmscanError):
    """An index file is empty, unreadable or was written by another format version."""
    exit_code = EXIT_CODES.PARSE


class UnresolvedVersion(FirmscanError, ValueError):
    """A CPE used for matching has no literal version."""
    exit_code = EXIT_CODES.PARSE


# Classification

class ClassificationError(FirmscanError):
    exit_code = EXIT_CODES.PARSE


class MalformedCweId(ClassificationError, ValueError):
    """A CWE identifier does not look like ``CWE-<n>``."""


class EmptyDescription(ClassificationError, ValueError):
    """A vulnerability description is empty."""


class RuleTableError(ClassificationError):
    """The CWE rule table file is inconsistent."""


class ClassificationConflict(ClassificationError):
    """Strict mode found linked CWEs that map to different memory classes."""


class LlmError(ClassificationError):
    """Base exception for remote classifier errors."""

    kind = 'Llm'


class LlmTransportError(LlmError):
    kind = 'Transport'


class LlmBadResponse(LlmError):
    kind = 'BadResponse'


class LlmUnknownLabel(LlmError):
    kind = 'UnknownLabel'


class LlmRateLimited(LlmError):
    kind = 'RateLimited'


# Analytics and command line

class EmptyLedger(FirmscanError, ValueError):
    """An aggregate that needs occurrences was given none."""
    exit_code = EXIT_CODES.PARSE


class LedgerParseError(FirmscanError):
    """An occurrences CSV file is malformed."""
    exit_code = EXIT_CODES.PARSE


class ConfigError(FirmscanError):
    """The run configuration is invalid."""
    exit_code = EXIT_CODES.CONFIG


class NothingAnalyzed(FirmscanError):
    """A corpus run had no input that could be analysed."""
    exit_code = EXIT_CODES.NOTHING_EXTRACTED
