from .cpe import ANY, NA, Cpe23, Logical, format_cpe, parse_cpe, to_cpe
from .opkg import OpkgPackage, OpkgParseResult, parse_opkg_status
from .identify import (Component, Evidence, KnownComponentTable, identify_components,
                       load_known_components, normalize_version)
from .sbom import FirmwareMeta, SbomSummary, emit_cyclonedx, read_sbom, validate_sbom
