"""CycloneDX 1.5 JSON SBOM emission, validation and reading."""
from datetime import datetime, timezone
import json
from typing import Iterable, List, NamedTuple, Optional
import uuid

from cyclonedx.schema import SchemaVersion
from cyclonedx.validation.json import JsonStrictValidator
from loguru import logger

from firmscan import __version__
from firmscan import globals as project_globals
from firmscan.globals import EVIDENCE_SOURCES
from firmscan.exceptions import CpeError, SbomParseError, SbomValidationError, SerializationError
from firmscan.inventory.cpe import Cpe23, format_cpe, parse_cpe
from firmscan.inventory.identify import Component
from firmscan.utilities import display_path

PROPERTY_PREFIX = f'{project_globals.PROJECT_NAME}:'


class FirmwareMeta(NamedTuple):
    source_id: str
    digest: str


class SbomComponent(NamedTuple):
    name: str
    version: Optional[str]
    cpe: Cpe23


class SbomSummary(NamedTuple):
    firmware: FirmwareMeta
    components: List[SbomComponent]

    @property
    def cpes(self) -> List[Cpe23]:
        return [c.cpe for c in self.components]


def _serial_number(firmware: FirmwareMeta, reproducible: bool) -> str:
    if reproducible:
        return uuid.UUID(bytes=bytes.fromhex(firmware.digest)[:16], version=4).urn
    return uuid.uuid4().urn


def _timestamp(reproducible: bool) -> str:
    if reproducible:
        return project_globals.REPRODUCIBLE_TIMESTAMP
    return datetime.now(timezone.utc).replace(microsecond=0).strftime('%Y-%m-%dT%H:%M:%SZ')


def _component_json(component: Component) -> dict:
    cpe = format_cpe(component.cpe)
    library = any(e.source == EVIDENCE_SOURCES.SHARED_LIBRARY_NAME for e in component.evidence[:1])
    item = {
        'type': 'library' if library else 'application',
        'bom-ref': cpe,
        'name': component.display_name,
    }
    if component.cpe.has_version:
        item['version'] = component.cpe.version
    item['cpe'] = cpe
    properties = [{'name': f'{PROPERTY_PREFIX}evidence:{n}', 'value': f'{e.source}:{display_path(e.path)}'}
                  for n, e in enumerate(component.evidence)]
    if component.version_raw and component.version_raw != item.get('version'):
        properties.append({'name': f'{PROPERTY_PREFIX}version-raw', 'value': component.version_raw})
    item['properties'] = properties
    return item


def emit_cyclonedx(components: Iterable[Component], firmware_meta: FirmwareMeta,
                   reproducible: bool = False) -> str:
    """Serializes components as a CycloneDX 1.5 JSON document.

    Parameters
    ----------
    components
        Identified components; repeated CPEs keep their first occurrence.
    firmware_meta
        Identity of the firmware image the components came from.
    reproducible
        Use a fixed timestamp and a serial number derived from the firmware
        digest so repeated runs produce identical bytes.

    Returns
    -------
        The document text, already validated against the CycloneDX 1.5 schema.

    Raises
    ------
    SerializationError
        If the document cannot be produced.
    SbomValidationError
        If the document does not validate.

    """
    seen, items = set(), []
    for component in components:
        item = _component_json(component)
        if item['bom-ref'] in seen:
            logger.debug(f'Dropping repeated component {item["bom-ref"]}.')
            continue
        seen.add(item['bom-ref'])
        items.append(item)

    try:
        document = {
            '$schema': project_globals.CYCLONEDX_SCHEMA_URI,
            'bomFormat': 'CycloneDX',
            'specVersion': project_globals.CYCLONEDX_SPEC_VERSION,
            'serialNumber': _serial_number(firmware_meta, reproducible),
            'version': 1,
            'metadata': {
                'timestamp': _timestamp(reproducible),
                'tools': {'components': [{'type': 'application',
                                          'name': project_globals.PROJECT_NAME,
                                          'version': __version__}]},
                'component': {'type': 'firmware',
                              'bom-ref': f'firmware:{firmware_meta.digest}',
                              'name': display_path(firmware_meta.source_id),
                              'hashes': [{'alg': 'SHA-256', 'content': firmware_meta.digest}]},
            },
            'components': items,
        }
        text = json.dumps(document, indent=2, ensure_ascii=False)
    except (TypeError, ValueError) as e:
        raise SerializationError(f'Cannot serialize SBOM for {firmware_meta.source_id}: {e}') from e
    validate_sbom(text)
    return text


def validate_sbom(text: str):
    """Checks a document against the CycloneDX 1.5 JSON schema.

    Raises
    ------
    SbomValidationError
        If the document is invalid.

    """
    error = JsonStrictValidator(SchemaVersion.V1_5).validate_str(text)
    if error is not None:
        raise SbomValidationError(f'SBOM does not validate against CycloneDX 1.5: {error}')


def _member(container: dict, key: str, kind: type, owner: str):
    if key not in container:
        return kind()
    value = container[key]
    if not isinstance(value, kind):
        raise SbomParseError(f'{owner} "{key}" must be a JSON {"object" if kind is dict else "array"}.')
    return value


def read_sbom(text: str) -> SbomSummary:
    """Reads firmware identity and component CPEs back from a CycloneDX JSON SBOM.

    Components without a ``cpe`` field are ignored.

    Raises
    ------
    SbomParseError
        If the text is not a CycloneDX JSON document, a member has the wrong
        JSON type or a CPE is malformed.

    """
    try:
        document = json.loads(text)
    except ValueError as e:
        raise SbomParseError(f'SBOM is not valid JSON: {e}') from e
    if not isinstance(document, dict) or document.get('bomFormat') != 'CycloneDX':
        raise SbomParseError('Document is not a CycloneDX SBOM.')

    metadata = _member(document, 'metadata', dict, 'Document')
    subject = _member(metadata, 'component', dict, 'Metadata')
    hashes = _member(subject, 'hashes', list, 'Metadata component')
    if not all(isinstance(h, dict) for h in hashes):
        raise SbomParseError('Metadata component hashes must be objects.')
    digest = next((h.get('content', '') for h in hashes if h.get('alg') == 'SHA-256'), '')
    name = subject.get('name', '')
    if not isinstance(digest, str) or not isinstance(name, str):
        raise SbomParseError('Metadata component name and hash content must be strings.')
    firmware = FirmwareMeta(source_id=name, digest=digest)

    components = []
    for n, item in enumerate(_member(document, 'components', list, 'Document')):
        if not isinstance(item, dict):
            raise SbomParseError(f'Component {n} is not an object.')
        if 'cpe' not in item:
            continue
        try:
            cpe = parse_cpe(item['cpe'])
        except CpeError as e:
            raise SbomParseError(f'Component {n} has a malformed CPE: {e}') from e
        components.append(SbomComponent(item.get('name', ''), item.get('version'), cpe))
    return SbomSummary(firmware, components)
