import json

import numpy as np
import pytest

from conftest import FIXED_TIME

from firmscan.globals import CWE_NOINFO, CWE_OTHER, SEVERITIES
from firmscan.exceptions import FeedParseError, IndexVersionMismatch, UnresolvedVersion
from firmscan.inventory import ANY, Cpe23, parse_cpe, to_cpe
from firmscan.vulndb import (CpeMatchRange, VersionBound, compare_versions, cvss_severity, fetch_nvd_feed,
                             ingest_nvd_feed, load_index, match_cpe, save_index, version_key)
from firmscan.vulndb.matching import version_in_range
from firmscan.vulndb.severity import severity_v2, severity_v3


def ids(records):
    return [r.id for r in records]


def cve_item(cve_id, **overrides):
    cve = {
        'id': cve_id,
        'descriptions': [{'lang': 'en', 'value': f'Issue {cve_id}.'}],
        'metrics': {},
        'weaknesses': [],
        'configurations': [],
    }
    cve.update(overrides)
    return {'cve': cve}


def feed(*items):
    return json.dumps({'vulnerabilities': list(items)})


@pytest.mark.parametrize('older, newer', [
    ('1.0.2', '1.0.2c'),
    ('1.0.2c', '1.0.10'),
    ('1.0.1g', '1.0.2'),
    ('1.0.1f', '1.0.1g'),
    ('1.33.2', '1.35.0'),
    ('2.77', '2.78'),
    ('1.9', '1.10'),
    ('1.0', '1.0.1'),
    ('1.0.0', '1.0a'),
])
def test_compare_versions_orders(older, newer):
    assert compare_versions(older, newer) == -1
    assert compare_versions(newer, older) == 1


@pytest.mark.parametrize('a, b', [('1.0', '1.0.0'), ('1.0-0', '1'), (' 2.77 ', '2.77'), ('1.35', '1.35.0.0')])
def test_compare_versions_equal(a, b):
    assert compare_versions(a, b) == 0
    assert version_key(a) == version_key(b)


def test_version_key_is_a_total_order():
    rng = np.random.default_rng(11)
    pieces = ['0', '1', '2', '10', 'a', 'b', 'rc1', '2k']
    versions = ['.'.join(rng.choice(pieces, size=int(rng.integers(1, 4)))) for _ in range(200)]
    ordered = sorted(versions, key=version_key)

    for a, b in zip(ordered, ordered[1:]):
        assert compare_versions(a, b) <= 0
    for a, b, c in zip(ordered, ordered[1:], ordered[2:]):
        assert compare_versions(a, c) <= 0
        assert compare_versions(a, b) == -compare_versions(b, a)


def test_ingest_busybox_feed(busybox_index):
    assert len(busybox_index) == 4
    assert busybox_index.feed_meta.record_count == 4
    assert busybox_index.feed_meta.source_label == 'busybox'
    assert busybox_index.feed_meta.ingested_at == FIXED_TIME
    assert busybox_index.duplicate_count == 0

    record = busybox_index.records['CVE-2021-42376']
    assert record.description.startswith('A NULL pointer dereference')
    assert record.cwe_ids == ('CWE-476',)
    assert record.cvss31.score == 5.5
    assert record.cvss2.score == 1.9
    configuration = record.configurations[0]
    assert configuration.version_start == VersionBound('1.16.0', True)
    assert configuration.version_end == VersionBound('1.33.2', True)

    assert busybox_index.records['CVE-2022-28391'].cwe_ids == (CWE_NOINFO,)
    assert not busybox_index.records['CVE-2022-28391'].has_cwe_info
    assert ids(busybox_index.lookup('BusyBox', 'BUSYBOX')) == [
        'CVE-2021-42376', 'CVE-2022-28391', 'CVE-2022-48174', 'CVE-2023-39810']
    assert busybox_index.lookup('openssl', 'openssl') == []


def test_ingest_counts_duplicates_and_keeps_the_last():
    first = cve_item('CVE-2020-0001', descriptions=[{'lang': 'en', 'value': 'first'}])
    second = cve_item('CVE-2020-0001', descriptions=[{'lang': 'en', 'value': 'second'}])
    index = ingest_nvd_feed([feed(first), feed(second)], ingested_at=FIXED_TIME)

    assert len(index) == 1
    assert index.duplicate_count == 1
    assert index.records['CVE-2020-0001'].description == 'second'


def test_ingest_feed_details():
    item = cve_item(
        'CVE-2020-0002',
        descriptions=[{'lang': 'fr', 'value': 'seulement en francais'}],
        metrics={'cvssMetricV30': [{'type': 'Secondary', 'cvssData': {'version': '3.0', 'baseScore': 6.1}},
                                   {'type': 'Primary', 'cvssData': {'version': '3.0', 'baseScore': 7.5}}]},
        weaknesses=[{'description': [{'value': CWE_OTHER}, {'value': 'CWE-120'}, {'value': 'CWE-120'}]}],
        configurations=[{'nodes': [{'operator': 'AND', 'cpeMatch': [
            {'vulnerable': False, 'criteria': 'cpe:2.3:o:linux:linux_kernel:*:*:*:*:*:*:*:*'},
        ], 'children': [{'cpeMatch': [
            {'vulnerable': True, 'criteria': 'cpe:2.3:a:zlib:zlib:1.2.11:*:*:*:*:*:*:*',
             'versionEndExcluding': '1.2.12'},
            {'vulnerable': True, 'criteria': 'cpe:2.3:a:zlib:zlib:*:*:*:*:*:*:*:*',
             'versionStartExcluding': '1.2.0'},
        ]}]}]}],
    )
    record = ingest_nvd_feed([json.loads(feed(item))]).records['CVE-2020-0002']

    assert record.description == 'seulement en francais'
    assert record.cvss31.score == 7.5
    assert record.cvss31.version == '3.0'
    assert record.cvss2 is None
    assert record.cwe_ids == ('CWE-120',)
    assert [c.base.key for c in record.configurations] == [('zlib', 'zlib'), ('zlib', 'zlib')]
    assert record.configurations[0].version_end is None
    assert record.configurations[1].version_start == VersionBound('1.2.0', False)


def test_ingest_other_sentinel():
    item = cve_item('CVE-2020-0003', weaknesses=[{'description': [{'value': CWE_OTHER}]}])
    assert ingest_nvd_feed([feed(item)]).records['CVE-2020-0003'].cwe_ids == (CWE_OTHER,)


def test_feed_parse_error_positions():
    good = feed(cve_item('CVE-2020-0004'))
    missing_description = feed(cve_item('CVE-2020-0005'), cve_item('CVE-2020-0006', descriptions=[]))
    bad_score = feed(cve_item('CVE-2020-0007', metrics={
        'cvssMetricV31': [{'type': 'Primary', 'cvssData': {'baseScore': 'high'}}]}))

    with pytest.raises(FeedParseError) as error:
        ingest_nvd_feed([good, missing_description])
    assert (error.value.document, error.value.item) == (1, 1)
    assert 'document 1, vulnerability 1' in str(error.value)

    with pytest.raises(FeedParseError) as error:
        ingest_nvd_feed([bad_score])
    assert (error.value.document, error.value.item) == (0, 0)

    with pytest.raises(FeedParseError) as error:
        ingest_nvd_feed([good, '{"vulnerabilities": [', good])
    assert (error.value.document, error.value.item) == (1, None)

    with pytest.raises(FeedParseError):
        ingest_nvd_feed(['{"format": "NVD_CVE"}'])
    with pytest.raises(FeedParseError):
        ingest_nvd_feed([feed(cve_item('CVE-20-1'))])
    with pytest.raises(FeedParseError):
        ingest_nvd_feed([feed(cve_item('CVE-2020-0008', configurations=[{'nodes': [{'cpeMatch': [
            {'vulnerable': True, 'criteria': 'cpe:/a:zlib:zlib'}]}]}]))])


def test_save_and_load_index(tmp_path, full_index):
    path = tmp_path / 'db' / 'index.json'
    save_index(full_index, path)
    loaded = load_index(path)

    assert loaded == full_index
    assert loaded.product_index == full_index.product_index
    assert json.loads(path.read_text())['format_version'] == 1


def test_load_index_errors(tmp_path, busybox_index):
    path = tmp_path / 'index.json'
    save_index(busybox_index, path)
    document = json.loads(path.read_text())
    document['format_version'] = 2
    path.write_text(json.dumps(document))
    with pytest.raises(IndexVersionMismatch):
        load_index(path)

    path.write_text('')
    with pytest.raises(IndexVersionMismatch):
        load_index(path)

    path.write_text(json.dumps({'format_version': 1, 'records': [{'id': 'CVE-2020-0001'}]}))
    with pytest.raises(IndexVersionMismatch):
        load_index(path)

    with pytest.raises(OSError):
        load_index(tmp_path / 'missing.json')


@pytest.mark.parametrize('version, expected', [
    ('1.33.2', ['CVE-2021-42376', 'CVE-2022-28391', 'CVE-2022-48174', 'CVE-2023-39810']),
    ('1.35.0', ['CVE-2022-28391']),
    ('1.15.0', ['CVE-2022-28391', 'CVE-2022-48174']),
    ('1.36.1', []),
])
def test_match_busybox_versions(busybox_index, version, expected):
    assert ids(match_cpe(busybox_index, to_cpe('busybox', 'busybox', version))) == expected


@pytest.mark.parametrize('vendor, product, version, expected', [
    ('openssl', 'openssl', '1.0.2', ['CVE-2016-2108']),
    ('openssl', 'openssl', '1.0.2c', []),
    ('openssl', 'openssl', '1.0.1f', ['CVE-2014-0160']),
    ('openssl', 'openssl', '1.0.1g', []),
    ('thekelleys', 'dnsmasq', '2.77', ['CVE-2017-14491']),
    ('thekelleys', 'dnsmasq', '2.78', []),
    ('uclibc', 'uclibc', '0.9.33', []),
])
def test_match_extra_products(full_index, vendor, product, version, expected):
    assert ids(match_cpe(full_index, to_cpe(vendor, product, version))) == expected


def test_match_requires_a_literal_version(busybox_index):
    with pytest.raises(UnresolvedVersion):
        match_cpe(busybox_index, to_cpe('busybox', 'busybox'))
    with pytest.raises(UnresolvedVersion):
        match_cpe(busybox_index, parse_cpe('cpe:2.3:a:busybox:busybox:-:*:*:*:*:*:*:*'))


def test_literal_configuration_uses_version_equality():
    configuration = CpeMatchRange(parse_cpe('cpe:2.3:a:busybox:busybox:1.33.2:*:*:*:*:*:*:*'))
    assert version_in_range(configuration, '1.33.2')
    assert version_in_range(configuration, '1.33.2.0')
    assert not version_in_range(configuration, '1.33.20')
    with pytest.raises(ValueError):
        CpeMatchRange(configuration.base, version_end=VersionBound('1.35.0', False))


def test_range_matcher_agrees_with_tuple_oracle():
    rng = np.random.default_rng(500)

    def random_version():
        return tuple(int(n) for n in rng.integers(0, 12, size=int(rng.integers(1, 4))))

    def padded(version):
        return version + (0,) * (3 - len(version))

    def text(version):
        return '.'.join(str(n) for n in version)

    base = Cpe23('a', 'vendor', 'product', ANY)
    versions = [random_version() for _ in range(100)]
    for _ in range(500):
        start = random_version() if rng.random() < 0.7 else None
        end = random_version() if rng.random() < 0.7 else None
        start_inclusive, end_inclusive = bool(rng.random() < 0.5), bool(rng.random() < 0.5)
        configuration = CpeMatchRange(
            base,
            VersionBound(text(start), start_inclusive) if start else None,
            VersionBound(text(end), end_inclusive) if end else None,
        )
        for version in versions:
            expected = True
            if start is not None:
                expected &= padded(version) > padded(start) or (start_inclusive and padded(version) == padded(start))
            if end is not None:
                expected &= padded(version) < padded(end) or (end_inclusive and padded(version) == padded(end))
            assert version_in_range(configuration, text(version)) == expected, (configuration, version)


@pytest.mark.parametrize('score, bucket', [
    (0.0, SEVERITIES.NONE), (0.1, SEVERITIES.LOW), (3.9, SEVERITIES.LOW), (4.0, SEVERITIES.MEDIUM),
    (6.9, SEVERITIES.MEDIUM), (7.0, SEVERITIES.HIGH), (8.9, SEVERITIES.HIGH), (9.0, SEVERITIES.CRITICAL),
    (10.0, SEVERITIES.CRITICAL),
])
def test_severity_v3_bands(score, bucket):
    assert severity_v3(score) == bucket


@pytest.mark.parametrize('score, bucket', [
    (0.0, SEVERITIES.LOW), (3.9, SEVERITIES.LOW), (4.0, SEVERITIES.MEDIUM), (6.9, SEVERITIES.MEDIUM),
    (7.0, SEVERITIES.HIGH), (10.0, SEVERITIES.HIGH),
])
def test_severity_v2_bands(score, bucket):
    assert severity_v2(score) == bucket


def test_cvss_severity_prefers_v3(full_index):
    records = full_index.records
    assert cvss_severity(records['CVE-2021-42376']) == (SEVERITIES.MEDIUM, 5.5, '3.1')
    assert cvss_severity(records['CVE-2014-0160']) == (SEVERITIES.MEDIUM, 5.0, '2.0')
    assert cvss_severity(records['CVE-2022-48174']) == (SEVERITIES.CRITICAL, 9.8, '3.1')
    unscored = ingest_nvd_feed([feed(cve_item('CVE-2020-0009'))]).records['CVE-2020-0009']
    assert cvss_severity(unscored) == (SEVERITIES.NONE, None, None)


class FakeResponse:

    def __init__(self, payload):
        self.payload = payload

    def raise_for_status(self):
        pass

    def json(self):
        return self.payload


class FakeSession:

    def __init__(self, pages):
        self.pages = list(pages)
        self.requests = []

    def get(self, url, params=None, headers=None, timeout=None):
        self.requests.append((url, dict(params), dict(headers)))
        return FakeResponse(self.pages.pop(0))


def test_fetch_nvd_feed_pages_until_total(tmp_path, busybox_feed):
    items = json.loads(busybox_feed)['vulnerabilities']
    session = FakeSession([
        {'totalResults': 4, 'resultsPerPage': 2, 'vulnerabilities': items[:2]},
        {'totalResults': 4, 'resultsPerPage': 2, 'vulnerabilities': items[2:]},
    ])
    sleeps = []
    out_path = tmp_path / 'feeds' / 'busybox.json'

    count = fetch_nvd_feed(out_path, cpe_name='cpe:2.3:a:busybox:busybox:*:*:*:*:*:*:*:*', page_size=2,
                           session=session, url='https://nvd.example/api', sleep=sleeps.append)

    assert count == 4
    assert sleeps == [6.0]
    assert [params['startIndex'] for _, params, _ in session.requests] == [0, 2]
    assert session.requests[0][1]['cpeName'].startswith('cpe:2.3:a:busybox')
    assert session.requests[0][2] == {}
    assert len(ingest_nvd_feed([out_path.read_bytes()])) == 4


def test_fetch_nvd_feed_with_key_and_empty_result(tmp_path):
    session = FakeSession([{'totalResults': 0, 'resultsPerPage': 0, 'vulnerabilities': []}])
    sleeps = []
    count = fetch_nvd_feed(tmp_path / 'empty.json', api_key='secret', keyword='dnsmasq', session=session,
                           sleep=sleeps.append)

    assert count == 0
    assert sleeps == []
    _, params, headers = session.requests[0]
    assert headers == {'apiKey': 'secret'}
    assert params['keywordSearch'] == 'dnsmasq'
