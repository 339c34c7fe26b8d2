import json
import socket

import pytest

from conftest import chat_envelope

from firmscan.globals import CLASSIFICATION_SOURCES, CONFIDENCE, MEMORY_CLASSES
from firmscan.exceptions import (ClassificationConflict, EmptyDescription, LlmBadResponse, LlmRateLimited,
                                 LlmTransportError, LlmUnknownLabel, MalformedCweId, RuleTableError)
from firmscan.classification import (ClassificationResult, LlmClient, LlmConfig, MemoryClassifier, classify_cve,
                                     classify_cwe, classify_description, llm_classify, load_rule_table,
                                     shared_client)
from firmscan.classification.llm import TokenBucket, parse_classification, render_prompt
from firmscan.vulndb import CveRecord


def llm_client(stub, sleeps, **overrides):
    settings = dict(endpoint=stub.url, api_key='secret', requests_per_second=0)
    settings.update(overrides)
    return LlmClient(LlmConfig(**settings), sleep=sleeps.append)


def write_table(tmp_path, text, name='rules.json'):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_default_rule_table(rule_table):
    assert len(rule_table) == 41
    assert rule_table.label == 'v1'
    assert rule_table.get('CWE-787') == MEMORY_CLASSES.SPATIAL
    assert rule_table.get('CWE-416') == MEMORY_CLASSES.TEMPORAL
    assert rule_table.get('CWE-476') == MEMORY_CLASSES.OTHER_MEMORY
    assert rule_table.get('CWE-22') == MEMORY_CLASSES.NOT_MEMORY
    assert rule_table.get('CWE-9999') is None


def test_rule_table_accepts_labels_and_aliases(tmp_path):
    table = load_rule_table(write_table(tmp_path, json.dumps({
        'CWE-1': 'spatial-memory-related', 'CWE-2': 'none', 'CWE-3': 'temporal',
    }), name='site_rules.v2.json'))

    assert table.label == 'v2'
    assert table.mapping == {'CWE-1': MEMORY_CLASSES.SPATIAL, 'CWE-2': MEMORY_CLASSES.NOT_MEMORY,
                             'CWE-3': MEMORY_CLASSES.TEMPORAL}
    assert load_rule_table(write_table(tmp_path, '{"CWE-1": "other", "CWE-1": "other"}')).label == 'rules'


@pytest.mark.parametrize('text', [
    '{"CWE-1": "spatial", "CWE-1": "temporal"}',
    '{"CWE-x": "spatial"}',
    '{"787": "spatial"}',
    '{"CWE-1": "purple"}',
    '{"CWE-1": ',
])
def test_rule_table_errors(tmp_path, text):
    with pytest.raises(RuleTableError):
        load_rule_table(write_table(tmp_path, text))


def test_classify_cwe(rule_table):
    result = classify_cwe('CWE-787', rule_table)
    assert result.mem_class == MEMORY_CLASSES.SPATIAL
    assert result.source == CLASSIFICATION_SOURCES.RULE_TABLE
    assert result.confidence == CONFIDENCE.HIGH
    assert result.cwe_id == 'CWE-787'
    assert result.is_memory_related
    assert not classify_cwe('CWE-22', rule_table).is_memory_related
    assert classify_cwe('CWE-9999', rule_table) is None


@pytest.mark.parametrize('cwe_id', ['cwe-787', 'NVD-CWE-noinfo', '787', 'CWE-', None])
def test_classify_cwe_rejects_malformed_ids(rule_table, cwe_id):
    with pytest.raises(MalformedCweId):
        classify_cwe(cwe_id, rule_table)


@pytest.mark.parametrize('text, mem_class', [
    ('A use-after-free follows a heap overflow in the parser.', MEMORY_CLASSES.TEMPORAL),
    ('Heap-based buffer overflow in dnsmasq before 2.78.', MEMORY_CLASSES.SPATIAL),
    ('Packets trigger a Buffer Over-Read.', MEMORY_CLASSES.SPATIAL),
    ('A NULL pointer dereference in the hush applet.', MEMORY_CLASSES.OTHER_MEMORY),
    ('The cpio command allows a directory traversal.', MEMORY_CLASSES.NOT_MEMORY),
])
def test_classify_description(text, mem_class):
    result = classify_description(text)
    assert result.mem_class == mem_class
    assert result.source == CLASSIFICATION_SOURCES.KEYWORD
    assert result.confidence == CONFIDENCE.LOW


def test_classify_description_rejects_blank_text():
    with pytest.raises(EmptyDescription):
        classify_description(' \n')


@pytest.mark.parametrize('mem_class, source, confidence', [
    ('heap-related', CLASSIFICATION_SOURCES.KEYWORD, CONFIDENCE.LOW),
    (MEMORY_CLASSES.SPATIAL, CLASSIFICATION_SOURCES.RULE_TABLE, CONFIDENCE.LOW),
    (MEMORY_CLASSES.NOT_MEMORY, CLASSIFICATION_SOURCES.DEFAULT, CONFIDENCE.HIGH),
])
def test_classification_result_invariants(mem_class, source, confidence):
    with pytest.raises(ValueError):
        ClassificationResult(mem_class, source, 'reason', confidence)


def test_classifier_on_busybox_records(busybox_index, rule_table):
    classifier = MemoryClassifier(rule_table)
    results = {cve_id: classifier.classify(record) for cve_id, record in busybox_index.records.items()}

    assert {cve_id: (r.mem_class, r.source) for cve_id, r in results.items()} == {
        'CVE-2021-42376': (MEMORY_CLASSES.OTHER_MEMORY, CLASSIFICATION_SOURCES.RULE_TABLE),
        'CVE-2022-28391': (MEMORY_CLASSES.NOT_MEMORY, CLASSIFICATION_SOURCES.KEYWORD),
        'CVE-2022-48174': (MEMORY_CLASSES.SPATIAL, CLASSIFICATION_SOURCES.RULE_TABLE),
        'CVE-2023-39810': (MEMORY_CLASSES.NOT_MEMORY, CLASSIFICATION_SOURCES.RULE_TABLE),
    }
    assert dict(classifier.counts) == {CLASSIFICATION_SOURCES.RULE_TABLE: 3, CLASSIFICATION_SOURCES.KEYWORD: 1}


def test_classifier_uses_keywords_for_other_sentinel(full_index, rule_table):
    result = classify_cve(full_index.records['CVE-2014-0160'], rule_table)
    assert result.mem_class == MEMORY_CLASSES.SPATIAL
    assert result.source == CLASSIFICATION_SOURCES.KEYWORD
    assert result.confidence == CONFIDENCE.LOW


def test_strict_classifier_reports_conflicts(rule_table):
    conflicting = CveRecord('CVE-2020-1000', 'A flaw.', cwe_ids=('CWE-787', 'CWE-416'))
    agreeing = CveRecord('CVE-2020-1001', 'A flaw.', cwe_ids=('CWE-787', 'CWE-119'))

    assert MemoryClassifier(rule_table).classify(conflicting).mem_class == MEMORY_CLASSES.SPATIAL
    with pytest.raises(ClassificationConflict):
        MemoryClassifier(rule_table, strict=True).classify(conflicting)
    assert MemoryClassifier(rule_table, strict=True).classify(agreeing).cwe_id == 'CWE-787'


def test_classifier_skips_unknown_and_malformed_cwes(rule_table):
    record = CveRecord('CVE-2020-1002', 'A double free in the resolver.', cwe_ids=('CWE-abc', 'CWE-9999'))
    result = MemoryClassifier(rule_table).classify(record)
    assert (result.mem_class, result.source) == (MEMORY_CLASSES.TEMPORAL, CLASSIFICATION_SOURCES.KEYWORD)


def test_classifier_default_without_description(rule_table):
    classifier = MemoryClassifier(rule_table)
    result = classifier.classify(CveRecord('CVE-2020-1003', '   '))

    assert result.mem_class == MEMORY_CLASSES.NOT_MEMORY
    assert result.source == CLASSIFICATION_SOURCES.DEFAULT
    assert result.confidence == CONFIDENCE.LOW
    assert classifier.counts[CLASSIFICATION_SOURCES.DEFAULT] == 1


def test_render_prompt_names_labels_and_description():
    prompt = render_prompt('Heap-based buffer overflow in dnsmasq.')
    assert prompt.endswith('Description: Heap-based buffer overflow in dnsmasq.')
    for label in MEMORY_CLASSES:
        assert f'"{label}"' in prompt


def test_parse_classification_forms():
    bare = {'classification': MEMORY_CLASSES.TEMPORAL, 'reasoning': 'freed twice'}
    for body in (bare, json.dumps(bare), chat_envelope(MEMORY_CLASSES.TEMPORAL, 'freed twice')):
        result = parse_classification(body)
        assert result.mem_class == MEMORY_CLASSES.TEMPORAL
        assert result.source == CLASSIFICATION_SOURCES.LLM
        assert result.reasoning == 'freed twice'

    with pytest.raises(LlmUnknownLabel):
        parse_classification({'classification': 'heap-related', 'reasoning': ''})
    for body in ('not json', {'choices': []}, {'classification': MEMORY_CLASSES.SPATIAL}, ['a list']):
        with pytest.raises(LlmBadResponse):
            parse_classification(body)


def test_llm_client_classifies_and_caches(llm_stub):
    sleeps = []
    client = llm_client(llm_stub, sleeps)
    first = client.classify('Heap-based buffer overflow in dnsmasq before 2.78.')
    second = client.classify('Heap-based buffer overflow in dnsmasq before 2.78.')

    assert first == second
    assert first.mem_class == MEMORY_CLASSES.SPATIAL
    assert first.source == CLASSIFICATION_SOURCES.LLM
    assert first.confidence == CONFIDENCE.HIGH
    assert client.attempts == 1
    assert len(llm_stub.requests) == 1
    headers, body = llm_stub.requests[0]
    assert headers['Authorization'] == 'Bearer secret'
    assert body['model'] == 'gpt-4o'
    assert body['response_format'] == {'type': 'json_object'}
    assert 'dnsmasq before 2.78' in llm_stub.prompts[0]
    assert sleeps == []


def test_llm_client_without_key_sends_no_authorization(llm_stub):
    llm_client(llm_stub, [], api_key='').classify('A NULL pointer dereference.')
    headers, _ = llm_stub.requests[0]
    assert 'Authorization' not in headers


def test_llm_client_retries_server_errors(llm_stub):
    llm_stub.script = [(500, {'error': 'overloaded'})]
    sleeps = []
    client = llm_client(llm_stub, sleeps)

    result = client.classify('A NULL pointer dereference in the hush applet.')
    assert result.mem_class == MEMORY_CLASSES.OTHER_MEMORY
    assert client.attempts == 2
    assert sleeps == [1.0]


def test_llm_client_gives_up_after_rate_limiting(llm_stub):
    llm_stub.script = [(429, {'error': 'slow down'})] * 3
    sleeps = []
    client = llm_client(llm_stub, sleeps)

    with pytest.raises(LlmRateLimited):
        client.classify('A NULL pointer dereference.')
    assert client.attempts == 3
    assert sleeps == [1.0, 2.0]


@pytest.mark.parametrize('answer, error', [
    ((200, chat_envelope('heap-related')), LlmUnknownLabel),
    ((400, {'error': 'bad request'}), LlmBadResponse),
    ((200, b'<html>gateway</html>'), LlmBadResponse),
])
def test_llm_client_does_not_retry_bad_answers(llm_stub, answer, error):
    llm_stub.script = [answer]
    client = llm_client(llm_stub, [])
    with pytest.raises(error):
        client.classify('A NULL pointer dereference.')
    assert client.attempts == 1


def test_llm_client_transport_failure():
    listener = socket.socket()
    listener.bind(('127.0.0.1', 0))
    port = listener.getsockname()[1]
    listener.close()
    sleeps = []
    client = LlmClient(LlmConfig(endpoint=f'http://127.0.0.1:{port}/v1', max_attempts=2, requests_per_second=0,
                                 timeout=2.0), sleep=sleeps.append)

    with pytest.raises(LlmTransportError):
        client.classify('A NULL pointer dereference.')
    assert sleeps == [1.0]


def test_llm_client_rejects_blank_description(llm_stub):
    with pytest.raises(EmptyDescription):
        llm_client(llm_stub, []).classify('')
    assert llm_stub.requests == []


def test_classifier_consults_llm_after_rule_table(llm_stub, busybox_index, rule_table):
    classifier = MemoryClassifier(rule_table, llm=llm_client(llm_stub, []))
    results = [classifier.classify(r) for r in busybox_index.records.values()]

    assert dict(classifier.counts) == {CLASSIFICATION_SOURCES.RULE_TABLE: 3, CLASSIFICATION_SOURCES.LLM: 1}
    assert len(llm_stub.requests) == 1
    assert 'netstat' in llm_stub.prompts[0]
    assert results[1].source == CLASSIFICATION_SOURCES.LLM


def test_classifier_falls_back_when_llm_fails(llm_stub, busybox_index, rule_table, log_messages):
    record = busybox_index.records['CVE-2022-28391']
    llm_stub.script = [(503, {})]
    classifier = MemoryClassifier(rule_table, llm=llm_client(llm_stub, [], max_attempts=1))

    result = classifier.classify(record)
    assert result.source == CLASSIFICATION_SOURCES.KEYWORD
    assert dict(classifier.counts) == {'LlmFailure': 1, CLASSIFICATION_SOURCES.KEYWORD: 1}
    assert any('remote classifier failed' in m for m in log_messages)



def test_classify_cve_llm_fallback(llm_stub, busybox_index, rule_table):
    record = busybox_index.records['CVE-2022-28391']

    llm_stub.script = [(503, {})]
    result = classify_cve(record, rule_table, llm=llm_client(llm_stub, [], max_attempts=1))
    assert result.source == CLASSIFICATION_SOURCES.KEYWORD
    assert result.confidence == CONFIDENCE.LOW

    llm_stub.script = [(503, {})]
    with pytest.raises(LlmTransportError):
        classify_cve(record, rule_table, llm=llm_client(llm_stub, [], max_attempts=1), llm_fallback=False)

    llm_stub.script = [(200, {'choices': []})]
    with pytest.raises(LlmBadResponse):
        classify_cve(record, rule_table, llm=llm_client(llm_stub, []), llm_fallback=False)
    assert len(llm_stub.requests) == 3


def test_shared_client_per_configuration(llm_stub):
    config = LlmConfig(endpoint=llm_stub.url, requests_per_second=0)
    assert shared_client(config) is shared_client(LlmConfig(endpoint=llm_stub.url, requests_per_second=0))
    assert shared_client(config) is not shared_client(LlmConfig(endpoint=llm_stub.url, model='other'))

    assert llm_classify('A double free.', config).mem_class == MEMORY_CLASSES.NOT_MEMORY
    assert llm_classify('A double free.', config).mem_class == MEMORY_CLASSES.NOT_MEMORY
    assert len(llm_stub.requests) == 1


def test_token_bucket_waits_when_empty():
    sleeps = []
    bucket = TokenBucket(2.0, sleep=sleeps.append)
    for _ in range(3):
        bucket.acquire()

    assert len(sleeps) == 1
    assert 0 < sleeps[0] <= 0.5

    unlimited = TokenBucket(0, sleep=sleeps.append)
    for _ in range(10):
        unlimited.acquire()
    assert len(sleeps) == 1


def test_token_bucket_sleeps_without_holding_the_lock():
    waits = []
    bucket = TokenBucket(2.0, sleep=lambda delay: waits.append((delay, bucket.lock.locked())))
    for _ in range(4):
        bucket.acquire()

    assert [locked for _, locked in waits] == [False, False]
    assert waits[0][0] == pytest.approx(0.5, abs=0.05)
    assert waits[1][0] == pytest.approx(1.0, abs=0.05)
