"""Remote LLM classifier over an OpenAI-compatible chat completions endpoint.

The client bounds concurrent requests, rate-limits with a token bucket,
retries transport failures with exponential backoff and caches results by
description digest.

"""
from dataclasses import dataclass, field
import json
import threading
import time
from typing import Callable, Dict, Union

from jinja2 import Template
from loguru import logger
import requests

from firmscan import globals as project_globals
from firmscan import paths
from firmscan.globals import CLASSIFICATION_SOURCES, CONFIDENCE, MEMORY_CLASSES
from firmscan.exceptions import (EmptyDescription, LlmBadResponse, LlmRateLimited,
                                 LlmTransportError, LlmUnknownLabel)
from firmscan.classification.rules import ClassificationResult
from firmscan.utilities import sha256_hex


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str
    api_key: str = field(default='', repr=False)
    model: str = project_globals.LLM_DEFAULT_MODEL
    timeout: float = 30.0
    max_attempts: int = project_globals.LLM_MAX_ATTEMPTS
    backoff_base: float = 1.0
    max_in_flight: int = project_globals.LLM_MAX_IN_FLIGHT
    requests_per_second: float = 5.0


class TokenBucket:
    """Token bucket rate limiter; a non-positive rate disables limiting."""

    def __init__(self, rate_per_second: float, sleep: Callable[[float], None] = time.sleep):
        self.rate = rate_per_second
        self.capacity = max(1.0, rate_per_second)
        self.tokens = self.capacity
        self.last_time = time.monotonic()
        self.lock = threading.Lock()
        self._sleep = sleep

    def acquire(self):
        """Takes one token, sleeping outside the lock until it is due.

        A waiting caller reserves its token first, so concurrent callers are
        spaced one interval apart.

        """
        if self.rate <= 0:
            return
        with self.lock:
            now = time.monotonic()
            self.tokens = min(self.capacity, self.tokens + (now - self.last_time) * self.rate)
            self.last_time = now
            self.tokens -= 1
            wait = -self.tokens / self.rate if self.tokens < 0 else 0.0
        if wait > 0:
            self._sleep(wait)


def render_prompt(description: str) -> str:
    with (paths.TEMPLATE_DIR / paths.PROMPT_TEMPLATE).open() as infile:
        return Template(infile.read()).render(description=description)


def parse_classification(body: Union[dict, str]) -> ClassificationResult:
    """Reads a classification from a response body.

    The body may be a chat completions envelope whose message content
    holds the JSON object, or the object itself.

    """
    if isinstance(body, dict) and 'choices' in body:
        try:
            body = body['choices'][0]['message']['content']
        except (KeyError, IndexError, TypeError) as e:
            raise LlmBadResponse(f'Malformed chat completions envelope: {e}') from e
    if isinstance(body, str):
        try:
            body = json.loads(body)
        except ValueError as e:
            raise LlmBadResponse(f'Model output is not JSON: {e}') from e
    if not isinstance(body, dict):
        raise LlmBadResponse('Model output is not a JSON object.')
    label, reasoning = body.get('classification'), body.get('reasoning')
    if not isinstance(label, str) or not isinstance(reasoning, str):
        raise LlmBadResponse('Model output lacks string "classification" and "reasoning" keys.')
    if label not in MEMORY_CLASSES:
        raise LlmUnknownLabel(f'Model returned unknown label {label!r}.')
    return ClassificationResult(mem_class=label, source=CLASSIFICATION_SOURCES.LLM,
                                reasoning=reasoning, confidence=CONFIDENCE.HIGH)


class LlmClient:

    def __init__(self, config: LlmConfig, session: requests.Session = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.session = session or requests.Session()
        self._sleep = sleep
        self._semaphore = threading.BoundedSemaphore(max(1, config.max_in_flight))
        self._bucket = TokenBucket(config.requests_per_second, sleep)
        self._cache: Dict[str, ClassificationResult] = {}
        self._lock = threading.Lock()
        self.attempts = 0

    def _post(self, prompt: str) -> dict:
        payload = {
            'model': self.config.model,
            'messages': [{'role': 'user', 'content': prompt}],
            'response_format': {'type': 'json_object'},
            'temperature': 0,
        }
        headers = {'Authorization': f'Bearer {self.config.api_key}'} if self.config.api_key else {}
        with self._semaphore:
            self._bucket.acquire()
            with self._lock:
                self.attempts += 1
            try:
                response = self.session.post(self.config.endpoint, json=payload, headers=headers,
                                             timeout=self.config.timeout)
            except requests.RequestException as e:
                raise LlmTransportError(f'Request to {self.config.endpoint} failed: {e}') from e
        if response.status_code == 429:
            raise LlmRateLimited(f'{self.config.endpoint} is rate limiting requests.')
        if response.status_code >= 500:
            raise LlmTransportError(f'{self.config.endpoint} answered HTTP {response.status_code}.')
        if response.status_code >= 400:
            raise LlmBadResponse(f'{self.config.endpoint} answered HTTP {response.status_code}.')
        try:
            return response.json()
        except ValueError as e:
            raise LlmBadResponse(f'Response body is not JSON: {e}') from e

    def classify(self, description: str) -> ClassificationResult:
        """Classifies a description, consulting the cache first.

        Raises
        ------
        EmptyDescription
            If the description is empty.
        LlmError
            When the request fails after all attempts or the answer is unusable.

        """
        if not description or not description.strip():
            raise EmptyDescription('Cannot classify an empty description.')
        key = sha256_hex(description.encode('utf-8'))
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached

        prompt = render_prompt(description)
        for attempt in range(1, self.config.max_attempts + 1):
            try:
                result = parse_classification(self._post(prompt))
                break
            except (LlmTransportError, LlmRateLimited) as e:
                if attempt == self.config.max_attempts:
                    raise
                delay = self.config.backoff_base * 2 ** (attempt - 1)
                logger.debug(f'Classifier attempt {attempt} failed ({e.kind}); retrying in {delay:.1f}s.')
                self._sleep(delay)

        with self._lock:
            self._cache[key] = result
        return result


_clients: Dict[LlmConfig, LlmClient] = {}
_clients_lock = threading.Lock()


def shared_client(config: LlmConfig) -> LlmClient:
    """The process-wide client for a configuration, so equal configurations share one cache."""
    with _clients_lock:
        if config not in _clients:
            _clients[config] = LlmClient(config)
        return _clients[config]


def llm_classify(description: str, client_config: Union[LlmConfig, LlmClient]) -> ClassificationResult:
    """Classifies a description with the remote classifier."""
    if isinstance(client_config, LlmClient):
        return client_config.classify(description)
    return shared_client(client_config).classify(description)

