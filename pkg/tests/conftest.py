from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
import io
import json
import os
from pathlib import Path
import socket
import tarfile
import threading

from loguru import logger
import pytest

from squashfs_packer import directory, file, pack_squashfs, symlink, uboot_header

from firmscan.classification import load_rule_table
from firmscan.vulndb import ingest_nvd_feed

FIXTURES_DIR = Path(__file__).parent / 'fixtures'
FIXED_TIME = '2024-03-01T00:00:00Z'

BUSYBOX_BINARY = (b'\x7fELF\x01\x01\x01' + bytes(57)
                  + b'BusyBox v1.33.2 (2021-12-29 10:26:17 UTC) multi-call binary.\x00'
                  + bytes(200))
OS_RELEASE = b'NAME="OpenWrt"\nVERSION="21.02.1"\nID="openwrt"\n'
LIBCRYPTO = b'\x7fELF\x01\x01\x01' + bytes(57) + b'OpenSSL 1.0.2 22 Jan 2015\x00' + bytes(64)
DNSMASQ = b'\x7fELF\x01\x01\x01' + bytes(57) + b'dnsmasq-2.77\x00' + bytes(64)
OPKG_STATUS = b"""Package: busybox
Version: 1.33.2-1
Architecture: mipsel_24kc
Status: install user installed

Package: dnsmasq-full
Version: 2.77-3
Depends: libc,
 libubus
Architecture: mipsel_24kc

Package: broken-stanza
Architecture: all
"""

FIRMWARE_ROOTFS_OFFSET = 0x40000
LOOPBACK_HOSTS = ('127.0.0.1', '::1', 'localhost')


def minimal_nodes():
    return [
        file('bin/busybox', BUSYBOX_BINARY, 0o755),
        file('etc/os-release', OS_RELEASE),
    ]


def gateway_nodes():
    return minimal_nodes() + [
        directory('tmp', 0o1777),
        file('usr/lib/opkg/status', OPKG_STATUS),
        file('usr/lib/libcrypto.so.1.0.2', LIBCRYPTO, 0o755),
        symlink('usr/lib/libcrypto.so', 'libcrypto.so.1.0.2'),
        file('usr/sbin/dnsmasq', DNSMASQ, 0o755),
    ]


def firmware_bytes(rootfs: bytes) -> bytes:
    header = uboot_header(len(rootfs), 'OpenWrt r16325')
    return header + bytes(FIRMWARE_ROOTFS_OFFSET - len(header)) + rootfs


def write_nodes(root: Path, nodes):
    """Mirrors packer nodes on disk with explicit permissions."""
    def make_dirs(path: Path):
        if path.exists():
            return
        make_dirs(path.parent)
        path.mkdir()
        path.chmod(0o755)

    make_dirs(root)
    for node in nodes:
        target = root / node.path
        if node.kind == 'dir':
            make_dirs(target)
            target.chmod(node.mode)
            continue
        make_dirs(target.parent)
        if node.kind == 'symlink':
            target.symlink_to(node.payload)
        else:
            target.write_bytes(node.payload)
            target.chmod(node.mode)
    return root


def write_tar(path: Path, members):
    """Writes regular file members ``(name, content)`` to a tar archive in order."""
    with tarfile.open(path, 'w') as archive:
        for name, content in members:
            info = tarfile.TarInfo(name)
            info.size = len(content)
            info.mode = 0o644
            archive.addfile(info, io.BytesIO(content))
    return path


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Any connection that is not to the local machine fails the test."""
    connect = socket.socket.connect

    def guarded_connect(sock, address):
        if sock.family == socket.AF_UNIX or (isinstance(address, tuple) and address[0] in LOOPBACK_HOSTS):
            return connect(sock, address)
        raise AssertionError(f'Unexpected network access to {address!r}.')

    monkeypatch.setattr(socket.socket, 'connect', guarded_connect)


@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch, tmp_path):
    for name in list(os.environ):
        if name.startswith('FIRMSCAN_') or name.lower() in ('http_proxy', 'https_proxy', 'all_proxy'):
            monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv('FIRMSCAN_CACHE_DIR', str(tmp_path / 'cache'))


@pytest.fixture(autouse=True)
def reset_logger():
    yield
    logger.remove()


@pytest.fixture
def log_messages():
    messages = []
    handler = logger.add(lambda m: messages.append(m.record['message']), level='DEBUG')
    yield messages
    logger.remove(handler)


@pytest.fixture
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture
def busybox_feed():
    return (FIXTURES_DIR / 'nvd_busybox.json').read_bytes()


@pytest.fixture
def busybox_index(busybox_feed):
    return ingest_nvd_feed([busybox_feed], source_label='busybox', ingested_at=FIXED_TIME)


@pytest.fixture
def full_index(busybox_feed):
    extra = (FIXTURES_DIR / 'nvd_extra.json').read_bytes()
    return ingest_nvd_feed([busybox_feed, extra], source_label='all', ingested_at=FIXED_TIME)


@pytest.fixture(scope='session')
def rule_table():
    return load_rule_table()


@pytest.fixture(scope='session')
def minimal_squashfs():
    return pack_squashfs(minimal_nodes())


@pytest.fixture(scope='session')
def gateway_squashfs():
    return pack_squashfs(gateway_nodes())


@pytest.fixture
def firmware_image(tmp_path, minimal_squashfs):
    path = tmp_path / 'images' / 'router-minimal.bin'
    path.parent.mkdir(exist_ok=True)
    path.write_bytes(firmware_bytes(minimal_squashfs))
    return path


@pytest.fixture
def gateway_image(tmp_path, gateway_squashfs):
    path = tmp_path / 'images' / 'gateway.bin'
    path.parent.mkdir(exist_ok=True)
    path.write_bytes(firmware_bytes(gateway_squashfs))
    return path


def chat_envelope(label, reasoning='scripted answer'):
    return {'choices': [{'message': {'content': json.dumps({'classification': label, 'reasoning': reasoning})}}]}


class LlmStub:
    """A local chat completions endpoint.

    Scripted ``(status, body)`` answers are served first, in order. After
    that the stub labels a prompt by the words in its description.

    """

    def __init__(self):
        self.script = []
        self.requests = []
        self.url = ''
        self._lock = threading.Lock()

    def respond(self, headers, body):
        with self._lock:
            self.requests.append((headers, body))
            if self.script:
                return self.script.pop(0)
        prompt = body['messages'][0]['content'].lower()
        if 'overflow' in prompt or 'over-read' in prompt:
            label = 'spatial-memory-related'
        elif 'null pointer' in prompt:
            label = 'other-memory-related'
        else:
            label = 'not-memory-related'
        return 200, chat_envelope(label, 'labelled by description')

    @property
    def prompts(self):
        return [body['messages'][0]['content'] for _, body in self.requests]


class _StubHandler(BaseHTTPRequestHandler):

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers.get('Content-Length', 0))))
        status, payload = self.server.stub.respond(dict(self.headers), body)
        data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
        self.send_response(status)
        self.send_header('Content-Type', 'application/json')
        self.send_header('Content-Length', str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def llm_stub():
    server = ThreadingHTTPServer(('127.0.0.1', 0), _StubHandler)
    server.stub = LlmStub()
    server.stub.url = f'http://127.0.0.1:{server.server_address[1]}/v1/chat/completions'
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server.stub
    server.shutdown()
    server.server_close()
