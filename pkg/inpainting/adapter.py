"""
Out-of-process model adapters.

An adapter is any program that reads one JSON request per line on stdin and
answers with one JSON line on stdout. Rasters travel as base64 PNG strings.
The first request is always ``{"op": "hello"}``; the answer describes the
backend (``backend_id``, ``max_concurrent``, ``preferred_resolutions``,
``supports_batching`` and, for encoders, ``dim`` and ``preprocess``).
Failures are answered with ``{"ok": false, "error": ..., "kind": ...}``
where ``kind`` is ``"resolution"`` or ``"timeout"`` for the matching errors.
"""
import json
import logging
import select
import shlex
import subprocess
import threading

from core.exceptions import BackendError, BackendTimeout, \
                            BackendUnavailable, ResolutionUnsupported

logger = logging.getLogger(__name__)


class AdapterProcess:
    def __init__(self, command, timeout=300.0):
        self.command = command
        self.timeout = timeout
        self.info = {}
        self._proc = None
        self._lock = threading.Lock()

    def _start(self):
        try:
            self._proc = subprocess.Popen(shlex.split(self.command),
                                          stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE,
                                          text=True,
                                          bufsize=1)
        except OSError as e:
            raise BackendUnavailable(f'cannot start adapter {self.command!r}: {e}')
        self.info = self._exchange({'op': 'hello'})
        logger.info('adapter started command=%r backend=%s',
                    self.command, self.info.get('backend_id'))

    def _exchange(self, payload):
        proc = self._proc
        if proc.poll() is not None:
            raise BackendUnavailable(
                f'adapter {self.command!r} exited with {proc.returncode}')
        try:
            proc.stdin.write(json.dumps(payload) + '\n')
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise BackendUnavailable(f'adapter {self.command!r}: {e}')
        ready, _, _ = select.select([proc.stdout], [], [], self.timeout)
        if not ready:
            # a late answer would be read by the next request; start over
            self._kill()
            raise BackendTimeout(
                f'adapter {self.command!r} gave no answer in {self.timeout}s')
        line = proc.stdout.readline()
        if not line:
            raise BackendUnavailable(f'adapter {self.command!r} closed its output')
        try:
            answer = json.loads(line)
        except json.JSONDecodeError:
            raise BackendError(f'adapter {self.command!r} sent malformed JSON')
        if not answer.get('ok', False):
            message = answer.get('error', 'unknown adapter error')
            kind = answer.get('kind')
            if kind == 'resolution':
                raise ResolutionUnsupported(message)
            if kind == 'timeout':
                raise BackendTimeout(message)
            raise BackendError(message)
        return answer

    def request(self, payload):
        with self._lock:
            if self._proc is None:
                self._start()
            return self._exchange(payload)

    def hello(self):
        with self._lock:
            if self._proc is None:
                self._start()
            return self.info

    def _kill(self):
        proc, self._proc = self._proc, None
        proc.kill()
        proc.wait()
        proc.stdin.close()
        proc.stdout.close()
        logger.warning('adapter killed command=%r', self.command)

    def close(self):
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            self._proc = None
