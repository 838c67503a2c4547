"""Harness side of the external-algorithm text protocol, `annb-proto/1`.

The adapter is any program that reads newline-terminated commands on stdin
and answers on stdout, one reply line per command (plus declared
continuation lines). Lines are tokenized by POSIX shell rules.

Wire contract (harness -> adapter, then adapter -> harness):

    config <key> <value>        ok | error <msg>
    config-done                 ok
    train <n> <d>               ok, then the harness sends n point lines,
    train-done                  ok
    query-params <t1> ... <tm>  ok
    query <v1> ... <vd> <k>     ok <c>, then c lines "<id> [<extra>...]"
    prepare <v1> ... <vd>       ok            (prepared mode only)
    run <k>                     ok <c>, then c result lines
    stats                       ok <j>, then j lines "<key> <value>"
    exit                        adapter exits with status 0

Dense point lines carry d decimal tokens (shortest form that round-trips
through a 32-bit float); bit points travel as one hex token, most
significant bit of each byte first. The first config key is always
`protocol annb-proto/1`. Prepared mode is negotiated with
`config prepared-queries 1`; an `error` reply just turns the mode off.
"""

from __future__ import annotations

import os
import selectors
import shlex
import subprocess
import time

import numpy as np

from .core import Metric, PointKind, as_bits, as_metric, point_kind_for
from .errors import ProtocolError

PROTOCOL_VERSION = "annb-proto/1"

CONFIGURING = "configuring"
TRAINING = "training"
QUERYING = "querying"
PREPARED = "prepared"
DONE = "done"


def tokenize(line: str) -> list[str]:
    if "\x00" in line:
        raise ProtocolError("NUL byte in protocol line")
    try:
        return shlex.split(line, comments=False, posix=True)
    except ValueError as e:
        raise ProtocolError(f"cannot tokenize {line!r}: {e}") from e


def serialize(tokens) -> str:
    return " ".join(shlex.quote(str(t)) for t in tokens)


def format_float(v) -> str:
    """Shortest decimal token that parses back to the same float32."""
    return str(np.float32(v))


def format_dense_point(row) -> str:
    return " ".join(format_float(v) for v in np.asarray(row).ravel())


def format_bit_point(row) -> str:
    bits = as_bits(np.asarray(row).ravel())
    return np.packbits(bits).tobytes().hex()


def parse_bit_token(token: str, d: int) -> np.ndarray:
    try:
        raw = bytes.fromhex(token)
    except ValueError as e:
        raise ProtocolError(f"bad hex point {token!r}") from e
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if len(bits) < d or np.any(bits[d:]):
        raise ProtocolError(
            f"hex point holds {len(bits)} bits, expected {d}")
    return bits[:d]


class _Channel:
    """Line transport over a child's pipes with a per-reply deadline."""

    def __init__(self, proc: subprocess.Popen, reply_timeout: float):
        self.proc = proc
        self.reply_timeout = reply_timeout
        self._buf = b""
        os.set_blocking(proc.stdout.fileno(), False)
        self._sel = selectors.DefaultSelector()
        self._sel.register(proc.stdout, selectors.EVENT_READ)

    def send_line(self, line: str) -> None:
        try:
            self.proc.stdin.write(line.encode() + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ProtocolError(f"adapter closed stdin pipe: {e}") from e

    def read_line(self) -> str:
        deadline = time.monotonic() + self.reply_timeout
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line, self._buf = self._buf[:nl], self._buf[nl + 1:]
                return line.decode("utf-8", errors="replace")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError(
                    f"no reply within {self.reply_timeout}s")
            if not self._sel.select(timeout=min(remaining, 0.5)):
                continue
            chunk = self.proc.stdout.read(65536)
            if chunk == b"":
                raise ProtocolError("adapter closed stdout (died?)")
            if chunk:
                self._buf += chunk

    def close(self) -> None:
        self._sel.close()


class ExternalSession:
    """One adapter child process and the protocol phase machine around it.

    Every method sends one command and consumes its complete reply; an
    out-of-phase call or a bad reply raises ProtocolError, after which the
    session should be discarded.
    """

    def __init__(self, command: str, reply_timeout: float = 60.0):
        self.command = command
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=None,
        )
        self.chan = _Channel(self.proc, reply_timeout)
        self.phase = CONFIGURING
        self.options: dict[str, str] = {}
        self.last_train_overhead = 0.0

    def _require(self, *phases):
        if self.phase not in phases:
            raise ProtocolError(
                f"command illegal in phase {self.phase!r}")

    def _exchange(self, tokens) -> list[str]:
        self.chan.send_line(serialize(tokens))
        reply = tokenize(self.chan.read_line())
        if not reply:
            raise ProtocolError("empty reply line")
        return reply

    def _expect_ok(self, tokens) -> list[str]:
        reply = self._exchange(tokens)
        if reply[0] == "error":
            raise ProtocolError("adapter error: " + " ".join(reply[1:]))
        if reply[0] != "ok":
            raise ProtocolError(f"expected ok/error, got {reply!r}")
        return reply[1:]

    # -- configuration phase

    def config(self, key, value) -> bool:
        """True if the adapter accepted the key; False on `error`."""
        self._require(CONFIGURING)
        reply = self._exchange(["config", str(key), str(value)])
        if reply[0] == "ok":
            self.options[str(key)] = str(value)
            return True
        if reply[0] == "error":
            return False
        raise ProtocolError(f"expected ok/error, got {reply!r}")

    def config_strict(self, key, value) -> None:
        if not self.config(key, value):
            raise ProtocolError(f"adapter rejected config {key}={value}")

    def config_done(self) -> None:
        self._require(CONFIGURING)
        self._expect_ok(["config-done"])
        self.phase = TRAINING

    # -- training phase

    def train(self, points, point_kind: PointKind) -> float:
        """Run the whole train exchange; returns build seconds, measured
        as the exchange wall time minus the time this side spent writing
        point lines."""
        self._require(TRAINING)
        points = np.atleast_2d(points)
        n, d = points.shape
        fmt = (format_bit_point if point_kind is PointKind.BIT
               else format_dense_point)
        started = time.perf_counter()
        self._expect_ok(["train", str(n), str(d)])
        write_cost = 0.0
        for row in points:
            w0 = time.perf_counter()
            self.chan.send_line(fmt(row))
            write_cost += time.perf_counter() - w0
        self._expect_ok(["train-done"])
        total = time.perf_counter() - started
        self.phase = QUERYING
        self.last_train_overhead = write_cost
        return max(total - write_cost, 0.0)

    # -- query phase

    def query_params(self, params) -> None:
        self._require(QUERYING, PREPARED)
        self._expect_ok(["query-params", *[str(p) for p in params]])
        self.phase = QUERYING

    def _read_result_lines(self, extra: list[str], k: int) -> np.ndarray:
        if len(extra) != 1:
            raise ProtocolError(f"expected `ok <count>`, got ok {extra!r}")
        try:
            count = int(extra[0])
        except ValueError:
            raise ProtocolError(f"bad result count {extra[0]!r}") from None
        if count < 0 or count > k:
            raise ProtocolError(f"result count {count} outside 0..{k}")
        ids = np.empty(count, dtype=np.int64)
        for i in range(count):
            tokens = tokenize(self.chan.read_line())
            if not tokens:
                raise ProtocolError("empty result line")
            try:
                ids[i] = int(tokens[0])
            except ValueError:
                raise ProtocolError(
                    f"bad id token {tokens[0]!r}") from None
        return ids

    def _point_tokens(self, q) -> list[str]:
        if self.options.get("point-kind") == PointKind.BIT.value:
            return [format_bit_point(q)]
        return [format_float(v) for v in np.asarray(q).ravel()]

    def query(self, q, k: int) -> np.ndarray:
        self._require(QUERYING)
        extra = self._expect_ok(["query", *self._point_tokens(q), str(k)])
        return self._read_result_lines(extra, k)

    def prepare(self, q) -> None:
        self._require(QUERYING, PREPARED)
        self._expect_ok(["prepare", *self._point_tokens(q)])
        self.phase = PREPARED

    def run(self, k: int) -> np.ndarray:
        self._require(PREPARED)
        extra = self._expect_ok(["run", str(k)])
        self.phase = QUERYING
        return self._read_result_lines(extra, k)

    def stats(self) -> dict:
        self._require(QUERYING)
        extra = self._expect_ok(["stats"])
        if len(extra) != 1 or not extra[0].isdigit():
            raise ProtocolError(f"expected `ok <count>`, got ok {extra!r}")
        out = {}
        for _ in range(int(extra[0])):
            tokens = tokenize(self.chan.read_line())
            if len(tokens) < 2:
                raise ProtocolError(f"bad stats line {tokens!r}")
            key, value = tokens[0], tokens[1]
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value
        return out

    # -- teardown

    def shutdown(self, grace: float = 5.0) -> int:
        """Send exit and wait; escalate to terminate/kill if ignored."""
        if self.phase != DONE and self.proc.poll() is None:
            try:
                self.chan.send_line("exit")
            except ProtocolError:
                pass
        self.phase = DONE
        try:
            return self.proc.wait(timeout=grace)
        except subprocess.TimeoutExpired:
            self.proc.terminate()
            try:
                return self.proc.wait(timeout=grace)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                return self.proc.wait()
        finally:
            self.chan.close()
            for pipe in (self.proc.stdin, self.proc.stdout):
                if pipe:
                    pipe.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


class ExternalAlgorithm:
    """Adapter child dressed up in the in-process calling convention.

    The runner times `query` (or `run_prepared`) exactly like any other
    algorithm; `prepare_query` stays outside the clock so parse time is
    excluded, which is the whole point of prepared mode.
    """

    def __init__(self, command, metric, dimension, constructor_args=(),
                 prepared=True, reply_timeout=60.0):
        self.command = command
        self.metric = as_metric(metric)
        self.point_kind = point_kind_for(self.metric)
        self.dimension = int(dimension)
        self.constructor_args = list(constructor_args)
        self.want_prepared = bool(prepared)
        self.reply_timeout = reply_timeout
        self.session = None
        self.prepared = False
        self.build_time_override = None

    def build(self, train) -> None:
        s = ExternalSession(self.command, self.reply_timeout)
        try:
            s.config_strict("protocol", PROTOCOL_VERSION)
            s.config_strict("metric", self.metric.value)
            s.config_strict("dimension", self.dimension)
            s.config_strict("point-kind", self.point_kind.value)
            for i, arg in enumerate(self.constructor_args):
                s.config(f"arg{i}", arg)
            if self.want_prepared:
                self.prepared = s.config("prepared-queries", 1)
            s.config_done()
            self.build_time_override = s.train(train, self.point_kind)
        except BaseException:
            s.shutdown()
            raise
        self.session = s

    def set_query_params(self, *params) -> None:
        self.session.query_params(params)

    def query(self, q, k: int) -> np.ndarray:
        return self.session.query(q, k)

    def prepare_query(self, q) -> None:
        if self.prepared:
            self.session.prepare(q)
        else:
            self._oneshot = q

    def run_prepared(self, k: int) -> np.ndarray:
        if self.prepared:
            return self.session.run(k)
        return self.session.query(self._oneshot, k)

    def stats(self) -> dict:
        return self.session.stats()

    def close(self) -> None:
        if self.session is not None:
            self.session.shutdown()
            self.session = None


# -- conformance suite ------------------------------------------------------

_TRAIN3 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], dtype=np.float32)


def _configured_session(command, timeout, prepared=False):
    s = ExternalSession(command, reply_timeout=timeout)
    s.config_strict("protocol", PROTOCOL_VERSION)
    s.config_strict("metric", "euclidean")
    s.config_strict("dimension", 2)
    s.config_strict("point-kind", "float")
    negotiated = s.config("prepared-queries", 1) if prepared else False
    s.config_done()
    s.train(_TRAIN3, PointKind.DENSE)
    s.query_params([])
    return s, negotiated


def _check_happy_path(command, timeout):
    with ExternalSession(command, reply_timeout=timeout) as s:
        s.config_strict("protocol", PROTOCOL_VERSION)
        s.config_strict("metric", "euclidean")
        s.config_strict("dimension", 2)
        s.config_strict("point-kind", "float")
        s.config_done()
        s.train(_TRAIN3, PointKind.DENSE)
        s.query_params([])
        ids = s.query([0.0, 0.0], 1)
        if ids.tolist() != [0]:
            raise ProtocolError(
                f"identity query returned {ids.tolist()}, expected [0]")
        ids = s.query([0.9, 0.1], 2)
        if ids.tolist() != [1, 0]:
            raise ProtocolError(
                f"2-NN of (0.9,0.1) returned {ids.tolist()}, expected [1, 0]")


def _check_quoting(command, timeout):
    s, _ = _configured_session(command, timeout)
    with s:
        s.query_params(["a b", "plain"])
        ids = s.query([0.0, 0.0], 3)
        if sorted(ids.tolist()) != [0, 1, 2]:
            raise ProtocolError(f"full query returned {ids.tolist()}")


def _check_bad_query_keeps_session(command, timeout):
    s, _ = _configured_session(command, timeout)
    with s:
        reply = s._exchange(["query", "0.0", "1"])  # one token short
        if reply[0] != "error":
            raise ProtocolError(
                f"wrong-length query got {reply!r}, expected an error")
        reply = s._exchange(["frobnicate"])
        if reply[0] != "error":
            raise ProtocolError(
                f"unknown command got {reply!r}, expected an error")
        ids = s.query([0.0, 0.0], 1)
        if ids.tolist() != [0]:
            raise ProtocolError("session unusable after an error reply")


def _check_prepared_mode(command, timeout):
    s, negotiated = _configured_session(command, timeout, prepared=True)
    with s:
        if not negotiated:
            raise ProtocolError("adapter rejected prepared-queries 1")
        oneshot = s.query([0.9, 0.1], 2)
        s.prepare([0.9, 0.1])
        prepared = s.run(2)
        if oneshot.tolist() != prepared.tolist():
            raise ProtocolError(
                f"prepared ids {prepared.tolist()} != one-shot "
                f"{oneshot.tolist()}")


def _check_stats_shape(command, timeout):
    s, _ = _configured_session(command, timeout)
    with s:
        s.query([0.0, 0.0], 1)
        out = s.stats()
        if not isinstance(out, dict):
            raise ProtocolError("stats reply did not parse")


def _check_clean_exit(command, timeout):
    s, _ = _configured_session(command, timeout)
    status = s.shutdown()
    if status != 0:
        raise ProtocolError(f"exit status {status}, expected 0")


CONFORMANCE_CHECKS = [
    ("happy-path", _check_happy_path),
    ("posix-quoting", _check_quoting),
    ("error-replies-keep-session", _check_bad_query_keeps_session),
    ("prepared-mode", _check_prepared_mode),
    ("stats-shape", _check_stats_shape),
    ("clean-exit", _check_clean_exit),
]


def run_conformance(command: str, reply_timeout: float = 10.0):
    """Run every conformance check against an adapter command line.

    Returns a list of (check name, passed, detail) triples; the detail is
    the failure reason when passed is False.
    """
    results = []
    for name, check in CONFORMANCE_CHECKS:
        try:
            check(command, reply_timeout)
            results.append((name, True, ""))
        except (ProtocolError, OSError) as e:
            results.append((name, False, str(e)))
    return results
