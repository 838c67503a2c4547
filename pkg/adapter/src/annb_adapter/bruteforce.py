"""Exact-scan adapter speaking annb-proto/1 on stdin/stdout.

One session per process. Commands arrive one per line and are tokenized
by POSIX shell rules; every command earns exactly one reply line, plus
the continuation lines announced by `ok <c>`. A malformed line gets an
`error <reason>` reply and the session keeps going, so a confused or
hostile harness cannot crash the process. EOF or `exit` ends the session
with status 0.

The search itself is a deliberate linear scan: distances to every
training point, sorted by (distance, id). Slow, but exactly right, which
is the whole point of a reference adapter.
"""

import heapq
import math
import shlex
import sys

PROTOCOL = "annb-proto/1"

METRIC_KIND = {"euclidean": "float", "angular": "float", "hamming": "bit"}

CONFIGURING = "configuring"
TRAINING = "training"
QUERYING = "querying"


def euclidean(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def angular(a, b):
    dot = na = nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero-norm vector under angular distance")
    return max(1.0 - dot / math.sqrt(na * nb), 0.0)


def hamming(a, b):
    return float((a ^ b).bit_count())

DISTANCE = {"euclidean": euclidean, "angular": angular, "hamming": hamming}


class Session:
    """Protocol state machine; handle() maps one line to its reply lines."""

    def __init__(self):
        self.phase = CONFIGURING
        self.metric = None
        self.dimension = None
        self.point_kind = None
        self.prepared_enabled = False
        self.rows = []
        self.pending_points = 0
        self.train_error = None
        self.params = []
        self.prepared = None
        self.candidates = 0

    # -- parsing helpers

    def parse_point(self, tokens):
        if self.point_kind == "bit":
            if len(tokens) != 1:
                raise ValueError(
                    f"bit point must be one hex token, got {len(tokens)}")
            return self.parse_bits(tokens[0])
        if len(tokens) != self.dimension:
            raise ValueError(
                f"point has {len(tokens)} coordinates, "
                f"expected {self.dimension}")
        return tuple(float(t) for t in tokens)

    def parse_bits(self, token):
        try:
            raw = bytes.fromhex(token)
        except ValueError:
            raise ValueError(f"bad hex token {token!r}") from None
        if len(raw) != (self.dimension + 7) // 8:
            raise ValueError(
                f"hex point is {len(raw)} bytes for "
                f"dimension {self.dimension}")
        value = int.from_bytes(raw, "big")
        pad = len(raw) * 8 - self.dimension
        if pad and value & ((1 << pad) - 1):
            raise ValueError("padding bits set in hex point")
        return value

    def scan(self, point, k):
        dist = DISTANCE[self.metric]
        self.candidates += len(self.rows)
        best = heapq.nsmallest(
            k, ((dist(point, row), pid) for pid, row in enumerate(self.rows)))
        lines = [f"ok {len(best)}"]
        lines += [f"{pid} {d!r}" for d, pid in best]
        return lines

    # -- per-verb handlers

    def do_config(self, args):
        if self.phase != CONFIGURING:
            return err("config after config-done")
        if len(args) != 2:
            return err("config takes a key and a value")
        key, value = args
        if key == "protocol":
            if value != PROTOCOL:
                return err(f"unsupported protocol {value!r}")
        elif key == "metric":
            if value not in METRIC_KIND:
                return err(f"unsupported metric {value!r}")
            self.metric = value
        elif key == "dimension":
            if not value.isdigit() or int(value) < 1:
                return err(f"bad dimension {value!r}")
            self.dimension = int(value)
        elif key == "point-kind":
            if value not in ("float", "bit"):
                return err(f"unsupported point kind {value!r}")
            self.point_kind = value
        elif key == "prepared-queries":
            if value != "1":
                return err("only prepared-queries 1 is understood")
            self.prepared_enabled = True
        elif key.startswith("arg") and key[3:].isdigit():
            pass
        else:
            return err(f"unknown config key {key!r}")
        return ["ok"]

    def do_config_done(self, args):
        if self.phase != CONFIGURING:
            return err("config-done after config-done")
        missing = [name for name, value in (
            ("metric", self.metric), ("dimension", self.dimension),
            ("point-kind", self.point_kind)) if value is None]
        if missing:
            return err("missing config: " + " ".join(missing))
        if METRIC_KIND[self.metric] != self.point_kind:
            return err(f"metric {self.metric} does not go with "
                       f"{self.point_kind} points")
        self.phase = TRAINING
        return ["ok"]

    def do_train(self, args):
        if self.phase != TRAINING or self.pending_points or self.rows:
            return err("train is not legal now")
        if len(args) != 2 or not all(a.isdigit() for a in args):
            return err("train takes two integers")
        n, d = int(args[0]), int(args[1])
        if n < 1:
            return err("training set must hold at least one point")
        if d != self.dimension:
            return err(f"train dimension {d} does not match "
                       f"configured {self.dimension}")
        self.pending_points = n
        self.train_error = None
        return ["ok"]

    def take_point(self, line):
        """Point lines get no replies; a bad one fails the later train-done."""
        self.pending_points -= 1
        if self.train_error is not None:
            return
        try:
            tokens = shlex.split(line, comments=False, posix=True)
            self.rows.append(self.parse_point(tokens))
        except ValueError as e:
            self.train_error = str(e)

    def do_train_done(self, args):
        if self.phase != TRAINING or not (self.rows or self.train_error):
            return err("train-done without train")
        if self.train_error is not None:
            reason, self.train_error = self.train_error, None
            self.rows = []
            return err(f"bad training point: {reason}")
        self.phase = QUERYING
        return ["ok"]

    def do_query_params(self, args):
        if self.phase != QUERYING:
            return err("query-params before training")
        self.params = list(args)
        self.prepared = None
        self.candidates = 0
        return ["ok"]

    def split_query(self, args):
        take = 1 if self.point_kind == "bit" else self.dimension
        if len(args) != take + 1:
            raise ValueError(
                f"query takes {take} point tokens plus k, got {len(args)}")
        k = args[-1]
        if not k.isdigit():
            raise ValueError(f"bad k {k!r}")
        return self.parse_point(args[:-1]), int(k)

    def do_query(self, args):
        if self.phase != QUERYING:
            return err("query before training")
        try:
            point, k = self.split_query(args)
            return self.scan(point, k)
        except ValueError as e:
            return err(str(e))

    def do_prepare(self, args):
        if self.phase != QUERYING:
            return err("prepare before training")
        if not self.prepared_enabled:
            return err("prepared-queries was not negotiated")
        try:
            self.prepared = self.parse_point(args)
        except ValueError as e:
            return err(str(e))
        return ["ok"]

    def do_run(self, args):
        if self.prepared is None:
            return err("run without a prepared query")
        if len(args) != 1 or not args[0].isdigit():
            return err("run takes k")
        point, self.prepared = self.prepared, None
        return self.scan(point, int(args[0]))

    def do_stats(self, args):
        if self.phase != QUERYING:
            return err("stats before training")
        return ["ok 1", f"candidates {self.candidates}"]

    HANDLERS = {
        "config": do_config,
        "config-done": do_config_done,
        "train": do_train,
        "train-done": do_train_done,
        "query-params": do_query_params,
        "query": do_query,
        "prepare": do_prepare,
        "run": do_run,
        "stats": do_stats,
    }

    def handle(self, line):
        """One input line -> (reply lines, session still running)."""
        if self.pending_points > 0:
            self.take_point(line)
            return [], True
        try:
            tokens = shlex.split(line, comments=False, posix=True)
        except ValueError as e:
            return err(f"cannot tokenize line: {e}"), True
        if not tokens:
            return err("empty command"), True
        verb, args = tokens[0], tokens[1:]
        if verb == "exit":
            return [], False
        handler = self.HANDLERS.get(verb)
        if handler is None:
            return err(f"unknown command {verb!r}"), True
        return handler(self, args), True


def err(message):
    return [f"error {message}"]


def serve(stdin, stdout) -> int:
    session = Session()
    for raw in stdin:
        replies, alive = session.handle(raw.rstrip("\r\n"))
        for line in replies:
            stdout.write(line + "\n")
        stdout.flush()
        if not alive:
            break
    return 0


def main() -> int:
    return serve(sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
