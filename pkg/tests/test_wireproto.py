"""Protocol-layer tests: tokenization, wire formats, and live sessions
against the reference adapter in wire_fixture.py."""

import shlex
import string
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from annbench.baselines import BruteForce
from annbench.core import PointKind
from annbench.errors import ProtocolError
from annbench.wireproto import (PROTOCOL_VERSION, ExternalAlgorithm,
                                ExternalSession, format_bit_point,
                                format_dense_point, format_float,
                                parse_bit_token, run_conformance, serialize,
                                tokenize)

FIXTURE = Path(__file__).parent / "wire_fixture.py"


def adapter_command(mode="ok"):
    return (f"{shlex.quote(sys.executable)} {shlex.quote(str(FIXTURE))}"
            f" --mode {mode}")


# -------------------------------------------------------------- tokenizer

def test_tokenize_double_quotes():
    assert tokenize('query "0.5 1.0" 10') == ["query", "0.5 1.0", "10"]


def test_tokenize_backslash_escape():
    assert tokenize("a b\\ c") == ["a", "b c"]


def test_tokenize_single_quotes():
    assert tokenize("x 'y z'") == ["x", "y z"]


def test_tokenize_empty_line():
    assert tokenize("") == []
    assert tokenize("   ") == []


def test_tokenize_rejects_unterminated_quote():
    with pytest.raises(ProtocolError):
        tokenize('query "unfinished')


def test_tokenize_rejects_nul():
    with pytest.raises(ProtocolError):
        tokenize("a\x00b")


def test_serialize_tokenize_round_trip_fuzz(rng):
    alphabet = string.ascii_letters + string.digits + " \t'\"\\$#;|&<>(){}*?~`!"
    for _ in range(1000):
        tokens = []
        for _ in range(rng.integers(0, 6)):
            length = rng.integers(1, 12)
            tokens.append("".join(
                alphabet[i] for i in rng.integers(0, len(alphabet), length)))
        assert tokenize(serialize(tokens)) == tokens


def test_tokenizer_agrees_with_system_shell(rng):
    """Differential check on an escape-free corpus: our tokenizer and
    /bin/sh must split the same lines into the same fields."""
    safe = string.ascii_letters + string.digits + ".-_"
    lines = []
    for _ in range(40):
        words = ["".join(safe[i] for i in
                         rng.integers(0, len(safe), rng.integers(1, 10)))
                 for _ in range(rng.integers(1, 7))]
        lines.append(" ".join(words))
    for line in lines:
        shell = subprocess.run(
            ["/bin/sh", "-c", f'printf "%s\\n" {line}'],
            capture_output=True, text=True, check=True)
        assert tokenize(line) == shell.stdout.splitlines()


# ------------------------------------------------------------ wire formats

def test_format_float_round_trips_float32(rng):
    values = np.concatenate([
        rng.standard_normal(200).astype(np.float32),
        np.array([0.0, -0.0, 1e-30, -1e30, 0.1, 2.5], dtype=np.float32),
    ])
    for v in values:
        assert np.float32(format_float(v)) == v


def test_format_dense_point_token_count():
    line = format_dense_point(np.array([0.5, -1.25, 3.0], dtype=np.float32))
    assert tokenize(line) == ["0.5", "-1.25", "3.0"]


def test_bit_point_round_trip(rng):
    for d in (1, 7, 8, 9, 64, 100):
        bits = (rng.integers(0, 2, d)).astype(np.uint8)
        token = format_bit_point(bits)
        assert np.array_equal(parse_bit_token(token, d), bits)


def test_parse_bit_token_rejects_bad_input():
    with pytest.raises(ProtocolError):
        parse_bit_token("zz", 8)
    with pytest.raises(ProtocolError):
        parse_bit_token("ff", 16)          # too few bits
    with pytest.raises(ProtocolError):
        parse_bit_token("ff", 4)           # nonzero padding


def test_bit_point_is_msb_first():
    bits = np.zeros(8, dtype=np.uint8)
    bits[0] = 1
    assert format_bit_point(bits) == "80"


# ------------------------------------------------------------ live session

def make_session(mode="ok", timeout=10.0, metric="euclidean", dim=2,
                 kind="float"):
    s = ExternalSession(adapter_command(mode), reply_timeout=timeout)
    s.config_strict("protocol", PROTOCOL_VERSION)
    s.config_strict("metric", metric)
    s.config_strict("dimension", dim)
    s.config_strict("point-kind", kind)
    return s


TRAIN3 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], dtype=np.float32)


def test_session_identity_query():
    with make_session() as s:
        s.config_done()
        build = s.train(TRAIN3, PointKind.DENSE)
        assert build >= 0.0
        s.query_params([])
        assert s.query([0.0, 0.0], 1).tolist() == [0]
        assert s.query([0.9, 0.1], 2).tolist() == [1, 0]


def test_session_rejects_out_of_phase_commands():
    with make_session() as s:
        with pytest.raises(ProtocolError):
            s.query([0.0, 0.0], 1)
        s.config_done()
        with pytest.raises(ProtocolError):
            s.config("late", "key")


def test_session_error_reply_propagates():
    with make_session() as s:
        s.config_done()
        s.train(TRAIN3, PointKind.DENSE)
        with pytest.raises(ProtocolError, match="bad-dim"):
            # wrong point length reaches the adapter and comes back as
            # an error reply
            s.query([0.0], 1)


def test_session_config_rejection():
    s = ExternalSession(adapter_command("rejectproto"), reply_timeout=10.0)
    with s:
        assert s.config("protocol", PROTOCOL_VERSION) is False
        with pytest.raises(ProtocolError):
            s.config_strict("protocol", PROTOCOL_VERSION)


def test_session_reply_timeout():
    with make_session("hang", timeout=0.5) as s:
        s.config_done()
        s.train(TRAIN3, PointKind.DENSE)
        with pytest.raises(ProtocolError, match="no reply"):
            s.query([0.0, 0.0], 1)


def test_session_adapter_death():
    with make_session("die") as s:
        s.config_done()
        s.train(TRAIN3, PointKind.DENSE)
        with pytest.raises(ProtocolError, match="stdout"):
            s.query([0.0, 0.0], 1)


def test_session_rejects_oversized_result_count():
    with make_session("overcount") as s:
        s.config_done()
        s.train(TRAIN3, PointKind.DENSE)
        with pytest.raises(ProtocolError, match="outside"):
            s.query([0.0, 0.0], 2)


def test_session_rejects_garbage_reply():
    with make_session("garbage") as s:
        s.config_done()
        s.train(TRAIN3, PointKind.DENSE)
        with pytest.raises(ProtocolError):
            s.query([0.0, 0.0], 1)


def test_session_stats_types():
    with make_session() as s:
        s.config_done()
        s.train(TRAIN3, PointKind.DENSE)
        s.query_params(["a b", "plain"])
        s.query([0.0, 0.0], 1)
        out = s.stats()
    assert out["candidates"] == 3
    assert out["engine"] == "wire-fixture"
    assert out["load"] == 0.5
    # params crossed the wire with the embedded space intact
    assert out["last-params"] == "a b|plain"


def test_session_prepared_matches_oneshot():
    s = make_session()
    with s:
        assert s.config("prepared-queries", 1) is True
        s.config_done()
        s.train(TRAIN3, PointKind.DENSE)
        s.query_params([])
        oneshot = s.query([0.9, 0.1], 2)
        s.prepare([0.9, 0.1])
        assert s.run(2).tolist() == oneshot.tolist()


def test_session_clean_shutdown():
    s = make_session()
    s.config_done()
    s.train(TRAIN3, PointKind.DENSE)
    assert s.shutdown() == 0


def test_session_dirty_exit_status_reported():
    s = ExternalSession(adapter_command("dirtyexit"), reply_timeout=10.0)
    s.config_strict("protocol", PROTOCOL_VERSION)
    assert s.shutdown() == 3


# -------------------------------------------------------- wrapped algorithm

def test_external_matches_in_process_brute_force(rng):
    """Ids through the wire must be identical to the same scan in
    process."""
    train = rng.random((200, 8), dtype=np.float32)
    queries = rng.random((20, 8), dtype=np.float32)

    local = BruteForce("euclidean")
    local.build(train)
    local.set_query_params()

    ext = ExternalAlgorithm(adapter_command(), "euclidean", 8)
    ext.build(train)
    ext.set_query_params()
    try:
        for q in queries:
            assert np.array_equal(ext.query(q, 10), local.query(q, 10).ids)
        assert ext.stats()["candidates"] == 200 * len(queries)
    finally:
        ext.close()


def test_external_hamming_round_trip(rng):
    train = rng.integers(0, 2, (60, 16)).astype(np.uint8)
    queries = rng.integers(0, 2, (10, 16)).astype(np.uint8)

    local = BruteForce("hamming")
    local.build(train)
    local.set_query_params()

    ext = ExternalAlgorithm(adapter_command(), "hamming", 16)
    ext.build(train)
    ext.set_query_params()
    try:
        for q in queries:
            assert np.array_equal(ext.query(q, 5), local.query(q, 5).ids)
    finally:
        ext.close()


def test_external_build_time_override_set():
    ext = ExternalAlgorithm(adapter_command(), "euclidean", 2)
    ext.build(TRAIN3)
    try:
        assert ext.build_time_override is not None
        assert ext.build_time_override >= 0.0
    finally:
        ext.close()


def test_external_prepared_negotiation_and_fallback():
    negotiated = ExternalAlgorithm(adapter_command(), "euclidean", 2)
    negotiated.build(TRAIN3)
    try:
        assert negotiated.prepared is True
        negotiated.set_query_params()
        negotiated.prepare_query([0.9, 0.1])
        assert negotiated.run_prepared(2).tolist() == [1, 0]
    finally:
        negotiated.close()

    fallback = ExternalAlgorithm(adapter_command("noprepared"),
                                 "euclidean", 2)
    fallback.build(TRAIN3)
    try:
        assert fallback.prepared is False
        fallback.set_query_params()
        fallback.prepare_query([0.9, 0.1])
        assert fallback.run_prepared(2).tolist() == [1, 0]
    finally:
        fallback.close()


def test_external_constructor_args_forwarded():
    ext = ExternalAlgorithm(adapter_command(), "euclidean", 2,
                            constructor_args=[7, "fast mode"])
    ext.build(TRAIN3)
    try:
        assert ext.session.options["arg0"] == "7"
        assert ext.session.options["arg1"] == "fast mode"
    finally:
        ext.close()


# --------------------------------------------------------- conformance suite

def test_conformance_all_green_on_reference_adapter():
    results = run_conformance(adapter_command(), reply_timeout=10.0)
    assert [name for name, passed, _ in results if not passed] == []
    assert len(results) == 6


def test_conformance_flags_overcounting_adapter():
    results = run_conformance(adapter_command("overcount"),
                              reply_timeout=10.0)
    outcome = dict((name, passed) for name, passed, _ in results)
    assert outcome["happy-path"] is False


def test_conformance_flags_quote_choking_adapter():
    results = run_conformance(adapter_command("chokequote"),
                              reply_timeout=10.0)
    outcome = dict((name, passed) for name, passed, _ in results)
    assert outcome["posix-quoting"] is False
    assert outcome["happy-path"] is True


def test_conformance_flags_dirty_exit():
    results = run_conformance(adapter_command("dirtyexit"),
                              reply_timeout=10.0)
    outcome = dict((name, passed) for name, passed, _ in results)
    assert outcome["clean-exit"] is False
