import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from cavimag.mesh import Mesh
from cavimag.ovf import (BadMagic, CheckValueMismatch, DimensionMismatch, HeaderError,
                         NodeCountMismatch, OvfDocument, OvfError, StepMismatch,
                         TruncatedPayload, UnsupportedVersion, map_to_mesh, parse_ovf, read_ovf,
                         save_ovf, write_ovf)

MINIMAL_TEXT = b"""# OOMMF OVF 2.0
# Segment count: 1
# Begin: Segment
# Begin: Header
# meshtype: rectangular
# valuedim: 3
# xnodes: 1
# ynodes: 1
# znodes: 1
# xstepsize: 1e-9
# ystepsize: 1e-9
# zstepsize: 1e-9
# End: Header
# Begin: Data Text
0 0 1
# End: Data Text
# End: Segment
"""

label = st.from_regex(r"[A-Za-z0-9_.]([A-Za-z0-9_. ]{0,10}[A-Za-z0-9_.])?", fullmatch=True)
finite = st.floats(allow_nan=False, allow_infinity=False)
step = st.floats(1e-12, 1e-3)


@st.composite
def documents(draw, rep=None):
    nx, ny, nz = (draw(st.integers(1, 4)) for _ in range(3))
    rep = rep or draw(st.sampled_from(["text", "binary4", "binary8"]))
    n = nx * ny * nz * 3
    if rep == "binary4":
        vals = draw(st.lists(st.floats(width=32, allow_nan=False, allow_infinity=False),
                             min_size=n, max_size=n))
    else:
        vals = draw(st.lists(finite, min_size=n, max_size=n))
    return OvfDocument(nx, ny, nz, draw(step), draw(step), draw(step), np.array(vals),
                       title=draw(st.just("") | label), representation=rep,
                       desc=draw(st.lists(label, max_size=2)))


def sample_doc(rep="binary8"):
    rng = np.random.default_rng(5)
    return OvfDocument(4, 4, 2, 5e-9, 5e-9, 1e-8, rng.normal(size=(32, 3)),
                       title="brms", representation=rep)


# -- parse / write ---------------------------------------------------------------

def test_minimal_text_file():
    doc = parse_ovf(MINIMAL_TEXT)
    assert (doc.xnodes, doc.ynodes, doc.znodes) == (1, 1, 1)
    np.testing.assert_array_equal(doc.values, [[0.0, 0.0, 1.0]])
    assert doc.representation == "text"


def test_crlf_and_case_insensitive_keys():
    text = MINIMAL_TEXT.replace(b"# xnodes", b"# XNodes").replace(b"\n", b"\r\n")
    np.testing.assert_array_equal(parse_ovf(text).values, [[0.0, 0.0, 1.0]])


@given(documents())
def test_roundtrip_all_representations(doc):
    back = parse_ovf(write_ovf(doc))
    assert back == doc


def test_binary8_random_map_bitwise():
    doc = sample_doc()
    back = parse_ovf(write_ovf(doc))
    assert back.values.tobytes() == doc.values.tobytes()
    assert back.xstepsize == doc.xstepsize


def test_binary4_rounds_to_single():
    doc = sample_doc("binary4")
    back = parse_ovf(write_ovf(doc))
    np.testing.assert_array_equal(back.values, doc.values.astype(np.float32).astype(float))


def test_empty_one_cell_doc():
    doc = OvfDocument(1, 1, 1, 1.0, 1.0, 1.0, np.zeros((1, 3)), representation="text")
    assert parse_ovf(write_ovf(doc)) == doc


@pytest.mark.parametrize("rep", ["text", "binary4", "binary8"])
def test_writes_are_byte_identical(rep):
    assert write_ovf(sample_doc(rep)) == write_ovf(sample_doc(rep))


def test_canonical_layout():
    raw = write_ovf(sample_doc())
    assert raw.startswith(b"# OOMMF OVF 2.0\n") and b"\r" not in raw.split(b"# Begin: Data")[0]
    start = raw.index(b"# Begin: Data Binary 8\n") + len(b"# Begin: Data Binary 8\n")
    assert struct.unpack("<d", raw[start:start + 8])[0] == 123456789012345.0
    raw4 = write_ovf(sample_doc(), "binary4")
    start = raw4.index(b"Binary 4\n") + len(b"Binary 4\n")
    assert struct.unpack("<f", raw4[start:start + 4])[0] == 1234567.0


def test_text_has_17_significant_digits():
    doc = OvfDocument(1, 1, 1, 1.0, 1.0, 1.0, [[1 / 3, -2 / 7, 0.1]], representation="text")
    raw = write_ovf(doc).decode()
    row = raw.split("# Begin: Data Text\n")[1].splitlines()[0].split()
    for tok in row:
        mantissa = tok.split("e")[0].lstrip("-").replace(".", "")
        assert len(mantissa) == 17
    assert [float(t) for t in row] == [1 / 3, -2 / 7, 0.1]


def test_file_helpers(tmp_path):
    path = tmp_path / "m.ovf"
    save_ovf(path, sample_doc(), "text")
    doc = read_ovf(path)
    assert doc.representation == "text"
    np.testing.assert_array_equal(doc.values, sample_doc().values)


# -- diagnostics -----------------------------------------------------------------

def test_wrong_check_value_reports_offset():
    raw = bytearray(write_ovf(sample_doc()))
    start = raw.index(b"Binary 8\n") + len(b"Binary 8\n")
    raw[start:start + 8] = struct.pack("<d", 1.0)
    with pytest.raises(CheckValueMismatch) as exc:
        parse_ovf(bytes(raw))
    assert exc.value.offset == start and f"(at byte {start})" in str(exc.value)


def test_truncated_binary():
    raw = write_ovf(sample_doc())
    cut = raw.index(b"Binary 8\n") + 9 + 8 * 50
    with pytest.raises(TruncatedPayload):
        parse_ovf(raw[:cut])


def test_truncated_text():
    raw = write_ovf(sample_doc("text"))
    with pytest.raises(TruncatedPayload):
        parse_ovf(raw[: raw.index(b"# End: Data")])


def test_node_count_mismatch():
    short = MINIMAL_TEXT.replace(b"0 0 1\n", b"0 0\n")
    with pytest.raises(NodeCountMismatch):
        parse_ovf(short)
    long_ = MINIMAL_TEXT.replace(b"0 0 1\n", b"0 0 1 1\n")
    with pytest.raises(NodeCountMismatch):
        parse_ovf(long_)
    raw = write_ovf(sample_doc()).replace(b"# znodes: 2", b"# znodes: 1")
    with pytest.raises(NodeCountMismatch):
        parse_ovf(raw)


def test_bad_magic_and_old_version():
    with pytest.raises(BadMagic) as exc:
        parse_ovf(b"hello\n" + MINIMAL_TEXT)
    assert exc.value.offset == 0
    with pytest.raises(UnsupportedVersion, match="unsupported version"):
        parse_ovf(MINIMAL_TEXT.replace(b"OVF 2.0", b"OVF 1.0"))


@pytest.mark.parametrize("old,new", [(b"rectangular", b"irregular"), (b"valuedim: 3", b"valuedim: 1"),
                                     (b"xnodes: 1", b"xnodes: 0"), (b"xnodes: 1", b"xnodes: one"),
                                     (b"# zstepsize: 1e-9\n", b""), (b"Data Text", b"Data Binary 2")])
def test_header_errors(old, new):
    with pytest.raises(HeaderError):
        parse_ovf(MINIMAL_TEXT.replace(old, new))


def test_errors_are_value_errors():
    assert issubclass(OvfError, ValueError)
    with pytest.raises(TypeError):
        parse_ovf("not bytes")


# -- fuzz: only OvfError may escape ----------------------------------------------

def parse_or_ovf_error(data):
    try:
        parse_ovf(data)
    except OvfError:
        pass


@given(st.binary(max_size=400))
def test_fuzz_random_bytes(data):
    parse_or_ovf_error(data)
    parse_or_ovf_error(b"# OOMMF OVF 2.0\n" + data)


SEEDS = [write_ovf(sample_doc(r)) for r in ("text", "binary4", "binary8")] + [MINIMAL_TEXT]


@settings(max_examples=300, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from(SEEDS), st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 255)),
                                        min_size=1, max_size=8),
       st.integers(0, 10**6), st.booleans())
def test_fuzz_mutated_files(seed, edits, cut, truncate):
    raw = bytearray(seed)
    for pos, byte in edits:
        raw[pos % len(raw)] = byte
    if truncate:
        raw = raw[: cut % len(raw)]
    parse_or_ovf_error(bytes(raw))


@given(st.sampled_from(SEEDS), st.integers(0, 10**6), st.binary(min_size=1, max_size=16))
def test_fuzz_insertions(seed, pos, blob):
    raw = bytearray(seed)
    raw[pos % len(raw):pos % len(raw)] = blob
    parse_or_ovf_error(bytes(raw))


def test_huge_declared_size_is_not_allocated():
    raw = write_ovf(sample_doc()).replace(b"# xnodes: 4", b"# xnodes: 999999999")
    with pytest.raises(TruncatedPayload):
        parse_ovf(raw)


# -- map_to_mesh -----------------------------------------------------------------

def test_map_identity():
    doc = sample_doc()
    out = map_to_mesh(doc, Mesh(4, 4, 2, 5e-9, 5e-9, 1e-8))
    np.testing.assert_array_equal(out, doc.values)
    out[0, 0] = 99.0
    assert doc.values[0, 0] != 99.0


def test_map_dimension_mismatch_names_both_shapes():
    doc = OvfDocument(4, 4, 1, 1e-9, 1e-9, 1e-9, np.zeros((16, 3)))
    with pytest.raises(DimensionMismatch) as exc:
        map_to_mesh(doc, Mesh(8, 8, 1, 1e-9, 1e-9, 1e-9))
    assert "(4, 4, 1)" in str(exc.value) and "(8, 8, 1)" in str(exc.value)


def test_map_step_tolerance():
    doc = OvfDocument(1, 1, 1, 5e-9 * (1 + 1e-12), 5e-9, 5e-9, np.zeros((1, 3)))
    map_to_mesh(doc, Mesh(1, 1, 1, 5e-9, 5e-9, 5e-9))
    doc.xstepsize = 5e-9 * (1 + 1e-6)
    with pytest.raises(StepMismatch):
        map_to_mesh(doc, Mesh(1, 1, 1, 5e-9, 5e-9, 5e-9))
