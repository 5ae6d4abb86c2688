"""OOMMF OVF 2.0 reader/writer for rectangular, 3-component vector fields.

Supports ``Data Text``, ``Data Binary 4`` and ``Data Binary 8`` segments
(binary payloads little-endian, x index fastest). OVF 1.0 is rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import CavimagError
from .mesh import FieldMap, Mesh

MAGIC = "# OOMMF OVF 2.0"
CHECK_VALUES = {"binary4": 1234567.0, "binary8": 123456789012345.0}
REPRESENTATIONS = ("text", "binary4", "binary8")
_DTYPES = {"binary4": np.dtype("<f4"), "binary8": np.dtype("<f8")}


class OvfError(CavimagError, ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class BadMagic(OvfError):
    pass


class UnsupportedVersion(OvfError):
    pass


class HeaderError(OvfError):
    pass


class CheckValueMismatch(OvfError):
    pass


class TruncatedPayload(OvfError):
    pass


class NodeCountMismatch(OvfError):
    pass


class DimensionMismatch(OvfError):
    pass


class StepMismatch(OvfError):
    pass


@dataclass
class OvfDocument:
    xnodes: int
    ynodes: int
    znodes: int
    xstepsize: float
    ystepsize: float
    zstepsize: float
    values: np.ndarray  # (n_nodes, 3), x fastest
    title: str = ""
    valueunits: str = "1 1 1"
    valuelabels: str = "x y z"
    representation: str = "binary8"
    desc: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1, 3)
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"representation must be one of {REPRESENTATIONS}")

    @property
    def n_nodes(self) -> int:
        return self.xnodes * self.ynodes * self.znodes

    def __eq__(self, other) -> bool:
        if not isinstance(other, OvfDocument):
            return NotImplemented
        scalars = ("xnodes", "ynodes", "znodes", "xstepsize", "ystepsize", "zstepsize",
                   "title", "valueunits", "valuelabels", "representation", "desc")
        return all(getattr(self, k) == getattr(other, k) for k in scalars) and (
            self.values.shape == other.values.shape
            and self.values.tobytes() == other.values.tobytes()
        )

    @classmethod
    def from_field(cls, mesh: Mesh, values: FieldMap, **kw) -> OvfDocument:
        return cls(mesh.nx, mesh.ny, mesh.nz, mesh.dx, mesh.dy, mesh.dz, values, **kw)


_HEADER_RE = re.compile(r"^#\s*([^:]+?)\s*:\s*(.*?)\s*$")


def _lines(data: bytes, start: int):
    pos = start
    while pos < len(data):
        end = data.find(b"\n", pos)
        if end < 0:
            end = len(data)
        yield pos, data[pos:end], end + 1
        pos = end + 1


def _decode(raw: bytes, offset: int) -> str:
    try:
        return raw.decode("ascii").rstrip("\r")
    except UnicodeDecodeError:
        raise HeaderError("non-ASCII bytes in header", offset) from None


def parse_ovf(data: bytes) -> OvfDocument:
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("parse_ovf expects bytes")
    data = bytes(data)
    first_end = data.find(b"\n")
    first = data[: first_end if first_end >= 0 else len(data)]
    try:
        first_txt = first.decode("ascii", errors="replace").strip()
    except Exception:  # pragma: no cover - decode with replace cannot fail
        first_txt = ""
    if not first_txt.upper().startswith("# OOMMF"):
        raise BadMagic("missing '# OOMMF OVF' magic line", 0)
    if re.sub(r"\s+", " ", first_txt.upper()) != MAGIC.upper():
        raise UnsupportedVersion(f"unsupported version {first_txt!r}; only OVF 2.0 is read", 0)

    header: dict[str, str] = {}
    desc: list[str] = []
    data_kind = None
    data_start = None
    begin_offset = None
    for offset, raw, nxt in _lines(data, len(first) + 1):
        line = _decode(raw, offset).strip()
        if not line:
            continue
        if not line.startswith("#"):
            raise HeaderError(f"unexpected line in header: {line[:40]!r}", offset)
        match = _HEADER_RE.match(line)
        if match is None:
            continue  # bare comment
        key = match.group(1).strip().lower()
        value = match.group(2)
        if key == "begin" and value.lower().startswith("data"):
            kind = re.sub(r"\s+", " ", value.lower())
            data_kind = {"data text": "text", "data binary 4": "binary4",
                         "data binary 8": "binary8"}.get(kind)
            if data_kind is None:
                raise HeaderError(f"unsupported data section {value!r}", offset)
            data_start = nxt
            begin_offset = offset
            break
        if key in ("begin", "end", "segment count"):
            continue
        if key == "desc":
            desc.append(value)
        else:
            header[key] = value
    if data_kind is None:
        raise HeaderError("no '# Begin: Data' section", len(data))

    def need(key: str) -> str:
        if key not in header:
            raise HeaderError(f"missing header key {key!r}", begin_offset)
        return header[key]

    if need("meshtype").lower() != "rectangular":
        raise HeaderError(f"meshtype {header['meshtype']!r} not supported", begin_offset)
    try:
        valuedim = int(need("valuedim"))
        nodes = [int(need(k)) for k in ("xnodes", "ynodes", "znodes")]
        steps = [float(need(k)) for k in ("xstepsize", "ystepsize", "zstepsize")]
    except ValueError as exc:
        raise HeaderError(f"malformed numeric header value: {exc}", begin_offset) from None
    if valuedim != 3:
        raise HeaderError(f"valuedim {valuedim} not supported (need 3)", begin_offset)
    if min(nodes) < 1:
        raise HeaderError(f"node counts must be positive, got {nodes}", begin_offset)
    if not all(np.isfinite(s) and s > 0 for s in steps):
        raise HeaderError(f"step sizes must be positive, got {steps}", begin_offset)
    n_values = nodes[0] * nodes[1] * nodes[2] * 3

    if data_kind == "text":
        values, end_pos = _read_text(data, data_start, n_values)
    else:
        values, end_pos = _read_binary(data, data_start, n_values, data_kind)
    _expect_end(data, end_pos, data_kind)

    return OvfDocument(
        nodes[0], nodes[1], nodes[2], steps[0], steps[1], steps[2], values.reshape(-1, 3),
        title=header.get("title", ""), valueunits=header.get("valueunits", "1 1 1"),
        valuelabels=header.get("valuelabels", "x y z"), representation=data_kind, desc=desc,
    )


def _read_text(data: bytes, start: int, n_values: int):
    out = []
    for offset, raw, nxt in _lines(data, start):
        line = raw.strip()
        if line.startswith(b"#"):
            if re.match(rb"#\s*end\s*:\s*data", line, re.IGNORECASE):
                if len(out) != n_values:
                    raise NodeCountMismatch(
                        f"text payload has {len(out)} values, header declares {n_values}", offset)
                return np.array(out, dtype=float), offset
            continue
        for tok in line.split():
            try:
                out.append(float(tok))
            except ValueError:
                raise OvfError(f"bad number {tok[:20]!r} in text payload", offset) from None
            if len(out) > n_values:
                raise NodeCountMismatch(f"text payload exceeds {n_values} values", offset)
    raise TruncatedPayload(f"text payload ended after {len(out)} of {n_values} values", len(data))


def _read_binary(data: bytes, start: int, n_values: int, kind: str):
    dtype = _DTYPES[kind]
    size = dtype.itemsize
    need = size * (n_values + 1)
    if len(data) - start < need:
        raise TruncatedPayload(
            f"{kind} payload needs {need} bytes, only {len(data) - start} present", start)
    check = float(np.frombuffer(data, dtype=dtype, count=1, offset=start)[0])
    if check != CHECK_VALUES[kind]:
        raise CheckValueMismatch(
            f"check value {check!r} != {CHECK_VALUES[kind]!r}", start)
    values = np.frombuffer(data, dtype=dtype, count=n_values, offset=start + size)
    with np.errstate(invalid="ignore"):  # NaN payloads cast as-is
        return values.astype(float), start + need


def _expect_end(data: bytes, pos: int, kind: str) -> None:
    rest = data[pos:].lstrip(b" \t\r\n")
    offset = len(data) - len(rest)
    if not re.match(rb"#\s*end\s*:\s*data", rest, re.IGNORECASE):
        if kind == "text":
            return  # _read_text only returns on the end marker
        raise NodeCountMismatch("payload not followed by '# End: Data'", offset)


def _fmt(x: float) -> str:
    return format(float(x), ".16e")


def write_ovf(doc: OvfDocument, representation: str | None = None) -> bytes:
    """Canonical serialization: LF endings, fixed key order, little-endian binary."""
    rep = representation or doc.representation
    if rep not in REPRESENTATIONS:
        raise ValueError(f"representation must be one of {REPRESENTATIONS}")
    if doc.values.shape != (doc.n_nodes, 3):
        raise ValueError(f"values shape {doc.values.shape} does not match {doc.n_nodes} nodes")
    dx, dy, dz = doc.xstepsize, doc.ystepsize, doc.zstepsize
    lines = [
        MAGIC,
        "# Segment count: 1",
        "# Begin: Segment",
        "# Begin: Header",
        f"# Title: {doc.title}",
        "# meshtype: rectangular",
        "# meshunit: m",
        "# xmin: 0",
        "# ymin: 0",
        "# zmin: 0",
        f"# xmax: {_fmt(doc.xnodes * dx)}",
        f"# ymax: {_fmt(doc.ynodes * dy)}",
        f"# zmax: {_fmt(doc.znodes * dz)}",
        "# valuedim: 3",
        f"# valuelabels: {doc.valuelabels}",
        f"# valueunits: {doc.valueunits}",
    ]
    lines += [f"# Desc: {d}" for d in doc.desc]
    lines += [
        f"# xbase: {_fmt(dx / 2)}",
        f"# ybase: {_fmt(dy / 2)}",
        f"# zbase: {_fmt(dz / 2)}",
        f"# xnodes: {doc.xnodes}",
        f"# ynodes: {doc.ynodes}",
        f"# znodes: {doc.znodes}",
        f"# xstepsize: {_fmt(dx)}",
        f"# ystepsize: {_fmt(dy)}",
        f"# zstepsize: {_fmt(dz)}",
        "# End: Header",
    ]
    tag = {"text": "Text", "binary4": "Binary 4", "binary8": "Binary 8"}[rep]
    lines.append(f"# Begin: Data {tag}")
    head = ("\n".join(lines) + "\n").encode("ascii")
    if rep == "text":
        body = "".join(" ".join(_fmt(v) for v in row) + "\n" for row in doc.values).encode("ascii")
    else:
        dtype = _DTYPES[rep]
        body = (np.array([CHECK_VALUES[rep]], dtype=dtype).tobytes()
                + doc.values.astype(dtype).tobytes() + b"\n")
    tail = f"# End: Data {tag}\n# End: Segment\n".encode("ascii")
    return head + body + tail


def read_ovf(path) -> OvfDocument:
    with open(path, "rb") as fh:
        return parse_ovf(fh.read())


def save_ovf(path, doc: OvfDocument, representation: str | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(write_ovf(doc, representation))


def map_to_mesh(doc: OvfDocument, mesh: Mesh, tolerance: float = 1e-9) -> FieldMap:
    """Field map for ``mesh``; node counts must match exactly, step sizes
    within ``tolerance`` (relative). No resampling."""
    got = (doc.xnodes, doc.ynodes, doc.znodes)
    want = (mesh.nx, mesh.ny, mesh.nz)
    if got != want:
        raise DimensionMismatch(f"OVF grid {got} does not match mesh {want}")
    for name, a, b in zip("xyz", (doc.xstepsize, doc.ystepsize, doc.zstepsize), mesh.cellsize):
        if abs(a - b) > tolerance * abs(b):
            raise StepMismatch(f"{name} step {a!r} differs from mesh cell size {b!r}")
    return np.array(doc.values, dtype=float).reshape(mesh.n_cells, 3)
