"""
BP document sources and sinks: XML element structure, BP text, the packed
binary format, and a seeded random tree generator.

Packed format: 8-byte little-endian symbol count, then the symbols MSB-first
within each byte (1 = open, 0 = close), final byte zero-padded.
"""

import io
import logging
import os
import struct
import xml.etree.ElementTree as ET
from typing import BinaryIO, Iterator, TextIO, Tuple, Union

import numpy as np

from .bp_kernel import TEXT_TO_BITS, to_text
from .errors import BadCharError, ExcessOverflowError, MalformedXmlError, UnbalancedError
from .models import BpDocument, BpFormat
from .rmmt_index import EXCESS_LIMIT

logger = logging.getLogger(__name__)

_LENGTH = struct.Struct("<Q")
_WHITESPACE = b" \t\r\n\f\v"


def check_balanced(seq: bytes) -> Tuple[bool, int, int]:
    """(balanced, total excess, minimum prefix excess) of a 0/1 symbol sequence."""
    if not seq:
        return True, 0, 0
    steps = np.frombuffer(seq, dtype=np.uint8).astype(np.int64) * 2 - 1
    prefix = np.cumsum(steps)
    total, lowest = int(prefix[-1]), int(prefix.min())
    return total == 0 and lowest >= 0, total, lowest


def _require_balanced(seq: bytes, source: str) -> None:
    balanced, total, lowest = check_balanced(seq)
    if not balanced:
        raise UnbalancedError(f"{source}: total excess {total}, minimum prefix excess {lowest}")


def _source_name(stream, default: str) -> str:
    return os.path.basename(getattr(stream, "name", "") or "") or default


def _xml_name(source) -> str:
    if isinstance(source, (str, os.PathLike)):
        return os.path.basename(os.fspath(source))
    return _source_name(source, "<xml stream>")


def iter_xml_symbols(source: Union[str, os.PathLike, BinaryIO, TextIO]) -> Iterator[int]:
    """
    Yield 1 per element start and 0 per element end, in document order.
    Finished elements are detached from their parent, so memory stays
    proportional to the depth of the open element stack.
    """
    name = _xml_name(source)
    stack = []
    try:
        for event, elem in ET.iterparse(source, events=("start", "end")):
            if event == "start":
                if len(stack) >= EXCESS_LIMIT:
                    raise ExcessOverflowError(f"{name}: depth exceeds {EXCESS_LIMIT}")
                stack.append(elem)
                yield 1
            else:
                stack.pop()
                elem.clear()
                if stack:
                    stack[-1].remove(elem)
                yield 0
    except ET.ParseError as e:
        raise MalformedXmlError(f"{name}: {e}") from e


def xml_to_bp(source: Union[str, os.PathLike, BinaryIO, TextIO]) -> BpDocument:
    """
    One open per element start and one close per element end, in document
    order. Text, attributes, comments and processing instructions are ignored.
    """
    name = _xml_name(source)
    out = bytearray()
    depth = max_depth = 0
    for symbol in iter_xml_symbols(source):
        out.append(symbol)
        if symbol:
            depth += 1
            max_depth = max(max_depth, depth)
        else:
            depth -= 1
    logger.info("Parsed %s: %d elements, max depth %d", name, len(out) // 2, max_depth)
    return BpDocument(seq=bytes(out), source=name)


def parse_bp_text(stream: Union[str, TextIO], require_single_tree: bool = False) -> BpDocument:
    """Parse '(' / ')' text, skipping whitespace. Forests are accepted unless ``require_single_tree``."""
    if isinstance(stream, str):
        text, name = stream, "<text>"
    else:
        text, name = stream.read(), _source_name(stream, "<text stream>")
    raw = text.encode("ascii", errors="replace").translate(None, _WHITESPACE)
    bad = raw.translate(None, b"()")
    if bad:
        raise BadCharError(f"{name}: unexpected character {bad[:1].decode('ascii', 'replace')!r}")
    seq = raw.translate(TEXT_TO_BITS)
    _require_balanced(seq, name)
    if require_single_tree and seq and _root_count(seq) != 1:
        raise UnbalancedError(f"{name}: expected a single tree")
    return BpDocument(seq=seq, source=name)


def _root_count(seq: bytes) -> int:
    prefix = np.cumsum(np.frombuffer(seq, dtype=np.uint8).astype(np.int64) * 2 - 1)
    return int(np.count_nonzero(prefix == 0))


def parse_bp_packed(stream: Union[bytes, BinaryIO]) -> BpDocument:
    """Inverse of ``serialize_bp(doc, BpFormat.PACKED)``."""
    if isinstance(stream, (bytes, bytearray)):
        data, name = bytes(stream), "<packed>"
    else:
        data, name = stream.read(), _source_name(stream, "<packed stream>")
    if len(data) < _LENGTH.size:
        raise UnbalancedError(f"{name}: truncated header")
    (length,) = _LENGTH.unpack_from(data)
    if not length:
        return BpDocument(seq=b"", source=name)
    if (len(data) - _LENGTH.size) * 8 < length:
        raise UnbalancedError(f"{name}: header announces {length} symbols, payload holds fewer")
    payload = np.frombuffer(data, dtype=np.uint8, offset=_LENGTH.size)
    seq = np.unpackbits(payload, count=length).tobytes()
    _require_balanced(seq, name)
    return BpDocument(seq=seq, source=name)


def serialize_bp(doc: BpDocument, fmt: BpFormat = BpFormat.TEXT) -> bytes:
    if fmt is BpFormat.TEXT:
        return to_text(doc.seq).encode("ascii")
    if not doc.seq:
        return _LENGTH.pack(0)
    bits = np.packbits(np.frombuffer(doc.seq, dtype=np.uint8))
    return _LENGTH.pack(len(doc.seq)) + bits.tobytes()


def random_balanced(n_nodes: int, seed: int) -> BpDocument:
    """
    Random ordered tree with ``n_nodes`` nodes: a root wrapping a uniformly
    drawn forest of ``n_nodes - 1`` nodes (cycle lemma on a shuffled walk).
    Deterministic per seed.
    """
    if n_nodes < 0:
        raise ValueError("n_nodes must be non-negative")
    source = f"random(n={n_nodes}, seed={seed})"
    if n_nodes == 0:
        return BpDocument(seq=b"", source=source)
    inner = n_nodes - 1
    rng = np.random.default_rng(seed)
    walk = np.concatenate([np.ones(inner, dtype=np.uint8), np.zeros(inner + 1, dtype=np.uint8)])
    rng.shuffle(walk)
    prefix = np.cumsum(walk.astype(np.int64) * 2 - 1)
    cut = int(np.argmin(prefix)) + 1
    forest = np.concatenate([walk[cut:], walk[:cut]])[:-1]
    seq = b"\x01" + forest.tobytes() + b"\x00"
    return BpDocument(seq=seq, source=source)


def load_document(path: str) -> BpDocument:
    """Load an input file by extension: .xml, .bp/.txt (text) or .bpk/.bin (packed)."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".xml":
        return xml_to_bp(path)
    if ext in (".bpk", ".bin", ".packed"):
        with open(path, "rb") as f:
            return parse_bp_packed(f)
    with open(path, "r", encoding="ascii", errors="replace") as f:
        return parse_bp_text(f)


def write_document(doc: BpDocument, path: str, fmt: BpFormat) -> int:
    data = serialize_bp(doc, fmt)
    with open(path, "wb") as f:
        f.write(data)
    return len(data)


def xml_from_string(text: str) -> BpDocument:
    return xml_to_bp(io.BytesIO(text.encode("utf-8")))
