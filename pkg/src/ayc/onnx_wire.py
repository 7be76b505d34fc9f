"""Self-contained reader/writer for the ONNX interchange format.

ONNX files are protobuf messages; this module speaks the protobuf wire
format directly for the message subset a detection workbench needs:
graph signature (inputs/outputs with dtypes and shapes), nodes with
attributes, and initializer tensors.  Nothing here depends on protoc or
a runtime protobuf library, which keeps model loading dependency-free.

The writer emits the same subset, which is how the test fixtures and
the fixture-generation script produce valid model files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Sequence, Union

import numpy as np

from .errors import InvalidModelFileError

# onnx TensorProto.DataType values
_DTYPE_TO_ONNX = {
    np.dtype(np.float32): 1,
    np.dtype(np.uint8): 2,
    np.dtype(np.int8): 3,
    np.dtype(np.int32): 6,
    np.dtype(np.int64): 7,
    np.dtype(np.bool_): 9,
    np.dtype(np.float64): 11,
}
_ONNX_TO_DTYPE = {v: k for k, v in _DTYPE_TO_ONNX.items()}

DimValue = Union[int, str, None]  # static, named dynamic, anonymous dynamic


@dataclass(frozen=True)
class TensorInfo:
    """Name, element type, and (possibly dynamic) shape of a graph value."""

    name: str
    dtype: np.dtype
    shape: tuple[DimValue, ...]

    def static_shape(self) -> Optional[tuple[int, ...]]:
        if all(isinstance(d, int) for d in self.shape):
            return tuple(int(d) for d in self.shape)  # type: ignore[arg-type]
        return None


@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    name: str = ""
    attrs: dict[str, Any] = field(default_factory=dict)


@dataclass
class Graph:
    name: str
    nodes: list[Node]
    inputs: list[TensorInfo]
    outputs: list[TensorInfo]
    initializers: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class Model:
    graph: Graph
    ir_version: int = 8
    opset: int = 17
    producer: str = "ayc"


# --- wire-level encoding ----------------------------------------------------

def _uvarint(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _svarint(value: int) -> bytes:
    # proto int64: negatives are encoded as 2^64 + value
    if value < 0:
        value += 1 << 64
    return _uvarint(value)


def _tag(field_no: int, wire_type: int) -> bytes:
    return _uvarint((field_no << 3) | wire_type)


def _len_field(field_no: int, payload: bytes) -> bytes:
    return _tag(field_no, 2) + _uvarint(len(payload)) + payload


def _str_field(field_no: int, s: str) -> bytes:
    return _len_field(field_no, s.encode("utf-8"))


def _int_field(field_no: int, v: int) -> bytes:
    return _tag(field_no, 0) + _svarint(v)


def _read_uvarint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise InvalidModelFileError("truncated varint")
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise InvalidModelFileError("varint too long")


def _as_signed(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _fields(buf: bytes) -> Iterator[tuple[int, int, Any]]:
    """Yield (field_no, wire_type, value) triples; value is int or bytes."""
    pos = 0
    while pos < len(buf):
        key, pos = _read_uvarint(buf, pos)
        field_no, wire_type = key >> 3, key & 0x7
        if wire_type == 0:
            value, pos = _read_uvarint(buf, pos)
        elif wire_type == 1:
            value = buf[pos:pos + 8]
            pos += 8
        elif wire_type == 2:
            length, pos = _read_uvarint(buf, pos)
            if pos + length > len(buf):
                raise InvalidModelFileError("truncated length-delimited field")
            value = buf[pos:pos + length]
            pos += length
        elif wire_type == 5:
            value = buf[pos:pos + 4]
            pos += 4
        else:
            raise InvalidModelFileError(f"unsupported wire type {wire_type}")
        yield field_no, wire_type, value


def _packed_varints(payload: bytes) -> list[int]:
    out = []
    pos = 0
    while pos < len(payload):
        v, pos = _read_uvarint(payload, pos)
        out.append(_as_signed(v))
    return out


# --- tensor encoding --------------------------------------------------------

def _encode_tensor(arr: np.ndarray, name: str = "") -> bytes:
    arr = np.ascontiguousarray(arr)
    if arr.dtype not in _DTYPE_TO_ONNX:
        raise InvalidModelFileError(f"unsupported tensor dtype {arr.dtype}")
    parts = bytearray()
    for d in arr.shape:
        parts += _int_field(1, int(d))
    parts += _int_field(2, _DTYPE_TO_ONNX[arr.dtype])
    if name:
        parts += _str_field(8, name)
    parts += _len_field(9, arr.astype(arr.dtype.newbyteorder("<")).tobytes())
    return bytes(parts)


def _decode_tensor(payload: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    data_type = 0
    name = ""
    raw: Optional[bytes] = None
    float_data: list[float] = []
    int32_payloads: list[bytes] = []
    int64_payloads: list[bytes] = []
    double_data: list[float] = []
    for field_no, wire_type, value in _fields(payload):
        if field_no == 1 and wire_type == 0:
            dims.append(_as_signed(value))
        elif field_no == 2 and wire_type == 0:
            data_type = value
        elif field_no == 4:
            if wire_type == 2:
                float_data.extend(struct.unpack(f"<{len(value) // 4}f", value))
            else:
                float_data.append(struct.unpack("<f", value)[0])
        elif field_no == 5 and wire_type == 2:
            int32_payloads.append(value)
        elif field_no == 5 and wire_type == 0:
            int32_payloads.append(_uvarint(value))
        elif field_no == 7 and wire_type == 2:
            int64_payloads.append(value)
        elif field_no == 7 and wire_type == 0:
            int64_payloads.append(_uvarint(value))
        elif field_no == 8 and wire_type == 2:
            name = value.decode("utf-8")
        elif field_no == 9 and wire_type == 2:
            raw = value
        elif field_no == 10:
            if wire_type == 2:
                double_data.extend(struct.unpack(f"<{len(value) // 8}d", value))
            else:
                double_data.append(struct.unpack("<d", value)[0])
    if data_type not in _ONNX_TO_DTYPE:
        raise InvalidModelFileError(f"unsupported tensor element type {data_type}")
    dtype = _ONNX_TO_DTYPE[data_type]
    shape = tuple(dims)
    if raw is not None:
        arr = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype)
    elif float_data:
        arr = np.array(float_data, dtype=dtype)
    elif double_data:
        arr = np.array(double_data, dtype=dtype)
    elif int64_payloads:
        vals: list[int] = []
        for p in int64_payloads:
            vals.extend(_packed_varints(p))
        arr = np.array(vals, dtype=dtype)
    elif int32_payloads:
        vals = []
        for p in int32_payloads:
            vals.extend(_packed_varints(p))
        arr = np.array(vals, dtype=dtype)
    else:
        arr = np.zeros(0, dtype=dtype)
    try:
        return name, arr.reshape(shape)
    except ValueError as exc:
        raise InvalidModelFileError(f"tensor '{name}' data does not match dims {shape}") from exc


# --- value info -------------------------------------------------------------

def _encode_value_info(info: TensorInfo) -> bytes:
    dims = bytearray()
    for d in info.shape:
        if isinstance(d, int):
            dims += _len_field(1, _int_field(1, d))
        elif isinstance(d, str):
            dims += _len_field(1, _str_field(2, d))
        else:
            dims += _len_field(1, b"")
    shape_msg = bytes(dims)
    tensor_type = _int_field(1, _DTYPE_TO_ONNX[np.dtype(info.dtype)]) + _len_field(2, shape_msg)
    type_msg = _len_field(1, tensor_type)
    return _str_field(1, info.name) + _len_field(2, type_msg)


def _decode_value_info(payload: bytes) -> TensorInfo:
    name = ""
    dtype = np.dtype(np.float32)
    shape: tuple[DimValue, ...] = ()
    for field_no, wire_type, value in _fields(payload):
        if field_no == 1 and wire_type == 2:
            name = value.decode("utf-8")
        elif field_no == 2 and wire_type == 2:
            for f2, w2, v2 in _fields(value):
                if f2 == 1 and w2 == 2:  # tensor_type
                    elem_type = 1
                    dims: list[DimValue] = []
                    for f3, w3, v3 in _fields(v2):
                        if f3 == 1 and w3 == 0:
                            elem_type = v3
                        elif f3 == 2 and w3 == 2:  # shape
                            for f4, w4, v4 in _fields(v3):
                                if f4 == 1 and w4 == 2:  # dim
                                    dim: DimValue = None
                                    for f5, w5, v5 in _fields(v4):
                                        if f5 == 1 and w5 == 0:
                                            dim = _as_signed(v5)
                                        elif f5 == 2 and w5 == 2:
                                            dim = v5.decode("utf-8")
                                    dims.append(dim)
                    dtype = _ONNX_TO_DTYPE.get(elem_type, np.dtype(np.float32))
                    shape = tuple(dims)
    return TensorInfo(name=name, dtype=dtype, shape=shape)


# --- attributes -------------------------------------------------------------

_ATTR_FLOAT, _ATTR_INT, _ATTR_STRING, _ATTR_TENSOR = 1, 2, 3, 4
_ATTR_FLOATS, _ATTR_INTS, _ATTR_STRINGS = 6, 7, 8


def _encode_attribute(name: str, value: Any) -> bytes:
    parts = bytearray(_str_field(1, name))
    if isinstance(value, bool):
        parts += _int_field(3, int(value)) + _int_field(20, _ATTR_INT)
    elif isinstance(value, int):
        parts += _int_field(3, value) + _int_field(20, _ATTR_INT)
    elif isinstance(value, float):
        parts += _tag(2, 5) + struct.pack("<f", value)
        parts += _int_field(20, _ATTR_FLOAT)
    elif isinstance(value, str):
        parts += _len_field(4, value.encode("utf-8")) + _int_field(20, _ATTR_STRING)
    elif isinstance(value, np.ndarray):
        parts += _len_field(5, _encode_tensor(value)) + _int_field(20, _ATTR_TENSOR)
    elif isinstance(value, (list, tuple)):
        if all(isinstance(v, (int, np.integer)) for v in value):
            for v in value:
                parts += _int_field(8, int(v))
            parts += _int_field(20, _ATTR_INTS)
        elif all(isinstance(v, (float, int, np.floating)) for v in value):
            for v in value:
                parts += _tag(7, 5) + struct.pack("<f", float(v))
            parts += _int_field(20, _ATTR_FLOATS)
        elif all(isinstance(v, str) for v in value):
            for v in value:
                parts += _len_field(9, v.encode("utf-8"))
            parts += _int_field(20, _ATTR_STRINGS)
        else:
            raise InvalidModelFileError(f"cannot encode attribute {name}={value!r}")
    else:
        raise InvalidModelFileError(f"cannot encode attribute {name}={value!r}")
    return bytes(parts)


def _decode_attribute(payload: bytes) -> tuple[str, Any]:
    name = ""
    attr_type = 0
    f_val = 0.0
    i_val = 0
    s_val = b""
    t_val: Optional[np.ndarray] = None
    floats: list[float] = []
    ints: list[int] = []
    strings: list[str] = []
    for field_no, wire_type, value in _fields(payload):
        if field_no == 1 and wire_type == 2:
            name = value.decode("utf-8")
        elif field_no == 2 and wire_type == 5:
            f_val = struct.unpack("<f", value)[0]
        elif field_no == 3 and wire_type == 0:
            i_val = _as_signed(value)
        elif field_no == 4 and wire_type == 2:
            s_val = value
        elif field_no == 5 and wire_type == 2:
            _, t_val = _decode_tensor(value)
        elif field_no == 7:
            if wire_type == 5:
                floats.append(struct.unpack("<f", value)[0])
            elif wire_type == 2:
                floats.extend(struct.unpack(f"<{len(value) // 4}f", value))
        elif field_no == 8:
            if wire_type == 0:
                ints.append(_as_signed(value))
            elif wire_type == 2:
                ints.extend(_packed_varints(value))
        elif field_no == 9 and wire_type == 2:
            strings.append(value.decode("utf-8"))
        elif field_no == 20 and wire_type == 0:
            attr_type = value
    if attr_type == _ATTR_FLOAT:
        return name, f_val
    if attr_type == _ATTR_INT:
        return name, i_val
    if attr_type == _ATTR_STRING:
        return name, s_val.decode("utf-8")
    if attr_type == _ATTR_TENSOR:
        return name, t_val
    if attr_type == _ATTR_FLOATS:
        return name, floats
    if attr_type == _ATTR_INTS:
        return name, ints
    if attr_type == _ATTR_STRINGS:
        return name, strings
    # untyped attribute written by a lax exporter: best effort
    if t_val is not None:
        return name, t_val
    if floats:
        return name, floats
    if ints:
        return name, ints
    return name, i_val


# --- node / graph / model ---------------------------------------------------

def _encode_node(node: Node) -> bytes:
    parts = bytearray()
    for inp in node.inputs:
        parts += _str_field(1, inp)
    for out in node.outputs:
        parts += _str_field(2, out)
    if node.name:
        parts += _str_field(3, node.name)
    parts += _str_field(4, node.op_type)
    for attr_name, attr_value in node.attrs.items():
        parts += _len_field(5, _encode_attribute(attr_name, attr_value))
    return bytes(parts)


def _decode_node(payload: bytes) -> Node:
    node = Node(op_type="", inputs=[], outputs=[])
    for field_no, wire_type, value in _fields(payload):
        if field_no == 1 and wire_type == 2:
            node.inputs.append(value.decode("utf-8"))
        elif field_no == 2 and wire_type == 2:
            node.outputs.append(value.decode("utf-8"))
        elif field_no == 3 and wire_type == 2:
            node.name = value.decode("utf-8")
        elif field_no == 4 and wire_type == 2:
            node.op_type = value.decode("utf-8")
        elif field_no == 5 and wire_type == 2:
            attr_name, attr_value = _decode_attribute(value)
            node.attrs[attr_name] = attr_value
    return node


def _encode_graph(graph: Graph) -> bytes:
    parts = bytearray()
    for node in graph.nodes:
        parts += _len_field(1, _encode_node(node))
    parts += _str_field(2, graph.name)
    for name, arr in graph.initializers.items():
        parts += _len_field(5, _encode_tensor(arr, name))
    for info in graph.inputs:
        parts += _len_field(11, _encode_value_info(info))
    for info in graph.outputs:
        parts += _len_field(12, _encode_value_info(info))
    return bytes(parts)


def _decode_graph(payload: bytes) -> Graph:
    graph = Graph(name="", nodes=[], inputs=[], outputs=[])
    for field_no, wire_type, value in _fields(payload):
        if field_no == 1 and wire_type == 2:
            graph.nodes.append(_decode_node(value))
        elif field_no == 2 and wire_type == 2:
            graph.name = value.decode("utf-8")
        elif field_no == 5 and wire_type == 2:
            name, arr = _decode_tensor(value)
            graph.initializers[name] = arr
        elif field_no == 11 and wire_type == 2:
            graph.inputs.append(_decode_value_info(value))
        elif field_no == 12 and wire_type == 2:
            graph.outputs.append(_decode_value_info(value))
    return graph


def encode_model(model: Model) -> bytes:
    parts = bytearray()
    parts += _int_field(1, model.ir_version)
    parts += _str_field(2, model.producer)
    parts += _len_field(7, _encode_graph(model.graph))
    opset = _str_field(1, "") + _int_field(2, model.opset)
    parts += _len_field(8, opset)
    return bytes(parts)


def decode_model(data: bytes) -> Model:
    ir_version = 0
    producer = ""
    opset = 0
    graph: Optional[Graph] = None
    try:
        for field_no, wire_type, value in _fields(data):
            if field_no == 1 and wire_type == 0:
                ir_version = _as_signed(value)
            elif field_no == 2 and wire_type == 2:
                producer = value.decode("utf-8", errors="replace")
            elif field_no == 7 and wire_type == 2:
                graph = _decode_graph(value)
            elif field_no == 8 and wire_type == 2:
                for f2, w2, v2 in _fields(value):
                    if f2 == 2 and w2 == 0:
                        opset = max(opset, _as_signed(v2))
    except InvalidModelFileError:
        raise
    except Exception as exc:
        raise InvalidModelFileError(f"not a parseable model file: {exc}") from exc
    if graph is None or ir_version == 0:
        raise InvalidModelFileError("file carries no model graph")
    return Model(graph=graph, ir_version=ir_version, opset=opset or 17, producer=producer)


def save_model(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_model(model))


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        return decode_model(fh.read())


def tensor_info(name: str, dtype, shape: Sequence[DimValue]) -> TensorInfo:
    return TensorInfo(name=name, dtype=np.dtype(dtype), shape=tuple(shape))
