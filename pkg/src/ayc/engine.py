"""Model execution sessions.

Two interchangeable engines sit behind one ``run(feeds) -> outputs`` API:

* ``OrtSession`` wraps onnxruntime when that package is importable;
  that is the right choice for real exported detectors.
* ``ReferenceSession`` is a built-in interpreter for a compact operator
  subset, enough for the bundled fixtures and simple graphs, so the
  workbench (and its test suite) runs with no native runtime installed.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional

import numpy as np

from .errors import InferenceFailureError, InvalidModelFileError
from .onnx_wire import Graph, Model, Node, TensorInfo, load_model

try:  # pragma: no cover - exercised only where onnxruntime exists
    import onnxruntime as _ort
except ImportError:
    _ort = None


def _np(x) -> np.ndarray:
    return x if isinstance(x, np.ndarray) else np.asarray(x)


def _axis_list(node: Node, inputs: list[np.ndarray], attr: str, input_idx: int) -> Optional[list[int]]:
    """Axes moved from attributes to inputs across opset versions; accept both."""
    if attr in node.attrs:
        return [int(a) for a in node.attrs[attr]]
    if len(inputs) > input_idx and inputs[input_idx] is not None:
        return [int(a) for a in np.asarray(inputs[input_idx]).reshape(-1)]
    return None


def _op_constant(node: Node, inputs, graph: Graph) -> list[np.ndarray]:
    if "value" in node.attrs:
        return [_np(node.attrs["value"])]
    for key, dtype in (("value_float", np.float32), ("value_int", np.int64)):
        if key in node.attrs:
            return [np.asarray(node.attrs[key], dtype=dtype)]
    for key, dtype in (("value_floats", np.float32), ("value_ints", np.int64)):
        if key in node.attrs:
            return [np.asarray(node.attrs[key], dtype=dtype)]
    raise InferenceFailureError(f"Constant node '{node.name}' has no value")


def _op_gemm(node: Node, inputs, graph) -> list[np.ndarray]:
    a, b = inputs[0], inputs[1]
    alpha = float(node.attrs.get("alpha", 1.0))
    beta = float(node.attrs.get("beta", 1.0))
    if node.attrs.get("transA", 0):
        a = a.T
    if node.attrs.get("transB", 0):
        b = b.T
    out = alpha * (a @ b)
    if len(inputs) > 2 and inputs[2] is not None:
        out = out + beta * inputs[2]
    return [out]


def _op_slice(node: Node, inputs, graph) -> list[np.ndarray]:
    data = inputs[0]
    if "starts" in node.attrs:  # opset < 10 kept these as attributes
        starts = [int(v) for v in node.attrs["starts"]]
        ends = [int(v) for v in node.attrs["ends"]]
        axes = _axis_list(node, [], "axes", 99) or list(range(len(starts)))
        steps = [1] * len(starts)
    else:
        starts = [int(v) for v in np.asarray(inputs[1]).reshape(-1)]
        ends = [int(v) for v in np.asarray(inputs[2]).reshape(-1)]
        axes = ([int(v) for v in np.asarray(inputs[3]).reshape(-1)]
                if len(inputs) > 3 and inputs[3] is not None else list(range(len(starts))))
        steps = ([int(v) for v in np.asarray(inputs[4]).reshape(-1)]
                 if len(inputs) > 4 and inputs[4] is not None else [1] * len(starts))
    slicer: list[slice] = [slice(None)] * data.ndim
    for s, e, a, st in zip(starts, ends, axes, steps):
        slicer[a if a >= 0 else data.ndim + a] = slice(s, e, st)
    return [data[tuple(slicer)]]


def _op_squeeze(node: Node, inputs, graph) -> list[np.ndarray]:
    data = inputs[0]
    axes = _axis_list(node, inputs, "axes", 1)
    if axes is None:
        return [np.squeeze(data)]
    return [np.squeeze(data, axis=tuple(a if a >= 0 else data.ndim + a for a in axes))]


def _op_unsqueeze(node: Node, inputs, graph) -> list[np.ndarray]:
    data = inputs[0]
    axes = _axis_list(node, inputs, "axes", 1)
    if axes is None:
        raise InferenceFailureError("Unsqueeze without axes")
    out = data
    for a in sorted(axes):
        out = np.expand_dims(out, axis=a)
    return [out]


def _op_split(node: Node, inputs, graph) -> list[np.ndarray]:
    data = inputs[0]
    axis = int(node.attrs.get("axis", 0))
    if "split" in node.attrs:
        sizes = [int(v) for v in node.attrs["split"]]
    elif len(inputs) > 1 and inputs[1] is not None:
        sizes = [int(v) for v in np.asarray(inputs[1]).reshape(-1)]
    else:
        n = len(node.outputs)
        size = data.shape[axis] // n
        sizes = [size] * n
    offsets = np.cumsum(sizes)[:-1]
    return list(np.split(data, offsets, axis=axis))


_OPS: dict[str, Callable[[Node, list, Graph], list[np.ndarray]]] = {
    "Constant": _op_constant,
    "Identity": lambda n, i, g: [i[0]],
    "Add": lambda n, i, g: [i[0] + i[1]],
    "Sub": lambda n, i, g: [i[0] - i[1]],
    "Mul": lambda n, i, g: [i[0] * i[1]],
    "Div": lambda n, i, g: [i[0] / i[1]],
    "Neg": lambda n, i, g: [-i[0]],
    "Exp": lambda n, i, g: [np.exp(i[0])],
    "Sqrt": lambda n, i, g: [np.sqrt(i[0])],
    "Sigmoid": lambda n, i, g: [1.0 / (1.0 + np.exp(-i[0]))],
    "Tanh": lambda n, i, g: [np.tanh(i[0])],
    "Relu": lambda n, i, g: [np.maximum(i[0], 0)],
    "Concat": lambda n, i, g: [np.concatenate(i, axis=int(n.attrs.get("axis", 0)))],
    "Reshape": lambda n, i, g: [i[0].reshape([int(v) for v in np.asarray(i[1]).reshape(-1)])],
    "Transpose": lambda n, i, g: [
        np.transpose(i[0], axes=[int(v) for v in n.attrs["perm"]] if "perm" in n.attrs else None)
    ],
    "Shape": lambda n, i, g: [np.asarray(i[0].shape, dtype=np.int64)],
    "Cast": lambda n, i, g: [i[0].astype(_cast_dtype(int(n.attrs["to"])))],
    "Gather": lambda n, i, g: [np.take(i[0], i[1].astype(np.int64), axis=int(n.attrs.get("axis", 0)))],
    "MatMul": lambda n, i, g: [i[0] @ i[1]],
    "Gemm": _op_gemm,
    "Clip": lambda n, i, g: [np.clip(
        i[0],
        i[1] if len(i) > 1 and i[1] is not None else n.attrs.get("min"),
        i[2] if len(i) > 2 and i[2] is not None else n.attrs.get("max"),
    )],
    "Slice": _op_slice,
    "Squeeze": _op_squeeze,
    "Unsqueeze": _op_unsqueeze,
    "Split": _op_split,
    "ReduceMax": lambda n, i, g: [np.max(
        i[0],
        axis=tuple(int(a) for a in n.attrs["axes"]) if "axes" in n.attrs else None,
        keepdims=bool(n.attrs.get("keepdims", 1)),
    )],
    "ReduceSum": lambda n, i, g: [np.sum(
        i[0],
        axis=tuple(int(a) for a in n.attrs["axes"]) if "axes" in n.attrs else None,
        keepdims=bool(n.attrs.get("keepdims", 1)),
    )],
}


def _cast_dtype(onnx_type: int) -> np.dtype:
    from .onnx_wire import _ONNX_TO_DTYPE
    if onnx_type not in _ONNX_TO_DTYPE:
        raise InferenceFailureError(f"Cast to unsupported element type {onnx_type}")
    return _ONNX_TO_DTYPE[onnx_type]


class ReferenceSession:
    """Single-threaded interpreter over a parsed graph.

    Nodes are executed in file order, which the format requires to be
    topological.  A lock serializes ``run`` so one session is safe to
    share across request handlers.
    """

    def __init__(self, model: Model):
        self._model = model
        self._graph = model.graph
        self._lock = threading.Lock()
        init_names = set(self._graph.initializers)
        self.input_info: list[TensorInfo] = [
            t for t in self._graph.inputs if t.name not in init_names
        ]
        self.output_info: list[TensorInfo] = list(self._graph.outputs)
        supported = set(_OPS)
        used = {n.op_type for n in self._graph.nodes}
        missing = used - supported
        if missing:
            raise InvalidModelFileError(
                f"graph uses operators outside the built-in subset: {sorted(missing)}; "
                "install onnxruntime to run this model"
            )

    @classmethod
    def from_path(cls, path) -> "ReferenceSession":
        return cls(load_model(path))

    def run(self, feeds: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        with self._lock:
            values: dict[str, np.ndarray] = dict(self._graph.initializers)
            for info in self.input_info:
                if info.name not in feeds:
                    raise InferenceFailureError(f"missing input '{info.name}'")
            values.update({k: _np(v) for k, v in feeds.items()})
            for node in self._graph.nodes:
                args = [values[name] if name else None for name in node.inputs]
                for name, arg in zip(node.inputs, args):
                    if name and name not in values:
                        raise InferenceFailureError(
                            f"node '{node.name}' consumes undefined value '{name}'"
                        )
                try:
                    outs = _OPS[node.op_type](node, args, self._graph)
                except InferenceFailureError:
                    raise
                except Exception as exc:
                    raise InferenceFailureError(
                        f"{node.op_type} node '{node.name}' failed: {exc}"
                    ) from exc
                for name, out in zip(node.outputs, outs):
                    values[name] = _np(out)
            missing_outputs = [t.name for t in self.output_info if t.name not in values]
            if missing_outputs:
                raise InferenceFailureError(f"graph never produced outputs {missing_outputs}")
            return {t.name: values[t.name] for t in self.output_info}


class OrtSession:  # pragma: no cover - requires onnxruntime
    """Thin adapter over onnxruntime.InferenceSession."""

    def __init__(self, path):
        self._session = _ort.InferenceSession(str(path), providers=["CPUExecutionProvider"])
        self._lock = threading.Lock()

        def _info(v) -> TensorInfo:
            shape = tuple(d if isinstance(d, int) else (d or None) for d in v.shape)
            dtype = np.dtype(v.type.replace("tensor(", "").rstrip(")")
                             .replace("float", "float32").replace("float3232", "float32")
                             .replace("double", "float64"))
            return TensorInfo(name=v.name, dtype=dtype, shape=shape)

        self.input_info = [_info(v) for v in self._session.get_inputs()]
        self.output_info = [_info(v) for v in self._session.get_outputs()]

    def run(self, feeds: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        with self._lock:
            names = [t.name for t in self.output_info]
            try:
                outs = self._session.run(names, feeds)
            except Exception as exc:
                raise InferenceFailureError(f"onnxruntime failed: {exc}") from exc
            return dict(zip(names, outs))


def create_session(path):
    """Best engine available for this file: onnxruntime if importable."""
    if _ort is not None:  # pragma: no cover
        try:
            return OrtSession(path)
        except Exception:
            pass  # fall back: the file may still fit the reference subset
    return ReferenceSession.from_path(path)
