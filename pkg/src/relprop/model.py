"""Sequential neural-network models with a trace-recording forward pass.

Five layer kinds are supported: ``Dense``, ``Conv2d``, ``SumPool2d``,
``MaxPool2d`` and ``ReLU``. Everything is float64 and computed with explicit
sliding windows; the goal is exactness and inspectability at desk scale, not
throughput. The forward pass records per-layer inputs, outputs and pooling
receptive-field structure so relevance propagation can replay the network
backwards without re-deriving anything.
"""

import numpy as np

from .errors import FormatError
from .serialize import BlockWriter, LineReader, write_text_atomic
from .validation import as_float_array, check_nonnegative_int, check_positive_int

LAYER_KINDS = ("Dense", "Conv2d", "SumPool2d", "MaxPool2d", "ReLU")


def _pool_geometry(height, width, window, stride, padding):
    """Output grid size for a window/stride/padding triple."""
    out_h = (height + 2 * padding - window) // stride + 1
    out_w = (width + 2 * padding - window) // stride + 1
    return out_h, out_w


class Dense:
    """Fully connected affine map ``y_j = sum_i x_i w_ij + b_j``.

    ``weights`` has shape (n_in, n_out). Inputs of any shape are accepted as
    long as they flatten (row-major) to n_in elements.
    """

    kind = "Dense"

    def __init__(self, weights, bias=None):
        self.weights = as_float_array(weights, "weights", ndim=2)
        n_in, n_out = self.weights.shape
        if bias is None:
            bias = np.zeros(n_out)
        self.bias = as_float_array(bias, "bias", ndim=1, shape=(n_out,))
        self.n_in = n_in
        self.n_out = n_out
        self.weights.flags.writeable = False
        self.bias.flags.writeable = False

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.size != self.n_in:
            raise ValueError(
                f"Dense expects {self.n_in} inputs, got shape {x.shape} ({x.size} values)"
            )
        return x.ravel() @ self.weights + self.bias


class Conv2d:
    """Single 2-D convolution with zero padding and explicit sliding windows.

    ``kernel`` has shape (c_out, c_in, kh, kw); inputs are (c_in, H, W).
    ``bias`` holds one value per output channel.
    """

    kind = "Conv2d"

    def __init__(self, kernel, bias=None, stride=1, padding=0):
        self.kernel = as_float_array(kernel, "kernel", ndim=4)
        c_out = self.kernel.shape[0]
        if bias is None:
            bias = np.zeros(c_out)
        self.bias = as_float_array(bias, "bias", ndim=1, shape=(c_out,))
        self.stride = check_positive_int(stride, "stride")
        self.padding = check_nonnegative_int(padding, "padding")
        self.kernel.flags.writeable = False
        self.bias.flags.writeable = False

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        c_out, c_in, kh, kw = self.kernel.shape
        if x.ndim != 3 or x.shape[0] != c_in:
            raise ValueError(
                f"Conv2d expects input shape ({c_in}, H, W), got {x.shape}"
            )
        _, h, w = x.shape
        out_h = (h + 2 * self.padding - kh) // self.stride + 1
        out_w = (w + 2 * self.padding - kw) // self.stride + 1
        if out_h < 1 or out_w < 1:
            raise ValueError(
                f"Conv2d kernel {kh}x{kw} does not fit input {h}x{w} "
                f"with padding {self.padding}"
            )
        p = self.padding
        padded = np.pad(x, ((0, 0), (p, p), (p, p)))
        out = np.empty((c_out, out_h, out_w))
        for oh in range(out_h):
            hs = oh * self.stride
            for ow in range(out_w):
                ws = ow * self.stride
                patch = padded[:, hs : hs + kh, ws : ws + kw]
                out[:, oh, ow] = np.tensordot(self.kernel, patch, axes=3) + self.bias
        return out


class _Pool2d:
    """Shared geometry for the two pooling kinds.

    Inputs may be (H, W) or (C, H, W); pooling acts per channel. Receptive
    fields are the in-bounds window cells; zero padding affects the pooled
    value but padded cells never belong to a field.
    """

    def __init__(self, window, stride=None, padding=0):
        self.window = check_positive_int(window, "window")
        self.stride = check_positive_int(
            self.window if stride is None else stride, "stride"
        )
        self.padding = check_nonnegative_int(padding, "padding")

    def _canonical(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            return x[None], True
        if x.ndim == 3:
            return x, False
        raise ValueError(f"{self.kind} expects a 2-D or 3-D input, got shape {x.shape}")

    def _check_fit(self, h, w):
        out_h, out_w = _pool_geometry(h, w, self.window, self.stride, self.padding)
        if out_h < 1 or out_w < 1:
            raise ValueError(
                f"{self.kind} window {self.window} does not fit input {h}x{w} "
                f"with padding {self.padding}"
            )
        return out_h, out_w

    def field_map(self, h, w):
        """Per-output array of in-bounds flat input indices (row-major plane).

        The map is purely geometric, shared by every channel. With
        stride == window and no padding the fields partition the plane.
        """
        out_h, out_w = self._check_fit(h, w)
        fields = []
        for oh in range(out_h):
            hs = oh * self.stride - self.padding
            for ow in range(out_w):
                ws = ow * self.stride - self.padding
                rows = np.arange(max(hs, 0), min(hs + self.window, h))
                cols = np.arange(max(ws, 0), min(ws + self.window, w))
                fields.append((rows[:, None] * w + cols[None, :]).ravel())
        return fields


class SumPool2d(_Pool2d):
    kind = "SumPool2d"

    def forward(self, x):
        planes, squeeze = self._canonical(x)
        c, h, w = planes.shape
        out_h, out_w = self._check_fit(h, w)
        p = self.padding
        padded = np.pad(planes, ((0, 0), (p, p), (p, p)))
        out = np.empty((c, out_h, out_w))
        for oh in range(out_h):
            hs = oh * self.stride
            for ow in range(out_w):
                ws = ow * self.stride
                out[:, oh, ow] = padded[
                    :, hs : hs + self.window, ws : ws + self.window
                ].sum(axis=(1, 2))
        return out[0] if squeeze else out


class MaxPool2d(_Pool2d):
    """Max pooling; the forward pass also records the winning input per window.

    Ties go to the lowest flat input index (first occurrence in row-major
    order). If zero padding is used and a padded cell strictly exceeds every
    in-bounds value, the winner index is -1 and relevance sent to that output
    is absorbed at the border.
    """

    kind = "MaxPool2d"

    def forward(self, x):
        out, _ = self.forward_with_winners(x)
        return out

    def forward_with_winners(self, x):
        planes, squeeze = self._canonical(x)
        c, h, w = planes.shape
        out_h, out_w = self._check_fit(h, w)
        out = np.empty((c, out_h, out_w))
        winners = np.empty((c, out_h * out_w), dtype=np.int64)
        fields = self.field_map(h, w)
        flat = planes.reshape(c, h * w)
        window_area = self.window * self.window
        for j, idx in enumerate(fields):
            values = flat[:, idx]
            best = np.argmax(values, axis=1)
            best_vals = values[np.arange(c), best]
            winners[:, j] = idx[best]
            if self.padding and len(idx) < window_area:
                padded_wins = best_vals < 0.0
                best_vals = np.where(padded_wins, 0.0, best_vals)
                winners[padded_wins, j] = -1
            out[:, j // out_w, j % out_w] = best_vals
        if squeeze:
            return out[0], winners
        return out, winners


class ReLU:
    kind = "ReLU"

    def forward(self, x):
        return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


class LayerTrace:
    """Everything the backward pass needs to know about one executed layer.

    ``preactivation`` equals the output for the affine kinds (activation is a
    separate ReLU layer) and is None otherwise. ``field_map`` and ``winners``
    are populated for pooling layers only.
    """

    def __init__(self, input, output, preactivation=None, field_map=None, winners=None):
        self.input = input
        self.output = output
        self.preactivation = preactivation
        self.field_map = field_map
        self.winners = winners


class ActivationTrace:
    """Per-layer records of one forward pass, in execution order."""

    def __init__(self, layers, scores):
        self.layers = layers
        self.scores = scores

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, index):
        return self.layers[index]


class SequentialModel:
    """An ordered layer chain mapping one input tensor to class scores."""

    def __init__(self, layers, input_shape):
        for layer in layers:
            if layer.kind not in LAYER_KINDS:
                raise ValueError(f"unknown layer kind {layer.kind!r}")
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        if any(d < 1 for d in self.input_shape):
            raise ValueError(f"input_shape dimensions must be >= 1, got {self.input_shape}")

    def forward(self, x):
        """Run the network, returning (scores, trace).

        ``scores`` is the last layer's output; the trace holds one entry per
        layer. Shape problems are reported with the index of the offending
        layer.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.input_shape:
            raise ValueError(
                f"input shape {x.shape} does not match model input_shape "
                f"{self.input_shape}"
            )
        records = []
        current = x
        for index, layer in enumerate(self.layers):
            try:
                preact = None
                field_map = None
                winners = None
                if isinstance(layer, MaxPool2d):
                    out, winners = layer.forward_with_winners(current)
                    plane = current if current.ndim == 2 else current[0]
                    field_map = layer.field_map(*plane.shape)
                elif isinstance(layer, SumPool2d):
                    out = layer.forward(current)
                    plane = current if current.ndim == 2 else current[0]
                    field_map = layer.field_map(*plane.shape)
                else:
                    out = layer.forward(current)
                    if isinstance(layer, (Dense, Conv2d)):
                        preact = out
            except ValueError as exc:
                raise ValueError(f"layer {index} ({layer.kind}): {exc}") from exc
            records.append(LayerTrace(current, out, preact, field_map, winners))
            current = out
        return current, ActivationTrace(records, current)


def save_model(model, path):
    """Write a model as a RELPROP-MODEL v1 text file (round-trip exact)."""
    writer = BlockWriter("RELPROP-MODEL v1")
    writer.line("input_shape", *model.input_shape)
    writer.line("layers", len(model.layers))
    for index, layer in enumerate(model.layers):
        writer.line("layer", index, layer.kind)
        if layer.kind == "Dense":
            writer.array("weights", layer.weights)
            writer.array("bias", layer.bias)
        elif layer.kind == "Conv2d":
            writer.line("stride", layer.stride)
            writer.line("padding", layer.padding)
            writer.array("kernel", layer.kernel)
            writer.array("bias", layer.bias)
        elif layer.kind in ("SumPool2d", "MaxPool2d"):
            writer.line("window", layer.window)
            writer.line("stride", layer.stride)
            writer.line("padding", layer.padding)
    write_text_atomic(path, writer.text())


def load_model(path):
    """Read a RELPROP-MODEL v1 file back into a SequentialModel."""
    with open(path, "rb") as fh:
        reader = LineReader(fh.read())
    reader.expect("RELPROP-MODEL v1", context="file header")
    input_shape, _ = reader.read_keyword("input_shape")
    try:
        input_shape = [int(d) for d in input_shape]
    except ValueError as exc:
        raise FormatError("bad integer in 'input_shape' line") from exc
    (count,) = reader.read_ints("layers", count=1)
    layers = []
    for index in range(count):
        tokens, offset = reader.read_keyword("layer")
        if len(tokens) != 2 or tokens[0] != str(index):
            raise FormatError(
                f"expected 'layer {index} <kind>', got 'layer {' '.join(tokens)}'",
                offset,
            )
        kind = tokens[1]
        try:
            if kind == "Dense":
                weights = reader.read_array("weights")
                bias = reader.read_array("bias")
                layers.append(Dense(weights, bias))
            elif kind == "Conv2d":
                (stride,) = reader.read_ints("stride", count=1)
                (padding,) = reader.read_ints("padding", count=1)
                kernel = reader.read_array("kernel")
                bias = reader.read_array("bias")
                layers.append(Conv2d(kernel, bias, stride=stride, padding=padding))
            elif kind in ("SumPool2d", "MaxPool2d"):
                (window,) = reader.read_ints("window", count=1)
                (stride,) = reader.read_ints("stride", count=1)
                (padding,) = reader.read_ints("padding", count=1)
                cls = SumPool2d if kind == "SumPool2d" else MaxPool2d
                layers.append(cls(window, stride=stride, padding=padding))
            elif kind == "ReLU":
                layers.append(ReLU())
            else:
                raise FormatError(f"unknown layer kind {kind!r}", offset)
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"layer {index} ({kind}): {exc}", offset) from exc
    return SequentialModel(layers, input_shape)
