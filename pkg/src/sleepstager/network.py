"""Sequence classifier built from scratch: gated memory cells, bidirectional
layers, an MLP baseline, and exact backpropagation through time.

One "sequence" is a whole night: T feature vectors in, T rows of class
probabilities out. The recurrent cell is the peephole variant: input and
forget gates see the previous cell state through elementwise (diagonal)
peephole vectors, the output gate sees the freshly updated cell state.
Bidirectional layers run an independent cell over the reversed sequence and
concatenate per-timestep outputs, so every prediction conditions on the
entire night in both directions. All arithmetic is float64 and
deterministic; gradients are analytic, not approximated.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

LAYER_KINDS = ("mlp", "lstm", "blstm")

# canonical field order; initialization, serialization, and gradient
# dictionaries all follow it
LSTM_FIELDS = (
    "W_xi", "W_xf", "W_xc", "W_xo",
    "W_hi", "W_hf", "W_hc", "W_ho",
    "w_ci", "w_cf", "w_co",
    "b_i", "b_f", "b_c", "b_o",
)
MLP_FIELDS = ("W", "b")


@dataclass
class LstmParams:
    """One direction's cell parameters.

    Input maps are (hidden, input), recurrent maps are (hidden, hidden),
    peepholes are elementwise hidden-dim vectors, as are the biases.
    """

    W_xi: np.ndarray
    W_xf: np.ndarray
    W_xc: np.ndarray
    W_xo: np.ndarray
    W_hi: np.ndarray
    W_hf: np.ndarray
    W_hc: np.ndarray
    W_ho: np.ndarray
    w_ci: np.ndarray
    w_cf: np.ndarray
    w_co: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.W_xi.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_xi.shape[1]


@dataclass
class MlpParams:
    """Per-timestep affine map plus tanh; no recurrence."""

    W: np.ndarray
    b: np.ndarray


def _lstm_shapes(input_dim: int, hidden: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for name in LSTM_FIELDS:
        if name.startswith("W_x"):
            shapes[name] = (hidden, input_dim)
        elif name.startswith("W_h"):
            shapes[name] = (hidden, hidden)
        else:
            shapes[name] = (hidden,)
    return shapes


@dataclass(frozen=True)
class NetSpec:
    """Architecture description: stacked layers plus the softmax head.

    ``layers`` is a tuple of (kind, hidden) pairs, kind in {mlp, lstm,
    blstm}. A blstm layer feeds 2*hidden values upward, the others hidden.
    """

    input_dim: int
    num_classes: int = 5
    layers: tuple[tuple[str, int], ...] = (("blstm", 400),)

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.num_classes not in (4, 5):
            raise ValueError("num_classes must be 4 or 5")
        if not self.layers:
            raise ValueError("need at least one layer")
        for kind, hidden in self.layers:
            if kind not in LAYER_KINDS:
                raise ValueError(f"unknown layer kind {kind!r}")
            if hidden < 1:
                raise ValueError("hidden size must be >= 1")

    def layer_io_dims(self) -> list[tuple[int, int]]:
        """(input, output) width of each layer in stack order."""
        dims = []
        d = self.input_dim
        for kind, hidden in self.layers:
            out = 2 * hidden if kind == "blstm" else hidden
            dims.append((d, out))
            d = out
        return dims

    @property
    def last_output_dim(self) -> int:
        return self.layer_io_dims()[-1][1]

    def param_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Every parameter's name and shape in canonical order."""
        out: list[tuple[str, tuple[int, ...]]] = []
        for k, ((kind, hidden), (d_in, _)) in enumerate(zip(self.layers, self.layer_io_dims())):
            if kind == "mlp":
                out.append((f"layer{k}.mlp.W", (hidden, d_in)))
                out.append((f"layer{k}.mlp.b", (hidden,)))
            else:
                directions = ("fwd",) if kind == "lstm" else ("fwd", "bwd")
                for direction in directions:
                    for name, shape in _lstm_shapes(d_in, hidden).items():
                        out.append((f"layer{k}.{direction}.{name}", shape))
        out.append(("out.W", (self.num_classes, self.last_output_dim)))
        out.append(("out.b", (self.num_classes,)))
        return out


@dataclass
class Layer:
    """One stack level; which param fields are set depends on ``kind``."""

    kind: str
    fwd: LstmParams | None = None
    bwd: LstmParams | None = None
    mlp: MlpParams | None = None


@dataclass
class Network:
    """Layer stack plus softmax head. Mutated only by the training loop."""

    spec: NetSpec
    layers: list[Layer]
    out_W: np.ndarray
    out_b: np.ndarray

    @classmethod
    def zeros(cls, spec: NetSpec) -> "Network":
        """All-zero parameters with the spec's shapes."""
        arrays = {name: np.zeros(shape) for name, shape in spec.param_shapes()}
        layers = []
        for k, (kind, _) in enumerate(spec.layers):
            if kind == "mlp":
                layers.append(Layer(kind, mlp=MlpParams(
                    W=arrays[f"layer{k}.mlp.W"], b=arrays[f"layer{k}.mlp.b"])))
            else:
                fwd = LstmParams(**{f: arrays[f"layer{k}.fwd.{f}"] for f in LSTM_FIELDS})
                bwd = None
                if kind == "blstm":
                    bwd = LstmParams(**{f: arrays[f"layer{k}.bwd.{f}"] for f in LSTM_FIELDS})
                layers.append(Layer(kind, fwd=fwd, bwd=bwd))
        return cls(spec=spec, layers=layers, out_W=arrays["out.W"], out_b=arrays["out.b"])

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        """Live views of every parameter array, canonical order."""
        out: list[tuple[str, np.ndarray]] = []
        for k, layer in enumerate(self.layers):
            if layer.kind == "mlp":
                out.append((f"layer{k}.mlp.W", layer.mlp.W))
                out.append((f"layer{k}.mlp.b", layer.mlp.b))
            else:
                for direction, p in (("fwd", layer.fwd), ("bwd", layer.bwd)):
                    if p is None:
                        continue
                    for f in LSTM_FIELDS:
                        out.append((f"layer{k}.{direction}.{f}", getattr(p, f)))
        out.append(("out.W", self.out_W))
        out.append(("out.b", self.out_b))
        return out

    def clone(self) -> "Network":
        return copy.deepcopy(self)

    def checksum(self) -> float:
        return float(sum(np.abs(a).sum() for _, a in self.named_params()))


def is_bias(name: str) -> bool:
    """True for bias parameters (the ones weight noise leaves alone)."""
    return name.rsplit(".", 1)[-1] in ("b", "b_i", "b_f", "b_c", "b_o")


def lstm_step(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, p: LstmParams):
    """One cell update; returns (h, c, gate cache).

    Input and forget gates peek at the previous cell state, the output gate
    at the just-computed one; the candidate has no peephole.
    """
    if x.shape != (p.input_size,) or h_prev.shape != (p.hidden_size,):
        raise ValueError("lstm_step shape mismatch")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(h_prev)) and np.all(np.isfinite(c_prev))):
        raise ValueError("non-finite lstm_step input")
    i = expit(p.W_xi @ x + p.W_hi @ h_prev + p.w_ci * c_prev + p.b_i)
    f = expit(p.W_xf @ x + p.W_hf @ h_prev + p.w_cf * c_prev + p.b_f)
    g = np.tanh(p.W_xc @ x + p.W_hc @ h_prev + p.b_c)
    c = f * c_prev + i * g
    o = expit(p.W_xo @ x + p.W_ho @ h_prev + p.w_co * c + p.b_o)
    h = o * np.tanh(c)
    return h, c, {"i": i, "f": f, "g": g, "c": c, "o": o, "h": h}


def _lstm_scan(X: np.ndarray, p: LstmParams) -> dict[str, np.ndarray]:
    """Run the cell over a whole sequence from zero states.

    Input projections are hoisted out of the time loop; the recurrence
    itself is inherently sequential. Returns (T, hidden) gate arrays.
    """
    T = X.shape[0]
    H = p.hidden_size
    ax_i = X @ p.W_xi.T + p.b_i
    ax_f = X @ p.W_xf.T + p.b_f
    ax_g = X @ p.W_xc.T + p.b_c
    ax_o = X @ p.W_xo.T + p.b_o
    I = np.empty((T, H))
    F = np.empty((T, H))
    G = np.empty((T, H))
    C = np.empty((T, H))
    O = np.empty((T, H))
    Hs = np.empty((T, H))
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(T):
        i = expit(ax_i[t] + p.W_hi @ h + p.w_ci * c)
        f = expit(ax_f[t] + p.W_hf @ h + p.w_cf * c)
        g = np.tanh(ax_g[t] + p.W_hc @ h)
        c = f * c + i * g
        o = expit(ax_o[t] + p.W_ho @ h + p.w_co * c)
        h = o * np.tanh(c)
        I[t], F[t], G[t], C[t], O[t], Hs[t] = i, f, g, c, o, h
    return {"i": I, "f": F, "g": G, "c": C, "o": O, "h": Hs}


def _lstm_scan_backward(X: np.ndarray, cache: dict, p: LstmParams, dH: np.ndarray):
    """Exact reverse-time gradients for one scan.

    Returns (dX, grads dict keyed by LSTM_FIELDS). The recurrence carries
    both a hidden gradient and a cell gradient; the cell gradient picks up
    contributions from the output-gate peephole at the current step and the
    input/forget peepholes one step later.
    """
    T, H = dH.shape
    I, F, G, C, O = cache["i"], cache["f"], cache["g"], cache["c"], cache["o"]
    C_prev = np.vstack([np.zeros((1, H)), C[:-1]])
    H_prev = np.vstack([np.zeros((1, H)), cache["h"][:-1]])
    dA_i = np.empty((T, H))
    dA_f = np.empty((T, H))
    dA_g = np.empty((T, H))
    dA_o = np.empty((T, H))
    dh_carry = np.zeros(H)
    dc_carry = np.zeros(H)
    for t in range(T - 1, -1, -1):
        dh = dH[t] + dh_carry
        tc = np.tanh(C[t])
        da_o = dh * tc * O[t] * (1.0 - O[t])
        dc = dc_carry + dh * O[t] * (1.0 - tc * tc) + da_o * p.w_co
        da_g = dc * I[t] * (1.0 - G[t] * G[t])
        da_i = dc * G[t] * I[t] * (1.0 - I[t])
        da_f = dc * C_prev[t] * F[t] * (1.0 - F[t])
        dh_carry = p.W_hi.T @ da_i + p.W_hf.T @ da_f + p.W_hc.T @ da_g + p.W_ho.T @ da_o
        dc_carry = dc * F[t] + da_i * p.w_ci + da_f * p.w_cf
        dA_i[t], dA_f[t], dA_g[t], dA_o[t] = da_i, da_f, da_g, da_o
    dX = dA_i @ p.W_xi + dA_f @ p.W_xf + dA_g @ p.W_xc + dA_o @ p.W_xo
    grads = {
        "W_xi": dA_i.T @ X, "W_xf": dA_f.T @ X, "W_xc": dA_g.T @ X, "W_xo": dA_o.T @ X,
        "W_hi": dA_i.T @ H_prev, "W_hf": dA_f.T @ H_prev,
        "W_hc": dA_g.T @ H_prev, "W_ho": dA_o.T @ H_prev,
        "w_ci": (dA_i * C_prev).sum(axis=0),
        "w_cf": (dA_f * C_prev).sum(axis=0),
        "w_co": (dA_o * C).sum(axis=0),
        "b_i": dA_i.sum(axis=0), "b_f": dA_f.sum(axis=0),
        "b_c": dA_g.sum(axis=0), "b_o": dA_o.sum(axis=0),
    }
    return dX, grads


@dataclass
class LayerTrace:
    """Cached activations of one layer for exact backpropagation."""

    inputs: np.ndarray
    fwd: dict | None = None
    bwd: dict | None = None
    hidden: np.ndarray | None = None
    outputs: np.ndarray = field(default=None)  # type: ignore[assignment]


@dataclass
class ForwardTrace:
    """Everything the backward pass needs, plus a parameter checksum so a
    trace can detect that the network changed underneath it."""

    layers: list[LayerTrace]
    logits: np.ndarray
    probs: np.ndarray
    checksum: float


def _layer_forward_trace(layer: Layer, X: np.ndarray) -> LayerTrace:
    if layer.kind == "mlp":
        hidden = np.tanh(X @ layer.mlp.W.T + layer.mlp.b)
        return LayerTrace(inputs=X, hidden=hidden, outputs=hidden)
    if layer.kind == "lstm":
        cache = _lstm_scan(X, layer.fwd)
        return LayerTrace(inputs=X, fwd=cache, outputs=cache["h"])
    fwd = _lstm_scan(X, layer.fwd)
    bwd = _lstm_scan(X[::-1], layer.bwd)
    outputs = np.concatenate([fwd["h"], bwd["h"][::-1]], axis=1)
    return LayerTrace(inputs=X, fwd=fwd, bwd=bwd, outputs=outputs)


def layer_forward(layer: Layer, inputs: np.ndarray) -> np.ndarray:
    """Outputs of one layer over a sequence, shape (T, layer output dim)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise ValueError("inputs must be a non-empty (T, dim) array")
    return _layer_forward_trace(layer, inputs).outputs


def _layer_backward(layer: Layer, trace: LayerTrace, dOut: np.ndarray):
    """Gradient of one layer: returns (dInputs, {field name: grad})."""
    if layer.kind == "mlp":
        dA = dOut * (1.0 - trace.hidden**2)
        grads = {"mlp.W": dA.T @ trace.inputs, "mlp.b": dA.sum(axis=0)}
        return dA @ layer.mlp.W, grads
    if layer.kind == "lstm":
        dX, g = _lstm_scan_backward(trace.inputs, trace.fwd, layer.fwd, dOut)
        return dX, {f"fwd.{k}": v for k, v in g.items()}
    H = layer.fwd.hidden_size
    dX_f, g_f = _lstm_scan_backward(trace.inputs, trace.fwd, layer.fwd, dOut[:, :H])
    dX_b, g_b = _lstm_scan_backward(trace.inputs[::-1], trace.bwd, layer.bwd, dOut[:, H:][::-1])
    grads = {f"fwd.{k}": v for k, v in g_f.items()}
    grads.update({f"bwd.{k}": v for k, v in g_b.items()})
    return dX_f + dX_b[::-1], grads


def network_forward(net: Network, features: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """Class probabilities for a whole sequence plus the backward-pass trace."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("features must be a non-empty (T, dim) array")
    if X.shape[1] != net.spec.input_dim:
        raise ValueError(f"feature dim {X.shape[1]} != network input dim {net.spec.input_dim}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite features")
    traces = []
    for layer in net.layers:
        tr = _layer_forward_trace(layer, X)
        traces.append(tr)
        X = tr.outputs
    logits = X @ net.out_W.T + net.out_b
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    return probs, ForwardTrace(layers=traces, logits=logits, probs=probs, checksum=net.checksum())


LOSS_EPS = 1e-12


def _check_one_hot(labels: np.ndarray, shape) -> np.ndarray:
    Y = np.asarray(labels, dtype=np.float64)
    if Y.shape != shape:
        raise ValueError(f"labels shape {Y.shape} != probabilities shape {shape}")
    if not (np.all((Y == 0.0) | (Y == 1.0)) and np.all(Y.sum(axis=1) == 1.0)):
        raise ValueError("labels must be one-hot rows")
    return Y


def loss(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Timestep-averaged two-sided cross entropy.

    Each class contributes both a log(p) term (when it is the reference)
    and a log(1-p) term (when it is not), so confident wrong mass is
    penalized directly. Probabilities are clamped to [1e-12, 1 - 1e-12]
    to keep the logs finite.
    """
    P = np.asarray(probabilities, dtype=np.float64)
    Y = _check_one_hot(labels, P.shape)
    pc = np.clip(P, LOSS_EPS, 1.0 - LOSS_EPS)
    per_t = (Y * np.log(pc) + (1.0 - Y) * np.log1p(-pc)).sum(axis=1)
    return float(-per_t.mean())


def _loss_backward(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    T = P.shape[0]
    pc = np.clip(P, LOSS_EPS, 1.0 - LOSS_EPS)
    dP = -(Y / pc - (1.0 - Y) / (1.0 - pc)) / T
    # clamped entries are locally constant in P
    return np.where((P > LOSS_EPS) & (P < 1.0 - LOSS_EPS), dP, 0.0)


def network_backward(net: Network, trace: ForwardTrace, labels: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the loss for every parameter, keyed like named_params.

    Rejects a trace whose checksum no longer matches the network: gradients
    against mutated parameters would be silently wrong.
    """
    if net.checksum() != trace.checksum:
        raise ValueError("stale trace: network parameters changed since forward pass")
    P = trace.probs
    Y = _check_one_hot(labels, P.shape)
    dP = _loss_backward(P, Y)
    # softmax jacobian: dz = p * (dp - <dp, p>)
    dZ = P * (dP - (dP * P).sum(axis=1, keepdims=True))
    last_out = trace.layers[-1].outputs
    grads: dict[str, np.ndarray] = {
        "out.W": dZ.T @ last_out,
        "out.b": dZ.sum(axis=0),
    }
    dH = dZ @ net.out_W
    for k in range(len(net.layers) - 1, -1, -1):
        dH, layer_grads = _layer_backward(net.layers[k], trace.layers[k], dH)
        for name, g in layer_grads.items():
            grads[f"layer{k}.{name}"] = g
    return grads


def predict_stages(probabilities: np.ndarray) -> np.ndarray:
    """Most probable class per timestep; ties resolve to the lowest index."""
    return np.argmax(np.asarray(probabilities), axis=1).astype(np.int64)
