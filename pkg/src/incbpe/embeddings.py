"""Growable embedding matrices and initialization of rows for new subwords.

A new subword always comes from merging two existing ones, so its row is
built from the rows of its components: their mean (``Avg``), the bottleneck
code of a small autoencoder trained on the concatenated pair (``AE``), or,
as a control, a seeded uniform draw (``Rand``).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._io import atomic_writer, read_lines
from .errors import InvalidInputError, MalformedInputError, MissingComponentError, NumericError

EMBED_HEADER = "#incbpe embed v1"
AE_MAGIC = b"INCAE1"


# --- strategies -------------------------------------------------------------


@dataclass(frozen=True)
class Rand:
    seed: int = 0
    scale: float = 0.08

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidInputError(f"scale must be > 0, got {self.scale}")


@dataclass(frozen=True)
class Avg:
    pass


@dataclass
class AE:
    """Autoencoder strategy.

    Trained parameters are kept per embedding width, so a later call with
    ``warm_start`` continues training instead of starting over. ``last_losses``
    holds ``(initial, final)`` reconstruction loss of the most recent run.
    """

    epochs: int = 50
    step_size: float = 0.01
    seed: int = 0
    loss: str = "mse"
    warm_start: bool = True
    params: dict[int, "AutoencoderParams"] = field(default_factory=dict, repr=False)
    last_losses: tuple[float, float] | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError(f"epochs must be >= 1, got {self.epochs}")
        if not self.step_size > 0:
            raise InvalidInputError(f"step_size must be > 0, got {self.step_size}")
        if self.loss not in ("mse", "bce"):
            raise InvalidInputError(f"loss must be 'mse' or 'bce', got {self.loss!r}")

    @property
    def config(self) -> "AEConfig":
        return AEConfig(epochs=self.epochs, step_size=self.step_size, seed=self.seed, loss=self.loss)


InitStrategy = Rand | Avg | AE


# --- elementary initializers ---------------------------------------------------


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, index])


def init_random(dim: int, seed: int = 0, scale: float = 0.08, index: int = 0) -> np.ndarray:
    """Uniform ``[-scale, scale]`` vector, reproducible from ``(seed, index)``."""
    if dim < 1:
        raise InvalidInputError(f"dim must be >= 1, got {dim}")
    if not scale > 0:
        raise InvalidInputError(f"scale must be > 0, got {scale}")
    return _rng(seed, index).uniform(-scale, scale, size=dim)


def init_avg(e_left, e_right) -> np.ndarray:
    a = np.asarray(e_left, dtype=np.float64)
    b = np.asarray(e_right, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError(f"component shapes differ: {a.shape} vs {b.shape}")
    return (a + b) / 2


# --- autoencoder --------------------------------------------------------------


@dataclass(frozen=True)
class AEConfig:
    epochs: int = 50
    step_size: float = 0.01
    seed: int = 0
    loss: str = "mse"


@dataclass
class AutoencoderParams:
    """Weights of the ``2d -> h1 -> d -> h3 -> 2d`` net, stored as ``(in, out)``.

    Every hidden layer is followed by a ReLU; the output layer is linear
    (``mse``) or feeds a sigmoid (``bce``).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dim(self) -> int:
        return self.weights[1].shape[1]

    @property
    def widths(self) -> tuple[int, int, int, int]:
        w = self.weights
        return (w[0].shape[0], w[0].shape[1], w[1].shape[1], w[2].shape[1])

    def copy(self) -> "AutoencoderParams":
        return AutoencoderParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for i in range(4):
            for arr in (self.weights[i], self.biases[i]):
                n = arr.size
                arr[...] = vec[pos : pos + n].reshape(arr.shape)
                pos += n

    @classmethod
    def zeros(cls, dim: int, hidden: int | None = None) -> "AutoencoderParams":
        h = 2 * dim if hidden is None else hidden
        shapes = [(2 * dim, h), (h, dim), (dim, h), (h, 2 * dim)]
        return cls([np.zeros(s) for s in shapes], [np.zeros(s[1]) for s in shapes])

    @classmethod
    def initialize(cls, dim: int, seed: int = 0, hidden: int | None = None) -> "AutoencoderParams":
        """Glorot-uniform weights, zero biases."""
        if dim < 1:
            raise InvalidInputError(f"dim must be >= 1, got {dim}")
        params = cls.zeros(dim, hidden)
        rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
        for w in params.weights:
            limit = math.sqrt(6.0 / (w.shape[0] + w.shape[1]))
            w[...] = rng.uniform(-limit, limit, size=w.shape)
        return params


def _relu(z):
    return np.maximum(z, 0.0)


def _forward(params: AutoencoderParams, x: np.ndarray):
    """Pre-activations and activations of every layer."""
    acts = [x]
    pre = []
    h = x
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        h = _relu(z) if i < 3 else z
        acts.append(h)
    return pre, acts


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def reconstruction_loss(params: AutoencoderParams, x: np.ndarray, loss: str = "mse") -> float:
    """Mean per-component loss between ``x`` and the net's reconstruction."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _, acts = _forward(params, x)
    return _loss_and_grad(acts[-1], x, loss)[0]


def _loss_and_grad(logits, x, loss):
    n = x.size
    if loss == "mse":
        diff = logits - x
        return float(np.dot(diff.ravel(), diff.ravel()) / n), (2.0 / n) * diff
    # sigmoid output against sigmoid-squashed targets, computed on logits
    t = _sigmoid(x)
    value = np.logaddexp(0.0, logits) - t * logits
    y = _sigmoid(logits)
    return float(value.sum() / n), (y - t) / n


def loss_and_gradients(params: AutoencoderParams, x: np.ndarray, loss: str = "mse"):
    """Loss and per-layer ``(dW, db)`` by backpropagation."""
    pre, acts = _forward(params, x)
    value, delta = _loss_and_grad(acts[-1], x, loss)
    grads_w = [None] * 4
    grads_b = [None] * 4
    for i in range(3, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (pre[i - 1] > 0)
    return value, grads_w, grads_b


def _pairs_matrix(pairs) -> np.ndarray:
    rows = [np.concatenate([np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)]) for a, b in pairs]
    if not rows:
        raise InvalidInputError("autoencoder needs at least one training pair")
    width = rows[0].shape[0]
    if width % 2 or any(r.shape != (width,) for r in rows):
        raise InvalidInputError("all component vectors must share one length")
    return np.stack(rows)


def train_autoencoder(
    pairs: Sequence[tuple[Sequence[float], Sequence[float]]] | np.ndarray,
    config: AEConfig = AEConfig(),
    params: AutoencoderParams | None = None,
    history: list[float] | None = None,
) -> AutoencoderParams:
    """Full-batch gradient descent on reconstruction of ``concat(left, right)``.

    ``pairs`` may also be an ``(n, 2*dim)`` array of concatenated rows.
    Passing ``params`` warm-starts from a copy of them. If ``history`` is
    given, the loss before each epoch and the final loss are appended.
    """
    if isinstance(pairs, np.ndarray) and pairs.ndim == 2:
        x = np.asarray(pairs, dtype=np.float64)
        if x.shape[0] == 0:
            raise InvalidInputError("autoencoder needs at least one training pair")
    else:
        x = _pairs_matrix(pairs)
    dim = x.shape[1] // 2
    if params is None:
        params = AutoencoderParams.initialize(dim, config.seed)
    else:
        if params.dim != dim or params.widths[0] != 2 * dim:
            raise InvalidInputError(f"params are for dim {params.dim}, data has dim {dim}")
        params = params.copy()
    lr = config.step_size
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.epochs):
            value, gw, gb = loss_and_gradients(params, x, config.loss)
            if not math.isfinite(value):
                raise NumericError("autoencoder training diverged")
            if history is not None:
                history.append(value)
            for w, b, dw, db in zip(params.weights, params.biases, gw, gb):
                w -= lr * dw
                b -= lr * db
        final = reconstruction_loss(params, x, config.loss)
    if not math.isfinite(final):
        raise NumericError("autoencoder training diverged")
    if history is not None:
        history.append(final)
    return params


def encode(params: AutoencoderParams, x: np.ndarray) -> np.ndarray:
    """Bottleneck activations for concatenated inputs ``x`` of shape (n, 2*dim)."""
    h = np.atleast_2d(x)
    for i in range(2):
        h = _relu(h @ params.weights[i] + params.biases[i])
    return h


def decode(params: AutoencoderParams, code: np.ndarray, loss: str = "mse") -> np.ndarray:
    h = _relu(np.atleast_2d(code) @ params.weights[2] + params.biases[2])
    out = h @ params.weights[3] + params.biases[3]
    return _sigmoid(out) if loss == "bce" else out


def init_ae(params: AutoencoderParams, e_left, e_right) -> np.ndarray:
    a = np.asarray(e_left, dtype=np.float64)
    b = np.asarray(e_right, dtype=np.float64)
    if a.shape != (params.dim,) or b.shape != (params.dim,):
        raise InvalidInputError(f"expected two vectors of length {params.dim}, got {a.shape} and {b.shape}")
    return encode(params, np.concatenate([a, b]))[0]


def save_autoencoder(params: AutoencoderParams, path) -> None:
    with atomic_writer(path, "wb") as fh:
        fh.write(AE_MAGIC)
        fh.write(struct.pack("<4I", *params.widths))
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_autoencoder(path) -> AutoencoderParams:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(AE_MAGIC)] != AE_MAGIC:
        raise MalformedInputError(f"{path}: not an autoencoder checkpoint")
    pos = len(AE_MAGIC)
    try:
        n_in, h1, mid, h3 = struct.unpack_from("<4I", data, pos)
    except struct.error:
        raise MalformedInputError(f"{path}: truncated header") from None
    pos += 16
    shapes = [(n_in, h1), (h1, mid), (mid, h3), (h3, n_in)]
    weights, biases = [], []
    for shape in shapes:
        for s in (shape, (shape[1],)):
            n = int(np.prod(s))
            chunk = data[pos : pos + 8 * n]
            if len(chunk) != 8 * n:
                raise MalformedInputError(f"{path}: truncated weights")
            (weights if len(s) == 2 else biases).append(np.frombuffer(chunk, dtype="<f8").reshape(s).astype(np.float64))
            pos += 8 * n
    if pos != len(data):
        raise MalformedInputError(f"{path}: {len(data) - pos} trailing bytes")
    return AutoencoderParams(weights, biases)


# --- matrices -----------------------------------------------------------------


class EmbeddingMatrix:
    """Rows keyed by symbol, in insertion order. Extension returns a new matrix."""

    def __init__(self, symbols: Sequence[str], vectors, dim: int | None = None):
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.size == 0:
            if dim is None:
                raise InvalidInputError("dim is required for an empty matrix")
            arr = arr.reshape(0, dim)
        if arr.ndim != 2 or arr.shape[0] != len(symbols):
            raise InvalidInputError(f"{len(symbols)} symbols but vectors of shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise InvalidInputError(f"vectors have width {arr.shape[1]}, expected {dim}")
        self.symbols = list(symbols)
        self.index = {s: i for i, s in enumerate(self.symbols)}
        if len(self.index) != len(self.symbols):
            raise InvalidInputError("duplicate symbols in embedding matrix")
        self.vectors = arr
        self.vectors.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol) -> bool:
        return symbol in self.index

    def __getitem__(self, symbol: str) -> np.ndarray:
        return self.vectors[self.index[symbol]]

    @classmethod
    def random(cls, symbols: Sequence[str], dim: int, seed: int = 0, scale: float = 0.08) -> "EmbeddingMatrix":
        rows = [init_random(dim, seed, scale, i) for i in range(len(symbols))]
        return cls(symbols, np.array(rows).reshape(len(symbols), dim), dim)


@dataclass
class OutputLayerParams:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise InvalidInputError(f"weight {self.weight.shape} and bias {self.bias.shape} disagree")


def _ae_rows(strategy: AE, pairs: np.ndarray, dim: int) -> np.ndarray:
    history: list[float] = []
    start = strategy.params.get(dim) if strategy.warm_start else None
    params = train_autoencoder(pairs, strategy.config, params=start, history=history)
    strategy.params[dim] = params
    strategy.last_losses = (history[0], history[-1])
    return encode(params, pairs)


def _combine(strategy: InitStrategy, left: np.ndarray, right: np.ndarray, row_ids: Sequence[int]) -> np.ndarray:
    """New rows from component rows (each ``(n, dim)``); ``row_ids`` seed ``Rand``."""
    n, dim = left.shape
    if n == 0:
        return np.zeros((0, dim))
    if isinstance(strategy, Avg):
        return (left + right) / 2
    if isinstance(strategy, Rand):
        return np.stack([init_random(dim, strategy.seed, strategy.scale, r) for r in row_ids])
    if isinstance(strategy, AE):
        return _ae_rows(strategy, np.concatenate([left, right], axis=1), dim)
    raise InvalidInputError(f"unknown strategy {strategy!r}")


def extend_matrix(
    matrix: EmbeddingMatrix,
    new_symbols: Iterable[tuple[str, str, str]],
    strategy: InitStrategy,
) -> EmbeddingMatrix:
    """Append one row per ``(symbol, left, right)``; existing rows are copied unchanged.

    Components may be symbols added earlier in the same call, which is what
    happens when ``new_symbols`` comes from ``diff_inventory`` in rank order.
    Rows that depend on same-call symbols are built in later waves.
    """
    items = list(new_symbols)
    seen = set(matrix.symbols)
    for sym, left, right in items:
        if sym in seen:
            raise InvalidInputError(f"symbol {sym!r} is already present")
        for comp in (left, right):
            if comp not in seen:
                raise MissingComponentError(sym, comp)
        seen.add(sym)
    if not items:
        return matrix

    symbols = list(matrix.symbols)
    vectors = [matrix.vectors]
    index = dict(matrix.index)
    current = matrix.vectors
    final_row = {it[0]: len(matrix) + i for i, it in enumerate(items)}
    remaining = items
    while remaining:
        wave = [it for it in remaining if it[1] in index and it[2] in index]
        remaining = [it for it in remaining if not (it[1] in index and it[2] in index)]
        left = current[[index[it[1]] for it in wave]]
        right = current[[index[it[2]] for it in wave]]
        rows = _combine(strategy, left, right, [final_row[it[0]] for it in wave])
        for it in wave:
            index[it[0]] = len(symbols)
            symbols.append(it[0])
        vectors.append(rows)
        current = np.concatenate(vectors)
    # emit rows in input order
    order = [matrix.index[s] for s in matrix.symbols] + [index[it[0]] for it in items]
    out = current[order]
    return EmbeddingMatrix(list(matrix.symbols) + [it[0] for it in items], out, matrix.dim)


def extend_output_params(
    params: OutputLayerParams,
    n_new: int,
    strategy: InitStrategy,
    component_rows: Sequence[tuple[int, int]],
) -> OutputLayerParams:
    """Grow the output projection by ``n_new`` rows built from component rows.

    Biases are the component mean for ``Avg`` and ``AE``; ``Rand`` draws them
    alongside the weight row from the same seeded stream.
    """
    if len(component_rows) != n_new:
        raise InvalidInputError(f"{len(component_rows)} component pairs for {n_new} new rows")
    n_old = params.weight.shape[0]
    for li, ri in component_rows:
        if not (0 <= li < n_old and 0 <= ri < n_old):
            raise InvalidInputError(f"component rows ({li}, {ri}) out of range for {n_old} rows")
    if n_new == 0:
        return OutputLayerParams(params.weight.copy(), params.bias.copy())
    li = [p[0] for p in component_rows]
    ri = [p[1] for p in component_rows]
    hidden = params.weight.shape[1]
    if isinstance(strategy, Rand):
        rows, biases = [], []
        for i in range(n_new):
            rng = _rng(strategy.seed, n_old + i)
            rows.append(rng.uniform(-strategy.scale, strategy.scale, size=hidden))
            biases.append(rng.uniform(-strategy.scale, strategy.scale))
        new_w = np.stack(rows)
        new_b = np.array(biases)
    else:
        new_w = _combine(strategy, params.weight[li], params.weight[ri], range(n_old, n_old + n_new))
        new_b = (params.bias[li] + params.bias[ri]) / 2
    return OutputLayerParams(np.concatenate([params.weight, new_w]), np.concatenate([params.bias, new_b]))


# --- file format ----------------------------------------------------------------


def format_row(symbol: str, vec: np.ndarray) -> str:
    return " ".join([symbol] + [repr(float(v)) for v in vec])


def write_embeddings(matrix: EmbeddingMatrix, path) -> None:
    with atomic_writer(path) as fh:
        fh.write(f"{EMBED_HEADER} {matrix.dim}\n")
        for sym, vec in zip(matrix.symbols, matrix.vectors):
            fh.write(format_row(sym, vec) + "\n")


def parse_embeddings(lines: Sequence[str], source="<embeddings>") -> EmbeddingMatrix:
    if not lines:
        raise MalformedInputError(f"{source}: empty embedding file")
    head = lines[0].split(" ")
    if " ".join(head[:-1]) != EMBED_HEADER:
        raise MalformedInputError(f"{source}: missing header {EMBED_HEADER!r}")
    try:
        dim = int(head[-1])
    except ValueError:
        raise MalformedInputError(f"{source}: bad dimension {head[-1]!r}") from None
    if dim < 1:
        raise MalformedInputError(f"{source}: dimension must be >= 1")
    symbols, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        if len(parts) != dim + 1:
            raise MalformedInputError(f"{source}:{lineno}: expected {dim} values, got {len(parts) - 1}")
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError:
            raise MalformedInputError(f"{source}:{lineno}: non-numeric value") from None
        symbols.append(parts[0])
    try:
        return EmbeddingMatrix(symbols, np.array(rows, dtype=np.float64).reshape(len(rows), dim), dim)
    except InvalidInputError as exc:
        raise MalformedInputError(f"{source}: {exc}") from None


def read_embeddings(path) -> EmbeddingMatrix:
    return parse_embeddings(read_lines(path), str(path))
