"""
Recurrent cells, dilated multi-layer wiring and the probability/phase heads.

Layer l (0-based) is a recurrent cell whose recurrent state is its own hidden vector
s = B**l sites back (zero when that site does not exist) and whose input is the
hidden vector of layer l-1 at the same site; layer 0 reads the one-hot encoding of
the previous spin instead. The heads read the top layer:

    logits_P[n]   = U h^(L)_n + c        ->  softmax       (conditional probability)
    logits_phi[n] = V h^(L)_n + d        ->  pi * softsign (conditional phase)

Everything is batched: spins have shape (batch, n_sites) and hidden vectors
(batch, hidden_size). Gradients are computed by an explicit reverse pass over the
GradientTape recorded during the forward pass.
"""

import logging
from collections import deque
from dataclasses import dataclass, field, fields

import numpy as np

from errors import ConfigError, ShapeError
from functions.numerics import concat, matvec, sigmoid, tanh

logger = logging.getLogger(__name__)

INPUT_SIZE = 2
DILATION_BASE = 2
CELL_TYPES = ("gru", "vanilla")


# ---------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------

@dataclass
class CellParams:
    """
    GRU cell parameters.

        g  = sigmoid(W_g [h; x] + b_g)                 update gate
        r  = sigmoid(W_r [h; x] + b_r)                 reset gate
        h* = tanh(r * (W_h h + b_h) + W_in x + b_in)   candidate
        h' = (1 - g) * h + g * h*
    """

    W_g: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    W_in: np.ndarray
    b_g: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray
    b_in: np.ndarray

    @property
    def hidden_size(self):
        return self.W_h.shape[0]

    @property
    def input_size(self):
        return self.W_in.shape[1]


@dataclass
class VanillaCellParams:
    """Plain recurrent cell h' = tanh(W [h; x] + b)."""

    W: np.ndarray
    b: np.ndarray

    @property
    def hidden_size(self):
        return self.W.shape[0]

    @property
    def input_size(self):
        return self.W.shape[1] - self.W.shape[0]


@dataclass
class ModelParams:
    """
    The variational parameter set: one cell per layer plus the output heads.

    The same container doubles as a gradient record (same shapes, possibly complex
    entries). `arrays()` fixes the declaration order used by checkpoints and Adam.
    """

    cells: list
    U: np.ndarray
    c: np.ndarray
    V: np.ndarray = None
    d: np.ndarray = None
    cell_type: str = "gru"

    @property
    def n_layers(self):
        return len(self.cells)

    @property
    def hidden_size(self):
        return self.U.shape[1]

    @property
    def is_complex(self):
        return self.V is not None

    def arrays(self):
        """(name, array) pairs in declaration order."""
        out = []
        for l, cell in enumerate(self.cells):
            for f in fields(cell):
                out.append((f"layer{l}.{f.name}", getattr(cell, f.name)))
        out.append(("U", self.U))
        out.append(("c", self.c))
        if self.is_complex:
            out.append(("V", self.V))
            out.append(("d", self.d))
        return out

    def map(self, fn):
        """New record with fn applied to every array (structure preserved)."""
        cells = [
            type(cell)(**{f.name: fn(getattr(cell, f.name)) for f in fields(cell)})
            for cell in self.cells
        ]
        return ModelParams(
            cells=cells,
            U=fn(self.U),
            c=fn(self.c),
            V=fn(self.V) if self.is_complex else None,
            d=fn(self.d) if self.is_complex else None,
            cell_type=self.cell_type,
        )

    def copy(self):
        return self.map(np.copy)

    def zeros_like(self, dtype=np.float64):
        return self.map(lambda a: np.zeros(a.shape, dtype=dtype))

    def n_parameters(self):
        return sum(a.size for _, a in self.arrays())


def record_norm(record):
    """Euclidean norm over every entry of a gradient record."""
    return float(np.sqrt(sum(np.sum(np.abs(a) ** 2) for _, a in record.arrays())))


def max_depth(n_sites, base=DILATION_BASE):
    """Deepest useful stack ceil(log_B N); a one-site chain still gets one layer."""
    depth, reach = 0, 1
    while reach < n_sites:
        reach *= base
        depth += 1
    return max(depth, 1)


def dilation(layer, base=DILATION_BASE):
    """Recurrent stride of 0-based layer `layer`: B**layer."""
    return base ** layer


# ---------------------------------------------------------
# Initialization
# ---------------------------------------------------------

def _build(n_layers, hidden_size, complex_phase, cell_type, draw):
    """Assemble a ModelParams whose arrays come from draw(shape, fan_in)."""
    if n_layers < 1 or hidden_size < 1:
        raise ConfigError(f"need n_layers >= 1 and hidden_size >= 1, got {n_layers}, {hidden_size}")
    if cell_type not in CELL_TYPES:
        raise ConfigError(f"unknown cell type {cell_type!r}; expected one of {CELL_TYPES}")

    d_h = hidden_size
    cells = []
    for l in range(n_layers):
        d_in = INPUT_SIZE if l == 0 else d_h
        joint = d_h + d_in
        if cell_type == "gru":
            cells.append(CellParams(
                W_g=draw((d_h, joint), joint),
                W_r=draw((d_h, joint), joint),
                W_h=draw((d_h, d_h), d_h),
                W_in=draw((d_h, d_in), d_in),
                b_g=draw((d_h,), joint),
                b_r=draw((d_h,), joint),
                b_h=draw((d_h,), d_h),
                b_in=draw((d_h,), d_in),
            ))
        else:
            cells.append(VanillaCellParams(W=draw((d_h, joint), joint), b=draw((d_h,), joint)))

    params = ModelParams(
        cells=cells,
        U=draw((INPUT_SIZE, d_h), d_h),
        c=draw((INPUT_SIZE,), d_h),
        cell_type=cell_type,
    )
    if complex_phase:
        params.V = draw((INPUT_SIZE, d_h), d_h)
        params.d = draw((INPUT_SIZE,), d_h)
    return params


def init_params(n_layers, hidden_size, complex_phase, rng, cell_type="gru"):
    """
        Draw initial parameters uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)].

        Parameters:
            n_layers (int): dilated depth L >= 1.
            hidden_size (int): d_h.
            complex_phase (bool): attach the phase head (V, d).
            rng (RngStream): stream the draws come from.
            cell_type (str): "gru" or "vanilla".

        Returns:
            ModelParams
    """
    gen = rng.generator()

    def draw(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return gen.uniform(-bound, bound, size=shape)

    params = _build(n_layers, hidden_size, complex_phase, cell_type, draw)
    logger.debug("initialized %d-layer %s model with %d parameters",
                 n_layers, cell_type, params.n_parameters())
    return params


def zero_params(n_layers, hidden_size, complex_phase, cell_type="gru"):
    """All-zero parameters: every conditional is (1/2, 1/2) and every phase 0."""
    return _build(n_layers, hidden_size, complex_phase, cell_type, lambda shape, _: np.zeros(shape))


# ---------------------------------------------------------
# Single cell steps
# ---------------------------------------------------------

@dataclass
class GruCache:
    h_prev: np.ndarray
    x_in: np.ndarray
    joint: np.ndarray
    g: np.ndarray
    r: np.ndarray
    q: np.ndarray
    candidate: np.ndarray


@dataclass
class VanillaCache:
    joint: np.ndarray
    h_new: np.ndarray


def _check_cell_shapes(params, h_prev, x_in):
    if np.shape(h_prev)[-1] != params.hidden_size:
        raise ShapeError(f"hidden vector has length {np.shape(h_prev)[-1]}, cell expects {params.hidden_size}")
    if np.shape(x_in)[-1] != params.input_size:
        raise ShapeError(f"input vector has length {np.shape(x_in)[-1]}, cell expects {params.input_size}")


def gru_step(params, h_prev, x_in):
    """
        One GRU update. Accepts a single vector or a batch (leading axis).

        Returns:
            (h_new, GruCache): the new hidden state and what backward needs.
    """
    _check_cell_shapes(params, h_prev, x_in)
    joint = concat(h_prev, x_in)
    g = sigmoid(matvec(params.W_g, joint) + params.b_g)
    r = sigmoid(matvec(params.W_r, joint) + params.b_r)
    q = matvec(params.W_h, h_prev) + params.b_h
    candidate = tanh(r * q + matvec(params.W_in, x_in) + params.b_in)
    h_new = (1.0 - g) * h_prev + g * candidate
    return h_new, GruCache(h_prev, x_in, joint, g, r, q, candidate)


def gru_step_backward(params, cache, dh_new, grads):
    """
        Reverse of gru_step for a batch. Accumulates parameter gradients into
        `grads` (a CellParams of matching shapes) and returns (dh_prev, dx_in).
    """
    g, r, q, cand = cache.g, cache.r, cache.q, cache.candidate
    d_h = params.hidden_size

    dh_prev = dh_new * (1.0 - g)
    dg = dh_new * (cand - cache.h_prev)
    da_c = dh_new * g * (1.0 - cand ** 2)
    dq = da_c * r
    dr = da_c * q
    da_g = dg * g * (1.0 - g)
    da_r = dr * r * (1.0 - r)

    grads.W_h += dq.T @ cache.h_prev
    grads.b_h += dq.sum(axis=0)
    grads.W_in += da_c.T @ cache.x_in
    grads.b_in += da_c.sum(axis=0)
    grads.W_g += da_g.T @ cache.joint
    grads.b_g += da_g.sum(axis=0)
    grads.W_r += da_r.T @ cache.joint
    grads.b_r += da_r.sum(axis=0)

    d_joint = da_g @ params.W_g + da_r @ params.W_r
    dh_prev = dh_prev + d_joint[:, :d_h] + dq @ params.W_h
    dx_in = d_joint[:, d_h:] + da_c @ params.W_in
    return dh_prev, dx_in


def vanilla_step(params, h_prev, x_in):
    _check_cell_shapes(params, h_prev, x_in)
    joint = concat(h_prev, x_in)
    h_new = tanh(matvec(params.W, joint) + params.b)
    return h_new, VanillaCache(joint, h_new)


def vanilla_step_backward(params, cache, dh_new, grads):
    da = dh_new * (1.0 - cache.h_new ** 2)
    grads.W += da.T @ cache.joint
    grads.b += da.sum(axis=0)
    d_joint = da @ params.W
    d_h = params.hidden_size
    return d_joint[:, :d_h], d_joint[:, d_h:]


_STEPS = {"gru": (gru_step, gru_step_backward), "vanilla": (vanilla_step, vanilla_step_backward)}


# ---------------------------------------------------------
# Dilated wiring
# ---------------------------------------------------------

def one_hot(spins):
    """Spin -1 -> (1, 0), +1 -> (0, 1); frozen for checkpoint compatibility."""
    spins = np.asarray(spins)
    return np.stack([(spins < 0), (spins > 0)], axis=-1).astype(np.float64)


class HiddenStack:
    """
    Per-layer ring buffers. Layer l keeps the last B**l hidden vectors; a read
    before the buffer has filled returns the zero vector (the h_0 convention).
    """

    def __init__(self, n_layers, hidden_size, batch, base=DILATION_BASE):
        self.buffers = [deque(maxlen=dilation(l, base)) for l in range(n_layers)]
        self.zero = np.zeros((batch, hidden_size))

    def recurrent(self, layer):
        buf = self.buffers[layer]
        return buf[0] if len(buf) == buf.maxlen else self.zero

    def push(self, layer, h):
        self.buffers[layer].append(h)


@dataclass
class GradientTape:
    """Per-(layer, site) cell caches and top-layer states of one forward pass."""

    n_layers: int
    hidden_size: int
    batch: int
    caches: list = field(default_factory=list)
    top: list = field(default_factory=list)
    consumed: bool = False

    @property
    def n_sites(self):
        return len(self.top)


class DilatedPass:
    """
    Site-by-site evaluation of the dilated network.

    `step(x_in)` advances every layer by one site and returns that site's logits;
    the forward pass feeds known spins, the sampler feeds spins it has just drawn.
    """

    def __init__(self, params, batch, record=False):
        self.params = params
        self.step_fn = _STEPS[params.cell_type][0]
        self.stack = HiddenStack(params.n_layers, params.hidden_size, batch)
        self.tape = None
        if record:
            self.tape = GradientTape(params.n_layers, params.hidden_size, batch,
                                     caches=[[] for _ in range(params.n_layers)])

    def step(self, x_in):
        inp = x_in
        for l, cell in enumerate(self.params.cells):
            h_new, cache = self.step_fn(cell, self.stack.recurrent(l), inp)
            self.stack.push(l, h_new)
            if self.tape is not None:
                self.tape.caches[l].append(cache)
            inp = h_new
        if self.tape is not None:
            self.tape.top.append(inp)

        p = self.params
        logits_p = matvec(p.U, inp) + p.c
        logits_phi = matvec(p.V, inp) + p.d if p.is_complex else None
        return logits_p, logits_phi


def check_depth(params, n_sites):
    limit = max_depth(n_sites)
    if params.n_layers > limit:
        raise ConfigError(
            f"{params.n_layers} layers exceed ceil(log2 N) = {limit} for a chain of {n_sites} sites"
        )


def dilated_forward(params, sigma, record=True):
    """
        Run the dilated network over known spin configurations.

        Parameters:
            params (ModelParams): network parameters.
            sigma (array): spins in {-1, +1}, shape (batch, n_sites) or (n_sites,).
            record (bool): keep a GradientTape for dilated_backward.

        Returns:
            (logits_p, logits_phi, tape): logits of shape (batch, n_sites, 2);
            logits_phi is None for a real (stoquastic) model, tape None unless recorded.
    """
    sigma = np.atleast_2d(sigma)
    batch, n_sites = sigma.shape
    if n_sites < 1:
        raise ConfigError("a configuration needs at least one site")
    check_depth(params, n_sites)

    inputs = one_hot(sigma)
    run = DilatedPass(params, batch, record=record)
    logits_p = np.empty((batch, n_sites, INPUT_SIZE))
    logits_phi = np.empty((batch, n_sites, INPUT_SIZE)) if params.is_complex else None

    x_in = np.zeros((batch, INPUT_SIZE))  # x_0 = 0 at the first site
    for n in range(n_sites):
        lp, lphi = run.step(x_in)
        logits_p[:, n] = lp
        if logits_phi is not None:
            logits_phi[:, n] = lphi
        x_in = inputs[:, n]
    return logits_p, logits_phi, run.tape


def dilated_backward(params, tape, dlogits_p, dlogits_phi=None):
    """
        Exact gradient of sum_n (dlogits_p[n] . logits_p[n] + dlogits_phi[n] . logits_phi[n])
        with respect to every parameter.

        Upstream gradients may be complex; the returned record then is too. The tape
        is cleared afterwards.

        Returns:
            ModelParams: gradient record with the shapes of `params`.
    """
    if tape is None or tape.consumed:
        raise ShapeError("backward needs a fresh tape from a recorded forward pass")
    if tape.n_layers != params.n_layers or tape.hidden_size != params.hidden_size:
        raise ShapeError("tape was recorded with a different model shape")
    expected = (tape.batch, tape.n_sites, INPUT_SIZE)
    if np.shape(dlogits_p) != expected:
        raise ShapeError(f"dlogits_p has shape {np.shape(dlogits_p)}, expected {expected}")
    if dlogits_phi is not None:
        if not params.is_complex:
            raise ShapeError("phase gradients given for a model without a phase head")
        if np.shape(dlogits_phi) != expected:
            raise ShapeError(f"dlogits_phi has shape {np.shape(dlogits_phi)}, expected {expected}")

    dtype = np.result_type(dlogits_p, dlogits_phi if dlogits_phi is not None else 0.0)
    grads = params.zeros_like(dtype)
    back_fn = _STEPS[params.cell_type][1]
    n_layers, n_sites = params.n_layers, tape.n_sites
    dh = np.zeros((n_layers, n_sites, tape.batch, params.hidden_size), dtype=dtype)

    for n in reversed(range(n_sites)):
        top = tape.top[n]
        dz = dlogits_p[:, n]
        grads.U += dz.T @ top
        grads.c += dz.sum(axis=0)
        dh[-1, n] += dz @ params.U
        if dlogits_phi is not None:
            dz = dlogits_phi[:, n]
            grads.V += dz.T @ top
            grads.d += dz.sum(axis=0)
            dh[-1, n] += dz @ params.V

        for l in reversed(range(n_layers)):
            d_prev, d_in = back_fn(params.cells[l], tape.caches[l][n], dh[l, n], grads.cells[l])
            source = n - dilation(l)
            if source >= 0:
                dh[l, source] += d_prev
            if l > 0:
                dh[l - 1, n] += d_in

    tape.caches.clear()
    tape.top.clear()
    tape.consumed = True
    return grads
