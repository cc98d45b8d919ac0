"""Pointwise MLPs and separable tensor-product field models.

A separable model represents each scalar field as a rank-r sum of products
of per-axis functions: u(x, y, z) = sum_j f_j(x) g_j(y) h_j(z). The three
body networks each map one coordinate to rank * output_count values, so a
full tensor grid costs n1 + n2 + n3 body passes instead of n1 * n2 * n3,
and spatial derivatives merge per axis: du/dx = sum_j f_j'(x) g_j(y) h_j(z).

All evaluation helpers are payload-generic (ndarray or tape `Var`), which is
what lets the training losses differentiate through grid evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Dual, swish, tanh, value_of

ACTIVATIONS = {"swish": swish, "tanh": tanh}

# Body-network forward passes are counted per coordinate so tests can pin
# the n1 + n2 + n3 evaluation bound.
_body_eval_count = 0


def reset_body_eval_count():
    global _body_eval_count
    _body_eval_count = 0


def body_eval_count():
    return _body_eval_count


def _count_body_eval(n):
    global _body_eval_count
    _body_eval_count += n


@dataclass(frozen=True)
class MlpSpec:
    """Fully connected architecture: layer widths plus activation name.

    ``layer_widths`` runs input to output and must contain at least one
    hidden layer. The activation applies to every layer except the last.
    """

    layer_widths: tuple
    activation: str = "swish"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 3:
            raise ValueError("MlpSpec needs at least one hidden layer")
        if any(w < 1 for w in widths):
            raise ValueError("layer widths must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def layers(self):
        """Per-layer (fan_in, fan_out) pairs."""
        w = self.layer_widths
        return tuple(zip(w[:-1], w[1:]))

    def param_count(self):
        return sum(i * o + o for i, o in self.layers())


@dataclass
class ModelParams:
    """Flat parameter vector plus the per-layer shapes that index it.

    Layout per layer: weight matrix (fan_in, fan_out) in row-major order,
    then the bias of length fan_out; layers in network order.
    """

    flat: np.ndarray
    layers: tuple

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=np.float64)
        expected = sum(i * o + o for i, o in self.layers)
        if self.flat.shape != (expected,):
            raise ValueError(
                f"flat vector has {self.flat.size} entries, shapes need {expected}"
            )


def init_params(spec: MlpSpec, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    chunks = []
    for n_in, n_out in spec.layers():
        bound = np.sqrt(6.0 / (n_in + n_out))
        chunks.append(rng.uniform(-bound, bound, size=(n_in, n_out)).ravel())
        chunks.append(np.zeros(n_out))
    return ModelParams(np.concatenate(chunks), spec.layers())


def unflatten(flat, layer_shapes):
    """Split a flat payload into [(W, b), ...]; works on ndarray or Var."""
    out = []
    pos = 0
    for n_in, n_out in layer_shapes:
        w = flat[pos : pos + n_in * n_out].reshape(n_in, n_out)
        pos += n_in * n_out
        b = flat[pos : pos + n_out]
        pos += n_out
        out.append((w, b))
    return out


def mlp_apply(layers, activation, z):
    """Run (W, b) pairs over payload ``z``; activation skips the last layer."""
    act = ACTIVATIONS[activation] if isinstance(activation, str) else activation
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        z = z @ w + b
        if i != last:
            z = act(z)
    return z


def mlp_forward(spec: MlpSpec, params: ModelParams, x) -> np.ndarray:
    """Plain numpy forward pass for a single input vector."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != spec.layer_widths[0]:
        raise ValueError(
            f"input has {x.shape[1]} features, spec expects {spec.layer_widths[0]}"
        )
    out = mlp_apply(unflatten(params.flat, params.layers), spec.activation, x)
    return np.asarray(out).ravel()


@dataclass(frozen=True)
class SeparableSpec:
    """Architecture of one separable field group.

    Each of the three bodies is an MLP from one coordinate to
    rank * output_count values; field ``f`` owns the column block
    [f*rank, (f+1)*rank) of every body output.
    """

    hidden: tuple
    rank: int
    output_count: int = 1
    activation: str = "swish"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.rank < 1:
            raise ValueError("rank must be positive")
        if self.output_count < 1:
            raise ValueError("output_count must be positive")

    def body_spec(self) -> MlpSpec:
        return MlpSpec(
            (1, *self.hidden, self.rank * self.output_count), self.activation
        )


@dataclass
class SeparableModel:
    spec: SeparableSpec
    body_params: tuple  # three ModelParams, one per axis

    def __post_init__(self):
        if len(self.body_params) != 3:
            raise ValueError("separable model needs exactly three bodies")


def init_separable(spec: SeparableSpec, seed: int) -> SeparableModel:
    """One child seed per axis body, all derived from ``seed``."""
    rng = np.random.default_rng(seed)
    child_seeds = rng.integers(0, 2**63 - 1, size=3)
    body = spec.body_spec()
    return SeparableModel(
        spec, tuple(init_params(body, int(s)) for s in child_seeds)
    )


def _body_pass(spec: SeparableSpec, layers, axis_values, with_derivative):
    """Evaluate one body on a coordinate vector.

    Returns (F, dF) with shape (n, rank * output_count); dF is None when
    derivatives are not requested. Payload-generic in the layer params.
    """
    x = np.asarray(value_of(axis_values), dtype=np.float64).reshape(-1, 1)
    _count_body_eval(x.shape[0])
    if with_derivative:
        out = mlp_apply(layers, spec.activation, Dual(x, np.ones_like(x)))
        return out.value, out.tangent
    return mlp_apply(layers, spec.activation, x), None


def _merge(pair, fz):
    """Contract a pairwise tensor (n1, n2, r) with (n3, r) to (n1, n2, n3)."""
    n1, n2, r = pair.shape
    flat = pair.reshape(n1 * n2, r) @ fz.T
    return flat.reshape(n1, n2, fz.shape[0])


def _pair(fx, fy):
    """Outer product over the rank axis: (n1, r) x (n2, r) -> (n1, n2, r)."""
    n1, r = fx.shape
    n2 = fy.shape[0]
    return fx.reshape(n1, 1, r) * fy.reshape(1, n2, r)


def _normalize_deriv_request(need_derivatives):
    if need_derivatives is None:
        return {}
    if not isinstance(need_derivatives, dict):
        return {int(f): (0, 1, 2) for f in need_derivatives}
    return {
        int(f): tuple(axes_) for f, axes_ in need_derivatives.items() if axes_
    }


def body_outputs(spec, body_layers, axes, need_derivatives=(False, False, False)):
    """Run the three bodies once over their coordinate vectors.

    Returns [(F, dF), ...] with dF None where the axis derivative was not
    requested. These outputs can be merged repeatedly (volume tensors and
    face restrictions) without re-running the networks.
    """
    return [
        _body_pass(spec, body_layers[i], axes[i], bool(need_derivatives[i]))
        for i in range(len(axes))
    ]


def merge_body_outputs(spec, bodies, need_values=None, need_derivatives=None):
    """Tensor-product merge of precomputed body outputs.

    Args:
        spec: SeparableSpec describing rank and field count.
        bodies: three (F, dF) pairs from `body_outputs` (dF may be None).
        need_values: field indices whose value tensor is wanted (default all).
        need_derivatives: either field indices (all three axes each) or a
            mapping {field: axis tuple} for finer selection (default none).

    Returns:
        (values, derivatives): dicts keyed by field index; values map to
        (n1, n2, n3) payloads, derivatives to 3-tuples of the same with
        None in unrequested axis slots.

    Pairwise intermediates are shared where possible: the value and the
    z-derivative of a field reuse the same f(x) x g(y) tensor.
    """
    nf = spec.output_count
    r = spec.rank
    if need_values is None:
        need_values = range(nf)
    need_values = tuple(need_values)
    dwant = _normalize_deriv_request(need_derivatives)
    (fx, dfx), (fy, dfy), (fz, dfz) = bodies

    values, derivatives = {}, {}
    for f in sorted(set(need_values) | set(dwant)):
        lo, hi = f * r, (f + 1) * r
        fxb, fyb, fzb = fx[:, lo:hi], fy[:, lo:hi], fz[:, lo:hi]
        daxes = dwant.get(f, ())
        pair_v = None
        if f in need_values or 2 in daxes:
            pair_v = _pair(fxb, fyb)
        if f in need_values:
            values[f] = _merge(pair_v, fzb)
        if daxes:
            triple = [None, None, None]
            if 0 in daxes:
                triple[0] = _merge(_pair(dfx[:, lo:hi], fyb), fzb)
            if 1 in daxes:
                triple[1] = _merge(_pair(fxb, dfy[:, lo:hi]), fzb)
            if 2 in daxes:
                triple[2] = _merge(pair_v, dfz[:, lo:hi])
            derivatives[f] = tuple(triple)
    return values, derivatives


def restrict_bodies(bodies, axis, index):
    """Body outputs for a face: one row of the collapsed axis, values only."""
    out = []
    for i, (f, _) in enumerate(bodies):
        if i == axis:
            key = slice(index, index + 1) if index >= 0 else slice(index, None)
            out.append((f[key, :], None))
        else:
            out.append((f, None))
    return out


def separable_grid_tensors(
    spec,
    body_layers,
    axes,
    need_values=None,
    need_derivatives=None,
):
    """Per-field value/derivative tensors on a tensor-product grid.

    One body pass per axis, then `merge_body_outputs`; see that function
    for the argument and return conventions.
    """
    dwant = _normalize_deriv_request(need_derivatives)
    need_d = [any(axis in a for a in dwant.values()) for axis in range(3)]
    bodies = body_outputs(spec, body_layers, axes, need_d)
    return merge_body_outputs(spec, bodies, need_values, dwant)


def separable_point_tensors(spec, body_layers, points, with_derivatives=False):
    """Per-field values (and optionally gradients) at scattered points.

    ``points`` is (N, 3); each body runs once over its coordinate column,
    and fields combine elementwise: u = sum_j f_j g_j h_j.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    fx, dfx = _body_pass(spec, body_layers[0], points[:, 0], with_derivatives)
    fy, dfy = _body_pass(spec, body_layers[1], points[:, 1], with_derivatives)
    fz, dfz = _body_pass(spec, body_layers[2], points[:, 2], with_derivatives)
    r = spec.rank
    values, derivatives = {}, {}
    for f in range(spec.output_count):
        lo, hi = f * r, (f + 1) * r
        fxb, fyb, fzb = fx[:, lo:hi], fy[:, lo:hi], fz[:, lo:hi]
        pair_v = fxb * fyb
        values[f] = (pair_v * fzb).sum(axis=1)
        if with_derivatives:
            derivatives[f] = (
                (dfx[:, lo:hi] * fyb * fzb).sum(axis=1),
                (fxb * dfy[:, lo:hi] * fzb).sum(axis=1),
                (pair_v * dfz[:, lo:hi]).sum(axis=1),
            )
    return values, derivatives


@dataclass
class FieldBatch:
    """Field values (and optionally first derivatives) at a set of points.

    ``values`` holds one payload per field; ``d_values`` holds one
    (d/dx, d/dy, d/dz) triple per field or None. ``points`` is (N, 3) or
    None when the batch lives on an implicit tensor grid; the loss
    functions never dereference it.
    """

    values: list
    d_values: list = None
    points: np.ndarray = None

    def field_count(self):
        return len(self.values)


def _grid_points(axes):
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def spinn_eval_grid(model: SeparableModel, axes):
    """Numpy value tensors, one (n1, n2, n3) array per field."""
    layers = [unflatten(p.flat, p.layers) for p in model.body_params]
    values, _ = separable_grid_tensors(model.spec, layers, axes)
    return [values[f] for f in range(model.spec.output_count)]

def spinn_eval_grid_with_derivatives(model: SeparableModel, axes) -> FieldBatch:
    """Flat FieldBatch (values + d/dx, d/dy, d/dz per field) on a grid."""
    layers = [unflatten(p.flat, p.layers) for p in model.body_params]
    nf = model.spec.output_count
    values, derivs = separable_grid_tensors(
        model.spec, layers, axes, need_values=range(nf), need_derivatives=range(nf)
    )
    return FieldBatch(
        values=[values[f].ravel() for f in range(nf)],
        d_values=[tuple(d.ravel() for d in derivs[f]) for f in range(nf)],
        points=_grid_points(axes),
    )


def spinn_eval_points(model: SeparableModel, points, with_derivatives=False):
    """Numpy FieldBatch at scattered (N, 3) points."""
    layers = [unflatten(p.flat, p.layers) for p in model.body_params]
    values, derivs = separable_point_tensors(
        model.spec, layers, points, with_derivatives
    )
    nf = model.spec.output_count
    return FieldBatch(
        values=[values[f] for f in range(nf)],
        d_values=[derivs[f] for f in range(nf)] if with_derivatives else None,
        points=np.asarray(points, dtype=np.float64),
    )


def mlp_point_tensors(spec, layers, points, with_derivatives=False):
    """Pointwise-MLP counterpart of `separable_point_tensors`.

    One batched pass gives values; three dual passes (one per coordinate)
    give the spatial derivative columns. Payload-generic in ``layers``.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    nf = spec.layer_widths[-1]
    out = mlp_apply(layers, spec.activation, points)
    values = {f: out[:, f] for f in range(nf)}
    derivatives = {}
    if with_derivatives:
        cols = []
        for axis in range(3):
            seed = np.zeros_like(points)
            seed[:, axis] = 1.0
            dual = mlp_apply(layers, spec.activation, Dual(points, seed))
            cols.append(dual.tangent)
        for f in range(nf):
            derivatives[f] = tuple(cols[axis][:, f] for axis in range(3))
    return values, derivatives


def mlp_field_eval(spec: MlpSpec, params: ModelParams, points) -> FieldBatch:
    """Numpy FieldBatch (values + derivatives) for a pointwise MLP field."""
    if spec.layer_widths[0] != 3:
        raise ValueError("field MLP must take (x, y, z) inputs")
    layers = unflatten(params.flat, params.layers)
    values, derivs = mlp_point_tensors(spec, layers, points, with_derivatives=True)
    nf = spec.layer_widths[-1]
    return FieldBatch(
        values=[values[f] for f in range(nf)],
        d_values=[derivs[f] for f in range(nf)],
        points=np.asarray(points, dtype=np.float64).reshape(-1, 3),
    )


# -- parameter bundles -------------------------------------------------


@dataclass
class NetBundle:
    """Several named networks packed into one flat parameter vector.

    Separable entries are SeparableSpec, pointwise entries MlpSpec. The
    optimizer sees one vector; `sub` slices out one network's segment from
    any payload that supports slicing (ndarray or Var).
    """

    nets: dict
    slices: dict = field(default_factory=dict)
    total: int = 0

    def __post_init__(self):
        pos = 0
        self.slices = {}
        for name, spec in self.nets.items():
            if isinstance(spec, SeparableSpec):
                n = 3 * spec.body_spec().param_count()
            else:
                n = spec.param_count()
            self.slices[name] = slice(pos, pos + n)
            pos += n
        self.total = pos

    def init(self, seed: int) -> np.ndarray:
        """Child seeds per network derive from the master seed."""
        rng = np.random.default_rng(seed)
        parts = []
        for name, spec in self.nets.items():
            child = int(rng.integers(0, 2**63 - 1))
            if isinstance(spec, SeparableSpec):
                model = init_separable(spec, child)
                parts.extend(p.flat for p in model.body_params)
            else:
                parts.append(init_params(spec, child).flat)
        return np.concatenate(parts)

    def sub(self, flat, name):
        return flat[self.slices[name]]

    def body_layer_lists(self, flat, name):
        """Three per-axis [(W, b), ...] lists for a separable entry."""
        spec = self.nets[name]
        body = spec.body_spec()
        seg = self.sub(flat, name)
        n = body.param_count()
        return [
            unflatten(seg[i * n : (i + 1) * n], body.layers()) for i in range(3)
        ]

    def mlp_layers(self, flat, name):
        spec = self.nets[name]
        return unflatten(self.sub(flat, name), spec.layers())

    def separable_model(self, flat, name) -> SeparableModel:
        """Materialize one separable entry as a numpy SeparableModel."""
        spec = self.nets[name]
        body = spec.body_spec()
        seg = np.asarray(value_of(self.sub(flat, name)))
        n = body.param_count()
        return SeparableModel(
            spec,
            tuple(
                ModelParams(seg[i * n : (i + 1) * n], body.layers())
                for i in range(3)
            ),
        )

    def mlp_params(self, flat, name) -> ModelParams:
        spec = self.nets[name]
        seg = np.asarray(value_of(self.sub(flat, name)))
        return ModelParams(seg, spec.layers())


# -- checkpoints --------------------------------------------------------


def _spec_to_json(spec):
    if isinstance(spec, SeparableSpec):
        return {
            "kind": "separable",
            "hidden": list(spec.hidden),
            "rank": spec.rank,
            "output_count": spec.output_count,
            "activation": spec.activation,
        }
    return {
        "kind": "mlp",
        "layer_widths": list(spec.layer_widths),
        "activation": spec.activation,
    }


def _spec_from_json(d):
    if d["kind"] == "separable":
        return SeparableSpec(
            tuple(d["hidden"]), d["rank"], d["output_count"], d["activation"]
        )
    return MlpSpec(tuple(d["layer_widths"]), d["activation"])


def save_checkpoint(path, bundle: NetBundle, flat, meta=None):
    """Single file: one JSON text line, then the flat vector as raw
    little-endian float64 bytes."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (bundle.total,):
        raise ValueError(
            f"parameter vector has {flat.size} entries, bundle needs {bundle.total}"
        )
    header = {
        "format": "sepelast-checkpoint",
        "version": 1,
        "nets": {n: _spec_to_json(s) for n, s in bundle.nets.items()},
        "count": int(flat.size),
    }
    header.update(meta or {})
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        fh.write(flat.astype("<f8").tobytes())


def load_checkpoint(path):
    """Returns (bundle, flat, meta); raises on truncation or bad header."""
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"unreadable checkpoint header: {exc}") from exc
        if header.get("format") != "sepelast-checkpoint":
            raise ValueError("not a sepelast checkpoint")
        raw = fh.read()
    count = int(header["count"])
    if len(raw) != 8 * count:
        raise ValueError(
            f"checkpoint payload truncated: expected {8 * count} bytes, got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    bundle = NetBundle({n: _spec_from_json(s) for n, s in header["nets"].items()})
    if bundle.total != count:
        raise ValueError("checkpoint header shapes disagree with payload size")
    meta = {
        k: v
        for k, v in header.items()
        if k not in ("format", "version", "nets", "count")
    }
    return bundle, flat, meta
