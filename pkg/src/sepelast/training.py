"""Adam optimization of field objectives, run records, and metrics files.

`build_objective` assembles the trainable target for a (problem, mode,
settings) triple: networks packed into one flat vector, fixed quadrature
grids for the energy mode or resampled collocation for the residual modes,
and a loss closure the tape differentiates. `train` owns the epoch loop:
staircase learning rate, resampling cadence, periodic evaluation records,
and abort-with-last-good-state on non-finite values.

Recorded elapsed time covers optimization only; the timer pauses while the
evaluator runs, so time-to-accuracy excludes evaluation overhead.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import NonFiniteError
from .losses import (
    ConfigurationError,
    LossBreakdown,
    bc_dirichlet_loss,
    bc_traction_loss,
    coupling_loss,
    energy_loss,
    residual_loss,
    total_loss,
)
from .mechanics import nondim_forward
from .models import (
    FieldBatch,
    MlpSpec,
    NetBundle,
    SeparableSpec,
    body_outputs,
    merge_body_outputs,
    mlp_point_tensors,
    restrict_bodies,
)
from .quadrature import (
    face_axes,
    face_quadrature,
    resample_uniform,
    sample_points,
    tensor_quadrature,
)

# -- optimizer ----------------------------------------------------------


@dataclass
class OptimizerState:
    """Adam moment estimates; ``step`` counts completed updates."""

    step: int
    m: np.ndarray
    v: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n, beta1=0.9, beta2=0.999, eps=1e-8) -> OptimizerState:
    return OptimizerState(
        step=0, m=np.zeros(n), v=np.zeros(n), beta1=beta1, beta2=beta2, eps=eps
    )


def adam_step(params, grads, state: OptimizerState, lr):
    """One bias-corrected Adam update; returns (new_params, new_state).

    Purely functional and evaluated in a fixed operation order, so repeated
    runs from the same inputs are bit-identical.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if not np.all(np.isfinite(grads)):
        raise NonFiniteError(
            -1, "adam", f"non-finite gradient entering Adam step {state.step + 1}"
        )
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * (grads * grads)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, OptimizerState(
        step=t, m=m, v=v, beta1=state.beta1, beta2=state.beta2, eps=state.eps
    )


@dataclass(frozen=True)
class ScheduleSpec:
    """Staircase decay: lr(e) = lr0 * rate^(e // every)."""

    lr0: float = 1e-3
    decay_rate: float = 0.95
    decay_every: int = 5000

    def __post_init__(self):
        if self.lr0 <= 0 or not 0 < self.decay_rate <= 1 or self.decay_every < 1:
            raise ValueError("invalid schedule parameters")


def lr_at(schedule: ScheduleSpec, epoch: int) -> float:
    return schedule.lr0 * schedule.decay_rate ** (epoch // schedule.decay_every)


# -- metrics ------------------------------------------------------------


def relative_l2(pred, ref):
    """||pred - ref||_2 / ||ref||_2 over flattened arrays."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if pred.shape != ref.shape:
        raise ValueError(
            f"shape mismatch: prediction {pred.shape} vs reference {ref.shape}"
        )
    denom = float(np.linalg.norm(ref))
    if denom == 0.0:
        raise ValueError("reference field has zero norm")
    return float(np.linalg.norm(pred - ref)) / denom


@dataclass
class RunRecord:
    """One evaluation-cadence snapshot of a training run."""

    epoch: int
    lr: float
    total: float
    bc: float
    residual: float = None
    coupling: float = None
    energy: float = None
    errors: dict = field(default_factory=dict)
    elapsed: float = 0.0
    seed: int = 0


def time_to_accuracy(records, quantity, threshold=0.05):
    """Elapsed seconds at the first record whose error crossed the
    threshold; None when it never did."""
    for rec in records:
        err = rec.errors.get(quantity)
        if err is not None and err <= threshold:
            return rec.elapsed
    return None


def metrics_lines(records, problem=None, mode=None):
    """Deterministic ndjson lines (no wall-clock content)."""
    lines = []
    for rec in records:
        row = {
            "epoch": rec.epoch,
            "lr": rec.lr,
            "total": rec.total,
            "bc": rec.bc,
            "residual": rec.residual,
            "coupling": rec.coupling,
            "energy": rec.energy,
            "errors": {k: rec.errors[k] for k in sorted(rec.errors)},
            "seed": rec.seed,
        }
        if problem is not None:
            row["problem"] = problem
        if mode is not None:
            row["mode"] = mode
        lines.append(json.dumps(row, sort_keys=True))
    return lines


def write_metrics(path, records, problem=None, mode=None):
    with open(path, "w") as fh:
        for line in metrics_lines(records, problem, mode):
            fh.write(line + "\n")


def write_timing(path, records):
    """Wall-clock sidecar; kept out of metrics so those stay bit-stable."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps({"epoch": rec.epoch, "elapsed": rec.elapsed}) + "\n")


def read_metrics(path):
    """Records back from a metrics file, merging elapsed seconds from the
    timing sidecar when one sits next to it (otherwise elapsed stays 0)."""
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            records.append(
                RunRecord(
                    epoch=row["epoch"],
                    lr=row["lr"],
                    total=row["total"],
                    bc=row["bc"],
                    residual=row.get("residual"),
                    coupling=row.get("coupling"),
                    energy=row.get("energy"),
                    errors=row.get("errors", {}),
                    seed=row.get("seed", 0),
                )
            )
    base = os.path.basename(path)
    sidecar = os.path.join(
        os.path.dirname(path) or ".",
        base.replace("metrics", "timing") if "metrics" in base else "timing.ndjson",
    )
    if os.path.exists(sidecar) and sidecar != os.fspath(path):
        elapsed = {}
        with open(sidecar) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    row = json.loads(line)
                    elapsed[row["epoch"]] = row["elapsed"]
        for rec in records:
            rec.elapsed = elapsed.get(rec.epoch, rec.elapsed)
    return records


# -- settings -----------------------------------------------------------


@dataclass
class RunSettings:
    """Everything a single run needs beyond the problem definition.

    ``grid`` overrides per-box node counts: one (n1, n2, n3) per box.
    For the pointwise mode the product of the counts sets the volume
    collocation budget. ``epochs``/``lambda_bc`` of None fall back to the
    problem's per-mode defaults.
    """

    mode: str
    epochs: int = None
    seed: int = 0
    lambda_bc: float = None
    lr: float = 1e-3
    decay_rate: float = 0.95
    decay_every: int = 5000
    grid: tuple = None
    rank: int = None
    hidden: tuple = None
    eval_every: int = 1000
    resample_every: int = 100

    def schedule(self) -> ScheduleSpec:
        return ScheduleSpec(self.lr, self.decay_rate, self.decay_every)


# -- objective assembly --------------------------------------------------

# Stress-field order (xx, yy, zz, xy, xz, yz); the residual needs these
# derivative axes per field.
_STRESS_DERIV_AXES = {0: (0,), 1: (1,), 2: (2,), 3: (0, 1), 4: (0, 2), 5: (1, 2)}

# sigma . n on an axis-aligned face only touches one stress column.
_FACE_SIGMA_FIELDS = {0: (0, 3, 4), 1: (3, 1, 5), 2: (4, 5, 2)}


class Objective:
    """Trainable target: packed networks, sample sets, and the loss closure.

    Built via `build_objective`. The ``loss`` method is payload-generic;
    `value_and_grad` wraps it for the tape and also returns the
    float-valued breakdown for records.
    """

    def __init__(self, problem, settings: RunSettings):
        mode = settings.mode
        if mode not in problem.modes:
            raise ConfigurationError(
                f"problem {problem.name!r} does not support mode {mode!r} "
                f"(supported: {', '.join(problem.modes)})"
            )
        self.problem = problem
        self.settings = settings
        self.mode = mode
        self.lambda_bc = (
            settings.lambda_bc
            if settings.lambda_bc is not None
            else problem.lambda_bc[mode]
        )
        self.nd = nondim_forward(problem.material, problem.scale)
        self.body_force = (0.0, 0.0, -self.nd.rho_g)
        self.traction_nd = tuple(
            np.asarray(problem.traction_vector, dtype=np.float64)
            / problem.scale.stress
        )

        resolutions = settings.grid or tuple(b.resolution for b in problem.boxes)
        if resolutions and all(np.isscalar(n) for n in resolutions):
            # flat (nx, ny, nz) applies to every box
            resolutions = (tuple(resolutions),) * len(problem.boxes)
        if len(resolutions) != len(problem.boxes):
            raise ConfigurationError(
                f"grid override needs {len(problem.boxes)} box resolutions, "
                f"got {len(resolutions)}"
            )
        self.boxes = [
            b.scaled(problem.scale.length) for b in problem.boxes
        ]
        self.resolutions = tuple(tuple(int(n) for n in r) for r in resolutions)

        hidden = tuple(settings.hidden or problem.hidden)
        rank = settings.rank or problem.rank
        nets = {}
        self.disp_layout = []  # (net name, global field offset, field count)
        offset = 0
        for name, count in problem.displacement_nets:
            if mode == "pinn-pde":
                nets[name] = MlpSpec((3, *hidden, count), problem.activation)
            else:
                nets[name] = SeparableSpec(hidden, rank, count, problem.activation)
            self.disp_layout.append((name, offset, count))
            offset += count
        if offset != 3:
            raise ConfigurationError(
                "displacement networks must cover exactly three components"
            )
        if mode == "spinn-pde":
            nets["sigma"] = SeparableSpec(hidden, rank, 6, problem.activation)
        elif mode == "pinn-pde":
            nets["sigma"] = MlpSpec((3, *hidden, 6), problem.activation)
        self.bundle = NetBundle(nets)

        if mode == "spinn-dem":
            self._setup_energy()
        else:
            self._setup_pde()

    # -- sample-set construction ------------------------------------

    def _setup_energy(self):
        self.quads = [
            tensor_quadrature(box, res)
            for box, res in zip(self.boxes, self.resolutions)
        ]
        # Faces restrict the volume grid, so face tensors reuse the volume
        # body outputs: (box, collapsed axis, row index into that axis).
        self.clamp_rows = [
            (bi, "xyz".index(tag[0]), 0 if tag[1] == "-" else -1)
            for bi, tag in self.problem.clamp_faces
        ]
        self.traction_rows = []
        for bi, tag in self.problem.traction_faces:
            fq = face_quadrature(self.boxes[bi], tag, self.resolutions[bi])
            w3 = np.expand_dims(fq.tangent_weights, fq.axis)
            index = 0 if tag[1] == "-" else -1
            self.traction_rows.append((bi, fq.axis, index, w3))

    def _setup_pde(self):
        if len(self.boxes) != 1:
            raise ConfigurationError(
                "residual modes support single-box problems only"
            )
        self._colloc_epoch = None
        self._axes = None
        self._points = None
        self._face_points = None
        if self.settings.grid is not None:
            counts = self.resolutions[0]
        elif self.mode == "spinn-pde":
            counts = tuple(self.problem.colloc_counts)
        else:
            counts = tuple(self.problem.pinn_volume_counts)
        self.colloc_counts = counts
        self.surface_count = self.problem.pinn_surface_points

    def resample(self, epoch):
        """Draw the collocation set for the block starting at ``epoch``."""
        box = self.boxes[0]
        seed = self.settings.seed
        if self.mode == "spinn-pde":
            self._axes = resample_uniform(box, self.colloc_counts, seed, epoch)
        else:
            rng = np.random.default_rng(
                [int(seed) & 0x7FFFFFFF, int(epoch), 0x9131]
            )
            count = int(np.prod(self.colloc_counts))
            self._points = sample_points(rng, box.lo, box.hi, count)
            self._face_points = {}
            all_faces = list(self.problem.clamp_faces) + list(
                self.problem.traction_faces
            ) + list(self.problem.free_faces)
            per_face = max(1, self.surface_count // len(all_faces))
            for bi, tag in all_faces:
                axis = "xyz".index(tag[0])
                lo = list(box.lo)
                hi = list(box.hi)
                fixed = box.hi[axis] if tag[1] == "+" else box.lo[axis]
                lo[axis] = hi[axis] = fixed
                pts = sample_points(rng, lo, hi, per_face)
                pts[:, axis] = fixed
                self._face_points[(bi, tag)] = pts
        self._colloc_epoch = epoch

    # -- field evaluation helpers ------------------------------------

    def _disp_layers(self, theta):
        return {
            name: self.bundle.body_layer_lists(theta, name)
            for name, _, _ in self.disp_layout
        }

    def _disp_bodies(self, layers_by_net, axes, need_derivs):
        flags = (need_derivs,) * 3 if isinstance(need_derivs, bool) else need_derivs
        return {
            name: body_outputs(
                self.bundle.nets[name], layers_by_net[name], axes, flags
            )
            for name, _, _ in self.disp_layout
        }

    def _disp_batch_from_bodies(self, bodies_by_net, need_values, need_derivs):
        """Global displacement FieldBatch merged from per-net body outputs."""
        values = [None, None, None]
        derivs = [None, None, None]
        for name, offset, count in self.disp_layout:
            local_v = [f - offset for f in need_values if offset <= f < offset + count]
            local_d = [f - offset for f in need_derivs if offset <= f < offset + count]
            if not local_v and not local_d:
                continue
            v, d = merge_body_outputs(
                self.bundle.nets[name],
                bodies_by_net[name],
                need_values=local_v,
                need_derivatives=local_d,
            )
            for lf, tensor in v.items():
                values[lf + offset] = tensor
            for lf, triple in d.items():
                derivs[lf + offset] = triple
        has_d = any(d is not None for d in derivs)
        return FieldBatch(values=values, d_values=derivs if has_d else None)

    def _disp_face_batch(self, bodies_by_net, axis, index, need_values):
        restricted = {
            name: restrict_bodies(bodies, axis, index)
            for name, bodies in bodies_by_net.items()
        }
        return self._disp_batch_from_bodies(restricted, need_values, ())

    def _disp_point_batch(self, theta, points, with_derivatives):
        values = [None, None, None]
        derivs = [None, None, None]
        for name, offset, count in self.disp_layout:
            spec = self.bundle.nets[name]
            layers = self.bundle.mlp_layers(theta, name)
            v, d = mlp_point_tensors(spec, layers, points, with_derivatives)
            for lf in range(count):
                values[lf + offset] = v[lf]
                if with_derivatives:
                    derivs[lf + offset] = d[lf]
        return FieldBatch(
            values=values, d_values=derivs if with_derivatives else None
        )

    def _sigma_batch_from_bodies(self, bodies, need_values, deriv_axes=None):
        spec = self.bundle.nets["sigma"]
        v, d = merge_body_outputs(
            spec, bodies, need_values=need_values, need_derivatives=deriv_axes
        )
        values = [v.get(f) for f in range(6)]
        derivs = [d.get(f) for f in range(6)] if d else None
        return FieldBatch(values=values, d_values=derivs)

    def _sigma_point_batch(self, theta, points, with_derivatives):
        spec = self.bundle.nets["sigma"]
        layers = self.bundle.mlp_layers(theta, "sigma")
        v, d = mlp_point_tensors(spec, layers, points, with_derivatives)
        return FieldBatch(
            values=[v[f] for f in range(6)],
            d_values=[d[f] for f in range(6)] if with_derivatives else None,
        )

    # -- losses -------------------------------------------------------

    def loss(self, theta, epoch) -> LossBreakdown:
        if self.mode == "spinn-dem":
            return self._loss_energy(theta)
        if self._colloc_epoch is None:
            self.resample(epoch - epoch % self.settings.resample_every)
        if self.mode == "spinn-pde":
            return self._loss_separable_pde(theta)
        return self._loss_pointwise_pde(theta)

    def _pooled_dirichlet(self, batches):
        """Mean squared clamp deviation pooled over faces and components."""
        total = None
        count = 0.0
        for batch in batches:
            for f in range(3):
                sq = (batch.values[f] ** 2).sum()
                total = sq if total is None else total + sq
            count += 3.0 * float(np.asarray(ad.value_of(batch.values[0])).size)
        return total * (1.0 / count)

    def _loss_energy(self, theta):
        lam, mu = self.nd.lam, self.nd.mu
        grav_fields = tuple(
            f for f, c in enumerate(self.body_force) if float(c) != 0.0
        )
        trac_fields = tuple(
            f for f, c in enumerate(self.traction_nd) if float(c) != 0.0
        )
        layers = self._disp_layers(theta)
        box_bodies = [
            self._disp_bodies(layers, quad.axes, True) for quad in self.quads
        ]
        trac_by_box = {}
        for bi, axis, index, w3 in self.traction_rows:
            trac_by_box.setdefault(bi, []).append((axis, index, w3))
        energy = None
        for bi, quad in enumerate(self.quads):
            vol = self._disp_batch_from_bodies(
                box_bodies[bi], need_values=grav_fields, need_derivs=(0, 1, 2)
            )
            faces = [
                (
                    self._disp_face_batch(box_bodies[bi], axis, index, trac_fields),
                    w3,
                    self.traction_nd,
                )
                for axis, index, w3 in trac_by_box.get(bi, [])
            ]
            part = energy_loss(vol, quad.weights, lam, mu, self.body_force, faces)
            energy = part if energy is None else energy + part
        clamp_batches = [
            self._disp_face_batch(box_bodies[bi], axis, index, (0, 1, 2))
            for bi, axis, index in self.clamp_rows
        ]
        bc = self._pooled_dirichlet(clamp_batches)
        return total_loss(
            "spinn-dem", bc=bc, lambda_bc=self.lambda_bc, energy=energy
        )

    def _pde_face_bodies(self, bodies, spec, layers, tag):
        """Body outputs restricted to one face of the collocation block.

        Random collocation axes never hit the boundary, so the collapsed
        axis gets one fresh single-point body pass; the tangent axes reuse
        the volume outputs.
        """
        box = self.boxes[0]
        axis = "xyz".index(tag[0])
        value = box.hi[axis] if tag[1] == "+" else box.lo[axis]
        out = list(bodies)
        out[axis] = body_outputs(
            spec,
            [layers[axis]],
            [np.array([value])],
            (False,),
        )[0]
        return [(f, None) for f, _ in out]

    def _loss_separable_pde(self, theta):
        lam, mu = self.nd.lam, self.nd.mu
        axes = self._axes
        disp_layers = self._disp_layers(theta)
        sig_spec = self.bundle.nets["sigma"]
        sig_layers = self.bundle.body_layer_lists(theta, "sigma")
        disp_bodies = self._disp_bodies(disp_layers, axes, True)
        sig_bodies = body_outputs(sig_spec, sig_layers, axes, (True, True, True))

        u_vol = self._disp_batch_from_bodies(
            disp_bodies, need_values=(), need_derivs=(0, 1, 2)
        )
        sig_vol = self._sigma_batch_from_bodies(
            sig_bodies, need_values=range(6), deriv_axes=_STRESS_DERIV_AXES
        )
        res = residual_loss(sig_vol, self.body_force)
        coup = coupling_loss(u_vol, sig_vol, lam, mu)

        clamp_batches = []
        for _, tag in self.problem.clamp_faces:
            restricted = {
                name: self._pde_face_bodies(
                    disp_bodies[name], self.bundle.nets[name], disp_layers[name], tag
                )
                for name, _, _ in self.disp_layout
            }
            clamp_batches.append(
                self._disp_batch_from_bodies(restricted, (0, 1, 2), ())
            )
        bc_d = self._pooled_dirichlet(clamp_batches)

        faces = []
        for target, face_list in (
            (self.traction_nd, self.problem.traction_faces),
            ((0.0, 0.0, 0.0), self.problem.free_faces),
        ):
            for _, tag in face_list:
                axis = "xyz".index(tag[0])
                fb = self._sigma_batch_from_bodies(
                    self._pde_face_bodies(sig_bodies, sig_spec, sig_layers, tag),
                    need_values=_FACE_SIGMA_FIELDS[axis],
                )
                faces.append((fb, _face_normal(tag), target))
        bc = bc_d + bc_traction_loss(faces)
        return total_loss(
            "spinn-pde",
            bc=bc,
            lambda_bc=self.lambda_bc,
            residual=res,
            coupling=coup,
        )

    def _loss_pointwise_pde(self, theta):
        lam, mu = self.nd.lam, self.nd.mu
        pts = self._points
        u_vol = self._disp_point_batch(theta, pts, with_derivatives=True)
        sig_vol = self._sigma_point_batch(theta, pts, with_derivatives=True)
        res = residual_loss(sig_vol, self.body_force)
        coup = coupling_loss(u_vol, sig_vol, lam, mu)
        clamp_batches = [
            self._disp_point_batch(
                theta, self._face_points[key], with_derivatives=False
            )
            for key in self.problem.clamp_faces
        ]
        bc_d = self._pooled_dirichlet(clamp_batches)
        faces = []
        for bi, tag in self.problem.traction_faces:
            fb = self._sigma_point_batch(
                theta, self._face_points[(bi, tag)], with_derivatives=False
            )
            faces.append((fb, _face_normal(tag), self.traction_nd))
        for bi, tag in self.problem.free_faces:
            fb = self._sigma_point_batch(
                theta, self._face_points[(bi, tag)], with_derivatives=False
            )
            faces.append((fb, _face_normal(tag), (0.0, 0.0, 0.0)))
        bc = bc_d + bc_traction_loss(faces)
        return total_loss(
            "pinn-pde",
            bc=bc,
            lambda_bc=self.lambda_bc,
            residual=res,
            coupling=coup,
        )

    # -- driver-facing API --------------------------------------------

    def init_params(self, seed):
        return self.bundle.init(seed)

    def value_and_grad(self, theta, epoch):
        """(loss value, gradient, float breakdown) at flat numpy ``theta``."""
        stash = {}

        def wrapped(var):
            breakdown = self.loss(var, epoch)
            stash["breakdown"] = breakdown.floats()
            return breakdown.total

        value, grads = ad.value_and_grad(wrapped, theta)
        return value, grads, stash["breakdown"]

    def loss_floats(self, theta, epoch) -> LossBreakdown:
        """Forward-only breakdown at numpy ``theta`` (no tape)."""
        return self.loss(np.asarray(theta, dtype=np.float64), epoch).floats()


def _face_normal(tag):
    normal = np.zeros(3)
    normal["xyz".index(tag[0])] = 1.0 if tag[1] == "+" else -1.0
    return normal


def build_objective(problem, settings: RunSettings) -> Objective:
    return Objective(problem, settings)


# -- training loop --------------------------------------------------------


@dataclass
class TrainResult:
    records: list
    params: np.ndarray
    objective: Objective
    aborted: str = None


def train(problem, settings: RunSettings, evaluator=None, log=None) -> TrainResult:
    """Run one seed to completion (or abort) and return its records.

    ``evaluator`` maps a flat numpy parameter vector to an error dict;
    it runs off the training clock at every evaluation epoch. ``log`` is
    an optional callable fed one line per record.
    """
    objective = build_objective(problem, settings)
    epochs = settings.epochs
    if epochs is None:
        epochs = problem.epochs[settings.mode]
    if epochs < 0:
        raise ConfigurationError("epochs must be non-negative")
    schedule = settings.schedule()
    theta = objective.init_params(settings.seed)
    state = adam_init(theta.size)
    records = []
    trained = 0.0
    aborted = None

    def record_at(epoch, breakdown, lr):
        errors = evaluator(theta) if evaluator is not None else {}
        rec = RunRecord(
            epoch=epoch,
            lr=lr,
            total=breakdown.total,
            bc=breakdown.bc,
            residual=breakdown.residual,
            coupling=breakdown.coupling,
            energy=breakdown.energy,
            errors=errors,
            elapsed=trained,
            seed=settings.seed,
        )
        records.append(rec)
        if log is not None:
            err = next((v for v in errors.values() if v is not None), None)
            log(
                f"epoch {epoch:>7d}  loss {breakdown.total: .6e}"
                + (f"  err {err:.4f}" if err is not None else "")
            )
        return rec

    epoch = 0
    try:
        for epoch in range(epochs):
            resample_due = (
                objective.mode != "spinn-dem"
                and epoch % settings.resample_every == 0
            )
            t0 = time.perf_counter()
            if resample_due:
                objective.resample(epoch)
            lr = lr_at(schedule, epoch)
            value, grads, breakdown = objective.value_and_grad(theta, epoch)
            trained += time.perf_counter() - t0
            if epoch % settings.eval_every == 0:
                record_at(epoch, breakdown, lr)
            t0 = time.perf_counter()
            theta, state = adam_step(theta, grads, state, lr)
            trained += time.perf_counter() - t0
    except NonFiniteError as exc:
        # theta still holds the last finite state; surface the diagnosis.
        aborted = f"epoch {epoch}: {exc}"

    final_lr = lr_at(schedule, max(epochs - 1, 0))
    if aborted is None:
        t0 = time.perf_counter()
        breakdown = objective.loss_floats(theta, epochs)
        trained += time.perf_counter() - t0
        record_at(epochs, breakdown, final_lr)
    return TrainResult(
        records=records, params=theta, objective=objective, aborted=aborted
    )
