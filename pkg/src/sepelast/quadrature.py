"""Box domains, composite Simpson quadrature, and collocation sampling.

Weights are kept in tensor-product form: a 1-D Simpson rule per axis, with
the volume tensor as their outer product. Faces reuse the two tangent-axis
rules. Collocation resampling draws fresh per-axis coordinate vectors so
separable evaluation stays cheap on random points too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FACE_TAGS = ("x-", "x+", "y-", "y+", "z-", "z+")

_FACE_AXIS = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box with a default per-axis grid resolution."""

    lo: tuple
    hi: tuple
    resolution: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        res = tuple(int(n) for n in self.resolution)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "resolution", res)
        if len(lo) != 3 or len(hi) != 3 or len(res) != 3:
            raise ValueError("BoxDomain is three-dimensional")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("box extents must be positive on every axis")
        if any(n < 2 for n in res):
            raise ValueError("need at least two points per axis")

    def axes(self, resolution=None):
        res = resolution or self.resolution
        return [
            np.linspace(self.lo[i], self.hi[i], res[i]) for i in range(3)
        ]

    def volume(self):
        return float(np.prod([h - l for l, h in zip(self.lo, self.hi)]))

    def contains(self, points, tol=1e-9):
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        lo = np.asarray(self.lo) - tol
        hi = np.asarray(self.hi) + tol
        return np.all((p >= lo) & (p <= hi), axis=1)

    def scaled(self, factor):
        """Same box in units divided by ``factor`` (e.g. by L_c)."""
        return BoxDomain(
            tuple(v / factor for v in self.lo),
            tuple(v / factor for v in self.hi),
            self.resolution,
        )


def simpson_weights(n, a, b, axis_name=""):
    """Composite Simpson weights on n equispaced points over [a, b].

    The pattern is (h/3) * [1, 4, 2, 4, ..., 2, 4, 1]; n must be odd and
    at least 3 so the panel count is whole.
    """
    n = int(n)
    label = f" on axis {axis_name}" if axis_name else ""
    if n < 3:
        raise ValueError(f"Simpson rule needs at least 3 points{label}, got {n}")
    if n % 2 == 0:
        raise ValueError(f"Simpson rule needs an odd point count{label}, got {n}")
    h = (b - a) / (n - 1)
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


@dataclass
class QuadratureGrid:
    """Tensor-product quadrature: per-axis nodes, weights, and their box."""

    axes: list
    axis_weights: list
    box: BoxDomain

    @property
    def weights(self):
        """(n1, n2, n3) weight tensor; sums to the box volume."""
        wx, wy, wz = self.axis_weights
        return (
            wx.reshape(-1, 1, 1) * wy.reshape(1, -1, 1) * wz.reshape(1, 1, -1)
        )

    def points(self):
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


def tensor_quadrature(box: BoxDomain, resolution=None) -> QuadratureGrid:
    """Simpson rule per axis over the box; resolutions must be odd."""
    res = tuple(resolution or box.resolution)
    axes = box.axes(res)
    names = ("x", "y", "z")
    weights = [
        simpson_weights(res[i], box.lo[i], box.hi[i], names[i]) for i in range(3)
    ]
    return QuadratureGrid(axes=axes, axis_weights=weights, box=box)


@dataclass
class FaceSet:
    """One box face: its tangent-axis nodes, 2-D Simpson weights, and
    outward unit normal. ``axes`` holds three vectors with the fixed axis
    collapsed to a single coordinate, so separable evaluation applies
    unchanged."""

    tag: str
    axis: int
    value: float
    axes: list
    tangent_weights: np.ndarray
    normal: np.ndarray

    def points(self):
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


def face_quadrature(box: BoxDomain, tag: str, resolution=None) -> FaceSet:
    """Simpson quadrature on one face; weights sum to the face area."""
    if tag not in FACE_TAGS:
        raise ValueError(f"unknown face tag {tag!r}; expected one of {FACE_TAGS}")
    res = tuple(resolution or box.resolution)
    axis = _FACE_AXIS[tag[0]]
    side = tag[1]
    value = box.hi[axis] if side == "+" else box.lo[axis]
    normal = np.zeros(3)
    normal[axis] = 1.0 if side == "+" else -1.0
    tangents = [i for i in range(3) if i != axis]
    names = ("x", "y", "z")
    w = [
        simpson_weights(res[i], box.lo[i], box.hi[i], names[i]) for i in tangents
    ]
    axes = box.axes(res)
    axes[axis] = np.array([value])
    return FaceSet(
        tag=tag,
        axis=axis,
        value=value,
        axes=axes,
        tangent_weights=w[0].reshape(-1, 1) * w[1].reshape(1, -1),
        normal=normal,
    )


def face_axes(box: BoxDomain, tag: str, axes):
    """Restrict given per-axis vectors to one face (fixed axis -> 1 point)."""
    if tag not in FACE_TAGS:
        raise ValueError(f"unknown face tag {tag!r}; expected one of {FACE_TAGS}")
    axis = _FACE_AXIS[tag[0]]
    value = box.hi[axis] if tag[1] == "+" else box.lo[axis]
    out = [np.asarray(a, dtype=np.float64) for a in axes]
    out[axis] = np.array([value])
    return out


def resample_uniform(box: BoxDomain, counts, seed, epoch):
    """Fresh per-axis collocation vectors, iid uniform then sorted.

    The stream is keyed on (seed, epoch) so a given resampling event is
    reproducible in isolation; both endpoints of each axis are excluded
    with probability one (open interval).
    """
    rng = np.random.default_rng([int(seed) & 0x7FFFFFFF, int(epoch), 0x5E9A])
    return [
        np.sort(rng.uniform(box.lo[i], box.hi[i], size=int(counts[i])))
        for i in range(3)
    ]


def sample_points(rng, lo, hi, count):
    """iid uniform points in an axis-aligned rectangle or box (N, dim)."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    return rng.uniform(lo, hi, size=(int(count), lo.size))


def angle_domain(resolutions=None):
    """The thin-walled L-section: two overlapping-free boxes.

    Box 1 is the vertical wall (thin in y), box 2 the top flange (thin in
    z); both run the full x length, wall thickness 0.006 m. Default
    resolutions match the full-scale setup; pass two (n1, n2, n3) tuples
    to coarsen.
    """
    res1, res2 = resolutions or ((513, 9, 65), (513, 65, 9))
    box1 = BoxDomain((0.0, 0.054, 0.0), (1.0, 0.06, 0.054), res1)
    box2 = BoxDomain((0.0, 0.0, 0.054), (1.0, 0.06, 0.06), res2)
    return [box1, box2]
