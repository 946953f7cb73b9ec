"""Structured Cartesian grid, ghost-cell boundary handling and field norms.

Fields are numpy arrays shaped like ``grid.cells``; the last axis is the
vertical direction. Two ghost layers are carried on every side so that the
slope-limited reconstruction can read one cell beyond each face.
"""

from dataclasses import dataclass

import numpy as np

NGHOST = 2


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a uniform Cartesian grid.

    cells/spacing/origin are per-axis tuples; the last axis is vertical.
    """

    dim: int
    cells: tuple
    spacing: tuple
    origin: tuple = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.cells) != self.dim or len(self.spacing) != self.dim:
            raise ValueError("cells and spacing must have one entry per axis")
        if any(int(n) < 4 for n in self.cells):
            raise ValueError(f"need at least 4 cells per axis, got {self.cells}")
        if any(h <= 0 for h in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * self.dim)
        else:
            object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))


class Grid:
    """Index/coordinate maps for a GridSpec plus ghost and norm helpers."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.dim = spec.dim
        self.cells = spec.cells
        self.spacing = spec.spacing
        self.origin = spec.origin
        self.n_cells = int(np.prod(spec.cells))
        self.cell_volume = float(np.prod(spec.spacing))
        self.h_min = min(spec.spacing)
        self.vertical_axis = spec.dim - 1
        # cell-center coordinates per axis
        self.axis_centers = tuple(
            spec.origin[a] + (np.arange(spec.cells[a]) + 0.5) * spec.spacing[a]
            for a in range(spec.dim)
        )

    def cell_center(self, index):
        """Coordinates of the center of the cell with the given index tuple."""
        return tuple(self.axis_centers[a][index[a]] for a in range(self.dim))

    def coordinate_fields(self):
        """Full coordinate arrays (one per axis), shaped like the grid."""
        return np.meshgrid(*self.axis_centers, indexing="ij")

    def zeros(self):
        return np.zeros(self.cells)

    def extent(self, axis):
        return self.cells[axis] * self.spacing[axis]

    @property
    def domain_volume(self):
        return self.n_cells * self.cell_volume


def build_grid(spec: GridSpec) -> Grid:
    return Grid(spec)


@dataclass(frozen=True)
class BoundarySpec:
    """Per-axis boundary kinds with optional Dirichlet temperature values.

    kinds[a] is 'periodic' or 'wall'. A wall mirrors scalars (zero normal
    gradient), negates the normal momentum component and mirrors tangential
    ones. theta_dirichlet maps an axis to (low, high) face values of the
    potential temperature; it may only be set on wall axes.
    """

    kinds: tuple
    theta_dirichlet: dict = None

    def __post_init__(self):
        for k in self.kinds:
            if k not in ("periodic", "wall"):
                raise ValueError(f"unknown boundary kind {k!r}")
        td = self.theta_dirichlet or {}
        for a in td:
            if self.kinds[a] != "wall":
                raise ValueError("Dirichlet values require a wall axis")
        object.__setattr__(self, "theta_dirichlet", dict(td))

    def rules(self, var: str):
        """Ghost-fill rules per axis for a variable class.

        var is 'scalar', 'theta', or 'momentum<k>' for the k-th component.
        Returns a list of (low_rule, high_rule) usable by apply_boundary.
        """
        out = []
        for a, kind in enumerate(self.kinds):
            if kind == "periodic":
                out.append(("periodic", "periodic"))
            elif var.startswith("momentum"):
                comp = int(var[len("momentum"):])
                rule = "odd" if comp == a else "even"
                out.append((rule, rule))
            elif var == "theta" and a in self.theta_dirichlet:
                lo, hi = self.theta_dirichlet[a]
                out.append((("dirichlet", lo), ("dirichlet", hi)))
            else:
                out.append(("even", "even"))
        return out


def _fill_axis(padded, axis, low_rule, high_rule, ng):
    """Fill ng ghost layers on both sides of one axis, in place."""
    n = padded.shape[axis] - 2 * ng

    def sl(start, stop):
        idx = [slice(None)] * padded.ndim
        idx[axis] = slice(start, stop)
        return tuple(idx)

    def layer(i):
        idx = [slice(None)] * padded.ndim
        idx[axis] = i
        return tuple(idx)

    if (low_rule == "periodic") != (high_rule == "periodic"):
        raise ValueError("periodic must be declared on both sides of an axis")
    if low_rule == "periodic":
        padded[sl(0, ng)] = padded[sl(n, n + ng)]
        padded[sl(n + ng, n + 2 * ng)] = padded[sl(ng, 2 * ng)]
        return

    for rule, side in ((low_rule, "low"), (high_rule, "high")):
        for j in range(1, ng + 1):
            if side == "low":
                ghost, interior = layer(ng - j), layer(ng + j - 1)
            else:
                ghost, interior = layer(ng + n + j - 1), layer(ng + n - j)
            if rule == "even":
                padded[ghost] = padded[interior]
            elif rule == "odd":
                padded[ghost] = -padded[interior]
            elif isinstance(rule, tuple) and rule[0] == "dirichlet":
                padded[ghost] = 2.0 * rule[1] - padded[interior]
            else:
                raise ValueError(f"unknown ghost rule {rule!r}")


def apply_boundary(field, rules, ng=NGHOST, lead=0):
    """Pad a field with ng ghost layers per spatial side and fill them.

    rules is a per-spatial-axis list of (low_rule, high_rule); each rule is
    'periodic', 'even', 'odd' or ('dirichlet', face_value). The first
    ``lead`` axes (e.g. chaos modes, variable stacks) are not padded.
    Ghost filling proceeds axis by axis so that corner ghosts carry the
    composed rules.
    """
    if len(rules) != field.ndim - lead:
        raise ValueError("one rule pair per spatial axis required")
    pad_width = [(0, 0)] * lead + [(ng, ng)] * (field.ndim - lead)
    padded = np.pad(field, pad_width, mode="constant")
    for a, (lo, hi) in enumerate(rules):
        _fill_axis(padded, lead + a, lo, hi, ng)
    return padded


def interior(padded, ng=NGHOST, lead=0):
    """View of the interior cells of a padded array."""
    sl = [slice(None)] * lead
    sl += [slice(ng, s - ng) for s in padded.shape[lead:]]
    return padded[tuple(sl)]


def field_norms(a, b, volume_element):
    """L1, L2 and Linf norms of a - b with the cell volume as measure."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    l1 = float(np.sum(diff) * volume_element)
    l2 = float(np.sqrt(np.sum(diff * diff) * volume_element))
    linf = float(np.max(diff)) if diff.size else 0.0
    return l1, l2, linf
