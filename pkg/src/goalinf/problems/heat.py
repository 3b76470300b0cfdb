"""CPU heat-sink problem: infer the initial temperature of a three-layer
cross-section (CPU, silicon, aluminium fin) from fin sensors.

The heat equation ``rho c dT/dt = div(k grad T)`` is discretized with a
cell-centred finite-volume scheme on a structured grid (uniform columns, one
row spacing per layer) and advanced by backward Euler. Boundary conditions:
prescribed flux at the bottom of the CPU, convection to ambient on the top and
sides of the fin, adiabatic sides of the CPU and silicon layers, perfect
thermal contact between layers (harmonic-mean face conductances).

The forward map ``G`` is the zero-forcing propagator from the initial field to
the stacked sensor readings; the forcing and the prior mean only shift the
data (see :meth:`HeatModel.shift_data`). The prior square root is the inverse
of the discrete SPDE operator ``gamma (kappa^2 I - Laplacian)`` with Neumann
boundaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import ConfigInvalid, EmptyMask
from ..model import GoalProblem


@dataclass(frozen=True)
class FluxImpulse:
    center: float
    width: float
    intensity: float


@dataclass(frozen=True)
class HeatConfig:
    # physical setup
    diffusivity: tuple = (1.11e-4, 8.8e-5, 8.42e-5)  # m^2/s
    conductivity: tuple = (401.0, 148.0, 237.0)  # W/(m K)
    width: float = 2e-2  # m
    layer_heights: tuple = (2.5e-3, 1e-3, 8e-3)  # m
    h_conv: float = 23.8  # W/(m^2 K)
    T_inf: float = 283.0  # K
    flux: tuple = (
        FluxImpulse(6e-3, 8e-3, 0.6),
        FluxImpulse(15e-3, 4e-3, 0.3),
    )
    dt: float = 5e-4  # s
    num_obs: int = 20
    sigma_obs: float = 0.5  # K
    prior_gamma: float = 1e-8
    prior_kappa: float = math.sqrt(8.0) / 2e-3  # 1/m
    prior_mean: float = 318.0  # K
    # discretization
    nx: int = 24
    ny_per_layer: tuple = (5, 4, 16)
    sensors: tuple = tuple(
        (x, y) for y in (4.5e-3, 7.5e-3) for x in (2.5e-3, 7.5e-3, 12.5e-3, 17.5e-3)
    )
    # test toggles
    convection: bool = True
    heat_flux: bool = True

    def __post_init__(self):
        object.__setattr__(self, "diffusivity", tuple(map(float, self.diffusivity)))
        object.__setattr__(self, "conductivity", tuple(map(float, self.conductivity)))
        object.__setattr__(self, "layer_heights", tuple(map(float, self.layer_heights)))
        object.__setattr__(self, "ny_per_layer", tuple(map(int, self.ny_per_layer)))
        object.__setattr__(
            self,
            "flux",
            tuple(f if isinstance(f, FluxImpulse) else FluxImpulse(**f) for f in self.flux),
        )
        object.__setattr__(self, "sensors", tuple(tuple(map(float, s)) for s in self.sensors))
        self.validate()

    def validate(self):
        for name in ("diffusivity", "conductivity", "layer_heights", "ny_per_layer"):
            value = getattr(self, name)
            if len(value) != 3:
                raise ConfigInvalid(name, "needs one entry per layer (3)")
            if not all(v > 0 for v in value):
                raise ConfigInvalid(name, "entries must be positive")
        for name in ("width", "h_conv", "T_inf", "dt", "sigma_obs", "prior_gamma", "prior_kappa"):
            if not getattr(self, name) > 0:
                raise ConfigInvalid(name, "must be positive")
        for name in ("nx", "num_obs"):
            if int(getattr(self, name)) < 1:
                raise ConfigInvalid(name, "must be at least 1")
        for i, f in enumerate(self.flux):
            if not (f.width > 0 and f.intensity >= 0):
                raise ConfigInvalid(f"flux[{i}]", "width must be positive, intensity nonnegative")
        if not self.sensors:
            raise ConfigInvalid("sensors", "at least one sensor is required")
        y_lo = self.layer_heights[0] + self.layer_heights[1]
        y_hi = y_lo + self.layer_heights[2]
        for i, (x, y) in enumerate(self.sensors):
            if not (0 <= x <= self.width and y_lo <= y <= y_hi):
                raise ConfigInvalid(f"sensors[{i}]", f"({x}, {y}) is not in the fin layer")

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key.startswith("_"):
                continue
            if isinstance(value, dict) and key not in names:
                kwargs.update({k: v for k, v in value.items() if not k.startswith("_")})
            else:
                kwargs[key] = value
        unknown = set(kwargs) - names
        if unknown:
            raise ConfigInvalid(sorted(unknown)[0], "unknown config field")
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def desk_default(cls):
        text = resources.files("goalinf.data").joinpath("heat_desk.json").read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Grid:
    nx: int
    dx: float
    dy: np.ndarray  # per row
    layer: np.ndarray  # per row, 0..2
    x: np.ndarray  # cell-centre abscissae
    y: np.ndarray  # cell-centre ordinates, per row

    @property
    def ny(self):
        return len(self.dy)

    @property
    def n(self):
        return self.nx * self.ny

    def index(self, row, col):
        return row * self.nx + col

    def layer_mask(self, layer):
        return np.repeat(self.layer == layer, self.nx).reshape(self.ny, self.nx)

    def nearest_cell(self, x, y):
        col = int(np.argmin(np.abs(self.x - x)))
        row = int(np.argmin(np.abs(self.y - y)))
        return self.index(row, col)


def build_grid(cfg):
    dy, layer = [], []
    for l, (L, ny) in enumerate(zip(cfg.layer_heights, cfg.ny_per_layer)):
        dy += [L / ny] * ny
        layer += [l] * ny
    dy = np.array(dy)
    y = np.cumsum(dy) - 0.5 * dy
    dx = cfg.width / cfg.nx
    x = (np.arange(cfg.nx) + 0.5) * dx
    return Grid(cfg.nx, dx, dy, np.array(layer), x, y)


def _face_conductances(grid, k_row):
    """Symmetric conductance matrix (W/K per unit depth) between neighbouring
    cells for per-row conductivity ``k_row``."""
    rows, cols, vals = [], [], []
    nx = grid.nx
    for r in range(grid.ny):
        g = k_row[r] * grid.dy[r] / grid.dx
        for j in range(nx - 1):
            rows.append(grid.index(r, j))
            cols.append(grid.index(r, j + 1))
            vals.append(g)
        if r + 1 < grid.ny:
            g = grid.dx / (grid.dy[r] / (2 * k_row[r]) + grid.dy[r + 1] / (2 * k_row[r + 1]))
            for j in range(nx):
                rows.append(grid.index(r, j))
                cols.append(grid.index(r + 1, j))
                vals.append(g)
    off = sp.coo_matrix((vals, (rows, cols)), shape=(grid.n, grid.n)).tocsr()
    off = off + off.T
    return sp.diags(np.asarray(off.sum(axis=1)).ravel()) - off


def _flux_profile(cfg, x):
    q = np.zeros_like(x)
    for f in cfg.flux:
        q += f.intensity * (np.abs(x - f.center) <= 0.5 * f.width)
    return q


class HeatModel:
    """Discretized heat-sink model and the ingredients of the inverse problem."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.grid = g = build_grid(cfg)
        k = np.array(cfg.conductivity)[g.layer]
        rho_c = (np.array(cfg.conductivity) / np.array(cfg.diffusivity))[g.layer]
        area = np.outer(g.dy, np.full(g.nx, g.dx)).ravel()
        self.capacity = np.repeat(rho_c, g.nx) * area
        K = _face_conductances(g, k).tolil()
        b = np.zeros(g.n)
        if cfg.convection:
            k3 = cfg.conductivity[2]
            for r in np.flatnonzero(g.layer == 2):
                g_side = g.dy[r] / (0.5 * g.dx / k3 + 1.0 / cfg.h_conv)
                for j in (0, g.nx - 1):
                    i = g.index(r, j)
                    K[i, i] += g_side
                    b[i] += g_side * cfg.T_inf
            r = g.ny - 1
            g_top = g.dx / (0.5 * g.dy[r] / k3 + 1.0 / cfg.h_conv)
            for j in range(g.nx):
                i = g.index(r, j)
                K[i, i] += g_top
                b[i] += g_top * cfg.T_inf
        if cfg.heat_flux:
            b[: g.nx] += _flux_profile(cfg, g.x) * g.dx
        self.conductance = K.tocsc()
        self.source = b
        self.sensor_cells = np.array([g.nearest_cell(x, y) for x, y in cfg.sensors])
        self.area = area

    @cached_property
    def _stepper(self):
        system = sp.diags(self.capacity) + self.cfg.dt * self.conductance
        return splu(system.tocsc())

    def step(self, T, forcing=True):
        """One backward-Euler step; ``T`` may hold several fields as columns."""
        rhs = self.capacity[:, None] * T if T.ndim == 2 else self.capacity * T
        if forcing:
            src = self.cfg.dt * self.source
            rhs = rhs + (src[:, None] if T.ndim == 2 else src)
        return self._stepper.solve(rhs)

    def propagate(self, T0, forcing=True):
        """Sensor readings stacked time-major: ``num_obs * num_sensors`` rows."""
        T = np.asarray(T0, dtype=float)
        obs = []
        for _ in range(self.cfg.num_obs):
            T = self.step(T, forcing)
            obs.append(T[self.sensor_cells])
        return np.concatenate(obs, axis=0)

    def forward_matrix(self):
        """Materialize ``G`` by propagating all unit vectors at once."""
        return self.propagate(np.eye(self.grid.n), forcing=False)

    def forward_affine(self, T0):
        """Noise-free readings of the full model, including forcing and ambient."""
        return self.propagate(T0, forcing=True)

    def shift_data(self, y_raw):
        """Data for the zero-mean linear problem: subtract the response of the
        prior-mean field under the full model."""
        mean_field = np.full(self.grid.n, self.cfg.prior_mean)
        return np.asarray(y_raw, dtype=float) - self.forward_affine(mean_field)

    def laplacian(self):
        """Neumann finite-volume Laplacian (1/m^2) on the whole domain."""
        K = _face_conductances(self.grid, np.ones(self.grid.ny))
        return -(sp.diags(1.0 / self.area) @ K)

    def prior_sqrt(self):
        cfg = self.cfg
        op = cfg.prior_gamma * (cfg.prior_kappa**2 * sp.identity(self.grid.n) - self.laplacian())
        return np.linalg.inv(op.toarray())

    def goal_mask(self):
        return self.grid.layer_mask(0)


def selection_operator(mask):
    """0/1 rows picking the masked nodes (row-major order)."""
    flat = np.asarray(mask, dtype=bool).ravel()
    idx = np.flatnonzero(flat)
    if idx.size == 0:
        raise EmptyMask("mask selects no nodes")
    O = np.zeros((idx.size, flat.size))
    O[np.arange(idx.size), idx] = 1.0
    return O


def heat_problem(cfg=None, model=None):
    """Goal-oriented problem for the CPU temperature (layer 1) given fin data."""
    model = model or HeatModel(cfg or HeatConfig.desk_default())
    cfg = model.cfg
    G = model.forward_matrix()
    d = G.shape[0]
    return GoalProblem.create(
        G,
        selection_operator(model.goal_mask()),
        S_obs=cfg.sigma_obs * np.eye(d),
        S_pr=model.prior_sqrt(),
        meta={"provenance": "builtin:heat", "prior_mean": cfg.prior_mean},
    )
