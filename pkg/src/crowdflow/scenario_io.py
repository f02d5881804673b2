"""Scenario files: INI-style sections with repeatable geometry keys.

A scenario document looks like::

    [grid]
    m = 50
    n = 50
    h = 0.02            # default 0.01

    [boundary]
    door = right 0.4 0.6          # edge lo hi, repeatable
    obstacle = 0.8 0.9 0.2 0.7    # x0 x1 y0 y1, repeatable

    [initial]
    uniform = 0.0
    rect = 0.0 0.5 0.0 0.333 1.0  # x0 x1 y0 y1 [value], repeatable

    [speed]
    f = exp(-3*((x-0.5)^2+(y-0.5)^2))
    couple_coeff = 0.0

    [weight]
    k = 1.0

    [source]
    inflow = left 0.3 0.6 1.0     # edge lo hi rate, repeatable

    [run]
    T = 2.0
    tau = 0.008                   # default 0.004
    mode = homogeneous
    couple_every = 0
    snapshot_every = 25

    [solver]
    max_iter = 50000
    tol = 1e-6
    gap_tol = 1e-4

Geometry is given in physical coordinates; every parse error carries the
offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .beckmann import PDParams
from .errors import ConfigurationError, ScenarioParseError
from .expr import parse_expression
from .grid import GridSpec, ScalarField, boundary_from_segments, edge_face_mask, rect_cell_mask
from .simulator import Scenario

_SECTIONS = ("grid", "boundary", "initial", "speed", "weight", "source", "run", "solver")
_REPEATABLE = {"door", "obstacle", "rect", "inflow"}

DEFAULT_H = 0.01
DEFAULT_TAU = 0.004


@dataclass
class ScenarioDefinition:
    """Raw textual pieces of a scenario, kept for lossless re-serialization."""

    m: int
    n: int
    h: float = DEFAULT_H
    doors: list = dc_field(default_factory=list)
    obstacles: list = dc_field(default_factory=list)
    uniform: float = 0.0
    rects: list = dc_field(default_factory=list)
    f_expr: str = "1"
    couple_coeff: float = 0.0
    k_expr: str = "1"
    inflows: list = dc_field(default_factory=list)
    T: float = 1.0
    tau: float = DEFAULT_TAU
    mode: str = "homogeneous"
    couple_every: int = 0
    snapshot_every: int = 25
    solver: dict = dc_field(default_factory=dict)

    def build(self):
        """Construct the validated Scenario this definition describes."""
        grid = GridSpec(self.m, self.n, self.h)
        if not self.doors:
            raise ConfigurationError("scenario defines no door segment (empty exit set)")
        boundary = boundary_from_segments(
            grid, doors=self.doors, obstacles=self.obstacles,
            sources=[(e, lo, hi) for e, lo, hi, _ in self.inflows],
        )

        rho0 = np.full((grid.m, grid.n), float(self.uniform))
        for x0, x1, y0, y1, value in self.rects:
            rho0[rect_cell_mask(grid, x0, x1, y0, y1)] = value
        rho0[boundary.obstacle] = 0.0

        x, y = grid.cell_centers()
        f = np.broadcast_to(np.asarray(parse_expression(self.f_expr)(x, y), dtype=float),
                            (grid.m, grid.n)).copy()
        k = np.broadcast_to(np.asarray(parse_expression(self.k_expr)(x, y), dtype=float),
                            (grid.m, grid.n)).copy()

        eta_x = np.zeros((grid.m + 1, grid.n))
        eta_y = np.zeros((grid.m, grid.n + 1))
        for edge, lo, hi, rate in self.inflows:
            axis, mask = edge_face_mask(grid, edge, lo, hi)
            if axis == "x":
                eta_x[mask] = rate
            else:
                eta_y[mask] = rate
        has_source = bool(self.inflows)

        pd = PDParams(**self.solver) if self.solver else None
        scenario = Scenario(
            grid=grid,
            boundary=boundary,
            rho0=ScalarField(rho0, grid),
            f=ScalarField(f, grid),
            k=ScalarField(k, grid),
            T=self.T,
            tau=self.tau,
            mode=self.mode,
            eta_x=eta_x if has_source else None,
            eta_y=eta_y if has_source else None,
            couple_every=self.couple_every,
            couple_coeff=self.couple_coeff,
            pd=pd,
            snapshot_every=self.snapshot_every,
            definition=self,
        )
        scenario.validate()
        return scenario


def _scan(text):
    """Split a scenario document into {section: [(line, key, value)]}."""
    sections = {name: [] for name in _SECTIONS}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ScenarioParseError(lineno, f"unknown section [{name}]")
            current = name
            continue
        if "=" not in line:
            raise ScenarioParseError(lineno, "expected 'key = value'")
        if current is None:
            raise ScenarioParseError(lineno, "entry appears before any [section] header")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ScenarioParseError(lineno, "empty key")
        if key not in _REPEATABLE and any(k == key for _, k, _ in sections[current]):
            raise ScenarioParseError(lineno, f"duplicate key {key!r} in [{current}]")
        sections[current].append((lineno, key.lower(), value))
    return sections


def _number(value, lineno, kind=float):
    try:
        out = kind(value) if kind is not float else float(value)
        if kind is int and float(value) != out:
            raise ValueError
        return out
    except ValueError:
        raise ScenarioParseError(lineno, f"expected a {kind.__name__}, got {value!r}") from None


def _fields(value, lineno, count_min, count_max, what):
    parts = value.split()
    if not count_min <= len(parts) <= count_max:
        raise ScenarioParseError(lineno, f"{what} needs {count_min}"
                                 + (f"-{count_max}" if count_max != count_min else "")
                                 + f" fields, got {len(parts)}")
    return parts


def _segment(value, lineno, what, with_rate=False):
    nums = 4 if with_rate else 3
    parts = _fields(value, lineno, nums, nums, what)
    edge = parts[0].lower()
    if edge not in ("left", "right", "bottom", "top"):
        raise ScenarioParseError(lineno, f"{what} edge must be left/right/bottom/top, got {parts[0]!r}")
    numbers = [_number(p, lineno) for p in parts[1:]]
    return (edge, *numbers)


def parse_definition(text):
    """Parse document text into a ScenarioDefinition (no grid-level validation yet)."""
    sections = _scan(text)

    grid_entries = {key: (lineno, value) for lineno, key, value in sections["grid"]}
    for required in ("m", "n"):
        if required not in grid_entries:
            raise ConfigurationError(f"missing required key {required!r} in [grid]")
    defn = ScenarioDefinition(
        m=_number(grid_entries["m"][1], grid_entries["m"][0], int),
        n=_number(grid_entries["n"][1], grid_entries["n"][0], int),
    )
    if "h" in grid_entries:
        defn.h = _number(grid_entries["h"][1], grid_entries["h"][0])
    unknown = set(grid_entries) - {"m", "n", "h"}
    if unknown:
        key = sorted(unknown)[0]
        raise ScenarioParseError(grid_entries[key][0], f"unknown key {key!r} in [grid]")
    grid = GridSpec(defn.m, defn.n, defn.h)

    def checked(fn, lineno, *args):
        try:
            return fn(grid, *args)
        except ConfigurationError as exc:
            raise ScenarioParseError(lineno, str(exc)) from exc

    for lineno, key, value in sections["boundary"]:
        if key == "door":
            seg = _segment(value, lineno, "door")
            checked(edge_face_mask, lineno, *seg)
            defn.doors.append(seg)
        elif key == "obstacle":
            parts = _fields(value, lineno, 4, 4, "obstacle")
            rect = tuple(_number(p, lineno) for p in parts)
            checked(rect_cell_mask, lineno, *rect)
            defn.obstacles.append(rect)
        else:
            raise ScenarioParseError(lineno, f"unknown key {key!r} in [boundary]")

    for lineno, key, value in sections["initial"]:
        if key == "uniform":
            defn.uniform = _number(value, lineno)
        elif key == "rect":
            parts = _fields(value, lineno, 4, 5, "rect")
            nums = [_number(p, lineno) for p in parts]
            if len(nums) == 4:
                nums.append(1.0)
            if not 0.0 <= nums[4] <= 1.0:
                raise ScenarioParseError(lineno, f"density value {nums[4]} outside [0, 1]")
            checked(rect_cell_mask, lineno, *nums[:4])
            defn.rects.append(tuple(nums))
        else:
            raise ScenarioParseError(lineno, f"unknown key {key!r} in [initial]")

    for lineno, key, value in sections["speed"]:
        if key == "f":
            parse_expression(value, lineno)
            defn.f_expr = value
        elif key == "couple_coeff":
            defn.couple_coeff = _number(value, lineno)
        else:
            raise ScenarioParseError(lineno, f"unknown key {key!r} in [speed]")

    for lineno, key, value in sections["weight"]:
        if key == "k":
            parse_expression(value, lineno)
            defn.k_expr = value
        else:
            raise ScenarioParseError(lineno, f"unknown key {key!r} in [weight]")

    for lineno, key, value in sections["source"]:
        if key == "inflow":
            seg = _segment(value, lineno, "inflow", with_rate=True)
            checked(edge_face_mask, lineno, *seg[:3])
            defn.inflows.append(seg)
        else:
            raise ScenarioParseError(lineno, f"unknown key {key!r} in [source]")

    run_keys = {
        "t": ("T", float), "tau": ("tau", float), "mode": ("mode", str),
        "couple_every": ("couple_every", int), "snapshot_every": ("snapshot_every", int),
    }
    for lineno, key, value in sections["run"]:
        if key not in run_keys:
            raise ScenarioParseError(lineno, f"unknown key {key!r} in [run]")
        attr, kind = run_keys[key]
        if kind is str:
            if value not in ("homogeneous", "quadratic"):
                raise ScenarioParseError(lineno, f"mode must be homogeneous or quadratic, got {value!r}")
            setattr(defn, attr, value)
        else:
            setattr(defn, attr, _number(value, lineno, kind))

    solver_keys = {"alpha": float, "beta": float, "theta": float,
                   "max_iter": int, "tol": float, "gap_tol": float}
    for lineno, key, value in sections["solver"]:
        if key not in solver_keys:
            raise ScenarioParseError(lineno, f"unknown key {key!r} in [solver]")
        defn.solver[key] = _number(value, lineno, solver_keys[key])

    if not any(k == "t" for _, k, _ in sections["run"]):
        raise ConfigurationError("missing required key 'T' in [run]")
    return defn


def parse_scenario(path):
    """Read, parse, and validate a scenario file.

    Line-scoped problems raise ScenarioParseError with the line number;
    whole-file problems (missing sections, empty door set, CFL violation)
    raise ConfigurationError.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    defn = parse_definition(text)
    return defn.build()


def write_scenario(scenario_or_definition, path):
    """Serialize a scenario (or its definition) back to document form."""
    defn = getattr(scenario_or_definition, "definition", scenario_or_definition)
    if defn is None or not isinstance(defn, ScenarioDefinition):
        raise ConfigurationError("scenario carries no definition to serialize")
    lines = ["[grid]", f"m = {defn.m}", f"n = {defn.n}", f"h = {defn.h!r}", "", "[boundary]"]
    lines += [f"door = {e} {lo!r} {hi!r}" for e, lo, hi in defn.doors]
    lines += [f"obstacle = {x0!r} {x1!r} {y0!r} {y1!r}" for x0, x1, y0, y1 in defn.obstacles]
    lines += ["", "[initial]", f"uniform = {defn.uniform!r}"]
    lines += [f"rect = {x0!r} {x1!r} {y0!r} {y1!r} {v!r}" for x0, x1, y0, y1, v in defn.rects]
    lines += ["", "[speed]", f"f = {defn.f_expr}", f"couple_coeff = {defn.couple_coeff!r}"]
    lines += ["", "[weight]", f"k = {defn.k_expr}"]
    lines += ["", "[source]"]
    lines += [f"inflow = {e} {lo!r} {hi!r} {rate!r}" for e, lo, hi, rate in defn.inflows]
    lines += ["", "[run]", f"T = {defn.T!r}", f"tau = {defn.tau!r}", f"mode = {defn.mode}",
              f"couple_every = {defn.couple_every}", f"snapshot_every = {defn.snapshot_every}"]
    lines += ["", "[solver]"]
    lines += [f"{key} = {value!r}" for key, value in defn.solver.items()]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
