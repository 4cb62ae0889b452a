"""Occupancy-grid workspaces, clearance-aware collision checks and world generators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .geometry import Vec2

DEFAULT_CLEARANCE = 0.5
DEFAULT_RESOLUTION = 0.01


class GridParseError(ValueError):
    """Malformed grid or sidecar file; the message names the file and position."""


class InvalidWorldError(ValueError):
    pass


@dataclass
class OccupancyGrid:
    """Boolean occupancy bitmap; ``bits[row, col]`` with row along +y and col along +x.

    ``origin`` is the world position of the centre of cell (0, 0). Anything
    outside the bitmap counts as occupied.
    """

    origin: Vec2
    resolution: float
    bits: np.ndarray
    clearance: float = DEFAULT_CLEARANCE

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.clearance < 0:
            raise ValueError("clearance must be non-negative")
        self.bits = np.ascontiguousarray(self.bits, dtype=bool)
        self.origin = Vec2(float(self.origin[0]), float(self.origin[1]))
        self._lo = (self.origin.x - 0.5 * self.resolution, self.origin.y - 0.5 * self.resolution)

    @classmethod
    def empty(cls, xmin, xmax, ymin, ymax, resolution=DEFAULT_RESOLUTION,
              clearance=DEFAULT_CLEARANCE) -> "OccupancyGrid":
        w = int(round((xmax - xmin) / resolution))
        h = int(round((ymax - ymin) / resolution))
        return cls(Vec2(xmin + 0.5 * resolution, ymin + 0.5 * resolution), resolution,
                   np.zeros((h, w), dtype=bool), clearance)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) of the covered area."""
        x0, y0 = self._lo
        return x0, x0 + self.width * self.resolution, y0, y0 + self.height * self.resolution

    def cells(self, x, y):
        """Column and row index of world coordinates (arrays)."""
        col = np.floor((np.asarray(x) - self._lo[0]) / self.resolution).astype(np.int64)
        row = np.floor((np.asarray(y) - self._lo[1]) / self.resolution).astype(np.int64)
        return col, row

    def occupied(self, x, y) -> np.ndarray:
        col, row = self.cells(x, y)
        inside = (col >= 0) & (col < self.width) & (row >= 0) & (row < self.height)
        out = np.ones(np.shape(col), dtype=bool)
        out[inside] = self.bits[row[inside], col[inside]]
        return out

    def points_free(self, x, y) -> bool:
        col, row = self.cells(x, y)
        if col.size == 0:
            return True
        if col.min() < 0 or row.min() < 0 or col.max() >= self.width or row.max() >= self.height:
            return False
        return not self.bits[row, col].any()

    def probes_free(self, x, y, psi=None) -> bool:
        """Check sample points plus their clearance probes.

        With headings ``psi`` the probes sit left and right of the heading;
        without them they sit in the four cardinal directions.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = self.clearance
        if not self.points_free(x, y):
            return False
        if c == 0.0:
            return True
        if psi is not None:
            nx = -np.sin(psi) * c
            ny = np.cos(psi) * c
            return self.points_free(np.concatenate((x + nx, x - nx)), np.concatenate((y + ny, y - ny)))
        return self.points_free(np.concatenate((x + c, x - c, x, x)), np.concatenate((y, y, y + c, y - c)))

    def segment_free(self, a, b, resolution: float | None = None) -> bool:
        """Straight-line check with cardinal clearance probes."""
        res = self.resolution if resolution is None else resolution
        L = math.hypot(b[0] - a[0], b[1] - a[1])
        n = max(1, int(math.ceil(L / res)))
        t = np.linspace(0.0, 1.0, n + 1)
        return self.probes_free(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))

    def with_cells(self, mask: np.ndarray) -> "OccupancyGrid":
        """Copy with the cells in mask additionally occupied."""
        return OccupancyGrid(self.origin, self.resolution, self.bits | mask, self.clearance)

    # -- rasterization helpers -----------------------------------------------

    def _index_range(self, lo, hi, axis_lo, n):
        a = int(math.floor((lo - axis_lo) / self.resolution))
        b = int(math.ceil((hi - axis_lo) / self.resolution))
        return max(a, 0), min(b, n)

    def fill_rect(self, xmin, xmax, ymin, ymax):
        """Occupy every cell whose centre lies in the rectangle."""
        c0, c1 = self._index_range(xmin - 0.5 * self.resolution, xmax - 0.5 * self.resolution,
                                   self._lo[0], self.width)
        r0, r1 = self._index_range(ymin - 0.5 * self.resolution, ymax - 0.5 * self.resolution,
                                   self._lo[1], self.height)
        if c1 > c0 and r1 > r0:
            cx = self.origin.x + self.resolution * np.arange(c0, c1)
            cy = self.origin.y + self.resolution * np.arange(r0, r1)
            mx = (cx >= xmin) & (cx <= xmax)
            my = (cy >= ymin) & (cy <= ymax)
            self.bits[r0:r1, c0:c1] |= my[:, None] & mx[None, :]

    def fill_circle(self, center, radius):
        x, y = center
        c0, c1 = self._index_range(x - radius - self.resolution, x + radius + self.resolution,
                                   self._lo[0], self.width)
        r0, r1 = self._index_range(y - radius - self.resolution, y + radius + self.resolution,
                                   self._lo[1], self.height)
        if c1 > c0 and r1 > r0:
            cx = self.origin.x + self.resolution * np.arange(c0, c1)
            cy = self.origin.y + self.resolution * np.arange(r0, r1)
            self.bits[r0:r1, c0:c1] |= (cx[None, :] - x) ** 2 + (cy[:, None] - y) ** 2 <= radius * radius


def collision_free(path, grid: OccupancyGrid, oriented: bool = True) -> bool:
    """True when every sample of ``path`` and its clearance probes are free.

    ``path`` needs ``x``, ``y`` and (for oriented probes) ``psi`` arrays.
    """
    return grid.probes_free(path.x, path.y, path.psi if oriented else None)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def _meta_path(path) -> Path:
    return Path(path).with_suffix(".meta")


def save_grid(grid: OccupancyGrid, path) -> None:
    """Write a binary PGM (255 = occupied) plus a ``.meta`` sidecar.

    The image is stored top row first, so the highest-y row of the grid comes first.
    """
    path = Path(path)
    data = np.where(grid.bits[::-1], 255, 0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii"))
        f.write(data.tobytes())
    with open(_meta_path(path), "w") as f:
        f.write(f"origin {grid.origin.x!r} {grid.origin.y!r}\n")
        f.write(f"resolution {grid.resolution!r}\n")
        f.write(f"clearance {grid.clearance!r}\n")


def _pgm_tokens(data: bytes, count: int, name: str):
    """Read ``count`` whitespace-separated header tokens (comments allowed)."""
    toks = []
    i = 0
    n = len(data)
    while len(toks) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise GridParseError(f"{name}: truncated header at byte offset {i}")
        j = i
        while j < n and not data[j:j + 1].isspace():
            j += 1
        toks.append((data[i:j].decode("ascii", "replace"), i))
        i = j
    return toks, i + 1  # a single whitespace byte ends the header


def load_grid(path) -> OccupancyGrid:
    path = Path(path)
    data = path.read_bytes()
    (magic, _), (w, wo), (h, ho), (mx, mo) = _pgm_tokens(data, 4, str(path))[0]
    if magic != "P5":
        raise GridParseError(f"{path}: expected magic P5 at byte offset 0, found {magic!r}")
    try:
        width, height, maxval = int(w), int(h), int(mx)
    except ValueError:
        raise GridParseError(f"{path}: non-integer header field near byte offset {wo}") from None
    if maxval != 255 or width <= 0 or height <= 0:
        raise GridParseError(f"{path}: unsupported header (width {w}, height {h}, maxval {mx}) at byte offset {mo}")
    _, start = _pgm_tokens(data, 4, str(path))
    body = data[start:]
    if len(body) != width * height:
        raise GridParseError(f"{path}: expected {width * height} pixel bytes after offset {start}, got {len(body)}")
    pix = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    bits = pix[::-1] >= 128

    meta = _meta_path(path)
    if not meta.exists():
        raise GridParseError(f"{meta}: sidecar metadata file is missing")
    vals = {}
    for lineno, line in enumerate(meta.read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        key, args = parts[0], parts[1:]
        want = {"origin": 2, "resolution": 1, "clearance": 1}.get(key)
        if want is None or len(args) != want:
            raise GridParseError(f"{meta}:{lineno}: cannot parse {line!r}")
        try:
            vals[key] = [float(a) for a in args]
        except ValueError:
            raise GridParseError(f"{meta}:{lineno}: non-numeric value in {line!r}") from None
    for key in ("origin", "resolution", "clearance"):
        if key not in vals:
            raise GridParseError(f"{meta}: missing '{key}' line")
    return OccupancyGrid(Vec2(*vals["origin"]), vals["resolution"][0], bits, vals["clearance"][0])


# ---------------------------------------------------------------------------
# worlds
# ---------------------------------------------------------------------------

@dataclass
class WorldSpec:
    """Parametric description of a planning problem.

    ``kind`` is ``empty``, ``spiral``, ``cluttered`` or ``maze``. The workspace
    is ``extent`` (width, height) centred on the origin.
    """

    kind: str
    extent: tuple[float, float]
    start: Vec2
    goal: Vec2
    psi_r: float = 0.0
    target_radius: float = 0.1
    resolution: float = DEFAULT_RESOLUTION
    clearance: float = DEFAULT_CLEARANCE
    seed: int = 0
    n_circles: int = 0
    radius_min: float = 0.5
    radius_max: float = 2.0
    rings: int = 3
    wall: float = 0.5
    ascii_map: list[str] = field(default_factory=list)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        w, h = self.extent
        return -0.5 * w, 0.5 * w, -0.5 * h, 0.5 * h


@dataclass
class World:
    spec: WorldSpec
    grid: OccupancyGrid

    @property
    def start(self) -> Vec2:
        return self.spec.start

    @property
    def goal(self) -> Vec2:
        return self.spec.goal


def _spiral(grid: OccupancyGrid, spec: WorldSpec):
    """Nested square walls around the start, each with one gap on alternating sides.

    From the start the only way out winds around every ring in turn.
    """
    cx, cy = spec.start
    n = spec.rings
    # keep the outermost ring two meters inside the goal so the goal lies outside it
    reach = min(abs(spec.goal[0] - cx), abs(spec.goal[1] - cy)) - 2.0
    if n < 1 or reach <= 0:
        raise InvalidWorldError("spiral needs at least one ring and a goal away from the start")
    spacing = reach / n
    t = 0.5 * spec.wall
    gap = 0.6 * spacing
    for k in range(1, n + 1):
        h = k * spacing
        east = k % 2 == 1
        # four sides; one side holds a gap next to a corner so the corridor spirals
        grid.fill_rect(cx - h - t, cx + h + t, cy + h - t, cy + h + t)  # north
        grid.fill_rect(cx - h - t, cx + h + t, cy - h - t, cy - h + t)  # south
        if east:
            grid.fill_rect(cx - h - t, cx - h + t, cy - h - t, cy + h + t)  # west
            grid.fill_rect(cx + h - t, cx + h + t, cy - h - t, cy + h - gap)  # east, gap at top
        else:
            grid.fill_rect(cx + h - t, cx + h + t, cy - h - t, cy + h + t)  # east
            grid.fill_rect(cx - h - t, cx - h + t, cy - h + gap, cy + h + t)  # west, gap at bottom


def _cluttered(grid: OccupancyGrid, spec: WorldSpec):
    rng = np.random.default_rng(spec.seed)
    xmin, xmax, ymin, ymax = spec.bounds
    keep = spec.clearance + 0.5
    placed = 0
    tries = 0
    while placed < spec.n_circles and tries < 100 * max(spec.n_circles, 1):
        tries += 1
        c = (rng.uniform(xmin, xmax), rng.uniform(ymin, ymax))
        r = rng.uniform(spec.radius_min, spec.radius_max)
        if math.dist(c, spec.start) < r + keep + 1.0 or math.dist(c, spec.goal) < r + keep + spec.target_radius:
            continue
        grid.fill_circle(c, r)
        placed += 1


def _maze(grid: OccupancyGrid, spec: WorldSpec):
    rows = [r for r in spec.ascii_map if r.strip("\n")]
    if not rows:
        raise InvalidWorldError("maze world needs an ascii map")
    nr, nc = len(rows), max(len(r) for r in rows)
    xmin, xmax, ymin, ymax = spec.bounds
    cw = (xmax - xmin) / nc
    ch = (ymax - ymin) / nr
    for i, row in enumerate(rows):
        for j, ch_ in enumerate(row):
            if ch_ == "#":
                # map rows are written top (max y) first
                y1 = ymax - i * ch
                grid.fill_rect(xmin + j * cw, xmin + (j + 1) * cw, y1 - ch, y1)


def connected(grid: OccupancyGrid, a, b, cell: float | None = None) -> bool:
    """Whether a and b are joined by free space after inflating obstacles by the clearance.

    The check runs on a conservatively coarsened copy of the grid (a coarse
    cell is blocked when any fine cell inside it is) to keep it cheap on large
    maps.
    """
    res = grid.resolution
    f = 1 if cell is None else max(1, int(round(cell / res)))
    h, w = grid.height // f * f, grid.width // f * f
    bits = grid.bits
    if (h, w) != bits.shape:
        pad = np.ones((-(-grid.height // f) * f, -(-grid.width // f) * f), dtype=bool)
        pad[: grid.height, : grid.width] = bits
        bits = pad
        h, w = bits.shape
    coarse = bits.reshape(h // f, f, w // f, f).any(axis=(1, 3))
    cres = res * f
    framed = np.ones((coarse.shape[0] + 2, coarse.shape[1] + 2), dtype=bool)
    framed[1:-1, 1:-1] = coarse
    dist = ndimage.distance_transform_edt(~framed) * cres
    # a coarse cell's centre can sit up to half a diagonal away from the fine point
    free = dist > grid.clearance + cres
    labels, _ = ndimage.label(free)

    def lab(p):
        col, row = grid.cells(p[0], p[1])
        return labels[int(row) // f + 1, int(col) // f + 1]

    la, lb = lab(a), lab(b)
    return bool(la != 0 and la == lb)


def generate_world(spec: WorldSpec, validate: bool = True) -> OccupancyGrid:
    xmin, xmax, ymin, ymax = spec.bounds
    if not (xmax > xmin and ymax > ymin):
        raise InvalidWorldError("extent must be positive")
    grid = OccupancyGrid.empty(xmin, xmax, ymin, ymax, spec.resolution, spec.clearance)
    kind = spec.kind.lower()
    if kind == "spiral":
        _spiral(grid, spec)
    elif kind == "cluttered":
        _cluttered(grid, spec)
    elif kind == "maze":
        _maze(grid, spec)
    elif kind != "empty":
        raise InvalidWorldError(f"unknown world kind {spec.kind!r}")
    if validate:
        for name, p in (("start", spec.start), ("goal", spec.goal)):
            if not grid.probes_free([p[0]], [p[1]]):
                raise InvalidWorldError(f"{name} {tuple(p)} is not free with clearance {spec.clearance}")
        coarse = max(spec.resolution, min(xmax - xmin, ymax - ymin) / 1000.0)
        if not connected(grid, spec.start, spec.goal, cell=coarse):
            raise InvalidWorldError("no free path between start and goal")
    return grid


def build_world(spec: WorldSpec, validate: bool = True) -> World:
    return World(spec, generate_world(spec, validate))


# -- presets ---------------------------------------------------------------

DESK_MAZE = [
    "##########",
    "#...#....#",
    "#.#.#.##.#",
    "#.#...#..#",
    "#.#####.##",
    "#.#...#..#",
    "#.#.#.##.#",
    "#...#..#.#",
    "#.###.##.#",
    "##########",
]

PAPER_MAZE = [
    "####################",
    "#.......#..........#",
    "#.#####.#.########.#",
    "#.#...#.#.#......#.#",
    "#.#.#.#.#...####.#.#",
    "#...#.#.....#..#.#.#",
    "#####.#####.#..#.#.#",
    "#.....#.....#....#.#",
    "#.#####.#####.####.#",
    "#.#.....#.....#....#",
    "#.#.#########.#.####",
    "#...#.......#.#....#",
    "#.###.#####.#.####.#",
    "#.#...#...#.#....#.#",
    "#.#.###.#.#.####.#.#",
    "#.#.#...#.#....#.#.#",
    "#.#.#.###.####.#.#.#",
    "#...#...#......#...#",
    "#####.#.############",
    "#.....#............#",
]


def preset(name: str, scale: str = "desk") -> WorldSpec:
    """Ready-made worlds: ``spiral``, ``cluttered``, ``maze`` or ``empty``.

    ``scale="paper"`` uses the full dimensions and start/goal positions of the
    reference experiments; ``scale="desk"`` shrinks them for quick runs.
    """
    name = name.lower()
    if scale not in ("desk", "paper"):
        raise ValueError("scale must be 'desk' or 'paper'")
    big = scale == "paper"
    if name == "spiral":
        if big:
            return WorldSpec("spiral", (40.0, 40.0), Vec2(0.0, 0.0), Vec2(-15.0, -15.0), psi_r=0.0, rings=3)
        return WorldSpec("spiral", (24.0, 24.0), Vec2(0.0, 0.0), Vec2(-9.0, -9.0), psi_r=0.0, rings=2)
    if name == "cluttered":
        if big:
            return WorldSpec("cluttered", (100.0, 100.0), Vec2(-40.0, -40.0), Vec2(40.0, 40.0),
                             psi_r=math.pi / 4, n_circles=150, radius_min=1.0, radius_max=5.0, seed=1)
        return WorldSpec("cluttered", (30.0, 30.0), Vec2(-12.0, -12.0), Vec2(12.0, 12.0),
                         psi_r=math.pi / 4, n_circles=25, radius_min=0.5, radius_max=2.0, seed=1)
    if name == "maze":
        if big:
            return WorldSpec("maze", (50.0, 50.0), Vec2(-11.0, -22.5), Vec2(2.5, 12.5),
                             psi_r=math.pi / 2, ascii_map=list(PAPER_MAZE))
        return WorldSpec("maze", (25.0, 25.0), Vec2(-8.75, -8.75), Vec2(8.75, -8.75),
                         psi_r=math.pi / 2, ascii_map=list(DESK_MAZE))
    if name == "empty":
        e = 30.0 if big else 10.0
        return WorldSpec("empty", (e, e), Vec2(-0.3 * e, -0.3 * e), Vec2(0.3 * e, 0.3 * e), psi_r=0.0)
    raise ValueError(f"unknown preset {name!r}")


# -- world spec files --------------------------------------------------------

def parse_world_spec(text: str, name: str = "<world>") -> WorldSpec:
    """Parse the flat ``key = value`` world format.

    Keys: kind, extent (w h), start (x y), goal (x y), psi_r, target_radius,
    resolution, clearance, seed, n_circles, radius_min, radius_max, rings,
    wall, and ``map:`` followed by ASCII map lines to the end of the file.
    ``preset = <name> [desk|paper]`` starts from a preset and lets later keys override it.
    """
    fields: dict = {}
    ascii_map: list[str] | None = None
    base: WorldSpec | None = None
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, 1):
        if ascii_map is not None:
            ascii_map.append(raw.rstrip())
            continue
        line = raw.split("#", 1)[0].strip() if not raw.strip().startswith("map") else raw.strip()
        if not line:
            continue
        if line.rstrip(":") == "map":
            ascii_map = []
            continue
        key, sep, val = line.partition("=")
        if not sep:
            key, _, val = line.partition(" ")
        key, val = key.strip().lower(), val.strip()
        try:
            if key == "preset":
                parts = val.split()
                base = preset(parts[0], parts[1] if len(parts) > 1 else "desk")
            elif key == "kind":
                fields["kind"] = val.lower()
            elif key in ("extent", "start", "goal"):
                a, b = (float(v) for v in val.replace(",", " ").split())
                fields[key] = (a, b) if key == "extent" else Vec2(a, b)
            elif key in ("psi_r", "target_radius", "resolution", "clearance", "radius_min",
                         "radius_max", "wall"):
                fields[key] = float(val)
            elif key in ("seed", "n_circles", "rings"):
                fields[key] = int(val)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise InvalidWorldError(f"{name}:{lineno}: {exc}") from None
    if ascii_map is not None:
        fields["ascii_map"] = [r for r in ascii_map if r.strip()]
    if base is not None:
        for k, v in fields.items():
            setattr(base, k, v)
        return base
    missing = [k for k in ("kind", "extent", "start", "goal") if k not in fields]
    if missing:
        raise InvalidWorldError(f"{name}: missing keys {missing}")
    return WorldSpec(**fields)


def format_world_spec(spec: WorldSpec) -> str:
    lines = [
        f"kind = {spec.kind}",
        f"extent = {spec.extent[0]!r} {spec.extent[1]!r}",
        f"start = {spec.start[0]!r} {spec.start[1]!r}",
        f"goal = {spec.goal[0]!r} {spec.goal[1]!r}",
        f"psi_r = {spec.psi_r!r}",
        f"target_radius = {spec.target_radius!r}",
        f"resolution = {spec.resolution!r}",
        f"clearance = {spec.clearance!r}",
        f"seed = {spec.seed}",
        f"n_circles = {spec.n_circles}",
        f"radius_min = {spec.radius_min!r}",
        f"radius_max = {spec.radius_max!r}",
        f"rings = {spec.rings}",
        f"wall = {spec.wall!r}",
    ]
    if spec.ascii_map:
        lines.append("map:")
        lines.extend(spec.ascii_map)
    return "\n".join(lines) + "\n"


def load_world(arg: str, validate: bool = True) -> World:
    """World from a spec file path or from an inline ``preset[:scale]`` name such as ``maze:desk``."""
    p = Path(arg)
    if p.exists():
        return build_world(parse_world_spec(p.read_text(), str(p)), validate)
    name, _, scale = arg.partition(":")
    try:
        spec = preset(name, scale or "desk")
    except ValueError:
        raise InvalidWorldError(f"{arg!r} is neither a world file nor a preset name") from None
    return build_world(spec, validate)
