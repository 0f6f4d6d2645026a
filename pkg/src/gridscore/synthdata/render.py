"""Rasterise synthetic shed-drawing responses on a 16x16 cell grid.

Geometry is expressed in cell coordinates (grid points 0..16, x to the
right, y downwards).  Grid point ``k`` sits on pixel ``min(4k, 63)``.

A full-credit answer draws a 4x3 back wall and two pentagonal side walls
(2 cells deep, 3 cells high, roof apex 1 cell above the walls).
"""

from dataclasses import dataclass

import numpy as np

from ..errors import GenerationError, ValidationError

SIZE = 64
GRID = 16
CELL = SIZE // GRID
WHITE, GRID_GRAY, INK = 255, 128, 0

WALL = (4, 3)
MAX_ATTEMPTS = 100

VARIANTS = {
    0: {"blank": 0.15, "scribble": 0.25, "near_miss": 0.30, "sides_only": 0.15, "skewed": 0.15},
    1: {"wall_only": 0.45, "wrong_sides": 0.35, "one_side": 0.20},
    2: {"net": 0.6, "separate": 0.4},
}


def gp(k):
    """Pixel coordinate of grid point ``k``."""
    return min(CELL * int(k), SIZE - 1)


def grid_template():
    img = np.full((SIZE, SIZE), WHITE, dtype=np.uint8)
    lines = [gp(k) for k in range(GRID + 1)]
    img[lines, :] = GRID_GRAY
    img[:, lines] = GRID_GRAY
    return img


def line_pixels(x0, y0, x1, y1):
    """Bresenham pixels between two points, endpoints included.

    Endpoints are put in a canonical order first, so a segment rasterises to
    the same pixels whichever way round it is drawn.
    """
    if (x1, y1) < (x0, y0):
        x0, y0, x1, y1 = x1, y1, x0, y0
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    pts = []
    while True:
        pts.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def draw_pixel_line(img, x0, y0, x1, y1):
    for x, y in line_pixels(x0, y0, x1, y1):
        img[y, x] = INK


def draw_segment(img, a, b):
    draw_pixel_line(img, gp(a[0]), gp(a[1]), gp(b[0]), gp(b[1]))


def draw_polygon(img, pts):
    for a, b in zip(pts, pts[1:] + pts[:1]):
        draw_segment(img, a, b)


@dataclass
class Style:
    """Rendering knobs.

    ``variant`` forces a specific drawing variant (see ``VARIANTS``);
    ``None`` draws one at random.  ``orientation`` restricts the back wall to
    ``"landscape"`` (4 wide) or ``"portrait"`` (3 wide); ``"any"`` allows both.
    ``stroke_width`` 2 thickens every stroke by one pixel to the right and below.
    ``jitter`` limits how far (in cells) a figure may sit from the grid centre;
    ``None`` lets it sit anywhere.  ``border_rate`` still pushes a figure flush
    against a grid edge regardless of ``jitter``.  ``layout`` arranges separately drawn pieces
    either ``"scattered"`` over the grid or in a ``"row"`` with one free cell
    between neighbours.
    """

    variant: str = None
    orientation: str = "any"
    border_rate: float = 0.2
    extraneous_rate: float = 0.1
    split_wall_rate: float = 0.05
    scribble_strokes: int = 4
    stroke_width: int = 2
    jitter: int = 2
    layout: str = "row"

    def __post_init__(self):
        if self.orientation not in ("any", "landscape", "portrait"):
            raise ValidationError(f"unknown orientation {self.orientation!r}")
        for name in ("border_rate", "extraneous_rate", "split_wall_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.scribble_strokes < 1:
            raise ValidationError("scribble_strokes must be at least 1")
        if self.stroke_width not in (1, 2):
            raise ValidationError("stroke_width must be 1 or 2")
        if self.jitter is not None and self.jitter < 0:
            raise ValidationError("jitter must be non-negative")
        if self.layout not in ("scattered", "row"):
            raise ValidationError(f"unknown layout {self.layout!r}")


def rect(w, h, x=0, y=0):
    return [(x, y), (x + w, y), (x + w, y + h), (x, y + h)]


def pentagon(depth=2, wall=3, peak=1):
    """Side wall: base at the bottom, walls ``wall`` high, apex ``peak`` above them."""
    top = peak + wall
    return [(0, top), (depth, top), (depth, peak), (depth / 2, 0), (0, peak)]


def rotate(shapes, quarter_turns):
    """Rotate polygons by 90 degree steps and shift them back to the origin."""
    out = shapes
    for _ in range(quarter_turns % 4):
        out = [[(-y, x) for x, y in poly] for poly in out]
    return normalize(out)


def normalize(shapes):
    xs = [x for poly in shapes for x, _ in poly]
    ys = [y for poly in shapes for _, y in poly]
    mx, my = min(xs), min(ys)
    return [[(x - mx, y - my) for x, y in poly] for poly in shapes]


def bbox(shapes):
    xs = [x for poly in shapes for x, _ in poly]
    ys = [y for poly in shapes for _, y in poly]
    return min(xs), min(ys), max(xs), max(ys)


def translate(shapes, dx, dy):
    return [[(x + dx, y + dy) for x, y in poly] for poly in shapes]


def _wall_turns(style, rng):
    if style.orientation == "landscape":
        return int(rng.choice([0, 2]))
    if style.orientation == "portrait":
        return int(rng.choice([1, 3]))
    return int(rng.integers(4))


def _net(wall, left, right):
    """Back wall with side walls attached to its left and right edges, bases aligned."""
    ww, wh = wall
    l_bb, r_bb = bbox([left]), bbox([right])
    l_w, l_h = l_bb[2], l_bb[3]
    r_h = r_bb[3]
    top = max(l_h, r_h, wh)
    shapes = [
        translate([left], 0, top - l_h)[0],
        rect(ww, wh, l_w, top - wh),
        translate([right], l_w + ww, top - r_h)[0],
    ]
    return shapes


def _place(shapes, style, rng):
    """Random translation keeping the figure on the grid, optionally flush with the border."""
    x0, y0, x1, y1 = bbox(shapes)
    w, h = x1 - x0, y1 - y0
    if w > GRID or h > GRID:
        raise GenerationError(f"figure of {w}x{h} cells does not fit the grid")
    if style.jitter is None:
        dx = int(rng.integers(0, GRID - w + 1))
        dy = int(rng.integers(0, GRID - h + 1))
    else:
        j = style.jitter
        dx = min(max((GRID - w) // 2 + int(rng.integers(-j, j + 1)), 0), GRID - w)
        dy = min(max((GRID - h) // 2 + int(rng.integers(-j, j + 1)), 0), GRID - h)
    if rng.random() < style.border_rate:
        side = int(rng.integers(4))
        if side == 0:
            dx = 0
        elif side == 1:
            dx = GRID - w
        elif side == 2:
            dy = 0
        else:
            dy = GRID - h
    return translate(shapes, dx - x0, dy - y0)


def _row(pieces):
    """Pieces left to right, bases aligned, one free cell between bounding boxes."""
    pieces = [normalize(p) for p in pieces]
    out, x = [], 0
    bottom = max(bbox(p)[3] for p in pieces)
    for piece in pieces:
        _, _, w, h = bbox(piece)
        out += translate(piece, x, bottom - h)
        x += w + 1
    return out


def _place_separately(pieces, style, rng):
    """Place each piece (a list of polygons) with a free cell between bounding boxes."""
    if style.layout == "row":
        return _place(rotate(_row(pieces), _wall_turns(style, rng)), style, rng)
    for _ in range(MAX_ATTEMPTS):
        placed, boxes = [], []
        for piece in pieces:
            moved = _place(rotate(piece, int(rng.integers(4))), style, rng)
            bx = bbox(moved)
            if any(
                bx[0] <= ob[2] + 1 and ob[0] <= bx[2] + 1 and bx[1] <= ob[3] + 1 and ob[1] <= bx[3] + 1
                for ob in boxes
            ):
                break
            placed += moved
            boxes.append(bx)
        else:
            return placed
    raise GenerationError(f"could not place {len(pieces)} shapes without overlap in {MAX_ATTEMPTS} attempts")


def _wall_dividers(wall_poly):
    """Internal lines splitting a wall rectangle into unit-wide strips along its long side."""
    x0, y0, x1, y1 = bbox([wall_poly])
    if x1 - x0 >= y1 - y0:
        return [[(x, y0), (x, y1)] for x in range(int(x0) + 1, int(x1))]
    return [[(x0, y), (x1, y)] for y in range(int(y0) + 1, int(y1))]


def _random_stroke(img, rng):
    x0, y0, x1, y1 = (int(v) for v in rng.integers(0, SIZE, size=4))
    draw_pixel_line(img, x0, y0, x1, y1)


# Dimensionally wrong side walls: half height, double depth (shallow roof) or flat-topped.
WRONG_SIDES = (
    pentagon(depth=2, wall=1, peak=1),
    pentagon(depth=4, wall=3, peak=1),
    pentagon(depth=4, wall=2, peak=1),
    rect(2, 3),
)


def trapezoid(w, h):
    """Back wall whose top edge is one cell shorter at each end."""
    return [(1, 0), (w - 1, 0), (w, h), (0, h)]


def _figure(true_score, variant, style, rng):
    """Return ``(closed_polygons, open_polylines)`` for one response."""
    wall = rect(*WALL)
    side = pentagon()
    lines = []
    if variant == "blank":
        return [], []
    if variant == "scribble":
        return [], None
    if variant == "net":
        shapes = _place(rotate(_net(WALL, side, side), _wall_turns(style, rng)), style, rng)
    elif variant == "separate":
        shapes = _place_separately([[wall], [side], [side]], style, rng)
    elif variant == "wall_only":
        shapes = _place(rotate([wall], _wall_turns(style, rng)), style, rng)
    elif variant == "wrong_sides":
        wrong = WRONG_SIDES[int(rng.integers(len(WRONG_SIDES)))]
        if rng.random() < 0.5:
            shapes = _place(rotate(_net(WALL, wrong, wrong), _wall_turns(style, rng)), style, rng)
        else:
            shapes = _place_separately([[wall], [wrong], [wrong]], style, rng)
    elif variant == "one_side":
        wrong = WRONG_SIDES[int(rng.integers(len(WRONG_SIDES)))]
        shapes = _place_separately([[wall], [side], [wrong]], style, rng)
    elif variant == "near_miss":
        pieces = [[trapezoid(*WALL)]]
        if rng.random() < 0.5:
            pieces += [[side], [side]]
        shapes = _place_separately(pieces, style, rng)
    elif variant == "sides_only":
        shapes = _place_separately([[side], [side]], style, rng)
    elif variant == "skewed":
        w, h = WALL
        skew = int(rng.choice([-1, 1]))
        poly = [(max(0, -skew), 0), (max(0, -skew) + w, 0), (max(0, skew) + w, h), (max(0, skew), h)]
        pieces = [[poly]]
        if rng.random() < 0.5:
            pieces += [[side], [side]]
        shapes = _place_separately(pieces, style, rng)
    else:
        raise ValidationError(f"variant {variant!r} is not defined for score {true_score}")
    if true_score >= 1 and rng.random() < style.split_wall_rate:
        wall_poly = next(p for p in shapes if len(p) == 4)
        lines = _wall_dividers(wall_poly)
    return shapes, lines


def render_response(true_score, style=None, rng=None):
    """Render one 64x64 uint8 response image whose content earns ``true_score``."""
    if true_score not in VARIANTS:
        raise ValidationError(f"true score must be 0, 1 or 2, got {true_score}")
    if rng is None:
        raise ValidationError("render_response needs a random generator")
    style = style or Style()
    options = VARIANTS[true_score]
    variant = style.variant
    if variant is None:
        names = list(options)
        variant = names[int(rng.choice(len(names), p=list(options.values())))]
    elif variant not in options:
        raise ValidationError(f"variant {variant!r} is not defined for score {true_score}")
    canvas = np.full((SIZE, SIZE), WHITE, dtype=np.uint8)
    shapes, lines = _figure(true_score, variant, style, rng)
    if lines is None:
        for _ in range(int(rng.integers(1, style.scribble_strokes + 1))):
            _random_stroke(canvas, rng)
    else:
        for poly in shapes:
            draw_polygon(canvas, poly)
        for a, b in lines:
            draw_segment(canvas, a, b)
        if variant != "blank" and rng.random() < style.extraneous_rate:
            for _ in range(int(rng.integers(1, 3))):
                _random_stroke(canvas, rng)
    ink = canvas == INK
    if style.stroke_width == 2:
        ink = thicken(ink)
    img = grid_template()
    img[ink] = INK
    return img


def thicken(ink):
    """Dilate a boolean ink mask with a 2x2 block anchored at the top-left."""
    out = ink.copy()
    out[:, 1:] |= ink[:, :-1]
    out[1:, :] |= ink[:-1, :]
    out[1:, 1:] |= ink[:-1, :-1]
    return out
