"""Pixel-level measurement of grid drawings.

Reads only pixels: an inked unit segment between neighbouring grid points
is one whose every rasterised pixel is dark.  From the segment map it finds
closed axis-aligned rectangles and closed side-wall pentagons, which is
enough to score the synthetic item independently of the renderer.
"""

import numpy as np

from .render import GRID, gp, line_pixels

INK_THRESHOLD = 64


def _inked(mask, a, b):
    return all(mask[y, x] for x, y in line_pixels(gp(a[0]), gp(a[1]), gp(b[0]), gp(b[1])))


class SegmentMap:
    def __init__(self, pixels):
        mask = np.asarray(pixels) < INK_THRESHOLD
        n = GRID + 1
        self.h = np.zeros((n, n), dtype=bool)  # (x, y) -> (x+1, y)
        self.v = np.zeros((n, n), dtype=bool)  # (x, y) -> (x, y+1)
        self.d_down = np.zeros((n, n), dtype=bool)  # (x, y) -> (x+1, y+1)
        self.d_up = np.zeros((n, n), dtype=bool)  # (x, y+1) -> (x+1, y)
        for x in range(n):
            for y in range(n):
                if x < GRID:
                    self.h[x, y] = _inked(mask, (x, y), (x + 1, y))
                if y < GRID:
                    self.v[x, y] = _inked(mask, (x, y), (x, y + 1))
                if x < GRID and y < GRID:
                    self.d_down[x, y] = _inked(mask, (x, y), (x + 1, y + 1))
                    self.d_up[x, y] = _inked(mask, (x, y + 1), (x + 1, y))

    def hrun(self, x, y, length):
        return bool(self.h[x:x + length, y].all())

    def vrun(self, x, y, length):
        return bool(self.v[x, y:y + length].all())

    def closed_rect(self, x, y, w, h):
        return (
            self.hrun(x, y, w) and self.hrun(x, y + h, w)
            and self.vrun(x, y, h) and self.vrun(x + w, y, h)
        )

    def rectangles(self, w, h):
        """Top-left corners of every closed ``w x h`` rectangle."""
        return [
            (x, y)
            for x in range(GRID - w + 1)
            for y in range(GRID - h + 1)
            if self.closed_rect(x, y, w, h)
        ]

    def side_walls(self):
        """Closed pentagons 2 deep, 3 high with a 1-cell roof apex, in any of 4 orientations."""
        found = []
        for x in range(GRID + 1):
            for y in range(GRID + 1):
                # apex up: walls x..x+2, apex row y, eaves y+1, base y+4
                if x + 2 <= GRID and y + 4 <= GRID:
                    if (self.d_up[x, y] and self.d_down[x + 1, y] and self.vrun(x, y + 1, 3)
                            and self.vrun(x + 2, y + 1, 3) and self.hrun(x, y + 4, 2)):
                        found.append(("up", x, y))
                # apex down: base y, eaves y+3, apex y+4
                if x + 2 <= GRID and y + 4 <= GRID:
                    if (self.d_down[x, y + 3] and self.d_up[x + 1, y + 3] and self.vrun(x, y, 3)
                            and self.vrun(x + 2, y, 3) and self.hrun(x, y, 2)):
                        found.append(("down", x, y))
                # apex left: apex column x, eaves x+1, base x+4, walls y..y+2
                if x + 4 <= GRID and y + 2 <= GRID:
                    if (self.d_up[x, y] and self.d_down[x, y + 1] and self.hrun(x + 1, y, 3)
                            and self.hrun(x + 1, y + 2, 3) and self.vrun(x + 4, y, 2)):
                        found.append(("left", x, y))
                # apex right: base x, eaves x+3, apex x+4
                if x + 4 <= GRID and y + 2 <= GRID:
                    if (self.d_down[x + 3, y] and self.d_up[x + 3, y + 1] and self.hrun(x, y, 3)
                            and self.hrun(x, y + 2, 3) and self.vrun(x, y, 2)):
                        found.append(("right", x, y))
        return found


def back_wall_dims(pixels):
    """Cell dimensions ``(w, h)`` of every closed 4x3 or 3x4 rectangle in the image."""
    seg = SegmentMap(pixels)
    return [(4, 3)] * len(seg.rectangles(4, 3)) + [(3, 4)] * len(seg.rectangles(3, 4))


def measure_score(pixels):
    """Score by the synthetic rubric: wall + two sides = 2, wall only = 1, else 0."""
    seg = SegmentMap(pixels)
    if not (seg.rectangles(4, 3) or seg.rectangles(3, 4)):
        return 0
    return 2 if len(seg.side_walls()) >= 2 else 1
