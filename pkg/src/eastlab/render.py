"""Raster snapshots of a two-dimensional run as portable pixmaps.

One pixel per lattice site, origin at the lower left: white background,
grey for sites updated at least once by the snapshot time, black for sites
vacant at the snapshot time. Binary PPM (P6) keeps the output dependency
free and bit exact.
"""

from .dynamics import SimulationResult
from .lattice import Box

WHITE = (255, 255, 255)
GREY = (128, 128, 128)
BLACK = (0, 0, 0)

PIXEL_CAP = 4096 * 4096


def _window_of(result: SimulationResult, window) -> Box:
    if window is not None:
        return window
    lengths = (
        result.tracked_extent
        if result.mode == "lazy"
        else result.domain_lengths
    )
    return Box((0, 0), tuple(int(c) for c in lengths))


def shape_render(result: SimulationResult, t: float, out, window=None) -> None:
    """Write the time-t snapshot of a d=2 run as a P6 pixmap.

    The run must carry its event list so that current vacancies at t can be
    reconstructed; the snapshot time must not exceed the simulated horizon.
    """
    if result.dim != 2:
        raise ValueError("shape rendering is defined for d = 2 runs")
    if t < 0.0 or t > result.t_end:
        raise ValueError(
            f"snapshot time {t} outside the recorded horizon [0, {result.t_end}]"
        )
    if result.n_events > 0 and not result.events:
        raise ValueError("run was not recorded with record_events=True")
    win = _window_of(result, window)
    if win.dim != 2:
        raise ValueError("window must be two-dimensional")
    width = win.lengths[0] + 1
    height = win.lengths[1] + 1
    if width * height > PIXEL_CAP:
        raise ValueError(f"window of {width}x{height} pixels exceeds the cap")

    vacant = set(result.initial_vacancies)
    touched = set()
    for et, site, v in result.events:
        if et > t:
            break
        touched.add(site)
        if v == 0:
            vacant.add(site)
        else:
            vacant.discard(site)

    ox, oy = win.origin
    row = bytearray()
    img = bytearray()
    for r in range(height):
        row.clear()
        y = oy + height - 1 - r
        for c in range(width):
            s = (ox + c, y)
            if s in vacant:
                row.extend(BLACK)
            elif s in touched:
                row.extend(GREY)
            else:
                row.extend(WHITE)
        img.extend(row)
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    if hasattr(out, "write"):
        out.write(header + bytes(img))
    else:
        with open(out, "wb") as fh:
            fh.write(header + bytes(img))


def read_ppm(path) -> tuple:
    """Parse a P6 file back into (width, height, pixel rows) for checks."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise ValueError("not a binary pixmap")
    parts = data.split(b"\n", 3)
    width, height = map(int, parts[1].split())
    if parts[2] != b"255":
        raise ValueError("unexpected color depth")
    body = parts[3]
    if len(body) != 3 * width * height:
        raise ValueError("pixel payload truncated")
    rows = []
    for r in range(height):
        row = []
        for c in range(width):
            o = 3 * (r * width + c)
            row.append((body[o], body[o + 1], body[o + 2]))
        rows.append(row)
    return width, height, rows
