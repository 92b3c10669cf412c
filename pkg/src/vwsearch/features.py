"""Interest-point detection and 64-d local descriptors.

Blob detection uses box-filter approximations of second-order Gaussian
derivatives evaluated on the integral image (a Fast-Hessian style
detector), followed by 3x3x3 scale-space non-maximum suppression and
sub-pixel interpolation.  Descriptors are the classic 4x4-cell layout of
Gaussian-weighted Haar wavelet responses, L2-normalized.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .image import (
    MIN_DETECT_SIZE,
    GrayscaleImage,
    IntegralImage,
    box_sum,
    box_sum_grid,
    compute_integral_image,
)

# Filter side lengths per octave; middle intervals never repeat across
# octaves, so no cross-octave duplicate suppression is needed.
FILTER_SIZES = (
    (9, 15, 21, 27),
    (15, 27, 39, 51),
    (27, 51, 75, 99),
    (51, 99, 147, 195),
)
INIT_SAMPLE = 2
DEFAULT_THRESHOLD = 1e-4
DXY_WEIGHT = 0.9
SCALE_PER_FILTER = 1.2 / 9.0  # sigma of the matched filter per unit side length

POINT_MAGIC = b"TSIP"
POINT_VERSION = 1


@dataclass(frozen=True)
class InterestPoint:
    x: float
    y: float
    scale: float
    orientation: float
    laplacian_sign: int
    response: float
    descriptor: np.ndarray  # 64 components, unit L2 norm or all-zero

    def __post_init__(self):
        object.__setattr__(
            self, "descriptor", np.asarray(self.descriptor, dtype=np.float64)
        )


def hessian_response(ii: IntegralImage, x: int, y: int, filter_size: int) -> float:
    """Approximate Hessian determinant at (x, y) for one filter side length.

    Box responses are normalized by filter area; the mixed term carries the
    standard 0.9 weight.
    """
    if filter_size < 9 or filter_size % 2 == 0:
        raise InvalidInputError("filter_size must be odd and >= 9")
    l = filter_size // 3
    w = filter_size
    b = (w - 1) // 2
    inv = 1.0 / (w * w)
    r, c = y, x
    dxx = box_sum(ii, c - b, r - l + 1, w, 2 * l - 1) - 3.0 * box_sum(
        ii, c - l // 2, r - l + 1, l, 2 * l - 1
    )
    dyy = box_sum(ii, c - l + 1, r - b, 2 * l - 1, w) - 3.0 * box_sum(
        ii, c - l + 1, r - l // 2, 2 * l - 1, l
    )
    dxy = (
        box_sum(ii, c + 1, r - l, l, l)
        + box_sum(ii, c - l, r + 1, l, l)
        - box_sum(ii, c - l, r - l, l, l)
        - box_sum(ii, c + 1, r + 1, l, l)
    )
    dxx *= inv
    dyy *= inv
    dxy *= inv
    return dxx * dyy - (DXY_WEIGHT * dxy) ** 2


def _response_layer(ii: IntegralImage, filter_size: int, step: int):
    """Determinant and Laplacian-sign maps on a subsampled grid."""
    l = filter_size // 3
    w = filter_size
    b = (w - 1) // 2
    inv = 1.0 / (w * w)
    ny = ii.height // step
    nx = ii.width // step
    rows = (np.arange(ny) * step)[:, None]
    cols = (np.arange(nx) * step)[None, :]
    dxx = box_sum_grid(ii, rows - l + 1, cols - b, 2 * l - 1, w) - 3.0 * box_sum_grid(
        ii, rows - l + 1, cols - l // 2, 2 * l - 1, l
    )
    dyy = box_sum_grid(ii, rows - b, cols - l + 1, w, 2 * l - 1) - 3.0 * box_sum_grid(
        ii, rows - l // 2, cols - l + 1, l, 2 * l - 1
    )
    dxy = (
        box_sum_grid(ii, rows - l, cols + 1, l, l)
        + box_sum_grid(ii, rows + 1, cols - l, l, l)
        - box_sum_grid(ii, rows - l, cols - l, l, l)
        - box_sum_grid(ii, rows + 1, cols + 1, l, l)
    )
    dxx *= inv
    dyy *= inv
    dxy *= inv
    det = dxx * dyy - (DXY_WEIGHT * dxy) ** 2
    lap = np.where(dxx + dyy >= 0, 1, -1).astype(np.int8)
    return det, lap


def _neighborhood_max(stack: np.ndarray) -> np.ndarray:
    """Max over the 26 neighbors (center excluded) of each interior cell of a
    (3, ny, nx) stack; returns an (ny-2, nx-2) array for the middle layer."""
    ny, nx = stack.shape[1], stack.shape[2]
    best = np.full((ny - 2, nx - 2), -np.inf)
    for dl in range(3):
        for dr in range(3):
            for dc in range(3):
                if dl == 1 and dr == 1 and dc == 1:
                    continue
                view = stack[dl, dr : dr + ny - 2, dc : dc + nx - 2]
                np.maximum(best, view, out=best)
    return best


def _interpolate(maps, i, r, c, sizes, step):
    """Quadratic fit around a discrete maximum; offsets clamped to +-0.5."""
    v = maps[i][r, c]
    dx = (maps[i][r, c + 1] - maps[i][r, c - 1]) / 2.0
    dy = (maps[i][r + 1, c] - maps[i][r - 1, c]) / 2.0
    ds = (maps[i + 1][r, c] - maps[i - 1][r, c]) / 2.0
    dxx = maps[i][r, c + 1] - 2 * v + maps[i][r, c - 1]
    dyy = maps[i][r + 1, c] - 2 * v + maps[i][r - 1, c]
    dss = maps[i + 1][r, c] - 2 * v + maps[i - 1][r, c]
    dxy = (
        maps[i][r + 1, c + 1]
        - maps[i][r + 1, c - 1]
        - maps[i][r - 1, c + 1]
        + maps[i][r - 1, c - 1]
    ) / 4.0
    dxs = (
        maps[i + 1][r, c + 1]
        - maps[i + 1][r, c - 1]
        - maps[i - 1][r, c + 1]
        + maps[i - 1][r, c - 1]
    ) / 4.0
    dys = (
        maps[i + 1][r + 1, c]
        - maps[i + 1][r - 1, c]
        - maps[i - 1][r + 1, c]
        + maps[i - 1][r - 1, c]
    ) / 4.0
    H = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
    g = np.array([dx, dy, ds])
    try:
        offset = -np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        offset = np.zeros(3)
    offset = np.clip(offset, -0.5, 0.5)
    x = (c + offset[0]) * step
    y = (r + offset[1]) * step
    dsize = (sizes[i + 1] - sizes[i - 1]) / 2.0
    size = sizes[i] + offset[2] * dsize
    return x, y, SCALE_PER_FILTER * size


def _haar_x(ii: IntegralImage, rows, cols, size: int):
    h = size // 2
    return box_sum_grid(ii, rows - h, cols, size, h) - box_sum_grid(
        ii, rows - h, cols - h, size, h
    )


def _haar_y(ii: IntegralImage, rows, cols, size: int):
    h = size // 2
    return box_sum_grid(ii, rows, cols - h, h, size) - box_sum_grid(
        ii, rows - h, cols - h, h, size
    )


# Orientation sampling disc: offsets within radius 6 (in units of scale).
_ORI_OFFSETS = np.array(
    [(i, j) for i in range(-6, 7) for j in range(-6, 7) if i * i + j * j < 36]
)
_ORI_GAUSS = np.exp(
    -(_ORI_OFFSETS[:, 0] ** 2 + _ORI_OFFSETS[:, 1] ** 2) / (2.0 * 2.5**2)
)
_ORI_WINDOW = math.pi / 3.0
_ORI_STEPS = np.arange(0.0, 2.0 * math.pi, 0.15)


def assign_orientation(ii: IntegralImage, x: float, y: float, scale: float) -> float:
    """Dominant direction from a sliding 60-degree window over Haar responses."""
    s = max(1, int(round(scale)))
    px = int(round(x)) + _ORI_OFFSETS[:, 0] * s
    py = int(round(y)) + _ORI_OFFSETS[:, 1] * s
    gx = _ORI_GAUSS * _haar_x(ii, py, px, 4 * s)
    gy = _ORI_GAUSS * _haar_y(ii, py, px, 4 * s)
    mag = gx * gx + gy * gy
    if not np.any(mag > 0):
        return 0.0
    ang = np.mod(np.arctan2(gy, gx), 2.0 * math.pi)
    # membership matrix: window k contains sample j
    rel = np.mod(ang[None, :] - _ORI_STEPS[:, None], 2.0 * math.pi)
    member = rel < _ORI_WINDOW
    sum_x = member @ gx
    sum_y = member @ gy
    best = int(np.argmax(sum_x * sum_x + sum_y * sum_y))
    return float(np.mod(math.atan2(sum_y[best], sum_x[best]), 2.0 * math.pi))


# Descriptor sampling grid: 20x20 samples, 4x4 cells of 5x5.
_D_I, _D_J = np.meshgrid(np.arange(-10, 10) + 0.5, np.arange(-10, 10) + 0.5, indexing="ij")
_D_I = _D_I.ravel()
_D_J = _D_J.ravel()
_D_GAUSS = np.exp(-(_D_I**2 + _D_J**2) / (2.0 * 3.3**2))
_D_CELL = (np.floor((_D_I + 10) / 5).astype(int) * 4 + np.floor((_D_J + 10) / 5).astype(int))

ZERO_NORM_EPS = 1e-12


def compute_descriptor(
    ii: IntegralImage, x: float, y: float, scale: float, orientation: float
) -> np.ndarray:
    """64-component descriptor: per-cell (sum dx, sum |dx|, sum dy, sum |dy|)
    of Gaussian-weighted Haar responses in the oriented frame, L2-normalized.

    Flat neighborhoods (pre-normalization norm below 1e-12) come back as the
    all-zero vector; callers drop those before word assignment.
    """
    co = math.cos(orientation)
    si = math.sin(orientation)
    sx = np.rint(x + scale * (_D_I * co - _D_J * si)).astype(int)
    sy = np.rint(y + scale * (_D_I * si + _D_J * co)).astype(int)
    hs = max(1, int(round(scale)))
    rx = _haar_x(ii, sy, sx, 2 * hs)
    ry = _haar_y(ii, sy, sx, 2 * hs)
    dx = _D_GAUSS * (rx * co + ry * si)
    dy = _D_GAUSS * (-rx * si + ry * co)
    desc = np.zeros(64)
    np.add.at(desc, _D_CELL * 4 + 0, dx)
    np.add.at(desc, _D_CELL * 4 + 1, np.abs(dx))
    np.add.at(desc, _D_CELL * 4 + 2, dy)
    np.add.at(desc, _D_CELL * 4 + 3, np.abs(dy))
    norm = float(np.linalg.norm(desc))
    if norm < ZERO_NORM_EPS:
        return np.zeros(64)
    return desc / norm


def _find_candidates(ii: IntegralImage, threshold: float):
    """Scale-space maxima above threshold across all octaves."""
    out = []
    for octave, sizes in enumerate(FILTER_SIZES):
        step = INIT_SAMPLE * 2**octave
        ny = ii.height // step
        nx = ii.width // step
        if ny < 3 or nx < 3:
            continue
        maps = []
        laps = []
        for size in sizes:
            det, lap = _response_layer(ii, size, step)
            maps.append(det)
            laps.append(lap)
        for i in (1, 2):
            # require the largest filter of the triple to fit inside the image
            margin = (sizes[i + 1] // 2 + 1) // step + 1
            stack = np.stack([maps[i - 1], maps[i], maps[i + 1]])
            neigh = _neighborhood_max(stack)
            center = maps[i][1 : ny - 1, 1 : nx - 1]
            is_max = (center > threshold) & (center > neigh)
            rs, cs = np.nonzero(is_max)
            for r0, c0 in zip(rs, cs):
                r, c = int(r0) + 1, int(c0) + 1
                if r < margin or c < margin or r >= ny - margin or c >= nx - margin:
                    continue
                x, y, scale = _interpolate(maps, i, r, c, sizes, step)
                if not (0 <= x < ii.width and 0 <= y < ii.height):
                    continue
                out.append(
                    (
                        float(maps[i][r, c]),
                        float(x),
                        float(y),
                        float(scale),
                        int(laps[i][r, c]),
                    )
                )
    return out


def detect_interest_points(
    img: GrayscaleImage,
    max_points: int,
    threshold: float = DEFAULT_THRESHOLD,
    upright: bool = False,
    sample_mode: str = "top",
    seed: int | None = None,
) -> list[InterestPoint]:
    """Detect up to ``max_points`` interest points, strongest response first.

    ``sample_mode="top"`` keeps the strongest responses; ``"random"`` draws a
    seeded uniform sample from all candidates instead (both orderings are
    response-descending in the result).  Deterministic for identical input.
    """
    if max_points < 1:
        raise InvalidInputError("max_points must be >= 1")
    if img.width < MIN_DETECT_SIZE or img.height < MIN_DETECT_SIZE:
        raise InvalidInputError(
            f"image must be at least {MIN_DETECT_SIZE}x{MIN_DETECT_SIZE} for detection"
        )
    ii = compute_integral_image(img)
    cands = _find_candidates(ii, threshold)
    cands.sort(key=lambda t: (-t[0], t[2], t[1], t[3]))
    if sample_mode == "top":
        chosen = cands[:max_points]
    elif sample_mode == "random":
        if len(cands) > max_points:
            rng = np.random.default_rng(0 if seed is None else seed)
            idx = np.sort(rng.choice(len(cands), size=max_points, replace=False))
            chosen = [cands[int(i)] for i in idx]
            chosen.sort(key=lambda t: (-t[0], t[2], t[1], t[3]))
        else:
            chosen = cands
    else:
        raise InvalidInputError(f"unknown sample_mode {sample_mode!r}")
    points = []
    for resp, x, y, scale, lap in chosen:
        ori = 0.0 if upright else assign_orientation(ii, x, y, scale)
        desc = compute_descriptor(ii, x, y, scale, ori)
        points.append(
            InterestPoint(
                x=x,
                y=y,
                scale=scale,
                orientation=ori,
                laplacian_sign=lap,
                response=resp,
                descriptor=desc,
            )
        )
    return points


_POINT_FMT = "<ffffbf" + "64f"


def write_points(path: str | Path, points: list[InterestPoint]) -> None:
    """Serialize points: magic, version u16, count u32, then fixed records."""
    buf = bytearray()
    buf += POINT_MAGIC
    buf += struct.pack("<HI", POINT_VERSION, len(points))
    for p in points:
        buf += struct.pack(
            _POINT_FMT,
            p.x,
            p.y,
            p.scale,
            p.orientation,
            p.laplacian_sign,
            p.response,
            *np.asarray(p.descriptor, dtype=np.float32),
        )
    Path(path).write_bytes(bytes(buf))


def read_points(path: str | Path) -> list[InterestPoint]:
    data = Path(path).read_bytes()
    if data[:4] != POINT_MAGIC:
        raise InvalidInputError(f"{path}: bad magic")
    version, count = struct.unpack_from("<HI", data, 4)
    if version != POINT_VERSION:
        raise InvalidInputError(f"{path}: unsupported version {version}")
    off = 10
    rec = struct.calcsize(_POINT_FMT)
    points = []
    for _ in range(count):
        vals = struct.unpack_from(_POINT_FMT, data, off)
        off += rec
        points.append(
            InterestPoint(
                x=vals[0],
                y=vals[1],
                scale=vals[2],
                orientation=vals[3],
                laplacian_sign=vals[4],
                response=vals[5],
                descriptor=np.array(vals[6:], dtype=np.float64),
            )
        )
    return points
