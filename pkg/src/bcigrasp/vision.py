"""Eye-in-hand vision: rendering, color segmentation, ranking, shape classing.

The renderer ray-tests every pixel against the scene's primitives and
returns a flat-shaded RGB image plus a depth map (optical-axis depth,
infinity on background).  Segmentation thresholds the RGB bands, one blob
per color, with the blob center defined as the midpoint of the pixel
extents.  Object distance is recovered by inverting a projected-area model
per shape.  A closed-form depth-curvature classifier replaces a learned
shape model; the decision comes from the principal curvatures and the
quadratic-fit residual of the central depth patch.

``project_object``/``analytic_blobs`` form the analytic twin of the
renderer: the same pinhole model evaluated in closed form.  The control
loop consumes this fast path; the tests pin it to the renderer within a
pixel.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .scene import COLORS, Pose, Scene

COLOR_RGB = {
    "red": (255, 0, 0),
    "yellow": (255, 255, 0),
    "blue": (0, 0, 255),
}
BACKGROUND_RGB = (96, 96, 96)
AR_GREEN = (0, 255, 0)

MIN_BLOB_PIXELS = 10

# Projected-area coefficients: pixel_count ~= coeff * (focal * size / depth)^2.
# The sphere value is exact; cube and cylinder were calibrated against the
# renderer over the 0.2-0.7 m workspace at working elevations.
AREA_COEFF = {
    "cube": 1.17,
    "cylinder": 0.98,
    "sphere": math.pi / 4.0,
}
NEUTRAL_AREA_COEFF = 1.0

# Depth-shape classifier thresholds: surface curvature in 1/m, quadric-fit
# residual in meters (separates smooth curvature from face creases), and
# silhouette roundness as whitened boundary-radius variation.
CURVED_THRESHOLD = 20.0
SMOOTH_RESIDUAL = 6e-4
ROUNDNESS_THRESHOLD = 0.08


class TooFarError(ValueError):
    """Blob too small for a reliable distance estimate."""


@dataclass
class ImagePair:
    rgb: np.ndarray    # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float, inf on background

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]


@dataclass
class Blob:
    color: str
    pixel_count: int
    center: tuple
    bbox: tuple  # (min_x, min_y, max_x, max_y), inclusive pixel indices


@dataclass
class ObjectOfInterest:
    blob: Blob
    score: float
    estimated_distance: float | None


# ---------------------------------------------------------------------------
# Rendering


def _ray_grid(camera: Pose, cfg: SimConfig):
    cam = cfg.camera
    f = cam.focal_px
    xs = (np.arange(cam.width) + 0.5 - cam.width / 2.0) / f
    ys = (np.arange(cam.height) + 0.5 - cam.height / 2.0) / f
    gx, gy = np.meshgrid(xs, ys)
    dirs = (camera.forward[None, None, :]
            + gx[..., None] * camera.right[None, None, :]
            + gy[..., None] * camera.down[None, None, :])
    return dirs  # not normalized; t along these rays is optical-axis depth


def _intersect_sphere(origin, dirs, center, radius):
    oc = origin - center
    a = np.einsum("hwc,hwc->hw", dirs, dirs)
    b = np.einsum("hwc,c->hw", dirs, oc)
    c = oc @ oc - radius * radius
    disc = b * b - a * c
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t = (-b - sq) / a
    return np.where(hit & (t > 0.0), t, np.inf)


def _intersect_box(origin, dirs, center, half):
    lo = center - half
    hi = center + half
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (lo[None, None, :] - origin[None, None, :]) * inv
        t2 = (hi[None, None, :] - origin[None, None, :]) * inv
    tmin = np.nanmax(np.minimum(t1, t2), axis=-1)
    tmax = np.nanmin(np.maximum(t1, t2), axis=-1)
    hit = (tmax >= tmin) & (tmax > 0.0)
    t = np.where(tmin > 0.0, tmin, tmax)
    return np.where(hit, t, np.inf)


def _intersect_cylinder(origin, dirs, center, radius, z_lo, z_hi):
    ox, oy, oz = origin - np.array([center[0], center[1], 0.0])
    dx = dirs[..., 0]
    dy = dirs[..., 1]
    dz = dirs[..., 2]
    a = dx * dx + dy * dy
    b = ox * dx + oy * dy
    c = ox * ox + oy * oy - radius * radius
    disc = b * b - a * c
    side_ok = (disc >= 0.0) & (a > 1e-16)
    sq = np.sqrt(np.where(side_ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_side = np.where(side_ok, (-b - sq) / a, np.inf)
    z_at = origin[2] + t_side * dz
    t_side = np.where(side_ok & (t_side > 0.0) & (z_at >= z_lo) & (z_at <= z_hi),
                      t_side, np.inf)

    best = t_side
    for z_cap in (z_hi, z_lo):
        with np.errstate(divide="ignore", invalid="ignore"):
            t_cap = (z_cap - origin[2]) / dz
        px = origin[0] + t_cap * dx - center[0]
        py = origin[1] + t_cap * dy - center[1]
        ok = (t_cap > 0.0) & (px * px + py * py <= radius * radius)
        best = np.minimum(best, np.where(ok, t_cap, np.inf))
    return best


def _object_depth_map(obj, origin, dirs):
    if obj.shape == "sphere":
        return _intersect_sphere(origin, dirs, obj.position,
                                 obj.characteristic_size / 2.0)
    if obj.shape == "cube":
        half = np.full(3, obj.characteristic_size / 2.0)
        return _intersect_box(origin, dirs, obj.position, half)
    height = obj.height if obj.height is not None else obj.characteristic_size
    z_c = obj.position[2]
    return _intersect_cylinder(origin, dirs, obj.position,
                               obj.characteristic_size / 2.0,
                               z_c - height / 2.0, z_c + height / 2.0)


def render(scene: Scene, camera: Pose, cfg: SimConfig) -> ImagePair:
    """Project the scene through the pinhole camera, nearest surface wins."""
    cam = cfg.camera
    rgb = np.empty((cam.height, cam.width, 3), dtype=np.uint8)
    rgb[:] = BACKGROUND_RGB
    depth = np.full((cam.height, cam.width), np.inf)
    dirs = _ray_grid(camera, cfg)
    origin = camera.position
    for obj in scene.objects:
        rel = obj.position - origin
        z = rel @ camera.forward
        bound = obj.characteristic_size  # generous bounding radius
        if z <= -bound:
            continue
        t = _object_depth_map(obj, origin, dirs)
        closer = t < depth
        if closer.any():
            depth[closer] = t[closer]
            rgb[closer] = COLOR_RGB[obj.color]
    return ImagePair(rgb=rgb, depth=depth)


# ---------------------------------------------------------------------------
# Segmentation

_BANDS = {
    # channel bands: (min_r, max_r, min_g, max_g, min_b, max_b)
    "red": (204, 255, 0, 51, 0, 51),
    "yellow": (204, 255, 204, 255, 0, 51),
    "blue": (0, 51, 0, 51, 204, 255),
}


def color_mask(rgb: np.ndarray, color: str) -> np.ndarray:
    lo_r, hi_r, lo_g, hi_g, lo_b, hi_b = _BANDS[color]
    r = rgb[..., 0]
    g = rgb[..., 1]
    b = rgb[..., 2]
    return ((r >= lo_r) & (r <= hi_r)
            & (g >= lo_g) & (g <= hi_g)
            & (b >= lo_b) & (b <= hi_b))


def segment_colors(rgb: np.ndarray) -> list[Blob]:
    """One blob per color band present: pixel count plus extent midpoint."""
    blobs = []
    for color in COLORS:
        mask = color_mask(rgb, color)
        count = int(mask.sum())
        if count == 0:
            continue
        ys, xs = np.nonzero(mask)
        min_x, max_x = int(xs.min()), int(xs.max())
        min_y, max_y = int(ys.min()), int(ys.max())
        blobs.append(Blob(
            color=color,
            pixel_count=count,
            center=((min_x + max_x) / 2.0, (min_y + max_y) / 2.0),
            bbox=(min_x, min_y, max_x, max_y),
        ))
    return blobs


# ---------------------------------------------------------------------------
# Distance from pixel area


def estimate_distance(blob: Blob, shape: str | None, size: float,
                      cfg: SimConfig) -> float:
    """Invert the projected-area model; strictly decreasing in pixel count.

    Raises
    ------
    TooFarError
        If the blob has fewer than ``MIN_BLOB_PIXELS`` pixels.
    """
    if blob.pixel_count < MIN_BLOB_PIXELS:
        raise TooFarError(f"blob of {blob.pixel_count} px is unreliable")
    coeff = AREA_COEFF.get(shape, NEUTRAL_AREA_COEFF)
    f = cfg.camera.focal_px
    return f * size * math.sqrt(coeff / blob.pixel_count)


# ---------------------------------------------------------------------------
# Object-of-interest ranking


def rank_objects(blobs: list[Blob], intent_class: int | None = None, *,
                 cfg: SimConfig, catalog: dict | None = None) -> ObjectOfInterest | None:
    """Pick the most likely object of interest.

    The reference point is the image center, shifted to 1/4 of the width for
    a left intent and 3/4 for a right intent.  Score mixes proximity to that
    point (weight 0.6) with the blob's share of object pixels (weight 0.4);
    ties break toward the lower color index, then the leftmost center.
    """
    if not blobs:
        return None
    cam = cfg.camera
    target_x = cam.width / 2.0
    if intent_class == 0:
        target_x = cam.width / 4.0
    elif intent_class == 1:
        target_x = 3.0 * cam.width / 4.0
    target_y = cam.height / 2.0
    diag = math.hypot(cam.width, cam.height)
    total = sum(b.pixel_count for b in blobs)

    def score(b: Blob) -> float:
        d = math.hypot(b.center[0] - target_x, b.center[1] - target_y)
        return 0.6 * (1.0 - d / diag) + 0.4 * (b.pixel_count / total)

    def sort_key(b: Blob):
        return (-score(b), COLORS.index(b.color), b.center[0])

    best = min(blobs, key=sort_key)
    distance = None
    if catalog and best.color in catalog:
        shape, size = catalog[best.color]
        try:
            distance = estimate_distance(best, shape, size, cfg)
        except TooFarError:
            distance = None
    return ObjectOfInterest(blob=best, score=score(best), estimated_distance=distance)


# ---------------------------------------------------------------------------
# Augmented-reality overlay


def overlay_ar(rgb: np.ndarray, ooi: ObjectOfInterest) -> np.ndarray:
    """Return a copy with a one-pixel green rectangle around the OOI bbox.

    The rectangle sits one pixel outside the blob extents so re-segmenting
    the overlaid image yields the original blobs.
    """
    out = rgb.copy()
    h, w = out.shape[:2]
    min_x, min_y, max_x, max_y = ooi.blob.bbox
    min_x, min_y, max_x, max_y = min_x - 1, min_y - 1, max_x + 1, max_y + 1
    x0, x1 = max(min_x, 0), min(max_x, w - 1)
    y0, y1 = max(min_y, 0), min(max_y, h - 1)
    if x0 > x1 or y0 > y1:
        return out
    if 0 <= min_y < h:
        out[min_y, x0:x1 + 1] = AR_GREEN
    if 0 <= max_y < h:
        out[max_y, x0:x1 + 1] = AR_GREEN
    if 0 <= min_x < w:
        out[y0:y1 + 1, min_x] = AR_GREEN
    if 0 <= max_x < w:
        out[y0:y1 + 1, max_x] = AR_GREEN
    return out


# ---------------------------------------------------------------------------
# Depth-based shape classification


def _interior_curvatures(depth: np.ndarray, fg: np.ndarray,
                         focal_px: float) -> tuple[float, float, float]:
    """Principal curvature magnitudes and fit residual of the blob interior.

    Silhouette-rim pixels carry depth jumps that poison the quadric fit, so
    pixels whose local depth gradient is far above the blob median are
    dropped.  The residual stays near zero on smooth surfaces and grows on
    creases where faces meet.
    """
    dmap = np.where(fg, depth, np.nan)
    gy, gx = np.gradient(dmap)
    grad = np.hypot(np.nan_to_num(gx, nan=1e9), np.nan_to_num(gy, nan=1e9))
    interior = fg & (grad < 3.0 * np.nanmedian(grad[fg]) + 1e-12)
    if interior.sum() < 10:
        return 0.0, 0.0, math.inf
    yi, xi = np.nonzero(interior)
    step = float(np.min(depth[interior])) / focal_px  # meters per pixel
    u = (xi - xi.mean()) * step
    v = (yi - yi.mean()) * step
    z = depth[interior]
    basis = np.stack([np.ones_like(u), u, v, u * u, u * v, v * v], axis=1)
    coef, *_ = np.linalg.lstsq(basis, z, rcond=None)
    hessian = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]])
    w = np.abs(np.linalg.eigvalsh(hessian))
    residual = float(np.sqrt(np.mean((basis @ coef - z) ** 2)))
    return float(w.min()), float(w.max()), residual


def _silhouette_roundness(fg: np.ndarray) -> float:
    """Boundary-radius variation after whitening out the blob's elongation.

    Near zero for ellipses (circles seen at a slant), around 0.1 for
    quadrilaterals whose corners survive the whitening.
    """
    ys, xs = np.nonzero(fg)
    pad = np.pad(fg, 1)
    neighbors = (pad[:-2, 1:-1].astype(int) + pad[2:, 1:-1]
                 + pad[1:-1, :-2] + pad[1:-1, 2:])
    by, bx = np.nonzero(fg & (neighbors < 4))
    if by.size < 8:
        return 1.0
    pts = np.stack([bx - xs.mean(), by - ys.mean()], axis=1)
    cov = np.cov(np.stack([xs, ys]).astype(float)) + 1e-9 * np.eye(2)
    whiten = np.linalg.cholesky(np.linalg.inv(cov))
    radii = np.linalg.norm(pts @ whiten.T, axis=1)
    mean = radii.mean()
    return float(radii.std() / mean) if mean > 0 else 1.0


def classify_shape(depth: np.ndarray, cfg: SimConfig) -> str | None:
    """Decide cube / cylinder / sphere from a depth image of the target.

    Tuned for the handoff pose where the snapshot is taken, which looks
    down on the object.  A quadric fit to the blob interior catches smooth
    curvature: curved in both principal directions means sphere, in exactly
    one means a side-on cylinder.  The flat top-down views that dominate
    near the grasp are split by silhouette roundness, since a cylinder cap
    stays elliptical while a cube silhouette keeps its corners.  Returns
    None without foreground.
    """
    fg = np.isfinite(depth)
    if not fg.any():
        return None
    if fg.sum() < MIN_BLOB_PIXELS:
        return None
    k_min, k_max, residual = _interior_curvatures(depth, fg, cfg.camera.focal_px)
    if residual < SMOOTH_RESIDUAL:
        if k_min > CURVED_THRESHOLD:
            return "sphere"
        if k_max > CURVED_THRESHOLD:
            return "cylinder"
    if _silhouette_roundness(fg) < ROUNDNESS_THRESHOLD:
        return "cylinder"
    return "cube"


def dominant_color(rgb: np.ndarray) -> str | None:
    """Color band with the largest pixel count, None if all empty."""
    best, best_count = None, 0
    for color in COLORS:
        count = int(color_mask(rgb, color).sum())
        if count > best_count:
            best, best_count = color, count
    return best


# ---------------------------------------------------------------------------
# Analytic projection twin (fast path for the control loop)


def project_point(camera: Pose, point: np.ndarray, cfg: SimConfig):
    """Pinhole projection: (x_px, y_px, optical_depth).

    Pixel-index coordinates: a point on the optical axis projects to
    ((width - 1) / 2, (height - 1) / 2), the midpoint of the pixel lattice.
    """
    rel = point - camera.position
    z = float(rel @ camera.forward)
    if z <= 1e-9:
        return None
    f = cfg.camera.focal_px
    x = (cfg.camera.width - 1) / 2.0 + f * float(rel @ camera.right) / z
    y = (cfg.camera.height - 1) / 2.0 + f * float(rel @ camera.down) / z
    return x, y, z


def _projected_half_extent(obj, z: float, cfg: SimConfig) -> float:
    f = cfg.camera.focal_px
    if obj.shape == "sphere":
        return f * (obj.characteristic_size / 2.0) / z
    if obj.shape == "cube":
        return f * (obj.characteristic_size * math.sqrt(2.0) / 2.0) / z
    height = obj.height if obj.height is not None else obj.characteristic_size
    return f * (max(obj.characteristic_size, height) / 2.0) / z


def project_object(obj, camera: Pose, cfg: SimConfig):
    """Approximate blob of one object: center, count, bbox, or None if unseen."""
    hit = project_point(camera, obj.position, cfg)
    if hit is None:
        return None
    x, y, z = hit
    half = _projected_half_extent(obj, z, cfg)
    w, h = cfg.camera.width, cfg.camera.height
    min_x, max_x = x - half, x + half
    min_y, max_y = y - half, y + half
    cx0, cx1 = max(min_x, 0.0), min(max_x, w - 1.0)
    cy0, cy1 = max(min_y, 0.0), min(max_y, h - 1.0)
    if cx0 > cx1 or cy0 > cy1:
        return None
    coeff = AREA_COEFF[obj.shape]
    full = coeff * (cfg.camera.focal_px * obj.characteristic_size / z) ** 2
    vis = (((cx1 - cx0) * (cy1 - cy0))
           / max((max_x - min_x) * (max_y - min_y), 1e-9))
    count = int(round(full * vis))
    if count < MIN_BLOB_PIXELS:
        return None
    return Blob(
        color=obj.color,
        pixel_count=count,
        center=((cx0 + cx1) / 2.0, (cy0 + cy1) / 2.0),
        bbox=(int(round(cx0)), int(round(cy0)), int(round(cx1)), int(round(cy1))),
    ), z


def analytic_blobs(scene: Scene, camera: Pose, cfg: SimConfig):
    """Closed-form stand-in for render + segment: per-color merged blobs.

    Returns (blobs, members) where members maps color to the contributing
    objects sorted by pixel count, largest first.
    """
    per_color: dict[str, list] = {}
    for obj in scene.objects:
        projected = project_object(obj, camera, cfg)
        if projected is None:
            continue
        blob, z = projected
        per_color.setdefault(obj.color, []).append((blob, obj, z))

    blobs, members = [], {}
    for color in COLORS:
        if color not in per_color:
            continue
        entries = sorted(per_color[color], key=lambda e: -e[0].pixel_count)
        first = entries[0][0]
        min_x, min_y, max_x, max_y = first.bbox
        count = 0
        for blob, _, _ in entries:
            count += blob.pixel_count
            min_x = min(min_x, blob.bbox[0])
            min_y = min(min_y, blob.bbox[1])
            max_x = max(max_x, blob.bbox[2])
            max_y = max(max_y, blob.bbox[3])
        blobs.append(Blob(
            color=color, pixel_count=count,
            center=((min_x + max_x) / 2.0, (min_y + max_y) / 2.0),
            bbox=(min_x, min_y, max_x, max_y),
        ))
        members[color] = [(obj, z) for _, obj, z in entries]
    return blobs, members


@dataclass
class VisionView:
    """Per-tick vision summary consumed by the controller."""

    ooi: ObjectOfInterest | None
    ooi_object_id: int | None
    width: int
    height: int

    @property
    def has_ooi(self) -> bool:
        return self.ooi is not None

    def center_error(self) -> tuple[float, float] | None:
        if self.ooi is None:
            return None
        return (self.ooi.blob.center[0] - (self.width - 1) / 2.0,
                self.ooi.blob.center[1] - (self.height - 1) / 2.0)


def observe(scene: Scene, camera: Pose, cfg: SimConfig,
            intent_class: int | None = None,
            shape_override: str | None = None) -> VisionView:
    """Analytic vision summary: segment, rank, estimate distance."""
    blobs, members = analytic_blobs(scene, camera, cfg)
    cam = cfg.camera
    if not blobs:
        return VisionView(None, None, cam.width, cam.height)
    ooi = rank_objects(blobs, intent_class, cfg=cfg)
    if ooi is None:
        return VisionView(None, None, cam.width, cam.height)
    obj, _z = members[ooi.blob.color][0]
    shape = shape_override or obj.shape
    try:
        distance = estimate_distance(ooi.blob, shape, obj.characteristic_size, cfg)
    except TooFarError:
        distance = None
    ooi = ObjectOfInterest(blob=ooi.blob, score=ooi.score,
                           estimated_distance=distance)
    return VisionView(ooi, obj.id, cam.width, cam.height)


def rendered_view(scene: Scene, camera: Pose, cfg: SimConfig,
                  intent_class: int | None = None,
                  catalog: dict | None = None):
    """Full pipeline on real pixels: render, segment, rank.  Slow path."""
    image = render(scene, camera, cfg)
    blobs = segment_colors(image.rgb)
    ooi = rank_objects(blobs, intent_class, cfg=cfg, catalog=catalog)
    return image, blobs, ooi


def camera_looking_at(target: np.ndarray, distance: float,
                      elevation_deg: float, azimuth_deg: float = 0.0) -> Pose:
    """Free camera aimed at a point; handy for tests and calibration."""
    el = math.radians(elevation_deg)
    az = math.radians(azimuth_deg)
    forward = -np.array([math.cos(el) * math.cos(az),
                         math.cos(el) * math.sin(az),
                         math.sin(el)])
    position = np.asarray(target, dtype=float) - distance * forward
    right = np.array([-math.sin(az), math.cos(az), 0.0])
    down = np.cross(forward, right)
    return Pose(position=position, forward=forward, right=right, down=down)


# ---------------------------------------------------------------------------
# Raw frame export

FRAME_MAGIC = b"BGRF"


def encode_frame(rgb: np.ndarray) -> bytes:
    """16-byte header (magic, width, height, reserved) plus raw RGB8."""
    h, w = rgb.shape[:2]
    header = struct.pack("<4sII4x", FRAME_MAGIC, w, h)
    return header + rgb.astype(np.uint8).tobytes()


def decode_frame(payload: bytes) -> np.ndarray:
    magic, w, h = struct.unpack_from("<4sII", payload, 0)
    if magic != FRAME_MAGIC:
        raise ValueError("bad frame magic")
    pixels = np.frombuffer(payload, dtype=np.uint8, offset=16)
    return pixels.reshape(h, w, 3)
