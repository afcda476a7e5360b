"""Deterministic 2D scene renderings.

Two views of the same scene: an annotated top-down plan (vector text, also
rasterizable) and a merged two-panel image whose right half is a
fixed-camera isometric projection with painter's-order depth sorting.
Everything — colors, draw order, text, number formatting — is a pure
function of the scene, so identical inputs yield identical bytes.

Object colors hash the uid, not the list position: editing one object never
recolors its neighbors between frames.
"""

from __future__ import annotations

import colorsys
import hashlib
import io
import math
from dataclasses import dataclass

from .geometry import Obb, obb_from_object
from .scene import Scene

ISO_ANGLE = math.radians(30.0)
_COS = math.cos(ISO_ANGLE)
_SIN = math.sin(ISO_ANGLE)

PANEL_PX = 640  # merged canvas is two of these side by side
_PANEL_PAD = 40.0
_SVG_MARGIN_M = 0.6


@dataclass(frozen=True)
class RenderOptions:
    px_per_meter: float = 80.0
    grid_step: float = 1.0
    label_boxes: bool = True
    merged: bool = False

    def __post_init__(self):
        if self.px_per_meter <= 0:
            raise ValueError(f"px_per_meter must be > 0, got {self.px_per_meter}")
        if self.grid_step <= 0:
            raise ValueError(f"grid_step must be > 0, got {self.grid_step}")


def object_color(uid: str) -> tuple[int, int, int]:
    """Stable saturated RGB color derived from the uid alone."""
    hue = int(hashlib.md5(uid.encode()).hexdigest()[:8], 16) % 360
    r, g, b = colorsys.hls_to_rgb(hue / 360.0, 0.55, 0.70)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def _scale_rgb(rgb: tuple[int, int, int], factor: float) -> tuple[int, int, int]:
    return tuple(max(0, min(255, int(round(c * factor)))) for c in rgb)


def _lighten(rgb: tuple[int, int, int], amount: float) -> tuple[int, int, int]:
    return tuple(int(round(c + (255 - c) * amount)) for c in rgb)


def _grid_values(lo: float, hi: float, step: float) -> list[float]:
    """Multiples of ``step`` covering [lo, hi], inclusive of touching ends."""
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    return [k * step for k in range(first, last + 1)]


def _footprint_bounds(scene: Scene) -> tuple[float, float, float, float]:
    xs = [x for x, _ in scene.room.footprint()]
    zs = [z for _, z in scene.room.footprint()]
    return min(xs), max(xs), min(zs), max(zs)


# --------------------------------------------------------------------------
# Top-down vector view


def render_topdown(scene: Scene, opts: RenderOptions | None = None) -> str:
    """Annotated plan view as SVG text: floor, meter grid with coordinate
    labels, and one yaw-rotated rectangle per object."""
    opts = opts if opts is not None else RenderOptions()
    ppm = opts.px_per_meter
    min_x, max_x, min_z, max_z = _footprint_bounds(scene)
    margin = _SVG_MARGIN_M

    def px(x: float, z: float) -> tuple[float, float]:
        return (x - min_x + margin) * ppm, (z - min_z + margin) * ppm

    width = (max_x - min_x + 2 * margin) * ppm
    height = (max_z - min_z + 2 * margin) * ppm
    font = max(8.0, ppm * 0.14)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.3f}" '
        f'height="{height:.3f}" viewBox="0 0 {width:.3f} {height:.3f}">',
        f'<rect width="{width:.3f}" height="{height:.3f}" fill="#ffffff"/>',
    ]

    floor = " ".join("%.3f,%.3f" % px(x, z) for x, z in scene.room.footprint())
    out.append(
        f'<polygon class="floor" points="{floor}" fill="#f2efe9" '
        f'stroke="#444444" stroke-width="2"/>'
    )

    for gx in _grid_values(min_x, max_x, opts.grid_step):
        (x0, z0), (x1, z1) = px(gx, min_z), px(gx, max_z)
        out.append(
            f'<line x1="{x0:.3f}" y1="{z0:.3f}" x2="{x1:.3f}" y2="{z1:.3f}" '
            f'stroke="#bbbbbb" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x0:.3f}" y="{z1 + font * 1.2:.3f}" font-size="{font:.1f}" '
            f'text-anchor="middle" fill="#666666">{gx:g}</text>'
        )
    for gz in _grid_values(min_z, max_z, opts.grid_step):
        (x0, z0), (x1, z1) = px(min_x, gz), px(max_x, gz)
        out.append(
            f'<line x1="{x0:.3f}" y1="{z0:.3f}" x2="{x1:.3f}" y2="{z1:.3f}" '
            f'stroke="#bbbbbb" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x0 - font * 0.4:.3f}" y="{z0 + font * 0.35:.3f}" '
            f'font-size="{font:.1f}" text-anchor="end" fill="#666666">{gz:g}</text>'
        )

    for obj in scene.objects:
        box = obb_from_object(obj)
        corners = " ".join("%.3f,%.3f" % px(cx, cz) for cx, cz in box.footprint_corners())
        r, g, b = object_color(obj.uid)
        out.append(
            f'<polygon class="obj" data-uid="{obj.uid}" points="{corners}" '
            f'fill="rgb({r},{g},{b})" fill-opacity="0.65" '
            f'stroke="rgb({r // 2},{g // 2},{b // 2})" stroke-width="1.5"/>'
        )
        if opts.label_boxes:
            lx, lz = px(obj.position.x, obj.position.z)
            label = _escape(obj.description)
            out.append(
                f'<text x="{lx:.3f}" y="{lz:.3f}" font-size="{font:.1f}" '
                f'text-anchor="middle" fill="#222222">{label}</text>'
            )

    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# --------------------------------------------------------------------------
# Raster panels (top-down and isometric) via Pillow


def _panel_font():
    from PIL import ImageFont

    return ImageFont.load_default()


def _fit(points: list[tuple[float, float]]) -> tuple[float, float, float]:
    """Uniform scale + offset mapping a point cloud into one panel."""
    us = [u for u, _ in points]
    vs = [v for _, v in points]
    span_u = max(us) - min(us) or 1.0
    span_v = max(vs) - min(vs) or 1.0
    scale = min(
        (PANEL_PX - 2 * _PANEL_PAD) / span_u, (PANEL_PX - 2 * _PANEL_PAD) / span_v
    )
    off_u = (PANEL_PX - scale * span_u) / 2.0 - scale * min(us)
    off_v = (PANEL_PX - scale * span_v) / 2.0 - scale * min(vs)
    return scale, off_u, off_v


def _draw_topdown_panel(draw, scene: Scene, opts: RenderOptions, x_shift: int):
    font = _panel_font()
    footprint = scene.room.footprint()
    scale, off_x, off_z = _fit([(x, z) for x, z in footprint])

    def px(x: float, z: float) -> tuple[float, float]:
        return x_shift + scale * x + off_x, scale * z + off_z

    draw.polygon(
        [px(x, z) for x, z in footprint], fill=(242, 239, 233), outline=(68, 68, 68)
    )
    min_x, max_x, min_z, max_z = _footprint_bounds(scene)
    for gx in _grid_values(min_x, max_x, opts.grid_step):
        draw.line([px(gx, min_z), px(gx, max_z)], fill=(187, 187, 187), width=1)
        ax, az = px(gx, max_z)
        draw.text((ax, az + 4), "%g" % gx, fill=(102, 102, 102), font=font, anchor="ma")
    for gz in _grid_values(min_z, max_z, opts.grid_step):
        draw.line([px(min_x, gz), px(max_x, gz)], fill=(187, 187, 187), width=1)
        ax, az = px(min_x, gz)
        draw.text((ax - 4, az), "%g" % gz, fill=(102, 102, 102), font=font, anchor="rm")

    for obj in scene.objects:
        box = obb_from_object(obj)
        rgb = object_color(obj.uid)
        draw.polygon(
            [px(cx, cz) for cx, cz in box.footprint_corners()],
            fill=rgb,
            outline=_scale_rgb(rgb, 0.5),
        )
        if opts.label_boxes:
            draw.text(
                px(obj.position.x, obj.position.z),
                obj.description,
                fill=(34, 34, 34),
                font=font,
                anchor="mm",
            )


def _iso_project(x: float, y: float, z: float) -> tuple[float, float]:
    """Fixed-camera isometric: +x right-and-down, +z left-and-down, +y up."""
    return (x - z) * _COS, (x + z) * _SIN - y


def _box_corners(box: Obb) -> tuple[list, list]:
    """Bottom and top footprint corners, CCW, as (x, y, z) triples."""
    flat = box.footprint_corners()
    return (
        [(cx, box.bottom(), cz) for cx, cz in flat],
        [(cx, box.top(), cz) for cx, cz in flat],
    )


def _draw_iso_panel(draw, scene: Scene, x_shift: int):
    footprint = scene.room.footprint()
    height = scene.room.ceiling_height
    frame = [_iso_project(x, 0.0, z) for x, z in footprint]
    frame += [_iso_project(x, height, z) for x, z in footprint]
    scale, off_u, off_v = _fit(frame)

    def px(point: tuple[float, float, float]) -> tuple[float, float]:
        u, v = _iso_project(*point)
        return x_shift + scale * u + off_u, scale * v + off_v

    draw.polygon(
        [px((x, 0.0, z)) for x, z in footprint],
        fill=(235, 231, 224),
        outline=(68, 68, 68),
    )

    # Painter's order: far-to-near by depth (x + z), ties resolved bottom-up
    # then by uid so stacked objects layer correctly and draws stay stable.
    order = sorted(
        scene.objects,
        key=lambda o: (o.position.x + o.position.z, o.position.y, o.uid),
    )
    for obj in order:
        box = obb_from_object(obj)
        rgb = object_color(obj.uid)
        bottom, top = _box_corners(box)
        outline = _scale_rgb(rgb, 0.4)

        faces = []
        for i in range(4):
            j = (i + 1) % 4
            quad = [bottom[i], bottom[j], top[j], top[i]]
            edge_x = bottom[j][0] - bottom[i][0]
            edge_z = bottom[j][2] - bottom[i][2]
            # Outward normal of a CCW footprint edge, in the floor plane.
            nx, nz = edge_z, -edge_x
            norm = math.hypot(nx, nz) or 1.0
            facing = (nx + nz) / (norm * math.sqrt(2.0))
            depth = sum(c[0] + c[2] for c in quad) / 4.0
            brightness = 0.45 + 0.45 * max(0.0, facing)
            faces.append((depth, quad, _scale_rgb(rgb, brightness)))
        for _, quad, fill in sorted(faces, key=lambda f: f[0]):
            draw.polygon([px(p) for p in quad], fill=fill, outline=outline)
        draw.polygon([px(p) for p in top], fill=_lighten(rgb, 0.35), outline=outline)


def render_merged(scene: Scene, opts: RenderOptions | None = None) -> bytes:
    """Two fixed-size panels in one PNG: plan on the left, isometric right."""
    from PIL import Image, ImageDraw

    opts = opts if opts is not None else RenderOptions(merged=True)
    image = Image.new("RGB", (2 * PANEL_PX, PANEL_PX), (255, 255, 255))
    draw = ImageDraw.Draw(image)
    _draw_topdown_panel(draw, scene, opts, x_shift=0)
    draw.line(
        [(PANEL_PX, 0), (PANEL_PX, PANEL_PX)], fill=(68, 68, 68), width=2
    )
    _draw_iso_panel(draw, scene, x_shift=PANEL_PX)
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def render_topdown_png(scene: Scene, opts: RenderOptions | None = None) -> bytes:
    """Single-panel raster of the plan view (for PNG output sans iso panel)."""
    from PIL import Image, ImageDraw

    opts = opts if opts is not None else RenderOptions()
    image = Image.new("RGB", (PANEL_PX, PANEL_PX), (255, 255, 255))
    draw = ImageDraw.Draw(image)
    _draw_topdown_panel(draw, scene, opts, x_shift=0)
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def render_merged_png(scene: Scene) -> bytes:
    """Default merged rendering used for episode observations."""
    return render_merged(scene)


def iso_draw_order(scene: Scene) -> list[str]:
    """Uids in the order the isometric panel paints them (far to near)."""
    return [
        o.uid
        for o in sorted(
            scene.objects,
            key=lambda o: (o.position.x + o.position.z, o.position.y, o.uid),
        )
    ]
