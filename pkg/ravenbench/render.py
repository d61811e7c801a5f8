# ###########################
# Panels drawn from factor assignments
#
# Every panel is a 64x64 RGB image drawn without anti-aliasing: a pixel belongs
# to a shape when its center passes the shape's coverage test.
#
from __future__ import annotations
import os
import logging
from typing import List, Sequence, Tuple

import numpy as np
from PIL import Image

from ravenbench.constant import PANEL_SIZE, SHEET_MARGIN, NUM_CONTEXT, NUM_ANSWERS, GRID_SIDE
from ravenbench.errors import RenderError, InvalidAssignment
from ravenbench.factor import FactorSpace, FactorAssignment, validate_assignment
from ravenbench.resources.color import convert_color, gray, hue_color, hue_degrees_color, light_off

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

SHEET_BACKGROUND = "white"

# dsprites geometry
SPRITE_BASE_HALF = 10.0  # half size in px at scale 1.0
SPRITE_BORDER = 10.0  # position 0.0 / 1.0 map to SPRITE_BORDER / PANEL_SIZE - SPRITE_BORDER
HEART_STRETCH = 1.25

# shapes3d geometry
HORIZON = 40  # first floor row
GROUND = 48  # object base line
OBJECT_BASE_HALF = 12.0
AZIMUTH_SPAN = 30.0
AZIMUTH_SHIFT = 8.0


def _pixel_centers() -> Tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:PANEL_SIZE, 0:PANEL_SIZE]
    return xs + 0.5, ys + 0.5


# ###############################
# dsprites
#
def sprite_mask(shape: int, scale: float, pos_x: float, pos_y: float) -> np.ndarray:
    """Boolean object mask of a sprite, shape 0 square, 1 ellipse, 2 heart"""
    xs, ys = _pixel_centers()
    span = PANEL_SIZE - 2 * SPRITE_BORDER
    cx = SPRITE_BORDER + pos_x * span
    cy = SPRITE_BORDER + pos_y * span
    half = SPRITE_BASE_HALF * scale
    dx = (xs - cx) / half
    dy = (ys - cy) / half
    if shape == 0:
        return (np.abs(dx) <= 1.0) & (np.abs(dy) <= 1.0)
    if shape == 1:
        return dx**2 + (dy / 0.6) ** 2 <= 1.0
    if shape == 2:
        # (x² + y² − 1)³ − x²·y³ ≤ 0, y pointing up
        u = dx * HEART_STRETCH
        v = -dy * HEART_STRETCH
        return (u**2 + v**2 - 1.0) ** 3 - u**2 * v**3 <= 0.0
    raise RenderError(f"unknown sprite shape {shape}")


def _render_dsprites(space: FactorSpace, a: FactorAssignment) -> np.ndarray:
    labels = {f.name: f.value_labels[v] for f, v in zip(space.factors, a)}
    mask = sprite_mask(
        shape=a[space.factor_index("shape")],
        scale=labels["scale"],
        pos_x=labels["pos_x"],
        pos_y=labels["pos_y"],
    )
    pixels = np.empty((PANEL_SIZE, PANEL_SIZE, 3), dtype=np.uint8)
    pixels[:, :] = gray(labels["bg_shade"])
    pixels[mask] = hue_degrees_color(labels["obj_color"])
    return pixels


# ###############################
# shapes3d
#
def _outline(mask: np.ndarray) -> np.ndarray:
    """Mask pixels with at least one 4-neighbour outside the mask"""
    padded = np.pad(mask, 1, constant_values=False)
    interior = padded[1:-1, 1:-1] & padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    return mask & ~interior


def object_masks(shape: int, scale: float, azimuth: float) -> Tuple[np.ndarray, np.ndarray]:
    """Body and top-face masks of a shapes3d object, shape 0 cube, 1 cylinder, 2 sphere, 3 capsule"""
    xs, ys = _pixel_centers()
    s = OBJECT_BASE_HALF * scale
    turn = azimuth / AZIMUTH_SPAN  # in [-1, 1]
    cx = PANEL_SIZE / 2 + turn * AZIMUTH_SHIFT
    # lean the silhouette with the azimuth
    x = xs - cx - turn * 0.25 * (GROUND - ys)
    top = np.zeros_like(xs, dtype=bool)
    if shape == 0:
        body = (np.abs(x) <= s) & (ys <= GROUND) & (ys >= GROUND - 2 * s)
        depth = 0.5 * s
        y_top = GROUND - 2 * s
        xt = x - turn * (y_top - ys)
        top = (ys < y_top) & (ys >= y_top - depth) & (np.abs(xt) <= s)
        return body, top
    if shape == 1:
        r = 0.8 * s
        body = (np.abs(x) <= r) & (ys <= GROUND) & (ys >= GROUND - 2 * s)
        y_top = GROUND - 2 * s
        top = ((x - turn * 0.3 * s) / r) ** 2 + ((ys - y_top) / (0.3 * s)) ** 2 <= 1.0
        return body | top, top
    if shape == 2:
        body = x**2 + (ys - (GROUND - s)) ** 2 <= s**2
        return body, top
    if shape == 3:
        r = 0.6 * s
        y0 = GROUND - 2 * s + r
        y1 = GROUND - r
        yc = np.clip(ys, y0, y1)
        body = x**2 + (ys - yc) ** 2 <= r**2
        return body, top
    raise RenderError(f"unknown object shape {shape}")


def _render_shapes3d(space: FactorSpace, a: FactorAssignment) -> np.ndarray:
    labels = {f.name: f.value_labels[v] for f, v in zip(space.factors, a)}
    xs, ys = _pixel_centers()
    pixels = np.empty((PANEL_SIZE, PANEL_SIZE, 3), dtype=np.uint8)
    pixels[ys < HORIZON] = hue_color(labels["wall_hue"])
    pixels[ys >= HORIZON] = hue_color(labels["floor_hue"])
    body, top = object_masks(shape=a[space.factor_index("shape")], scale=labels["scale"], azimuth=labels["azimuth"])
    color = hue_color(labels["obj_hue"])
    pixels[body | top] = color
    pixels[top] = light_off(color, lightness=0.35)
    pixels[_outline(body | top)] = light_off(color, lightness=0.15)
    return pixels


# ###############################
# Public interface
#
def render_pixels(space: FactorSpace, a: FactorAssignment | Sequence[int]) -> np.ndarray:
    if not isinstance(a, FactorAssignment):
        a = FactorAssignment.of(a)
    try:
        validate_assignment(space, a)
    except InvalidAssignment as e:
        raise RenderError(f"cannot render in {space.id}: {e}") from e
    if space.is_dsprites():
        return _render_dsprites(space, a)
    if space.is_shapes3d():
        return _render_shapes3d(space, a)
    raise RenderError(f"no renderer for space {space.id}")


def render_panel(space: FactorSpace, a: FactorAssignment | Sequence[int]) -> Image.Image:
    return Image.fromarray(render_pixels(space, a))


def sheet_size() -> Tuple[int, int]:
    width = NUM_ANSWERS * PANEL_SIZE + (NUM_ANSWERS + 1) * SHEET_MARGIN
    height = (GRID_SIDE + 1) * PANEL_SIZE + (GRID_SIDE + 1) * SHEET_MARGIN + 2 * SHEET_MARGIN
    return width, height


def sheet_cell_boxes() -> Tuple[List[Tuple[int, int, int, int]], List[Tuple[int, int, int, int]]]:
    """(left, top, right, bottom) of the 9 grid cells (row-major) and of the 6 answer cells"""
    width, _ = sheet_size()
    step = PANEL_SIZE + SHEET_MARGIN
    grid_left = (width - (GRID_SIDE * PANEL_SIZE + (GRID_SIDE - 1) * SHEET_MARGIN)) // 2
    grid = []
    for r in range(GRID_SIDE):
        for c in range(GRID_SIDE):
            left, top = grid_left + c * step, SHEET_MARGIN + r * step
            grid.append((left, top, left + PANEL_SIZE, top + PANEL_SIZE))
    answers_top = SHEET_MARGIN + GRID_SIDE * step + SHEET_MARGIN
    answers = []
    for j in range(NUM_ANSWERS):
        left = SHEET_MARGIN + j * step
        answers.append((left, answers_top, left + PANEL_SIZE, answers_top + PANEL_SIZE))
    return grid, answers


def compose_task_sheet(instance, images: Sequence[Image.Image]) -> Image.Image:
    """Lays out 8 context panels in a 3x3 grid (bottom-right left blank) and the 6 answers below"""
    if len(images) != NUM_CONTEXT + NUM_ANSWERS:
        raise RenderError(f"task sheet needs {NUM_CONTEXT + NUM_ANSWERS} panels, got {len(images)}")
    sheet = Image.new(mode="RGB", size=sheet_size(), color=convert_color(SHEET_BACKGROUND))
    grid, answers = sheet_cell_boxes()
    for image, box in zip(images[:NUM_CONTEXT], grid[:NUM_CONTEXT]):
        sheet.paste(image, box[:2])
    for image, box in zip(images[NUM_CONTEXT:], answers):
        sheet.paste(image, box[:2])
    logger.debug(f"sheet composed for seed {getattr(instance, 'seed', None)}")
    return sheet


def render_instance(space: FactorSpace, instance) -> Tuple[List[Image.Image], Image.Image]:
    images = [render_panel(space, a) for a in list(instance.context) + list(instance.answers)]
    return images, compose_task_sheet(instance, images)


def save_instance_pngs(space: FactorSpace, instance, inst_id: int | str, out_dir: str) -> List[str]:
    """Writes inst_<id>_ctx<k>.png, inst_<id>_ans<j>.png and inst_<id>_sheet.png"""
    images, sheet = render_instance(space, instance)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for k, image in enumerate(images[:NUM_CONTEXT]):
        written.append(os.path.join(out_dir, f"inst_{inst_id}_ctx{k}.png"))
        image.save(written[-1], format="PNG")
    for j, image in enumerate(images[NUM_CONTEXT:]):
        written.append(os.path.join(out_dir, f"inst_{inst_id}_ans{j}.png"))
        image.save(written[-1], format="PNG")
    written.append(os.path.join(out_dir, f"inst_{inst_id}_sheet.png"))
    sheet.save(written[-1], format="PNG")
    return written
