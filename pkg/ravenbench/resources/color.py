"""
Helper functions for color management
"""

import logging
import colorsys
from typing import Tuple

from PIL import ImageColor

logger = logging.getLogger(__name__)

DEFAULT_COLOR_NAME = "grey"
DEFAULT_COLOR = (128, 128, 128)

# Object hues are drawn at fixed saturation and lightness.
HUE_SATURATION = 0.9
HUE_LIGHTNESS = 0.55


def convert_color(instr: str | tuple | list | None) -> Tuple[int, int, int]:
    # process either a color name or a color tuple as a string "(1, 2, 3)"
    # and returns a tuple of 3 integers in range [0,255].
    # If case of failure to convert, returns middle DEFAULT_COLOR values.
    if instr is None:
        return DEFAULT_COLOR

    if type(instr) in [tuple, list]:
        return tuple(instr)[0:3]

    if type(instr) is not str:
        logger.debug(f"color {instr} ({type(instr)}) not found, using {DEFAULT_COLOR}")
        return DEFAULT_COLOR

    instr = instr.strip()
    if "," in instr and instr.startswith("("):  # "(255, 7, 2)"
        a = instr.replace("(", "").replace(")", "").split(",")
        return tuple([int(e) for e in a])[0:3]
    try:
        color = ImageColor.getrgb(instr)
    except ValueError:
        logger.debug(f"fail to convert color {instr} ({type(instr)}), using {DEFAULT_COLOR}")
        color = DEFAULT_COLOR
    return tuple(color)[0:3]


def _to_bytes(rgb: Tuple[float, float, float]) -> Tuple[int, int, int]:
    return tuple(int(round(min(max(c, 0.0), 1.0) * 255)) for c in rgb)


def hue_color(hue: float, lightness: float = HUE_LIGHTNESS, saturation: float = HUE_SATURATION) -> Tuple[int, int, int]:
    """RGB bytes of a hue given as a fraction of the color wheel in [0, 1)"""
    return _to_bytes(colorsys.hls_to_rgb(hue % 1.0, lightness, saturation))


def hue_degrees_color(degrees: float) -> Tuple[int, int, int]:
    return hue_color(degrees / 360.0)


def gray(intensity: float) -> Tuple[int, int, int]:
    # intensity 1.0 is white
    v = int(round(min(max(intensity, 0.0), 1.0) * 255))
    return (v, v, v)


def light_off(color: str | Tuple[int, int, int], lightness: float = 0.10) -> Tuple[int, int, int]:
    # Darkens (or lighten) a color, keeps hue and saturation
    temp_color = color if type(color) in [tuple, list] else convert_color(color)
    a = list(colorsys.rgb_to_hls(*[c / 255 for c in temp_color]))
    a[1] = lightness
    return _to_bytes(colorsys.hls_to_rgb(*a))
