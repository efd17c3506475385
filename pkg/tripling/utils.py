'''
utils.py

Functions that don't fit anywhere else.

'''
import itertools
import logging
import math
import os
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

TWO_PI_OVER_3 = 2.0 * math.pi / 3.0


'''
FILES
'''


def make_dir(path: str) -> str:
    '''Output directory with ~ expanded, created if missing.'''
    real_path = os.path.expanduser(path)
    os.makedirs(real_path, exist_ok=True)
    return real_path


'''
PARAMETERS
'''


def grid_points(axes: Dict[str, Sequence[float]]) -> Iterator[Dict[str, float]]:
    '''
    Cartesian product of parameter axes as one dict per point; the last axis varies fastest.
    '''
    empty = [name for name, values in axes.items() if not len(values)]
    if empty:
        raise ValueError(f"empty axis: {', '.join(empty)}")
    for values in itertools.product(*axes.values()):
        yield {name: float(v) for name, v in zip(axes, values)}


def parse_grid(text: str) -> List[float]:
    '''
    Parse a grid given either as "a,b,c" or as "start:stop:num" (inclusive, linear).
    '''
    text = text.strip()
    if ':' in text:
        parts = text.split(':')
        if len(parts) != 3:
            raise ValueError(f"grid '{text}' must be start:stop:num")
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        if num < 1:
            raise ValueError(f"grid '{text}' must have at least one point")
        return [float(v) for v in np.linspace(start, stop, num)]
    return [float(v) for v in text.split(',') if v.strip()]


'''
PHASE PLANE
'''


def rotate(q, p, angle):
    '''
    Rotate phase-plane points (q, p) counterclockwise by angle
    '''
    c, s = math.cos(angle), math.sin(angle)
    return c * q - s * p, s * q + c * p


def delta_g(g, g_min, g_s):
    '''
    Position of g inside the well, 0 at the bottom and 1 at the saddle
    '''
    return (g - g_min) / (g_s - g_min)


def g_from_delta(dg, g_min, g_s):
    return g_min + dg * (g_s - g_min)


'''
FITS
'''


def linear_fit(x, y) -> Tuple[float, float, float]:
    '''
    Least-squares straight line through (x, y)

    :return: slope, intercept and coefficient of determination
    '''
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(residual ** 2) / total if total > 0 else 1.0
    return float(slope), float(intercept), float(r2)
