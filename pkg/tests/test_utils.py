import os

import pytest

from tripling.utils import grid_points, make_dir, parse_grid


def test_make_dir_is_idempotent(tmp_path):
    target = str(tmp_path / 'a' / 'b')
    assert make_dir(target) == target
    assert make_dir(target) == target
    assert os.path.isdir(target)


def test_grid_points_order():
    points = list(grid_points({'f': [0.5, 1], 'nbar': [0.0, 0.1, 1.0]}))
    assert len(points) == 6
    assert points[0] == {'f': 0.5, 'nbar': 0.0}
    assert points[1] == {'f': 0.5, 'nbar': 0.1}
    assert points[-1] == {'f': 1.0, 'nbar': 1.0}


def test_grid_points_empty_axis():
    with pytest.raises(ValueError):
        list(grid_points({'f': [0.5], 'nbar': []}))


def test_parse_grid():
    assert parse_grid('0.1, 0.2,0.4') == [0.1, 0.2, 0.4]
    assert parse_grid('0:1:5') == [0.0, 0.25, 0.5, 0.75, 1.0]
    with pytest.raises(ValueError):
        parse_grid('0:1')
