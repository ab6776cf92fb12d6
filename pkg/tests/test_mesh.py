import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_surface
from hsc.errors import (DegenerateFaceError, DisconnectedMeshError, IndexOutOfRangeError, ParamOutsideDiskError,
                        ParseError)
from hsc.mesh import bfs_two_ring, format_surface, load_surface, parse_surface, save_surface
from hsc.synth import SynthConfig, base_mesh, torus_surface


def test_single_triangle_adjacency(triangle):
    assert [list(triangle.neighbors(v)) for v in range(3)] == [[1, 2], [0, 2], [0, 1]]


def test_build_errors():
    p = [[0, 0], [0.1, 0], [0, 0.1]]
    with pytest.raises(DegenerateFaceError):
        make_surface(p, [[0, 0, 1]])
    with pytest.raises(IndexOutOfRangeError):
        make_surface(p, [[0, 1, 3]])
    with pytest.raises(ParamOutsideDiskError):
        make_surface([[0, 0], [1.0, 0], [0, 0.1]], [[0, 1, 2]])
    six = p + [[0.5, 0.5], [0.6, 0.5], [0.5, 0.6]]
    with pytest.raises(DisconnectedMeshError):
        make_surface(six, [[0, 1, 2], [3, 4, 5]])


def test_arrays_are_read_only(triangle):
    with pytest.raises(ValueError):
        triangle.tbm[0] = 2.0


def test_bfs_examples(triangle, strip5):
    assert bfs_two_ring(triangle, 0) == [0, 1, 2]
    # strip graph distances from 0: {1,2} at depth 1, {3,4} at depth 2
    assert bfs_two_ring(strip5, 0) == [0, 1, 2, 3, 4]
    assert bfs_two_ring(strip5, 4) == [4, 2, 3, 0, 1]


class _PathGraph:
    """Duck-typed surface with a bare path 0-1-2-3-4 as its 1-ring graph."""

    n_vertices = 5

    def neighbors(self, v):
        return np.array([u for u in (v - 1, v + 1) if 0 <= u < 5])


def test_bfs_on_path_graph():
    assert bfs_two_ring(_PathGraph(), 0) == [0, 1, 2]
    assert bfs_two_ring(_PathGraph(), 2) == [2, 1, 3, 0, 4]


def _bfs_oracle(surface, c):
    depth = {c: 0}
    frontier = [c]
    for d in (1, 2):
        nxt = []
        for v in frontier:
            for w in surface.neighbors(v):
                if int(w) not in depth:
                    depth[int(w)] = d
                    nxt.append(int(w))
        frontier = nxt
    return depth


@given(st.integers(0, 59))
def test_bfs_matches_depth_oracle(c):
    surf = torus_surface(10, 6)
    ring = bfs_two_ring(surf, c)
    depth = _bfs_oracle(surf, c)
    assert ring[0] == c
    assert len(ring) == len(set(ring)) == len(depth)
    assert [depth[v] for v in ring] == sorted(depth[v] for v in ring)
    assert len(ring) == 19  # degree-6 regular triangulation


def test_bfs_rejects_bad_center(triangle):
    with pytest.raises(IndexOutOfRangeError):
        bfs_two_ring(triangle, 3)


MINIMAL = "HSM 1 3 1\n0 0 0 0 0 1\n1 0 0 0.1 0 1\n0 1 0 0 0.1 1\n0 1 2\n"


def test_parse_minimal():
    s = parse_surface(MINIMAL)
    assert s.n_vertices == 3 and s.n_faces == 1
    s2 = parse_surface("# exported by hand\n# second comment\n" + MINIMAL)
    np.testing.assert_array_equal(s.params, s2.params)


@pytest.mark.parametrize("text, line", [
    ("HSM 1 3 1\n0 0 0 0 0 1\n1 0 0 1.0 0 1\n0 1 0 0 0.1 1\n0 1 2\n", 3),
    ("# c\nHSM 1 3 1\n0 0 0 0 0 1\n1 0 0 0.1 0 1\n0 1 0 0 0.1 1\n0 1 5\n", 6),
    ("HSM 1 3 1\n0 0 0 0 0 1\n1 0 x 0.1 0 1\n0 1 0 0 0.1 1\n0 1 2\n", 3),
    ("HSM 1 3 1\n0 0 0 0 0 1\n1 0 0 0.1 0 1\n0 1 0 0 0.1 1\n0 1 1\n", 5),
    ("HSM 2 3 1\n0 0 0 0 0 1\n1 0 0 0.1 0 1\n0 1 0 0 0.1 1\n0 1 2\n", 1),
    ("HSM 1 3 2\n0 0 0 0 0 1\n1 0 0 0.1 0 1\n0 1 0 0 0.1 1\n0 1 2\n", 1),
    ("OFF 1 3 1\n", 1),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        parse_surface(text)
    assert info.value.line == line
    assert f"line {line}:" in str(info.value)


def test_round_trip_annulus(tmp_path):
    surf = base_mesh(SynthConfig()).with_tbm(np.random.default_rng(3).lognormal(size=720))
    path = tmp_path / "a.hsm"
    save_surface(surf, path)
    back = load_surface(path)
    np.testing.assert_array_equal(back.positions, surf.positions)
    np.testing.assert_array_equal(back.params, surf.params)
    np.testing.assert_array_equal(back.tbm, surf.tbm)
    np.testing.assert_array_equal(back.faces, surf.faces)
    assert format_surface(back) == path.read_text()
