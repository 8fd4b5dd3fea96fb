"""Shared fixtures: analytic meshes and feature-curve sets."""
import numpy as np
import pytest

from sharpmesh import FeatureCurveSet, TriMesh


def make_icosphere(subdiv=3, radius=1.0):
    t = (1 + 5 ** 0.5) / 2
    V = np.array(
        [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
         [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
         [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], float
    )
    F = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    )
    for _ in range(subdiv):
        mid = {}
        new_faces = []
        verts = V.tolist()

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in mid:
                verts.append(
                    ((np.array(verts[i]) + np.array(verts[j])) / 2).tolist()
                )
                mid[key] = len(verts) - 1
            return mid[key]

        for (i, j, k) in F:
            ij, jk, ki = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            new_faces += [[i, ij, ki], [j, jk, ij], [k, ki, jk], [ij, jk, ki]]
        V = np.array(verts)
        F = np.array(new_faces)
    V = radius * V / np.linalg.norm(V, axis=1, keepdims=True)
    return TriMesh(V, F)


def make_unit_cube():
    """Closed unit cube [0,1]^3, 12 triangles, outward orientation."""
    V = np.array(
        [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
         [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], float
    )
    F = np.array(
        [[0, 2, 1], [0, 3, 2],          # z=0, normal -z
         [4, 5, 6], [4, 6, 7],          # z=1, normal +z
         [0, 1, 5], [0, 5, 4],          # y=0, normal -y
         [2, 3, 7], [2, 7, 6],          # y=1, normal +y
         [1, 2, 6], [1, 6, 5],          # x=1, normal +x
         [3, 0, 4], [3, 4, 7]]          # x=0, normal -x
    )
    return TriMesh(V, F)


def cube_edge_curves():
    """The 12 edges of the unit cube as feature polylines."""
    c = [np.array(p, float) for p in
         [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
          (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]]
    pairs = [(0, 1), (1, 2), (2, 3), (3, 0),
             (4, 5), (5, 6), (6, 7), (7, 4),
             (0, 4), (1, 5), (2, 6), (3, 7)]
    return FeatureCurveSet([np.stack([c[i], c[j]]) for i, j in pairs])


def make_grid_strip(nx, ny, z_fn=None, diag="main"):
    """Regular triangulated grid over [0, nx] x [0, ny].

    ``z_fn(x, y)`` lifts the plane; ``diag`` picks the split diagonal
    ('main', 'anti', or a callable cell -> choice).
    """
    xs, ys = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    xs = xs.ravel().astype(float)
    ys = ys.ravel().astype(float)
    zs = np.zeros_like(xs) if z_fn is None else z_fn(xs, ys)
    V = np.stack([xs, ys, zs], axis=1)

    def vid(i, j):
        return i * (ny + 1) + j

    faces = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            choice = diag(i, j) if callable(diag) else diag
            if choice == "main":
                faces += [[v00, v10, v11], [v00, v11, v01]]
            else:
                faces += [[v00, v10, v01], [v10, v11, v01]]
    return TriMesh(V, np.array(faces))


def make_valley(half=2.0, ny=1, slope=1.0):
    """Two rectangles meeting in a crease along the y axis (z = slope*|x|)."""
    V = np.array(
        [[-half, -ny, slope * half], [0, -ny, 0], [half, -ny, slope * half],
         [-half, ny, slope * half], [0, ny, 0], [half, ny, slope * half]],
        float,
    )
    F = np.array([[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4]])
    curve = FeatureCurveSet([np.array([[0.0, -ny, 0.0], [0.0, ny, 0.0]])])
    return TriMesh(V, F), curve


def make_crease_quad():
    """Coarse 2-face quad over the valley with the diagonal crossing the
    crease; flipping the diagonal aligns both faces with the valley planes."""
    V = np.array(
        [[0, -1, 0], [1, 0, 1], [0, 1, 0], [-1, 0, 1]], float
    )
    F = np.array([[0, 1, 3], [1, 2, 3]])  # diagonal (1, 3) crosses the crease
    return TriMesh(V, F)


@pytest.fixture(scope="session")
def icosphere():
    return make_icosphere(3)


@pytest.fixture(scope="session")
def icosphere_fine():
    return make_icosphere(5)


@pytest.fixture(scope="session")
def unit_cube():
    return make_unit_cube()


@pytest.fixture(scope="session")
def cube_curves():
    return cube_edge_curves()


@pytest.fixture()
def quad_mesh():
    V = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)
    return TriMesh(V, np.array([[0, 1, 2], [0, 2, 3]]))


@pytest.fixture()
def valley():
    return make_valley()


@pytest.fixture()
def crease_quad():
    return make_crease_quad()
