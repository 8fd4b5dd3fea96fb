import numpy as np
import pytest

from sharpmesh import FeatureCurveSet, SdfGrid, TriMesh, build_adjacency
from sharpmesh import io as sio

from conftest import make_icosphere


class TestObj:
    def test_round_trip_bitwise(self, tmp_path, icosphere):
        path = tmp_path / "m.obj"
        sio.write_obj(path, icosphere)
        back = sio.read_obj(path)
        assert np.array_equal(back.vertices, icosphere.vertices)
        assert np.array_equal(back.faces, icosphere.faces)

    def test_write_deterministic(self, tmp_path, icosphere):
        a, b = tmp_path / "a.obj", tmp_path / "b.obj"
        sio.write_obj(a, icosphere)
        sio.write_obj(b, icosphere)
        assert a.read_bytes() == b.read_bytes()

    def test_ignores_normals_and_slashed_indices(self, tmp_path):
        path = tmp_path / "m.obj"
        path.write_text(
            "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\n"
            "vn 0 0 1\nvt 0 0\nf 1/1/1 2/2/1 3/3/1\n"
        )
        mesh = sio.read_obj(path)
        assert mesh.n_vertices == 3
        assert mesh.faces.tolist() == [[0, 1, 2]]

    def test_negative_indices(self, tmp_path):
        path = tmp_path / "m.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
        assert sio.read_obj(path).faces.tolist() == [[0, 1, 2]]

    def test_polygon_rejected(self, tmp_path):
        path = tmp_path / "m.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(ValueError, match="triangular"):
            sio.read_obj(path)


class TestCurves:
    def test_yaml_round_trip(self, tmp_path):
        curves = FeatureCurveSet(
            [np.array([[0, 0, 0], [1, 0.5, 0.25]]),
             np.array([[1, 1, 1], [2, 2, 2], [3, 2, 1]])],
            sharpness=["sharp", "sharp"],
        )
        path = tmp_path / "c.yml"
        sio.write_curves(path, curves)
        back = sio.read_curves(path)
        assert len(back) == 2
        for a, b in zip(back.curves, curves.curves):
            assert np.array_equal(a, b)

    def test_json_round_trip(self, tmp_path):
        curves = FeatureCurveSet([np.array([[0, 0, 0], [1, 0, 0]])])
        path = tmp_path / "c.json"
        sio.write_curves(path, curves)
        back = sio.read_curves(path)
        assert np.array_equal(back.curves[0], curves.curves[0])

    def test_bare_list_schema(self, tmp_path):
        path = tmp_path / "c.yml"
        path.write_text("- [[0, 0, 0], [1, 1, 1]]\n")
        back = sio.read_curves(path)
        assert len(back) == 1

    def test_vertex_indexed_annotations_converted(self, tmp_path, icosphere):
        path = tmp_path / "feat.yml"
        path.write_text(
            "curves:\n"
            "- sharp: true\n"
            "  vert_indices: [0, 1, 7]\n"
            "- sharp: false\n"
            "  vert_indices: [2, 3]\n"
        )
        back = sio.read_curves(path, mesh=icosphere)
        assert len(back) == 1  # non-sharp entry dropped
        assert np.array_equal(back.curves[0], icosphere.vertices[[0, 1, 7]])

    def test_vertex_indexed_needs_mesh(self, tmp_path):
        path = tmp_path / "feat.yml"
        path.write_text("curves:\n- sharp: true\n  vert_indices: [0, 1]\n")
        with pytest.raises(ValueError, match="need the mesh"):
            sio.read_curves(path)


class TestSdfGridIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        grid = SdfGrid(origin=np.array([0.5, -1.0, 2.0]), spacing=0.05,
                       values=rng.normal(size=(6, 5, 4)).astype(np.float32))
        path = tmp_path / "g.sdf"
        sio.write_sdf_grid(path, grid)
        back = sio.read_sdf_grid(path)
        assert np.array_equal(back.values, grid.values)
        assert np.array_equal(back.origin, grid.origin)
        assert back.spacing == grid.spacing
        sidecar = (tmp_path / "g.sdf.txt").read_text()
        assert "dims: 6 5 4" in sidecar

    def test_truncated_file_rejected(self, tmp_path):
        grid = SdfGrid(origin=np.zeros(3), spacing=1.0,
                       values=np.ones((4, 4, 4), dtype=np.float32))
        path = tmp_path / "g.sdf"
        sio.write_sdf_grid(path, grid, sidecar=False)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="truncated"):
            sio.read_sdf_grid(path)

    def test_magic_check(self, tmp_path):
        path = tmp_path / "g.sdf"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(ValueError, match="not an SDF grid"):
            sio.read_sdf_grid(path)


class TestFieldSidecars:
    def test_scalar_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        values = rng.normal(size=50)
        path = tmp_path / "f.dist.csv"
        sio.write_vertex_field_csv(path, values)
        back = sio.read_vertex_field_csv(path, 50, width=1)
        assert np.array_equal(back, values)

    def test_vector_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        values = rng.normal(size=(30, 3))
        path = tmp_path / "f.dir.csv"
        sio.write_vertex_field_csv(path, values)
        back = sio.read_vertex_field_csv(path, 30, width=3)
        assert np.array_equal(back, values)

    def test_count_mismatch_names_expectation(self, tmp_path):
        path = tmp_path / "f.dist.csv"
        sio.write_vertex_field_csv(path, np.zeros(5))
        with pytest.raises(ValueError, match="expected 9 rows"):
            sio.read_vertex_field_csv(path, 9, width=1)

    def test_edge_field_round_trip(self, tmp_path, icosphere):
        adj = build_adjacency(icosphere)
        rng = np.random.default_rng(3)
        values = rng.normal(size=len(adj.edges))
        path = tmp_path / "f.simp.csv"
        sio.write_edge_field_csv(path, adj.edges, values)
        back = sio.read_edge_field_csv(path, adj)
        for (a, b), v in zip(adj.edges, values):
            assert back[(int(a), int(b))] == v

    def test_edge_field_unknown_edge_rejected(self, tmp_path, quad_mesh):
        adj = build_adjacency(quad_mesh)
        path = tmp_path / "f.simp.csv"
        path.write_text("v_a,v_b,value\n0,1,0.5\n0,2,0.1\n0,3,0.2\n1,2,0.0\n"
                        "1,3,0.9\n")  # (1,3) is not an edge of the quad
        with pytest.raises(ValueError, match="not an edge"):
            sio.read_edge_field_csv(path, adj)


class TestPatchDataset:
    def test_export_and_reload(self, tmp_path, icosphere):
        from sharpmesh import crop_patch

        patches = [
            crop_patch(icosphere, icosphere.vertices[i], radius=0.7)
            for i in (0, 50)
        ]
        fields = {
            i: {"distance": np.linspace(0, 1, p.n_vertices)}
            for i, p in enumerate(patches)
        }
        sio.export_patch_dataset(tmp_path / "patches", patches, fields)
        manifest = sio.load_patch_manifest(
            tmp_path / "patches" / "patch_00000.json")
        assert manifest["vertex_ids"] == patches[0].vertex_ids.tolist()
        mesh = sio.read_obj(tmp_path / "patches" / "patch_00000.obj")
        assert mesh.n_vertices == patches[0].n_vertices
        d = sio.read_vertex_field_csv(
            tmp_path / "patches" / "patch_00000.dist.csv",
            patches[0].n_vertices, width=1)
        assert np.array_equal(d, fields[0]["distance"])
