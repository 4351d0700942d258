import pytest

from generators.sweep_generator import SweepGenerator, SweepSpecError


class TestSweepGenerator:
    def test_cartesian_points(self):
        sweep = SweepGenerator(document={"axes": {"a": {"values": [2.0, 3.0]}, "R": {"start": 40, "stop": 60, "num": 2}}})
        points = sweep.generate_points()
        assert points == [
            {"a": 2.0, "R": 40.0}, {"a": 2.0, "R": 60.0},
            {"a": 3.0, "R": 40.0}, {"a": 3.0, "R": 60.0},
        ]
        assert sweep.get_generation_stats() == {"axes": {"a": 2, "R": 2}, "points": 4, "generated": 4}

    def test_overrides_use_config_paths(self):
        sweep = SweepGenerator(document={"axes": {"a": {"values": [1.0]}, "solver.t_init": {"values": [0.5]}}})
        overrides = sweep.to_overrides(sweep.generate_points()[0])
        assert overrides == {"nonlinearity.params.a": 1.0, "solver.t_init": 0.5}

    def test_grid_axis_is_integral(self):
        sweep = SweepGenerator(document={"axes": {"n": {"start": 100, "stop": 400, "num": 4}}})
        assert sweep.axes["n"] == [100, 200, 300, 400]
        assert all(isinstance(value, int) for value in sweep.axes["n"])

    def test_flags(self):
        sweep = SweepGenerator(document={"axes": {"a": {"values": [1.0]}}, "solve": True, "samples": 0})
        assert sweep.solve
        assert sweep.samples == 0

    @pytest.mark.parametrize(
        "document",
        [
            None,
            {"axes": {}},
            {"axes": {"a": [1, 2]}},
            {"axes": {"a": {"values": []}}},
            {"axes": {"a": {"values": ["x"]}}},
            {"axes": {"a": {"start": 1.0, "stop": 2.0}}},
            {"axes": {"a": {"start": 2.0, "stop": 1.0, "num": 3}}},
            {"axes": {"a": {"start": 1.0, "stop": 2.0, "num": 0}}},
            {"axes": {"a": {"values": [1.0]}}, "samples": -1},
        ],
    )
    def test_malformed_documents(self, document):
        with pytest.raises(SweepSpecError):
            SweepGenerator(document=document)

    def test_files(self, tmp_path):
        json_path = tmp_path / "sweep.json"
        json_path.write_text('{"axes": {"beta": {"values": [1e-01, 2e-01]}}}')
        assert SweepGenerator(str(json_path)).axes["beta"] == [0.1, 0.2]
        yaml_path = tmp_path / "sweep.yaml"
        yaml_path.write_text("axes:\n  R: {start: 40.0, stop: 80.0, num: 3}\n")
        assert SweepGenerator(str(yaml_path)).axes["R"] == [40.0, 60.0, 80.0]
        with pytest.raises(SweepSpecError, match="file not found"):
            SweepGenerator(str(tmp_path / "absent.json"))
        broken = tmp_path / "broken.json"
        broken.write_text('{"axes": ')
        with pytest.raises(SweepSpecError):
            SweepGenerator(str(broken))
