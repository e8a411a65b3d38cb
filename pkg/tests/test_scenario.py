import numpy as np
import pytest
import yaml

from tclgrid.scenario import (
    ScenarioError,
    from_dict,
    load_scenario_file,
    parse_scheme,
    scenario_hash,
    to_dict,
)

MINIMAL = {
    "grid": {"m": 10.0, "d": 1.0},
    "population": {"n_loads": 5, "gamma": 0.05, "seed": 1},
    "scheme": "conventional",
    "disturbance": [[0.0, 0.0]],
    "horizon": 50.0,
    "seed": 2,
}


class TestParsing:
    def test_minimal_document(self):
        sf = from_dict(MINIMAL)
        assert sf.grid_m == 10.0
        assert sf.scheme.kind == "conventional"
        assert sf.max_step == 0.01
        assert sf.design.allocate is False

    def test_default_gen_preset_applied(self):
        sf = from_dict(MINIMAL)
        grid = sf.build_grid()
        assert grid.n == 2

    def test_explicit_matrices(self):
        doc = dict(MINIMAL)
        doc["grid"] = {
            "m": 2.0,
            "d": 0.5,
            "gen": {
                "a_hat": [[-1.0]],
                "b_hat": [-3.0],
                "c_hat": [1.0],
            },
        }
        sf = from_dict(doc)
        assert sf.build_grid().n == 1

    def test_missing_field_names_section(self):
        doc = {k: v for k, v in MINIMAL.items() if k != "horizon"}
        with pytest.raises(ScenarioError, match="horizon"):
            from_dict(doc)
        doc2 = dict(MINIMAL, population={"n_loads": 5, "seed": 1})
        with pytest.raises(ScenarioError, match="gamma"):
            from_dict(doc2)

    def test_malformed_matrix_reports_section(self):
        doc = dict(MINIMAL)
        doc["grid"] = {"m": 1.0, "d": 1.0, "gen": {"a_hat": "nonsense", "b_hat": [], "c_hat": []}}
        with pytest.raises(ScenarioError, match="grid.gen"):
            from_dict(doc)

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ScenarioError):
            parse_scheme({"kind": "telepathic"})

    def test_scheme_aliases(self):
        assert parse_scheme("deterministic").kind == "deterministic"
        assert parse_scheme({"kind": "randomized", "k_pi": 7.0}).k_pi == 7.0
        assert parse_scheme("randomized-high-gain").k_pi == 50.0

    def test_non_mapping_rejected(self):
        with pytest.raises(ScenarioError):
            from_dict(["not", "a", "mapping"])


class TestRoundTrip:
    def test_dict_round_trip_preserves_hash(self):
        sf = from_dict(MINIMAL)
        again = from_dict(to_dict(sf))
        assert scenario_hash(sf) == scenario_hash(again)

    def test_shipped_scenario_round_trip(self, shipped_file):
        again = from_dict(to_dict(shipped_file))
        assert scenario_hash(shipped_file) == scenario_hash(again)

    def test_hash_sensitive_to_changes(self):
        sf = from_dict(MINIMAL)
        other = from_dict(dict(MINIMAL, seed=3))
        assert scenario_hash(sf) != scenario_hash(other)


class TestShippedScenario:
    def test_loads_and_builds(self, shipped_file):
        assert shipped_file.population.n_loads == 500
        assert shipped_file.scheme.kind == "deterministic"
        assert shipped_file.design.allocate

    def test_allocation_certifies(self, shipped_file):
        pop, allocation = shipped_file.build_population()
        assert allocation is not None
        assert allocation.report.satisfied
        assert len(pop) == 500

    def test_invalid_yaml_rejected(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("grid: [unclosed")
        with pytest.raises(ScenarioError):
            load_scenario_file(path)
