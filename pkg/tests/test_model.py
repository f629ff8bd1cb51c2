import json
import unittest
from pathlib import Path

from cseflow import (
    AbstractionLevel,
    ComponentManifest,
    InputsObject,
    PortSpec,
    Realization,
    RealizationKind,
    load_registry,
    load_workflow,
    parse_manifest,
    ports_compatible,
    validate_manifest,
)
from cseflow.errors import MalformedJson
from cseflow.model import manifest_to_json

REPO_COMPONENTS = Path(__file__).resolve().parent.parent / "components"


def solver_manifest(**overrides) -> dict:
    data = {
        "id": "heat",
        "version": "1.2.0",
        "title": "Heat equation",
        "inputs": [{"name": "temp", "type": "scalar", "unit": "K"}],
        "outputs": [{"name": "series", "type": "time-series", "unit": ""}],
        "realizations": [{"level": 2, "kind": "solver", "locator": "heat.solver:run"}],
    }
    data.update(overrides)
    return data


def messages(manifest_data: dict):
    report = validate_manifest(parse_manifest(json.dumps(manifest_data)))
    return [f.message for f in report.findings]


class TestValidateManifest(unittest.TestCase):
    def test_valid_solver_manifest(self):
        report = validate_manifest(parse_manifest(json.dumps(solver_manifest())))
        self.assertTrue(report.ok)
        self.assertEqual(report.findings, [])
        self.assertEqual(str(report), "heat: ok")

    def test_level_kind_mismatch(self):
        found = messages(
            solver_manifest(
                realizations=[{"level": 2, "kind": "description", "locator": "heat.md"}]
            )
        )
        self.assertEqual(len(found), 1)
        self.assertIn("realization level/kind mismatch", found[0])

    def test_duplicate_input_port(self):
        ports = [
            {"name": "temp", "type": "scalar", "unit": "K"},
            {"name": "temp", "type": "scalar", "unit": "K"},
        ]
        found = messages(solver_manifest(inputs=ports))
        self.assertEqual(found, ["duplicate port 'temp'"])

    def test_same_name_in_both_directions_is_fine(self):
        found = messages(
            solver_manifest(outputs=[{"name": "temp", "type": "scalar", "unit": "K"}])
        )
        self.assertEqual(found, [])

    def test_finding_paths(self):
        data = solver_manifest(
            version="1.0",
            inputs=[{"name": "", "type": "vector", "unit": ""}],
            realizations=[],
        )
        report = validate_manifest(parse_manifest(json.dumps(data)))
        paths = [f.path for f in report.findings]
        self.assertEqual(paths, ["version", "inputs[0].name", "inputs[0].type", "realizations"])
        self.assertFalse(report.ok)
        self.assertIn("4 finding(s)", str(report))

    def test_duplicate_realization(self):
        twice = {"level": 3, "kind": "table", "locator": "t.csv"}
        found = messages(solver_manifest(realizations=[twice, dict(twice)]))
        self.assertEqual(found, ["duplicate realization"])

    def test_same_locator_different_kind_is_not_duplicate(self):
        found = messages(
            solver_manifest(
                realizations=[
                    {"level": 3, "kind": "table", "locator": "t.csv"},
                    {"level": 3, "kind": "url", "locator": "t.csv"},
                ]
            )
        )
        self.assertEqual(found, [])

    def test_bad_checksum_and_shape(self):
        data = solver_manifest(
            outputs=[{"name": "f", "type": "scalar-field-2d", "unit": "", "shape": [0, 4]}],
            realizations=[
                {"level": 3, "kind": "table", "locator": "t.csv", "checksum": "ABC"}
            ],
        )
        found = messages(data)
        self.assertEqual(len(found), 2)
        self.assertIn("shape entries must be positive", found)

    def test_every_accepted_realization_obeys_level_table(self):
        expected = {
            "description": 1,
            "solver": 2,
            "table": 3,
            "url": 3,
        }
        for kind, level in expected.items():
            for candidate in (1, 2, 3):
                data = solver_manifest(
                    realizations=[{"level": candidate, "kind": kind, "locator": "x"}]
                )
                self.assertEqual(messages(data) == [], candidate == level, (kind, candidate))

    def test_deterministic(self):
        text = json.dumps(solver_manifest(inputs=[{"name": "", "type": "?", "unit": ""}]))
        first = validate_manifest(parse_manifest(text))
        second = validate_manifest(parse_manifest(text.encode("utf-8")))
        self.assertEqual(first, second)

    def test_shipped_components_are_valid(self):
        registry = load_registry(REPO_COMPONENTS)
        self.assertEqual(set(registry), {"cahn-hilliard", "data", "time-average"})
        for manifest in registry.values():
            self.assertTrue(validate_manifest(manifest).ok, str(validate_manifest(manifest)))


class TestPortsCompatible(unittest.TestCase):
    def port(self, t, unit, shape=None, name="p"):
        return PortSpec(name=name, semantic_type=t, unit=unit, shape=shape)

    def test_identity(self):
        self.assertTrue(ports_compatible(self.port("scalar", "K"), self.port("scalar", "K")))

    def test_unit_mismatch(self):
        self.assertFalse(ports_compatible(self.port("scalar", "K"), self.port("scalar", "")))

    def test_shape_mismatch(self):
        a = self.port("scalar-field-2d", "", [128, 128])
        b = self.port("scalar-field-2d", "", [64, 64])
        self.assertFalse(ports_compatible(a, b))
        self.assertFalse(ports_compatible(a, self.port("scalar-field-2d", "")))

    def test_names_are_ignored(self):
        self.assertTrue(
            ports_compatible(
                self.port("time-series", "", name="a"), self.port("time-series", "", name="b")
            )
        )

    def test_reflexive_and_symmetric(self):
        ports = [
            self.port("scalar", "K"),
            self.port("scalar", ""),
            self.port("table", ""),
            self.port("scalar-field-2d", "", [8, 8]),
            self.port("scalar-field-2d", "", [8, 4]),
            self.port("scalar-field-2d", ""),
        ]
        for a in ports:
            self.assertTrue(ports_compatible(a, a))
            for b in ports:
                self.assertEqual(ports_compatible(a, b), ports_compatible(b, a))


class TestManifestIO(unittest.TestCase):
    def test_alias_fields(self):
        manifest = parse_manifest(json.dumps(solver_manifest(description="heat.md")))
        self.assertEqual(manifest.inputs[0].semantic_type, "scalar")
        self.assertEqual(manifest.description_ref, "heat.md")
        self.assertIs(manifest.realizations[0].kind, RealizationKind.SOLVER_EXECUTABLE)
        self.assertIs(manifest.realizations[0].level, AbstractionLevel.SIMULATION_MODEL)

    def test_json_round_trip(self):
        manifest = parse_manifest(json.dumps(solver_manifest()))
        self.assertEqual(parse_manifest(manifest_to_json(manifest)), manifest)

    def test_malformed_json_has_position(self):
        with self.assertRaises(MalformedJson) as ctx:
            parse_manifest('{"id": "x",\n  "version": }')
        self.assertEqual(ctx.exception.line, 2)

    def test_missing_field_is_malformed(self):
        with self.assertRaises(MalformedJson):
            parse_manifest(json.dumps({"id": "x"}))

    def test_locators_resolve_against_source_dir(self):
        manifest = parse_manifest(
            json.dumps(
                solver_manifest(
                    realizations=[
                        {"level": 1, "kind": "description", "locator": "doc.md"},
                        {"level": 3, "kind": "table", "locator": "t.csv"},
                        {"level": 2, "kind": "solver", "locator": "heat.solver:run"},
                    ]
                )
            ),
            source_dir=Path("/srv/heat"),
        )
        description, table, solver = manifest.realizations
        self.assertEqual(manifest.resolve_locator(table), str(Path("/srv/heat/t.csv")))
        self.assertEqual(manifest.resolve_locator(solver), "heat.solver:run")
        self.assertEqual(manifest.description_path(), Path("/srv/heat/doc.md"))
        self.assertFalse(description.executable)
        self.assertTrue(table.executable)

    def test_manifests_are_immutable(self):
        manifest = ComponentManifest.model_validate(solver_manifest())
        with self.assertRaises(Exception):
            manifest.id = "other"


class TestWorkflowDefinition(unittest.TestCase):
    def test_load_workflow(self):
        definition = load_workflow(
            json.dumps(
                {
                    "title": "chain",
                    "stages": [{"component": "a"}, {"component": "b", "level": 3}],
                    "bindings": [
                        {"from": {"stage": 0, "port": "out"}, "to": {"stage": 1, "port": "in"}}
                    ],
                }
            )
        )
        self.assertEqual(definition.title, "chain")
        self.assertIsNone(definition.stages[0].requested_level)
        self.assertIs(definition.stages[1].requested_level, AbstractionLevel.SURROGATE_MODEL)
        self.assertEqual(str(definition.bindings[0]), "0.out -> 1.in")

    def test_load_workflow_rejects_bad_shape(self):
        with self.assertRaises(MalformedJson):
            load_workflow(json.dumps({"stages": [{"level": 2}]}))
        with self.assertRaises(MalformedJson):
            load_workflow("[]")


class TestInputsObject(unittest.TestCase):
    def test_mapping_access(self):
        inputs = InputsObject(entries={"a": 1, "b": "x", "c": True, "d": 0.5})
        self.assertEqual(len(inputs), 4)
        self.assertIn("a", inputs)
        self.assertEqual(inputs["d"], 0.5)
        self.assertIsNone(inputs.get("missing"))

    def test_rejects_nesting_and_empty_keys(self):
        with self.assertRaises(ValueError):
            InputsObject(entries={"a": {"b": 1}})
        with self.assertRaises(ValueError):
            InputsObject(entries={"": 1})

    def test_realization_defaults(self):
        r = Realization(level=3, kind="table", locator="t.csv")
        self.assertIsNone(r.checksum)
        self.assertIsNone(r.argument)


if __name__ == "__main__":
    unittest.main()
