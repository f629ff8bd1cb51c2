import json
import tempfile
import unittest
from pathlib import Path

from cseflow import (
    AbstractionLevel,
    Binding,
    ComponentManifest,
    InputsObject,
    RunStatus,
    StageRef,
    StageStatus,
    WorkflowDefinition,
    compose,
    execute,
    load_registry,
    resolve_realization,
)
from cseflow.components.data import load_table
from cseflow.engine import execution_order
from cseflow.errors import (
    CyclicBindings,
    DuplicateBinding,
    IncompatiblePorts,
    IoFailure,
    NoExecutableRealization,
    UnboundRequiredInput,
    UnknownComponent,
    UnknownPort,
)

REPO_COMPONENTS = Path(__file__).resolve().parent.parent / "components"

SMALL_CH = {"nx": 8, "ny": 8, "n_steps": 10, "snapshot_interval": 5, "seed": 3}


def component(component_id, inputs=(), outputs=(), realizations=None, runner="ramp_series"):
    """Manifest with a solver realization running ``tests.stages:<runner>``."""
    if realizations is None:
        realizations = [{"level": 2, "kind": "solver", "locator": f"tests.stages:{runner}"}]
    return ComponentManifest.model_validate(
        {
            "id": component_id,
            "version": "1.0.0",
            "inputs": list(inputs),
            "outputs": list(outputs),
            "realizations": realizations,
        }
    )


def series_port(name, required=True):
    return {"name": name, "type": "time-series", "unit": "", "required": required}


def chain(*ids, bindings=()):
    return WorkflowDefinition(
        title="test chain",
        stages=[StageRef(component_id=i) for i in ids],
        bindings=[Binding(**b) for b in bindings],
    )


def bind(producer, output, consumer, input_):
    return {
        "producer_stage": producer,
        "output_port": output,
        "consumer_stage": consumer,
        "input_port": input_,
    }


class TestResolveRealization(unittest.TestCase):
    solver = {"level": 2, "kind": "solver", "locator": "tests.stages:ramp_series"}
    table = {"level": 3, "kind": "table", "locator": "t.csv"}
    description = {"level": 1, "kind": "description", "locator": "d.md"}

    def test_direct_hit(self):
        manifest = component("m", realizations=[self.solver, self.table])
        chosen = resolve_realization(manifest, AbstractionLevel.SIMULATION_MODEL)
        self.assertEqual(chosen.level, AbstractionLevel.SIMULATION_MODEL)
        chosen = resolve_realization(manifest, AbstractionLevel.SURROGATE_MODEL)
        self.assertEqual(chosen.locator, "t.csv")

    def test_fallback_to_table(self):
        manifest = component("m", realizations=[self.description, self.table])
        chosen = resolve_realization(
            manifest,
            AbstractionLevel.SIMULATION_MODEL,
            [AbstractionLevel.SIMULATION_MODEL, AbstractionLevel.SURROGATE_MODEL],
        )
        self.assertEqual(chosen.locator, "t.csv")

    def test_unrequested_uses_preference(self):
        manifest = component("m", realizations=[self.table, self.solver])
        self.assertEqual(resolve_realization(manifest).level, AbstractionLevel.SIMULATION_MODEL)
        chosen = resolve_realization(
            manifest, None, [AbstractionLevel.SURROGATE_MODEL, AbstractionLevel.SIMULATION_MODEL]
        )
        self.assertEqual(chosen.level, AbstractionLevel.SURROGATE_MODEL)

    def test_description_only(self):
        manifest = component("m", realizations=[self.description])
        with self.assertRaises(NoExecutableRealization):
            resolve_realization(manifest, AbstractionLevel.SIMULATION_MODEL)

    def test_level_one_request_returns_description(self):
        manifest = component("m", realizations=[self.description, self.solver])
        chosen = resolve_realization(manifest, AbstractionLevel.MATHEMATICAL_MODEL)
        self.assertFalse(chosen.executable)


class TestCompose(unittest.TestCase):
    def setUp(self):
        self.registry = {
            "producer": component("producer", outputs=[series_port("out")]),
            "consumer": component(
                "consumer", inputs=[series_port("in")], outputs=[series_port("out")]
            ),
            "kelvin": component(
                "kelvin",
                inputs=[{"name": "in", "type": "scalar", "unit": "K"}],
                outputs=[series_port("out")],
            ),
        }

    def test_two_stage_chain(self):
        plan = compose(
            chain("producer", "consumer", bindings=[bind(0, "out", 1, "in")]), self.registry
        )
        self.assertEqual(len(plan.stages), 2)
        self.assertEqual(len(plan.edges), 1)
        self.assertEqual([s.manifest.id for s in plan.stages], ["producer", "consumer"])
        self.assertEqual(plan.title, "test chain")

    def test_incompatible_ports(self):
        with self.assertRaises(IncompatiblePorts):
            compose(chain("producer", "kelvin", bindings=[bind(0, "out", 1, "in")]), self.registry)

    def test_unknown_component(self):
        with self.assertRaises(UnknownComponent) as ctx:
            compose(chain("reactorX"), self.registry)
        self.assertEqual(ctx.exception.component_id, "reactorX")

    def test_unknown_port(self):
        for binding in (
            bind(0, "nope", 1, "in"),
            bind(0, "out", 1, "nope"),
            bind(0, "out", 5, "in"),
        ):
            with self.assertRaises(UnknownPort, msg=binding):
                compose(chain("producer", "consumer", bindings=[binding]), self.registry)

    def test_duplicate_binding(self):
        definition = chain(
            "producer",
            "producer",
            "consumer",
            bindings=[bind(0, "out", 2, "in"), bind(1, "out", 2, "in")],
        )
        with self.assertRaises(DuplicateBinding):
            compose(definition, self.registry)

    def test_cycle(self):
        definition = chain(
            "consumer", "consumer", bindings=[bind(0, "out", 1, "in"), bind(1, "out", 0, "in")]
        )
        with self.assertRaises(CyclicBindings):
            compose(definition, self.registry)

    def test_self_loop_is_a_cycle(self):
        with self.assertRaises(CyclicBindings):
            compose(chain("consumer", bindings=[bind(0, "out", 0, "in")]), self.registry)

    def test_unbound_required_input(self):
        with self.assertRaises(UnboundRequiredInput) as ctx:
            compose(chain("consumer"), self.registry)
        self.assertEqual((ctx.exception.stage, ctx.exception.port), (0, "in"))

    def test_required_input_from_inputs_object(self):
        plan = compose(chain("kelvin"), self.registry, InputsObject(entries={"in": 300.0}))
        self.assertEqual(len(plan.stages), 1)

    def test_backward_binding_is_reordered(self):
        plan = compose(
            chain("consumer", "producer", bindings=[bind(1, "out", 0, "in")]), self.registry
        )
        self.assertEqual([s.stage for s in plan.stages], [1, 0])
        self.assertEqual([s.index for s in plan.stages], [0, 1])
        self.assertEqual(plan.stage_for(0).manifest.id, "consumer")

    def test_execution_order_is_stable(self):
        self.assertEqual(execution_order(4, []), [0, 1, 2, 3])
        edges = [Binding(**bind(3, "o", 0, "i")), Binding(**bind(2, "o", 1, "i"))]
        self.assertEqual(execution_order(4, edges), [2, 1, 3, 0])

    def test_empty_definition(self):
        plan = compose(WorkflowDefinition(), self.registry)
        self.assertEqual(plan.stages, [])


class TestExecute(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.registry = dict(load_registry(REPO_COMPONENTS))
        self.registry["ramp"] = component("ramp", outputs=[series_port("series")])
        self.registry["broken"] = component("broken", outputs=[series_port("out")], runner="failing")
        self.registry["forgetful"] = component(
            "forgetful", outputs=[series_port("out")], runner="forgetful"
        )
        self.registry["echo"] = component(
            "echo",
            inputs=[{"name": "value", "type": "scalar", "unit": "", "required": False}],
            outputs=[{"name": "out", "type": "scalar", "unit": ""}],
            runner="echo_value",
        )

    def tearDown(self):
        self._tmp.cleanup()

    def solver_plan(self, **values):
        inputs = InputsObject(entries={**SMALL_CH, **values})
        definition = WorkflowDefinition(
            title="CH", stages=[StageRef(component_id="cahn-hilliard", requested_level=2)]
        )
        return compose(definition, self.registry, inputs)

    def test_cahn_hilliard_happy_path(self):
        results, record = execute(self.solver_plan(), self.tmp / "out")
        self.assertEqual(len(results), 1)
        self.assertIs(results[0].status, StageStatus.OK)
        self.assertIs(record.status, RunStatus.COMPLETED)
        out = self.tmp / "out"
        for name in ("snapshots", "energy_series", "final_energy", "final_field"):
            self.assertTrue(results[0].outputs[name].is_file(), name)
        self.assertEqual(results[0].outputs["final_energy"].name, "stage0_final_energy.txt")
        self.assertTrue((out / "artifacts" / "stage0_snapshots" / "step000010.pgm").is_file())
        for name in ("run_record.json", "fair_metadata.json", "workflow.dot"):
            self.assertTrue((out / name).is_file(), name)
        self.assertIn("equilibrium concentrations", results[0].message)
        self.assertEqual(record.stages[0].parameters["nx"], 8)

    def test_every_written_file_has_a_digest(self):
        results, record = execute(self.solver_plan(), self.tmp / "out")
        artifacts = self.tmp / "out" / "artifacts"
        written = {
            p.relative_to(self.tmp / "out").as_posix() for p in artifacts.rglob("*") if p.is_file()
        }
        self.assertEqual(set(record.stages[0].artifacts), written)
        snapshots_csv = (artifacts / "stage0_snapshots.csv").read_text(encoding="utf-8")
        self.assertTrue(snapshots_csv.startswith("step,time,image,field\n0,0,"))
        self.assertIn("stage0_snapshots/step000005.pgm", snapshots_csv)

    def test_invalid_params_fail_the_stage(self):
        plan = compose(
            WorkflowDefinition(
                stages=[StageRef(component_id="cahn-hilliard"), StageRef(component_id="ramp")]
            ),
            self.registry,
            InputsObject(entries={**SMALL_CH, "dt": 0.0}),
        )
        results, record = execute(plan, self.tmp / "out")
        self.assertEqual(len(results), 1)
        self.assertIs(results[0].status, StageStatus.FAILED)
        self.assertIn("InvalidParams", results[0].message)
        self.assertIs(record.status, RunStatus.FAILED)
        self.assertEqual(len(record.stages), 1)
        self.assertFalse((self.tmp / "out" / "artifacts" / "stage1_series.csv").exists())

    def test_fail_fast(self):
        plan = compose(chain("ramp", "broken", "ramp"), self.registry)
        seen = []
        results, record = execute(
            plan, self.tmp / "out", progress=lambda stage, result, n: seen.append((stage.index, result.ok, n))
        )
        self.assertEqual(seen, [(0, True, 3), (1, False, 3)])
        self.assertEqual([r.status for r in results], [StageStatus.OK, StageStatus.FAILED])
        self.assertEqual(results[1].message, "RuntimeError: boom")
        self.assertIs(record.status, RunStatus.FAILED)

    def test_missing_output_fails(self):
        results, record = execute(compose(chain("forgetful"), self.registry), self.tmp / "out")
        self.assertIs(results[0].status, StageStatus.FAILED)
        self.assertIn("no artifact for output port(s) out", results[0].message)

    def test_only_declared_inputs_reach_the_stage(self):
        inputs = InputsObject(entries={"value": 2.5, "unrelated": "x"})
        results, record = execute(compose(chain("echo"), self.registry, inputs), self.tmp / "out")
        self.assertEqual(results[0].outputs["out"].read_text(encoding="utf-8"), "2.5\n")
        self.assertEqual(record.stages[0].parameters, {"value": 2.5})

    def test_time_average_chain(self):
        definition = chain("ramp", "time-average", bindings=[bind(0, "series", 1, "series")])
        plan = compose(definition, self.registry, InputsObject(entries={"t_e": 10.0}))
        results, record = execute(plan, self.tmp / "out")
        self.assertIs(record.status, RunStatus.COMPLETED)
        objective = float(results[1].outputs["objective"].read_text(encoding="utf-8"))
        self.assertEqual(objective, 5.0)
        self.assertEqual(
            record.stages[1].parameters,
            {"t_e": 10.0, "series": "artifacts/stage0_series.csv"},
        )

    def test_data_component_at_surrogate_level(self):
        plan = compose(
            WorkflowDefinition(stages=[StageRef(component_id="data", requested_level=3)]),
            self.registry,
        )
        results, record = execute(plan, self.tmp / "out")
        self.assertIs(record.status, RunStatus.COMPLETED, results[0].message)
        table = load_table(results[0].outputs["series"])
        self.assertEqual(table.knots[:2], [(0.0, 0.0), (0.5, 0.166768)])

    def test_same_plan_same_digests(self):
        first = execute(self.solver_plan(), self.tmp / "a")[1]
        second = execute(self.solver_plan(), self.tmp / "b")[1]
        self.assertEqual(first.artifact_digests(), second.artifact_digests())
        self.assertNotEqual(first.run_id, second.run_id)

    def test_artifacts_belong_to_latest_run(self):
        out = self.tmp / "out"
        stale = out / "artifacts" / "stale.txt"
        stale.parent.mkdir(parents=True)
        stale.write_text("old", encoding="utf-8")
        execute(compose(chain("ramp"), self.registry), out)
        self.assertFalse(stale.exists())

    def test_unwritable_output_directory(self):
        blocker = self.tmp / "file"
        blocker.write_text("", encoding="utf-8")
        with self.assertRaises(IoFailure):
            execute(compose(chain("ramp"), self.registry), blocker / "out")

    def test_workflow_graph_written(self):
        definition = chain("ramp", "time-average", bindings=[bind(0, "series", 1, "series")])
        plan = compose(definition, self.registry, InputsObject(entries={"t_e": 10.0}))
        execute(plan, self.tmp / "out")
        dot = (self.tmp / "out" / "workflow.dot").read_text(encoding="utf-8")
        self.assertIn('"stage0" -> "stage1" [label="series -> series"];', dot)

    def test_run_record_on_disk_matches(self):
        _, record = execute(compose(chain("ramp"), self.registry), self.tmp / "out")
        on_disk = json.loads((self.tmp / "out" / "run_record.json").read_text(encoding="utf-8"))
        self.assertEqual(on_disk["run_id"], record.run_id)
        self.assertEqual(on_disk["status"], "Completed")


if __name__ == "__main__":
    unittest.main()
