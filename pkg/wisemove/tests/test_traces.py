import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from wisemove.exceptions import IncompleteTraceError, RenderError, WisemoveError
from wisemove.harness import RunConfig, run_seeded_episode
from wisemove.render import (
    ASCII_COLS,
    ASCII_ROWS,
    build_frames,
    render,
    render_ascii,
    render_state,
    world_to_canvas,
)
from wisemove.reward import episode_value
from wisemove.traces import (
    LoggedTrace,
    dumps_records,
    load_trace,
    read_records,
    trace_records,
    valuations_from_records,
    vehicle_records,
    write_trace,
)
from wisemove.world import Route

from .helpers import GEOMETRY, vehicle, world

CFG = RunConfig(seed=1, max_episode_steps=60)


class TraceRecordsTestCase(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.trace = run_seeded_episode(CFG, 17)
        cls.records = trace_records(cls.trace)

    def test_record_layout(self):
        kinds = [r["kind"] for r in self.records]
        self.assertEqual(kinds[0], "decision")
        self.assertEqual(kinds[-1], "terminal")
        self.assertEqual(kinds.count("terminal"), 1)
        self.assertEqual(kinds.count("step"), self.trace.terminal.T)
        for before, after in zip(self.records, self.records[1:]):
            if before["kind"] == "decision":
                self.assertEqual((after["kind"], after["t"]), ("step", before["t"]))

    def test_step_records_carry_all_vehicles(self):
        step = next(r for r in self.records if r["kind"] == "step")
        self.assertEqual(len(step["vehicles"]), len(self.trace.steps[0].state.vehicles))
        self.assertEqual(set(step["action"]), {"accel", "steer_rate"})
        self.assertIn("highest_priority", step["valuation"])

    def test_loaded_trace_has_the_same_value(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_trace(self.trace, Path(tmp) / "a" / "trace.jsonl")
            logged = load_trace(path)
        self.assertEqual(logged.seed, 17)
        self.assertAlmostEqual(episode_value(logged, CFG.reward).value, self.trace.terminal.episode_value, places=9)
        self.assertEqual(len(logged.decisions), len(self.trace.decisions))

    def test_duplicate_terminal_rejected(self):
        logged = LoggedTrace(self.records + [self.records[-1]])
        with self.assertRaises(IncompleteTraceError):
            logged.terminal


class ReadRecordsTestCase(SimpleTestCase):

    def test_blank_lines_skipped_and_bad_lines_located(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "trace.jsonl"
            path.write_text('{"a": true}\n\n{"a": false}\n', encoding="utf-8")
            self.assertEqual(read_records(path), [{"a": True}, {"a": False}])
            path.write_text('{"a": true}\n{"a": \n', encoding="utf-8")
            with self.assertRaises(WisemoveError) as ctx:
                read_records(path)
            self.assertIn(":2:", str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(WisemoveError):
            read_records("/nonexistent/trace.jsonl")

    def test_one_object_per_line(self):
        text = dumps_records([{"kind": "step", "t": 0}, {"kind": "terminal", "T": 1}])
        self.assertEqual([json.loads(line)["kind"] for line in text.splitlines()], ["step", "terminal"])

    def test_valuations_from_records(self):
        records = [
            {"kind": "decision", "t": 0},
            {"kind": "step", "t": 0, "valuation": {"a": True}},
            {"kind": "terminal", "T": 1, "valuation": {"a": False}},
        ]
        self.assertEqual(valuations_from_records(records), [{"a": True}, {"a": False}])
        self.assertEqual(valuations_from_records([{"a": True}]), [{"a": True}])


class RenderTestCase(SimpleTestCase):

    def _record(self, *vehicles, t=0):
        return {"kind": "step", "t": t, "time": t * 0.1, "option": "KeepLane",
                "vehicles": vehicle_records(world(*vehicles)) if vehicles else []}

    def test_canvas_mapping(self):
        half = GEOMETRY.route_length / 2
        self.assertEqual(world_to_canvas(-half, half), (0, 0))
        self.assertEqual(world_to_canvas(half, -half), (ASCII_COLS - 1, ASCII_ROWS - 1))
        self.assertEqual(world_to_canvas(0.0, 0.0), (60, 30))
        col, row = world_to_canvas(10.0, 10.0)
        self.assertEqual(world_to_canvas(11.0, 12.0), (col + 1, row - 1))

    def test_empty_road_frame(self):
        frame = build_frames([self._record()])[0]
        text = render_ascii(frame)
        rows = text.splitlines()[1:]
        self.assertEqual(len(rows), ASCII_ROWS)
        self.assertTrue(all(len(row) == ASCII_COLS for row in rows))
        self.assertNotIn("E", text.split("\n", 1)[1])
        self.assertEqual(rows[ASCII_ROWS // 2][ASCII_COLS // 2], "+")

    def test_vehicles_drawn(self):
        rows = render([self._record(vehicle(-40.0), vehicle(20.0, route=Route.VERTICAL))])[0].splitlines()[1:]
        col, row = world_to_canvas(*GEOMETRY.to_world(Route.HORIZONTAL, -40.0, GEOMETRY.lane_center(0)))
        self.assertEqual(rows[row][col], "E")
        self.assertTrue(any("1" in r for r in rows))

    def test_one_frame_per_step(self):
        trace = run_seeded_episode(CFG, 17)
        self.assertEqual(len(render(trace)), trace.terminal.T)
        self.assertEqual(len(build_frames(LoggedTrace(trace_records(trace)))), trace.terminal.T)

    def test_svg_frames_written(self):
        records = [self._record(vehicle(-40.0), t=t) for t in range(3)]
        with tempfile.TemporaryDirectory() as tmp:
            frames = render(records, "svg", out=tmp)
            names = sorted(p.name for p in Path(tmp).iterdir())
        self.assertEqual(names, ["frame_000000.svg", "frame_000001.svg", "frame_000002.svg"])
        self.assertIn("<svg", frames[0])
        self.assertEqual(render(records[:1], "svg")[0], frames[0])

    def test_unknown_style(self):
        with self.assertRaises(RenderError):
            render([], "png")

    def test_render_state(self):
        text = render_state(world(vehicle(-40.0)))
        self.assertIn("E", text)
