import argparse
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from wisemove.exceptions import WisemoveError
from wisemove.harness import compare, evaluate, format_comparison, format_table, run_seeded_episode
from wisemove.ltl import locate_violation, parse
from wisemove.planner import PlannerMode
from wisemove.render import STYLES, render
from wisemove.serializers import build_run_config, load_run_config
from wisemove.traces import read_records, valuations_from_records, write_trace

RUNTIME_ERROR = 2


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='Run configuration (JSON); defaults to WISEMOVE["DEFAULT_CONFIG"]')
    common.add_argument('--seed', type=int, help='Base seed, overriding the configuration')
    common.add_argument('--planner', choices=PlannerMode.values, help='High-level planner')
    common.add_argument('--out', metavar='DIR', help='Output directory for traces, metrics and frames')
    return common


class Command(BaseCommand):
    help = 'Run, evaluate, verify and render episodes of the four-way stop scenario'

    def add_arguments(self, parser):
        common = _common_flags()
        sub = parser.add_subparsers(dest='subcommand', required=True, metavar='{run,evaluate,verify,render}')

        run = sub.add_parser('run', parents=[common], help='Simulate one episode and write its trace')
        run.add_argument('--render', choices=STYLES, help='Render the episode after writing the trace')

        ev = sub.add_parser('evaluate', parents=[common], help='Outcome percentages over trials of episodes')
        ev.add_argument('--workers', type=int, help='Episodes simulated in parallel')
        ev.add_argument('--compare', action='store_true', help='Run both planners on the same episode seeds')

        verify = sub.add_parser('verify', parents=[common], help='Check a temporal property against a trace file')
        verify.add_argument('--property', required=True, help='Formula, e.g. "G(in_intersection => intersection_is_clear)"')
        verify.add_argument('--trace', required=True, metavar='PATH', help='Trace or valuation records (JSON lines)')

        rend = sub.add_parser('render', parents=[common], help='Draw the frames of a trace file')
        rend.add_argument('--trace', required=True, metavar='PATH')
        rend.add_argument('--style', choices=STYLES, default='ascii')

    def handle(self, *args, **options):
        handler = getattr(self, f"_handle_{options['subcommand']}")
        try:
            handler(options)
        except WisemoveError as e:
            raise CommandError(str(e), returncode=RUNTIME_ERROR) from e

    # --- subcommands --------------------------------------------------------

    def _config(self, options, **extra):
        if options.get('config'):
            cfg = load_run_config(options['config'])
        else:
            default = settings.WISEMOVE.get('DEFAULT_CONFIG')
            cfg = load_run_config(default) if default and Path(default).exists() else build_run_config({})
        return cfg.with_overrides(seed=options.get('seed'), planner=options.get('planner'),
                                  out=options.get('out'), **extra)

    def _handle_run(self, options):
        cfg = self._config(options)
        trace = run_seeded_episode(cfg, cfg.seed)
        directory = Path(cfg.output.trace_dir or '.')
        path = write_trace(trace, directory / f"{cfg.planner}_seed{cfg.seed}.jsonl")
        self.stdout.write(f"{trace.outcome} at t={trace.terminal.time:.1f}s, value {trace.terminal.episode_value:.3f}")
        self.stdout.write(f"trace written to {path}")
        if options.get('render') == 'ascii':
            for frame in render(trace, 'ascii', g=cfg.scenario.geometry):
                self.stdout.write(frame, ending='')
        elif options.get('render') == 'svg':
            frames_dir = Path(options.get('out') or directory) / 'frames'
            frames = render(trace, 'svg', out=frames_dir, g=cfg.scenario.geometry)
            self.stdout.write(f"{len(frames)} frames written to {frames_dir}")

    def _handle_evaluate(self, options):
        cfg = self._config(options, workers=options.get('workers'))
        if options.get('compare'):
            self.stdout.write(format_comparison(compare(cfg)), ending='')
        else:
            self.stdout.write(format_table([evaluate(cfg)]), ending='')

    def _handle_verify(self, options):
        formula = parse(options['property'])
        trace = valuations_from_records(read_records(options['trace']))
        verdict, index = locate_violation(formula, trace)
        self.stdout.write(verdict.label)
        if index is not None:
            self.stdout.write(f"first falsifying step: {index}")

    def _handle_render(self, options):
        cfg = self._config(options)
        records = read_records(options['trace'])
        style = options['style']
        out = options.get('out')
        frames = render(records, style, out=out, g=cfg.scenario.geometry)
        if style == 'ascii':
            for frame in frames:
                self.stdout.write(frame, ending='')
        elif out is None:
            # no directory: SVG documents go to stdout back to back
            for frame in frames:
                self.stdout.write(frame, ending='')
        else:
            self.stdout.write(f"{len(frames)} frames written to {out}")
