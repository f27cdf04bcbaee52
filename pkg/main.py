#!/usr/bin/env python3
"""
gfnoma - grant-free NOMA coding and simulation toolkit.

Subcommands:
  field-check   GF(2^k) table self-check for every supported degree
  bler          Monte Carlo BLER sweep -> CSV + plot script
  train         train the autoencoder detector -> checkpoint + loss CSV
  detect        decode one crafted block and print the hypothesis trace
  power-opt     two-layer min-max power search (+ optional round simulation)
  sysim         resource-pool system simulation -> per-cluster CSV
  zc-analyze    Zadoff-Chu amplitude/correlation report

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

import argparse
import math
import sys
import traceback
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables before settings read them
load_dotenv()

import numpy as np

from config.loader import (
    MultilayerSection,
    PowerSection,
    SysimSection,
    TrainSection,
    ZcSection,
    resolve_sections,
    scenario_config,
    section,
)
from config.settings import (
    DEBUG_FROM_ENV,
    DEFAULT_OUT_DIR,
    DEFAULT_PRIMITIVE_POLYS,
    DEFAULT_WORKERS,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_RUNTIME_ERROR,
    MAX_FIELD_DEGREE,
    MIN_FIELD_DEGREE,
)
from engine.debug import DebugManager, parse_debug_setting
from engine.detectors import joint_activity_bma
from engine.errors import CheckpointMissing, ConfigError, GfNomaError
from engine.galois import build_field, check_field
from engine.harness import emit_plot_script, emit_power_plot_script, run_bler_sweep, write_curve_csv
from engine.multilayer import (
    ArrivalModel,
    DetectorKind,
    LayerPolicy,
    estimate_outage,
    optimize_power_allocation,
    simulate_multilayer_round,
    write_power_grid,
)
from engine.neural import build_specs, init_model, save_model, train, write_loss_trace
from engine.phy import OuterCode, awgn_add, ebn0_to_noise_var, synthesize
from engine.renderer import Renderer
from engine.session import RunSession
from engine.signatures import build_signature_code, zc_report
from engine.sysim import analytic_success_probability, run_system_sim, write_system_metrics


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gfnoma", description="Grant-free NOMA coding and simulation toolkit")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--preset", help="named preset, e.g. bch63_coded, desk or quick")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("--workers", type=int, help="worker processes for Monte Carlo sweeps")
    parser.add_argument("--out", help=f"output directory (default {DEFAULT_OUT_DIR})")
    parser.add_argument("--debug", action="store_true", help="log algorithm decisions to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    fc = sub.add_parser("field-check", help="GF(2^k) self-check")
    fc.add_argument("--k", type=int, help="check a single degree (default: every degree)")

    sub.add_parser("bler", help="BLER sweep")
    sub.add_parser("train", help="train the DL detector")

    det = sub.add_parser("detect", help="decode one crafted block with a hypothesis trace")
    det.add_argument("--messages", required=True, help="comma-separated 1-based message indices")
    det.add_argument("--ebn0", default="inf", help="per-user Eb/N0 in dB (default: noiseless)")

    sub.add_parser("power-opt", help="two-layer power allocation search")
    sub.add_parser("sysim", help="resource-pool system simulation")
    sub.add_parser("zc-analyze", help="Zadoff-Chu correlation report")
    return parser


class Toolkit:
    """CLI controller: resolves configuration and runs one subcommand."""

    def __init__(self, args: argparse.Namespace, renderer: Optional[Renderer] = None):
        self.args = args
        self.renderer = renderer or Renderer()
        self.sections = resolve_sections(args.config, args.preset)
        self.out_dir = args.out or DEFAULT_OUT_DIR

    def run(self) -> int:
        handler = getattr(self, "cmd_" + self.args.command.replace("-", "_"))
        return handler()

    def _seed(self, fallback: int = 0) -> int:
        return self.args.seed if self.args.seed is not None else fallback

    def cmd_field_check(self) -> int:
        if self.args.k is None:
            degrees = range(MIN_FIELD_DEGREE, MAX_FIELD_DEGREE + 1)
        elif MIN_FIELD_DEGREE <= self.args.k <= MAX_FIELD_DEGREE:
            degrees = [self.args.k]
        else:
            raise ConfigError(f"--k must lie in {MIN_FIELD_DEGREE}..{MAX_FIELD_DEGREE}, got {self.args.k}")
        rows = []
        for k in degrees:
            f = build_field(k)
            rows.append({"k": k, "poly": DEFAULT_PRIMITIVE_POLYS[k], "order": f.order, "problems": check_field(f)})
        self.renderer.show_field_report(rows)
        return EXIT_OK if all(not r["problems"] for r in rows) else EXIT_RUNTIME_ERROR

    def cmd_bler(self) -> int:
        scenario = self.sections["scenario"]
        workers = self.args.workers or scenario.get("workers") or DEFAULT_WORKERS
        cfg = scenario_config(self.sections, seed=self.args.seed, workers=workers)
        session = RunSession(self.out_dir, "bler", cfg.seed, cfg.config_hash())
        with self.renderer.status(f"Sweeping {len(cfg.ebn0_grid_db)} Eb/N0 points...") as status:
            def progress(ebn0: float, done: int):
                status.update(f"Eb/N0 {ebn0:g} dB: {done} trials")
            points = run_bler_sweep(cfg, progress)
        csv_path = write_curve_csv(points, cfg, session.path(f"{cfg.scenario_id}_bler.csv"))
        script = emit_plot_script(csv_path, session.path(f"{cfg.scenario_id}_bler.plot.py"),
                                  session.path(f"{cfg.scenario_id}_bler.png"))
        self.renderer.show_curve(points)
        self.renderer.success(f"wrote {csv_path} and {script}")
        session.save_manifest()
        return EXIT_OK

    def cmd_train(self) -> int:
        ts = section(TrainSection, self.sections, "train")
        if self.args.seed is not None:
            ts.seed = self.args.seed
        cfg = ts.train_config()
        rng = np.random.default_rng(ts.seed)
        model = init_model(build_specs(ts.k, ts.T, ts.rate, cfg.hidden_widths), rng,
                           amplitude=ts.amplitude, T=ts.T, rate=ts.rate, seed=ts.seed)
        session = RunSession(self.out_dir, "train", ts.seed)
        with self.renderer.status("Training...") as status:
            def progress(epoch: int, train_loss: float, val_loss: float):
                status.update(f"epoch {epoch}/{cfg.epochs}  train={train_loss:.5f}  val={val_loss:.5f}")
            model, trace = train(model, cfg, progress)
        path = save_model(model, ts.checkpoint)
        write_loss_trace(trace, session.path("loss_trace.csv"))
        session.extra["checkpoint"] = str(path)
        session.save_manifest()
        self.renderer.show_training(len(trace.train), trace.train[-1], trace.val[-1], str(path))
        return EXIT_OK

    def cmd_detect(self) -> int:
        cfg = scenario_config(self.sections, seed=self.args.seed)
        try:
            messages = sorted(int(m) for m in self.args.messages.split(",") if m.strip())
            ebn0 = float(self.args.ebn0)
        except ValueError as e:
            raise ConfigError(f"bad --messages/--ebn0: {e}") from e
        code = build_signature_code(build_field(cfg.k, cfg.primitive_poly), cfg.T)
        outer = OuterCode.from_rate(cfg.outer_rate)
        if len(set(messages)) != len(messages) or any(not 1 <= m <= code.n for m in messages):
            raise ConfigError(f"--messages must be distinct indices in 1..{code.n}")
        chips = synthesize(code, outer, messages, cfg.amplitude)
        noise_var = ebn0_to_noise_var(ebn0, cfg.amplitude, cfg.T, outer.rate)
        block = awgn_add(chips, noise_var, np.random.default_rng(cfg.seed), cfg.amplitude)
        trace = []
        decoded = joint_activity_bma(block, code, outer, soft=cfg.soft_viterbi, trace=trace)
        self.renderer.show_hypothesis_trace(trace, messages)
        if decoded.ok:
            self.renderer.success(f"decoded {list(decoded.messages)} ({decoded.field_ops} field ops)")
        else:
            self.renderer.info("decode failure: no consistent activity hypothesis")
        return EXIT_OK

    def cmd_power_opt(self) -> int:
        ps = section(PowerSection, self.sections, "power")
        ml = section(MultilayerSection, self.sections, "multilayer")
        seed = self._seed()
        code = build_signature_code(build_field(ps.k, ps.primitive_poly), ps.T)
        outer = OuterCode.from_rate(ps.outer_rate)
        try:
            detector = DetectorKind(ps.detector)
        except ValueError:
            raise ConfigError(f"power detector must be bma or mld, got {ps.detector!r}") from None
        session = RunSession(self.out_dir, "power-opt", seed)
        with self.renderer.status("Searching the power grid..."):
            allocation = optimize_power_allocation(ps.layers, ps.p_max, ps.noise_var, ps.load, ps.trials, code,
                                                   outer, seed, ps.levels, ps.dynamic_range_db, detector)
        grid_csv = write_power_grid(allocation, session.path("power_grid.csv"))
        if ps.layers == 2:
            emit_power_plot_script(grid_csv, session.path("power_grid.plot.py"), session.path("power_grid.png"))
        self.renderer.show_power_allocation(allocation)
        session.extra["powers"] = list(allocation.plan.powers)
        session.extra["minmax_bler"] = allocation.minmax_bler

        if ml.rounds > 0:
            arrivals = ArrivalModel(ml.arrival_rate, ml.fixed_arrivals)
            with self.renderer.status(f"Simulating {ml.rounds} rounds..."):
                metrics = simulate_multilayer_round(
                    allocation.plan, arrivals, ps.noise_var, ml.rounds, seed, outer, ml.p_max_tx, ml.fading,
                    LayerPolicy(ml.policy), ml.least_power, ml.probabilities, detector)
            self.renderer.show_multilayer_metrics(metrics)
            if not math.isinf(ml.p_max_tx):
                outage = estimate_outage(allocation.plan, ml.p_max_tx, ml.outage_draws, seed, ml.fading)
                self.renderer.info(f"Monte Carlo outage estimate over {ml.outage_draws} draws: {outage:.4g}")
        session.save_manifest()
        return EXIT_OK

    def cmd_sysim(self) -> int:
        pools, traffic, mode, phy = section(SysimSection, self.sections, "sysim").build()
        seed = self._seed()
        session = RunSession(self.out_dir, "sysim", seed)
        with self.renderer.status(f"Simulating {pools.frame_count} frames..."):
            metrics = run_system_sim(pools, traffic, mode, seed, phy)
        path = write_system_metrics(metrics, session.path("sysim.csv"))
        self.renderer.show_system_metrics(metrics)
        for part in pools.noma_partitions:
            flow = traffic.clusters.get(part.cluster_id)
            if flow and part.gfru_count and part.gfru_selection == "random" and flow.fixed_arrivals is None:
                lam = flow.rate / part.gfru_count
                p = analytic_success_probability(lam, part.signature_pool_size, part.capability)
                self.renderer.info(f"{part.cluster_id}: analytic success probability {p:.4f}")
        self.renderer.success(f"wrote {path}")
        session.save_manifest()
        return EXIT_OK

    def cmd_zc_analyze(self) -> int:
        zs = section(ZcSection, self.sections, "zc")
        self.renderer.show_zc_report(zc_report(zs.q, zs.u, zs.u_cross))
        return EXIT_OK


def cli_dispatch(argv: Optional[List[str]] = None, renderer: Optional[Renderer] = None) -> int:
    """Parse argv, run the subcommand and map failures onto exit codes."""
    renderer = renderer or Renderer()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG_ERROR
    tags = parse_debug_setting(DEBUG_FROM_ENV)
    if args.debug or tags is not None:
        DebugManager.enable(tags)
    try:
        return Toolkit(args, renderer).run()
    except (ConfigError, CheckpointMissing) as e:
        renderer.error(str(e))
        return EXIT_CONFIG_ERROR
    except GfNomaError as e:
        renderer.error(str(e))
        return EXIT_RUNTIME_ERROR
    except KeyboardInterrupt:
        renderer.error("interrupted")
        return EXIT_RUNTIME_ERROR
    except Exception as e:
        renderer.error(f"unexpected failure: {e}")
        if DebugManager.is_enabled():
            print(traceback.format_exc(), file=sys.stderr)
        return EXIT_RUNTIME_ERROR


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
