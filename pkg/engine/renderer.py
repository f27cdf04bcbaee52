"""Rich-based rendering of reports, traces and result tables."""

import math
from typing import Dict, List, Optional, Sequence

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from engine.detectors import HypothesisResult
from engine.harness import CurvePoint
from engine.multilayer import MultilayerMetrics, PowerAllocation
from engine.sysim import SystemMetrics


def _num(x: float, spec: str = ".4g") -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return format(x, spec)


class Renderer:
    """Handles all user-facing output using the Rich library."""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()

    @staticmethod
    def escape_markup(text: str) -> str:
        """Escape Rich markup characters to prevent parsing errors."""
        return text.replace('[', '\\[').replace(']', '\\]')

    def status(self, message: str):
        """Spinner context for long-running work."""
        return self.console.status(message, spinner="dots")

    def info(self, message: str):
        self.console.print(f"[dim]{self.escape_markup(message)}[/]")

    def success(self, message: str):
        self.console.print(f"[bold green]{self.escape_markup(message)}[/]")

    def error(self, message: str):
        self.console.print(f"[bold red]ERROR:[/] {self.escape_markup(message)}")

    def show_field_report(self, rows: Sequence[Dict]):
        """One row per field degree: polynomial, order and self-check outcome."""
        table = Table(title="GF(2^k) self-check", box=box.SIMPLE_HEAVY)
        table.add_column("k", justify="right")
        table.add_column("polynomial", justify="right")
        table.add_column("order", justify="right")
        table.add_column("status")
        for row in rows:
            ok = not row["problems"]
            status = "[green]ok[/]" if ok else f"[red]{self.escape_markup('; '.join(row['problems']))}[/]"
            table.add_row(str(row["k"]), hex(row["poly"]), str(row["order"]), status)
        self.console.print(table)

    def show_hypothesis_trace(self, trace: List[HypothesisResult], sent: Sequence[int]):
        table = Table(title=f"Activity hypotheses (sent {sorted(sent)})", box=box.SIMPLE_HEAVY)
        for col in ("L", "parity weight", "parity metric", "BMA", "decoded", "resynthesis", ""):
            table.add_column(col, justify="right")
        for row in trace:
            table.add_row(
                str(row.L),
                str(row.parity_weight),
                _num(row.parity_metric),
                row.bma_status.value,
                str(len(row.decoded)),
                _num(row.resynthesis_metric),
                "[bold green]<= winner[/]" if row.winner else "",
            )
        self.console.print(table)

    def show_curve(self, points: Sequence[CurvePoint]):
        table = Table(title="BLER sweep", box=box.SIMPLE_HEAVY)
        for col in ("detector", "Eb/N0", "L", "trials", "errors", "false alarms", "BLER", "95% CI"):
            table.add_column(col, justify="right")
        for p in points:
            table.add_row(p.detector, _num(p.ebn0_db, "g"), str(p.active_users), str(p.trials),
                          str(p.message_errors), str(p.false_alarms), _num(p.bler, ".3e"),
                          self.escape_markup(f"[{_num(p.ci_low, '.2e')}, {_num(p.ci_high, '.2e')}]"))
        self.console.print(table)

    def show_power_allocation(self, allocation: PowerAllocation):
        plan = allocation.plan
        powers = ", ".join(_num(p) for p in plan.powers)
        self.console.print(Panel(
            f"powers: [bold]{powers}[/]\nmin-max BLER: [bold]{_num(allocation.minmax_bler, '.3e')}[/]\n"
            f"grid points evaluated: {len(allocation.grid)}",
            title="Power allocation", border_style="cyan"))

    def show_multilayer_metrics(self, metrics: MultilayerMetrics):
        table = Table(title=f"Multi-layer rounds ({metrics.rounds})", box=box.SIMPLE_HEAVY)
        table.add_column("layer", justify="right")
        table.add_column("transmitted", justify="right")
        table.add_column("recovered", justify="right")
        table.add_column("BLER", justify="right")
        for j, (t, r, b) in enumerate(zip(metrics.transmitted, metrics.recovered, metrics.per_layer_bler), 1):
            table.add_row(str(j), str(t), str(r), _num(b, ".3e"))
        self.console.print(table)
        self.console.print(f"outage probability: {_num(metrics.outage_probability)}   "
                           f"goodput: {_num(metrics.goodput)} msgs/round   "
                           f"mean tx power: {_num(metrics.mean_tx_power)}")

    def show_system_metrics(self, metrics: SystemMetrics):
        table = Table(title=f"Resource pool simulation ({metrics.frames} frames)", box=box.SIMPLE_HEAVY)
        for col in ("cluster", "offered load", "packets", "throughput", "success", "collision"):
            table.add_column(col, justify="right")
        for stats in metrics.clusters.values():
            table.add_row(self.escape_markup(stats.cluster_id), _num(stats.offered_load), str(stats.packets),
                          _num(stats.throughput), _num(stats.success_prob), _num(stats.collision_rate))
        self.console.print(table)
        if metrics.oma_capacity:
            self.console.print(f"[dim]OMA region: {metrics.oma_capacity} reserved blocks[/]")

    def show_zc_report(self, report: Dict[str, float]):
        table = Table(title="Zadoff-Chu correlation", box=box.SIMPLE_HEAVY)
        table.add_column("property")
        table.add_column("value", justify="right")
        for key, value in report.items():
            table.add_row(key, _num(value, ".6g"))
        self.console.print(table)

    def show_training(self, epochs: int, train_loss: float, val_loss: float, path: str):
        self.console.print(Panel(
            f"epochs: {epochs}\nfinal train loss: {train_loss:.6f}\nfinal val loss: {val_loss:.6f}\n"
            f"checkpoint: {self.escape_markup(path)}",
            title="Training complete", border_style="green"))
