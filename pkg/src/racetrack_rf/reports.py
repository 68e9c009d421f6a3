"""CSV rows, parameter sweeps and the human-readable summary.

Result CSV columns (one row per benchmark and configuration)::

    benchmark,num_aps,num_tracks,track_length,window_size,
    recommended_total_shifts,opt_total_shifts,v1_total_shifts,v2_total_shifts,
    recommended_total_energy,opt_total_energy,v1_total_energy,v2_total_energy,
    recommended_total_latency,opt_total_latency,v1_total_latency,v2_total_latency,
    num_reads,num_writes,recommended_switches,opt_switches

``v1`` is the static horizontal run and ``v2`` the static vertical one.
Energies are in fJ and latencies in ns, written exactly.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

from .cfg import Cfg
from .geometry import CostParams, GeometryError, RegisterFileGeometry, ValidatedGeometry, validate_geometry
from .recommender import PruneOptions, build_table
from .simulator import METRICS, ComparisonReport, compile_trace, run_versions
from .trace import TraceInstruction

__all__ = [
    "CSV_COLUMNS",
    "SRAM",
    "SramBaseline",
    "SweepSpec",
    "comparison_row",
    "format_number",
    "read_rows",
    "render_report",
    "run_sweep",
    "sweep_geometries",
    "write_rows",
]

log = logging.getLogger(__name__)

POLICY_PREFIX = {"rec": "recommended", "lopt": "opt", "static_h": "v1", "static_v": "v2"}
CSV_COLUMNS = (
    "benchmark",
    "num_aps",
    "num_tracks",
    "track_length",
    "window_size",
    *(f"{POLICY_PREFIX[p]}_total_{m}" for m in METRICS for p in POLICY_PREFIX),
    "num_reads",
    "num_writes",
    "recommended_switches",
    "opt_switches",
)


@dataclass(frozen=True)
class SramBaseline:
    """Published SRAM register file figures (energy in fJ, latency in ns)."""

    read_energy: tuple[Fraction, Fraction] = (Fraction(390), Fraction(710))
    write_energy: tuple[Fraction, Fraction] = (Fraction(800), Fraction(1570))
    latency: tuple[Fraction, Fraction] = (Fraction(164), Fraction(254))

    def __post_init__(self):
        for lo, hi in (self.read_energy, self.write_energy, self.latency):
            if lo > hi:
                raise ValueError("SRAM range lower bound exceeds upper bound")

    def energy_flag(self, avg_energy) -> str:
        if avg_energy < min(self.read_energy[0], self.write_energy[0]):
            return "below SRAM band"
        if avg_energy > max(self.read_energy[1], self.write_energy[1]):
            return "above SRAM band"
        return "within SRAM band"


SRAM = SramBaseline()


def format_number(x) -> str:
    """Exact decimal text for integers and terminating fractions."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    d = x.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d == 1:
        return format(Decimal(x.numerator) / Decimal(x.denominator), "f")
    return repr(float(x))


def comparison_row(benchmark: str, geom: RegisterFileGeometry, window: int, rep: ComparisonReport) -> dict[str, str]:
    row = {
        "benchmark": benchmark,
        "num_aps": str(geom.num_aps),
        "num_tracks": str(geom.num_tracks),
        "track_length": str(geom.track_length),
        "window_size": str(window),
    }
    for m in METRICS:
        for p, prefix in POLICY_PREFIX.items():
            row[f"{prefix}_total_{m}"] = format_number(getattr(getattr(rep, p).totals, m))
    row["num_reads"] = str(rep.static_h.reads)
    row["num_writes"] = str(rep.static_h.writes)
    row["recommended_switches"] = str(rep.rec.switches)
    row["opt_switches"] = str(rep.lopt.switches)
    return row


def write_rows(rows: Iterable[Mapping[str, str]], out: TextIO) -> None:
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def read_rows(src: TextIO) -> list[dict[str, str]]:
    reader = csv.DictReader(src)
    required = set(CSV_COLUMNS[:17]) | {"num_reads", "num_writes"}
    missing = required - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"results CSV lacks columns: {', '.join(sorted(missing))}")
    rows = []
    for lineno, row in enumerate(reader, 2):
        if None in row or any(v is None for v in row.values()):
            raise ValueError(f"line {lineno}: wrong number of fields")
        for key in required - {"benchmark"}:
            try:
                Fraction(row[key])
            except ValueError:
                raise ValueError(f"line {lineno}: column {key} is not a number: {row[key]!r}") from None
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    """Grid of configurations; each track count implies its track length.

    Track length is chosen so that ``num_tracks * track_length`` equals the
    register file's ``num_regs * reg_bits`` bits.
    """

    num_aps: Sequence[int] = (2,)
    num_tracks: Sequence[int] = (32,)
    windows: Sequence[int] = (100,)
    base: RegisterFileGeometry = field(default_factory=RegisterFileGeometry)
    prune: PruneOptions = field(default_factory=PruneOptions)
    params: CostParams = field(default_factory=CostParams)
    lopt_objective: str = "shifts"
    jobs: int = 1  # worker processes; rows come back in grid order regardless


def sweep_geometries(spec: SweepSpec) -> Iterator[ValidatedGeometry]:
    """Feasible geometries of the grid in order; infeasible ones are logged and skipped."""
    bits = spec.base.num_regs * spec.base.reg_bits
    for n in spec.num_tracks:
        width = bits // n if n > 0 and bits % n == 0 else 0
        for ap in spec.num_aps:
            g = replace(spec.base, num_tracks=n, track_length=width, num_aps=ap)
            try:
                yield validate_geometry(g)
            except GeometryError as exc:
                log.warning("skipping num_tracks=%d num_aps=%d: %s", n, ap, exc)


def _sweep_cell(spec: SweepSpec, name: str, cfg: Cfg, trace, geom: ValidatedGeometry) -> list[dict[str, str]]:
    ct = compile_trace(trace, geom)
    rows = []
    for window in spec.windows:
        table = build_table(cfg, geom, window, spec.prune)
        rep = run_versions(ct, geom, spec.params, table, window, spec.lopt_objective)
        rows.append(comparison_row(name, geom, window, rep))
    return rows


def run_sweep(spec: SweepSpec, benchmarks: Sequence[tuple[str, Cfg, Sequence[TraceInstruction]]]) -> list[dict[str, str]]:
    """One row per benchmark, geometry and window, in grid order.

    With ``spec.jobs > 1`` each (benchmark, geometry) cell runs in its own
    worker process.
    """
    geoms = list(sweep_geometries(spec))
    cells = [(name, cfg, trace, geom) for name, cfg, trace in benchmarks for geom in geoms]
    if spec.jobs < 1:
        raise ValueError("jobs must be positive")
    if spec.jobs == 1 or len(cells) < 2:
        chunks = [_sweep_cell(spec, *c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=min(spec.jobs, len(cells))) as pool:
            chunks = list(pool.map(_sweep_cell, *zip(*[(spec, *c) for c in cells])))
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------------------
# summary


def _ratio(worst: Fraction, rec: Fraction) -> str:
    if rec == 0:
        return "n/a" if worst == 0 else "inf"
    return f"{float(worst / rec):.3f}"


def render_report(rows: Sequence[Mapping[str, str]], sram: SramBaseline = SRAM) -> str:
    out = io.StringIO()
    if not rows:
        out.write("no result rows\n")
        return out.getvalue()
    for row in rows:
        reads, writes = int(row["num_reads"]), int(row["num_writes"])
        n = reads + writes
        out.write(
            f"{row['benchmark']} num_aps={row['num_aps']} num_tracks={row['num_tracks']} "
            f"track_length={row['track_length']} window={row['window_size']} accesses={n}\n"
        )
        if n == 0:
            out.write("  warning: no register accesses, averages reported as 0\n")
        avg_rec_energy = Fraction(0)
        for p, prefix in (("REC", "recommended"), ("LOPT", "opt"), ("STATIC_H", "v1"), ("STATIC_V", "v2")):
            vals = [Fraction(row[f"{prefix}_total_{m}"]) / n if n else Fraction(0) for m in METRICS]
            if p == "REC":
                avg_rec_energy = vals[1]
            out.write(
                f"  {p:<9} avg shifts {float(vals[0]):10.3f}  avg energy {float(vals[1]):10.2f} fJ"
                f"  avg latency {float(vals[2]):9.3f} ns\n"
            )
        ratios = []
        for m in METRICS:
            worst = max(Fraction(row[f"v1_total_{m}"]), Fraction(row[f"v2_total_{m}"]))
            ratios.append(f"{m} {_ratio(worst, Fraction(row[f'recommended_total_{m}']))}")
        out.write("  STATIC_WORST/REC: " + ", ".join(ratios) + "\n")
        out.write(
            f"  REC avg energy {float(avg_rec_energy):.2f} fJ vs SRAM read "
            f"{float(sram.read_energy[0]):.0f}-{float(sram.read_energy[1]):.0f} fJ, write "
            f"{float(sram.write_energy[0]):.0f}-{float(sram.write_energy[1]):.0f} fJ: "
            f"{sram.energy_flag(avg_rec_energy)}\n"
        )
    return out.getvalue()
