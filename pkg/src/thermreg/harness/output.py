"""Trace CSV, metrics text and temperature plot."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

from .loop import CycleRecord
from .metrics import RunMetrics, format_metrics

CSV_COLUMNS = (
    "cycle", "time_ms", "core", "freq_ghz", "volts", "alpha", "p_dyn_w", "p_sta_w",
    "temp_k", "error_k", "gain_ghz_per_k", "deriv_k_per_ghz",
)


def _g(x: float) -> str:
    return f"{x:.6g}"


def trace_csv(records: Sequence[CycleRecord]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in records:
        row = [
            str(r.cycle), _g(r.time_ms), str(r.core), _g(r.freq_ghz), _g(r.volts), _g(r.alpha),
            _g(r.p_dyn_w), _g(r.p_sta_w), _g(r.temp_k), _g(r.error_k),
            _g(r.gain_ghz_per_k), _g(r.deriv_k_per_ghz),
        ]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def plot_svg(records: Sequence[CycleRecord], path: Path, setpoints: dict[int, float] | None = None) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cores = sorted({r.core for r in records})
    n = max(1, len(cores))
    with matplotlib.rc_context({"svg.hashsalt": "thermreg", "svg.fonttype": "path"}):
        fig, axes = plt.subplots(n, 1, figsize=(7, 2.2 * n), sharex=True, squeeze=False)
        for ax, core in zip(axes[:, 0], cores):
            rows = [r for r in records if r.core == core]
            ax.plot([r.time_ms for r in rows], [r.temp_k for r in rows], lw=1.2, label="temperature")
            if rows:
                sp = rows[0].temp_k + rows[0].error_k
                ax.axhline(sp, color="0.5", lw=0.8, ls="--", label="setpoint")
            ax.set_ylabel(f"core {core} [K]")
        axes[-1, 0].set_xlabel("time [ms]")
        if records:
            axes[0, 0].legend(loc="lower right", fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def write_outputs(records: Sequence[CycleRecord], metrics: RunMetrics | None, path: str | Path) -> list[Path]:
    """Write trace.csv, metrics.txt and temperature.svg into directory ``path``."""
    out = Path(path)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "trace.csv"
        with csv_path.open("w", newline="") as fh:
            fh.write(trace_csv(records))
        written.append(csv_path)
        metrics_path = out / "metrics.txt"
        metrics_path.write_text(format_metrics(metrics) if metrics is not None else "no records\n")
        written.append(metrics_path)
        svg_path = out / "temperature.svg"
        plot_svg(records, svg_path)
        written.append(svg_path)
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out}: {exc}") from exc
    return written
