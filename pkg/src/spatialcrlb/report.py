"""Table emission (CSV/JSON), round-trip reading and figure rendering."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError


def _as_dict(row) -> dict:
    return asdict(row) if is_dataclass(row) else dict(row)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        # shortest repr round-trips the same double as the 17-digit CSV text
        return float(v)
    return v


def emit(rows, fmt: str, path, columns=None) -> Path:
    """Write ``rows`` (dataclasses or dicts) as CSV or JSON.

    Column order is ``columns`` when given, else the field order of the
    first row. An empty table gives a header-only CSV or a JSON document
    with an empty ``rows`` list. Non-finite floats appear as ``inf`` /
    ``nan`` in CSV and as ``Infinity`` / ``NaN`` in JSON.
    """
    rows = [_as_dict(r) for r in rows]
    if columns is None:
        if not rows:
            raise InvalidArgumentError("columns are required for an empty table")
        columns = list(rows[0])
    columns = list(columns)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(columns)
                for r in rows:
                    w.writerow([_cell(r[c]) for c in columns])
        elif fmt == "json":
            doc = {"columns": columns,
                   "rows": [{c: _json_value(r[c]) for c in columns} for r in rows]}
            with path.open("w") as fh:
                json.dump(doc, fh, indent=1)
                fh.write("\n")
        else:
            raise InvalidArgumentError(f"format must be csv or json, got {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _parse(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path) -> tuple[list[str], list[dict]]:
    """Read a table written by :func:`emit`; the format follows the suffix."""
    path = Path(path)
    if path.suffix == ".json":
        with path.open() as fh:
            doc = json.load(fh)
        return doc["columns"], doc["rows"]
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [{c: _parse(v) for c, v in zip(header, line)} for line in reader]
    return header, rows


# --------------------------------------------------------------------------
# figures
# --------------------------------------------------------------------------

STYLE = {
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_fig1(rows, path) -> Path:
    """Measured AvgMSE (markers) and ``1/(L_s N_t)`` (lines) vs ``N_t``, one panel per profile."""
    plt = _pyplot()
    rows = [_as_dict(r) for r in rows]
    profiles = list(dict.fromkeys(r["profile"] for r in rows))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, max(1, len(profiles)), figsize=(4.2 * max(1, len(profiles)), 3.4),
                                 squeeze=False)
        for ax, prof in zip(axes[0], profiles):
            sub = [r for r in rows if r["profile"] == prof]
            for L_s in sorted({r["L_s"] for r in sub}):
                pts = sorted((r for r in sub if r["L_s"] == L_s), key=lambda r: r["N_t"])
                n = [r["N_t"] for r in pts]
                line, = ax.loglog(n, [r["avgmse_lb_asymptotic"] for r in pts], "-",
                                  label=f"bound, L_s={L_s}")
                ax.errorbar(n, [r["avgmse"] for r in pts], yerr=[2 * r["avgmse_se"] for r in pts],
                            fmt="o", color=line.get_color(), mfc="none", label=f"MLE, L_s={L_s}")
            ax.set_title(prof)
            ax.set_xlabel("$N_t$")
            ax.set_ylabel("AvgMSE")
            ax.legend()
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_fig2(rows, path) -> Path:
    """Measured AvgMSE and ``1/(beta_max N_t)`` vs SNR, one panel per (profile, f_d)."""
    plt = _pyplot()
    rows = [_as_dict(r) for r in rows]
    panels = list(dict.fromkeys((r["profile"], r["f_d"]) for r in rows))
    ncol = max(1, len({p[1] for p in panels}))
    nrow = max(1, math.ceil(len(panels) / ncol))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(nrow, ncol, figsize=(3.6 * ncol, 3.0 * nrow), squeeze=False)
        for ax, (prof, f_d) in zip(axes.ravel(), panels):
            sub = [r for r in rows if r["profile"] == prof and r["f_d"] == f_d]
            for n_t in sorted({r["N_t"] for r in sub}):
                pts = sorted((r for r in sub if r["N_t"] == n_t), key=lambda r: r["snr_db"])
                snr = [r["snr_db"] for r in pts]
                line, = ax.semilogy(snr, [r["avgmse_lb_finite"] for r in pts], "-",
                                    label=f"bound, $N_t$={n_t}")
                ax.errorbar(snr, [r["avgmse"] for r in pts], yerr=[2 * r["avgmse_se"] for r in pts],
                            fmt="s", color=line.get_color(), mfc="none", label=f"MLE, $N_t$={n_t}")
            ax.set_title(f"{prof}, $f_d$={f_d:g} Hz")
            ax.set_xlabel("SNR (dB)")
            ax.set_ylabel("AvgMSE")
        for ax in axes.ravel()[len(panels):]:
            ax.set_visible(False)
        axes.ravel()[0].legend()
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path)
        plt.close(fig)
    return path
