"""Per-figure plot data (CSV) and SVG renderings from a finished run directory."""

import json
import logging
from pathlib import Path

import numpy as np

from .runner import read_csv, write_csv

__all__ = ["FIGURES", "MissingArtifact", "export_plotdata"]

log = logging.getLogger(__name__)


class MissingArtifact(FileNotFoundError):
    pass


def _label(row):
    return f"{row['variant']}:{row['size']}" if row["variant"] else row["size"]


def _rows(run_dir, name):
    path = Path(run_dir) / name
    if not path.exists():
        raise MissingArtifact(f"{path} not found; run the corresponding analysis first")
    return read_csv(path)


def _scatter(run_dir, kind):
    rows = [r for r in _rows(run_dir, "eth_diag_scatter.csv") if r["kind"] == kind]
    if not rows:
        raise MissingArtifact(f"no diagonal elements for the {kind} superoperator")
    return ["omega", "value", "size_label"], [(float(r["omega"]), float(r["value"]), _label(r)) for r in rows]


def _hist(run_dir, kind):
    rows = [r for r in _rows(run_dir, "eth_offdiag_hist.csv") if r["kind"] == kind]
    if not rows:
        raise MissingArtifact(f"no off-diagonal histogram for the {kind} superoperator")
    return (["bin_center", "density", "normal_density", "size_label"],
            [(float(r["bin_center"]), float(r["density"]), float(r["normal_density"]), _label(r)) for r in rows])


def _variance(run_dir, field):
    rows = [r for r in _rows(run_dir, "eth_variance.csv") if np.isfinite(float(r[field]))]
    if not rows:
        raise MissingArtifact(f"no finite {field} entries")
    out = []
    for kind in sorted({r["kind"] for r in rows}):
        sub = sorted((r for r in rows if r["kind"] == kind), key=lambda r: int(r["liouville_dim"]))
        d0, v0 = int(sub[0]["liouville_dim"]), float(sub[0][field])
        # 1/D guide through the smallest size
        out.extend((int(r["liouville_dim"]), float(r[field]), kind, v0 * d0 / int(r["liouville_dim"]))
                   for r in sub)
    return ["liouville_dim", field, "kind", "guide"], out


def _r_vs_d(run_dir):
    rows = _rows(run_dir, "r_vs_d.csv")
    return ["d", "mean_r", "size"], [(float(r["d"]), float(r["mean_r"]), _label(r)) for r in rows]


def _spacing(run_dir):
    rows = _rows(run_dir, "spacing_ratios.csv")
    return ["re_z", "im_z", "size_label"], [(float(r["re_z"]), float(r["im_z"]), _label(r)) for r in rows]


def _weights(run_dir, obs):
    rows = _rows(run_dir, f"weight_sums_{obs}.csv")
    return ["gamma_bar", "weight_sum", "variant"], [(float(r["gamma_bar"]), float(r["weight_sum"]),
                                                     _label(r)) for r in rows]


def _stripe_series(run_dir, obs):
    rows = _rows(run_dir, f"series_{obs}.csv")
    by = {}
    for r in rows:
        by.setdefault(r["variant"], []).append((float(r["t"]), float(r["stripe_re"])))
    missing = {"integrable", "chaotic"} - set(by)
    if missing:
        raise MissingArtifact(f"variants {sorted(missing)} absent from series_{obs}.csv")
    ti = [t for t, _ in by["integrable"]]
    tc = [t for t, _ in by["chaotic"]]
    if ti != tc:
        raise MissingArtifact("integrable and chaotic series use different time grids")
    return (["t", "integrable_value", "chaotic_value"],
            [(t, a, b) for (t, a), (_, b) in zip(by["integrable"], by["chaotic"])])


# figure id -> (builder, plot style, axis labels)
FIGURES = {
    "fig1a": (lambda d: _scatter(d, "coherent"), "scatter", ("Omega", "O_aa (coherent)")),
    "fig1a_inset": (lambda d: _variance(d, "var_diag"), "loglog", ("Liouville dim", "var O_aa")),
    "fig1b": (lambda d: _hist(d, "measurement"), "hist", ("O_ab / std", "PDF")),
    "fig1b_inset": (lambda d: _variance(d, "var_offdiag"), "loglog", ("Liouville dim", "var O_ab")),
    "fig2a": (lambda d: _scatter(d, "measurement"), "scatter", ("Omega", "O_aa (measurement)")),
    "fig2b": (lambda d: _hist(d, "measurement"), "hist", ("O_ab / std", "PDF")),
    "fig3a": (lambda d: _weights(d, "current"), "semilogy", ("Gamma_bar", "sum |c c|")),
    "fig3b": (lambda d: _stripe_series(d, "current"), "lines", ("t", "<O>_Str")),
    "fig4ab": (_spacing, "scatter", ("Re z", "Im z")),
    "fig4c": (_r_vs_d, "semilogx", ("d", "<r>")),
    "fig5c": (_r_vs_d, "semilogx", ("d", "<r>")),
    "fig6c": (_r_vs_d, "semilogx", ("d", "<r>")),
    "fig7a": (lambda d: _weights(d, "sigmaz_3"), "semilogy", ("Gamma_bar", "sum |c c|")),
    "fig7c": (lambda d: _stripe_series(d, "sigmaz_3"), "lines", ("t", "<O>_Str")),
}


def _render(path, header, rows, style, labels):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.6))
    if style == "lines":
        t = np.array([r[0] for r in rows])
        for k, name in enumerate(header[1:], start=1):
            ax.plot(t, [r[k] for r in rows], lw=0.8, label=name)
    else:
        groups = {}
        for r in rows:
            groups.setdefault(r[-2] if style in ("loglog",) else r[-1], []).append(r)
        for name, grp in groups.items():
            x = np.array([g[0] for g in grp], dtype=float)
            y = np.array([g[1] for g in grp], dtype=float)
            if style == "scatter":
                ax.scatter(x, y, s=2, label=str(name))
            elif style == "hist":
                ax.step(x, y, where="mid", label=str(name))
                ax.plot(x, [g[2] for g in grp], "k--", lw=0.8)
            elif style == "loglog":
                ax.loglog(x, y, "o-", label=str(name))
                ax.loglog(x, [g[3] for g in grp], "k:", lw=0.8)
            elif style == "semilogy":
                ax.semilogy(x, np.maximum(y, 1e-300), "o", ms=3, label=str(name))
            elif style == "semilogx":
                ax.semilogx(x, y, "-", label=str(name))
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.legend(fontsize=7)
    fig.tight_layout()
    # fixed metadata keeps the SVG reproducible
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def export_plotdata(run_dir, figure_id, out_dir=None):
    """Write ``<figure_id>.csv`` and ``<figure_id>.svg``; returns both paths."""
    run_dir = Path(run_dir)
    if not (run_dir / "manifest.json").exists():
        raise MissingArtifact(f"{run_dir} has no manifest.json")
    status = json.loads((run_dir / "manifest.json").read_text()).get("status")
    if status != "complete":
        log.warning("run in %s is %s; exporting what is there", run_dir, status)
    if figure_id not in FIGURES:
        raise KeyError(f"unknown figure id {figure_id!r}; choose from {sorted(FIGURES)}")
    builder, style, labels = FIGURES[figure_id]
    header, rows = builder(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir / "figures"
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{figure_id}.csv"
    svg_path = out_dir / f"{figure_id}.svg"
    write_csv(csv_path, header, rows)
    _render(svg_path, header, rows, style, labels)
    return csv_path, svg_path
