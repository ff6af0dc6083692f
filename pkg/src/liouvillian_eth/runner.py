"""Run driver: executes a validated config and persists CSV/JSON artifacts.

Layout of a run directory::

    manifest.json            config echo, seeds, versions, wall times, status
    eigenvalues.csv          variant, size, realization, re, im
    spectrum_stats.csv       per-realization spacing-ratio summaries
    spacing_ratios.csv       complex spacing ratios z
    r_vs_d.csv               stripe-width sweep
    stripes.csv              stripe inventory at d_max
    eth_diag_scatter.csv     diagonal elements (omega, value, ...)
    eth_offdiag_hist.csv     off-diagonal histogram with fitted normal
    eth_variance.csv         variance-scaling table
    weight_sums_<obs>.csv    per-stripe spectral weight sums
    series_<obs>.csv         full and stripe-restricted dynamics
"""

import csv
import json
import logging
import os
import platform
import shutil
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig
from .eth import EthSampleSet, diagonal_statistics, gaussianity, offdiagonal_window, scaling_slope
from .pipeline import (build_model, dynamics_summary, eth_samples, load_decomposition,
                       observable_label, run_realizations, spectrum_statistics)
from .stripes import default_d_grid, partition_stripes, select_bulk_stripes, sweep_width

__all__ = ["run", "RunFailed", "write_csv", "read_csv"]

log = logging.getLogger(__name__)

FLOAT_FORMAT = ".17e"


class RunFailed(RuntimeError):
    """Every realization of some size failed."""


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), FLOAT_FORMAT)
    return str(x)


def write_csv(path, header, rows):
    """CSV with full-precision scientific floats (locale independent)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    os.replace(tmp, path)


def read_csv(path):
    """Rows of a run CSV as dicts of strings."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class _Manifest:
    def __init__(self, path, config, seed, workers):
        self.path = Path(path)
        self.data = {
            "config": config.source,
            "model": config.model,
            "master_seed": seed,
            "workers": workers,
            "versions": {"liouvillian_eth": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "seeds": {},
            "realizations": {},
            "analyses": {a.kind: {"status": "pending"} for a in config.analysis},
            "wall_time": {},
            "status": "running",
        }
        self.save()

    def save(self):
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(_finite(self.data), indent=2, sort_keys=True, default=_json_default,
                                  allow_nan=False))
        os.replace(tmp, self.path)


def _finite(o):
    """NaN and infinities become null so the manifest is strict JSON."""
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, (float, np.floating)):
        return float(o) if np.isfinite(o) else None
    return o


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _key(variant, size):
    return f"{variant}:{size}" if variant else str(size)


def run(config: ExperimentConfig, seed=None, workers=None, output=None, keep_cache=False):
    """Execute ``config``; returns the manifest dict.

    ``seed``, ``workers`` and ``output`` override the config.  Realizations
    that fail numerically are skipped and counted; if all realizations of a
    size fail, the manifest is marked failed and :class:`RunFailed` is raised.
    """
    seed = config.master_seed if seed is None else int(seed)
    workers = workers or os.cpu_count() or 1
    out = Path(output) if output is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = _Manifest(out / "manifest.json", config, seed, workers)
    t_start = time.perf_counter()
    cache_dir = out / "cache"
    kinds = {a.kind: a.params for a in config.analysis}

    # realizations
    t0 = time.perf_counter()
    results = {}
    for variant, params in config.variant_params():
        for size, nreal in zip(config.sizes, config.n_realizations):
            tasks = [dict(model=config.model, params=params, variant=variant, size=size, master_seed=seed,
                          index=i, vectors=config.needs_vectors(), left=config.needs_left(),
                          cache_dir=str(cache_dir)) for i in range(nreal)]
            t_size = time.perf_counter()
            res = run_realizations(tasks, workers=workers)
            key = _key(variant, size)
            man.data["wall_time"][f"realizations:{key}"] = time.perf_counter() - t_size
            failed = [r for r in res if not r.ok]
            for r in failed:
                log.warning("realization %d of %s failed: %s", r.index, key, r.error)
            man.data["seeds"][key] = [[seed, r.index] for r in res]
            man.data["realizations"][key] = {"requested": nreal, "failed": len(failed),
                                             "errors": [r.error for r in failed],
                                             "defective_pairs": int(sum(r.defective for r in res if r.ok))}
            ok = [r for r in res if r.ok]
            if not ok:
                man.data["status"] = "failed"
                man.save()
                raise RunFailed(f"all {nreal} realizations of {key} failed")
            results[(variant, size)] = ok
    man.data["wall_time"]["realizations"] = time.perf_counter() - t0
    man.save()

    rows = [(v, s, r.index, ev.real, ev.imag) for (v, s), rs in results.items() for r in rs
            for ev in r.eigenvalues]
    write_csv(out / "eigenvalues.csv", ["variant", "size", "realization", "re", "im"], rows)

    sweeps = {}
    for spec in config.analysis:
        t0 = time.perf_counter()
        entry = man.data["analyses"][spec.kind]
        entry["status"] = "running"
        man.save()
        try:
            handler = _HANDLERS[spec.kind]
            entry.update(handler(config, spec.params, results, out, sweeps, kinds))
            entry["status"] = "complete"
        except Exception as exc:
            entry["status"] = "failed"
            entry["error"] = f"{type(exc).__name__}: {exc}"
            man.data["wall_time"][spec.kind] = time.perf_counter() - t0
            man.data["status"] = "failed"
            man.save()
            raise
        man.data["wall_time"][spec.kind] = time.perf_counter() - t0
        man.save()

    if not keep_cache and cache_dir.exists():
        shutil.rmtree(cache_dir)
    man.data["wall_time"]["total"] = time.perf_counter() - t_start
    man.data["status"] = "complete"
    man.save()
    return man.data


def _spectrum_stats(config, params, results, out, sweeps, kinds):
    rows, zrows, summary = [], [], {}
    for (variant, size), rs in results.items():
        stats = []
        for r in rs:
            st, z = spectrum_statistics(config.model, r.eigenvalues)
            stats.append((st, z))
            rows.append((variant, size, r.index, st["n"], st.get("cos_theta", float("nan")),
                         st.get("mean_abs_z", float("nan")), st.get("r_mean", float("nan"))))
            if z is not None:
                zrows.extend((variant, size, r.index, zz.real, zz.imag) for zz in z)
        key = _key(variant, size)
        if config.model == "gue_reference":
            n = sum(s["n"] for s, _ in stats)
            summary[key] = {"r_mean": sum(s["r_mean"] * s["n"] for s, _ in stats) / n, "n": n}
        else:
            z = np.concatenate([z for _, z in stats])
            summary[key] = {"cos_theta": float(np.cos(np.angle(z)).mean()),
                            "mean_abs_z": float(np.abs(z).mean()), "n": int(z.size)}
    write_csv(out / "spectrum_stats.csv",
              ["variant", "size", "realization", "n", "cos_theta", "mean_abs_z", "r_mean"], rows)
    if zrows:
        write_csv(out / "spacing_ratios.csv", ["variant", "size", "realization", "re_z", "im_z"], zrows)
    return {"summary": summary}


def _sweep(config, params, results, sweeps):
    for (variant, size), rs in results.items():
        if (variant, size) in sweeps:
            continue
        spectra = [r.eigenvalues for r in rs]
        if config.model == "gue_reference":
            raise ValueError("stripe sweeps need complex spectra")
        grid = params.get("d_grid") if params else None
        if grid is None:
            grid = default_d_grid(spectra, n=int((params or {}).get("n_grid", 40)))
        sweeps[(variant, size)] = sweep_width(spectra, grid)
    return sweeps


def _stripe_sweep(config, params, results, out, sweeps, kinds):
    _sweep(config, params, results, sweeps)
    rows, inv, summary = [], [], {}
    for (variant, size), sw in sweeps.items():
        rows.extend((variant, size, d, r, n) for d, r, n in zip(sw.d_grid, sw.mean_r_curve, sw.sample_counts))
        for r in results[(variant, size)]:
            for s in partition_stripes(r.eigenvalues, sw.d_max):
                mr = s.mean_r() if s.n_members >= 3 else float("nan")
                inv.append((variant, size, r.index, s.stripe_id, s.gamma_bar, s.width, s.n_members, mr))
        summary[_key(variant, size)] = {"d_max": sw.d_max, "r_at_dmax": sw.r_at_dmax}
    write_csv(out / "r_vs_d.csv", ["variant", "size", "d", "mean_r", "n_samples"], rows)
    write_csv(out / "stripes.csv",
              ["variant", "size", "realization", "stripe_id", "gamma_bar", "d", "n_members", "mean_r"], inv)
    return {"summary": summary}


def _collect_eth(config, params, results, sweeps, kinds):
    """Matrix elements per (variant, size, superoperator kind), reduced to what the analyses need."""
    cache = sweeps.setdefault("_eth", {})
    diag = kinds.get("eth_diag")
    off = kinds.get("eth_offdiag")
    _sweep(config, kinds.get("stripe_sweep"), results, sweeps)

    def keep(samples):
        mask = samples.diagonal.copy()
        if diag is not None:
            mask &= np.abs(samples.omega_alpha) < float(diag["omega_cutoff"])
        else:
            mask[:] = False
        if off is not None:
            mask |= offdiagonal_window(samples, float(off["omega_center"]), float(off["delta_omega"]))
        return mask

    superops = []
    for p in (diag, off):
        if p is not None:
            for k in p["superoperators"]:
                if k not in superops:
                    superops.append(k)
    ref = diag or off
    for (variant, size), rs in results.items():
        sw = sweeps[(variant, size)]
        for kind in superops:
            if (variant, size, kind) in cache:
                continue
            sets = []
            for r in rs:
                decomp = load_decomposition(r.cache_path)
                inst_dim = size if config.model == "random_liouvillian" else 2**size
                sector = None
                n_sites = 0
                if config.model == "xxz_chain":
                    sector = build_model(config.model, dict(config.variant_params())[variant], size, None).sector
                    n_sites = size
                bulk = select_bulk_stripes(partition_stripes(decomp, sw.d_max), int(ref["min_members"]))
                sets.append(eth_samples(decomp, bulk, kind, ref["observable"], inst_dim, n_sites, sector,
                                        biorthogonal=ref["convention"] == "biorthogonal",
                                        realization=r.index, keep=keep))
                del decomp
            cache[(variant, size, kind)] = EthSampleSet.concat(sets)
    return cache


def _eth_diag(config, params, results, out, sweeps, kinds):
    cache = _collect_eth(config, params, results, sweeps, kinds)
    rows, summary = [], {}
    for (variant, size, kind), samples in cache.items():
        if kind not in params["superoperators"]:
            continue
        var, table = diagonal_statistics(samples, float(params["omega_cutoff"]))
        rows.extend((variant, size, kind, t.omega, t.value, t.stripe_id, t.realization) for t in table)
        summary.setdefault(variant or "_", {}).setdefault(kind, {})[str(size)] = {
            "var_diag": var, "n_diag": int(table.size), "liouville_dim": samples.liouville_dim}
    write_csv(out / "eth_diag_scatter.csv",
              ["variant", "size", "kind", "omega", "value", "stripe_id", "realization"], rows)
    slopes = _slopes(summary, "var_diag")
    _write_variance_table(out, sweeps, kinds)
    return {"summary": summary, "slopes": slopes}


def _slopes(summary, field):
    slopes = {}
    for variant, by_kind in summary.items():
        for kind, by_size in by_kind.items():
            dims = [v["liouville_dim"] for v in by_size.values()]
            vals = [v[field] for v in by_size.values()]
            if len(dims) >= 2:
                slopes.setdefault(variant, {})[kind] = scaling_slope(dims, vals)
    return slopes


def _offdiag_values(samples, params):
    mask = offdiagonal_window(samples, float(params["omega_center"]), float(params["delta_omega"]))
    return samples.value[mask].real


def _eth_offdiag(config, params, results, out, sweeps, kinds):
    cache = _collect_eth(config, params, results, sweeps, kinds)
    rows, summary = [], {}
    for (variant, size, kind), samples in cache.items():
        if kind not in params["superoperators"]:
            continue
        x = _offdiag_values(samples, params)
        entry = {"n_offdiag": int(x.size), "liouville_dim": samples.liouville_dim}
        if x.size < int(params["min_samples"]):
            entry.update(var_offdiag=float("nan"), excess_kurtosis=float("nan"), ks_distance=float("nan"))
            log.warning("%s %s: only %d off-diagonal samples in the window", _key(variant, size), kind, x.size)
        else:
            var, kurt, ks = gaussianity(x)
            entry.update(var_offdiag=var, excess_kurtosis=kurt, ks_distance=ks)
            sd = np.sqrt(var) if var > 0 else 1.0
            dens, edges = np.histogram(x / sd, bins=int(params["bins"]), density=True)
            centers = 0.5 * (edges[1:] + edges[:-1])
            normal = np.exp(-0.5 * centers**2) / np.sqrt(2 * np.pi)
            rows.extend((variant, size, kind, c, d, n) for c, d, n in zip(centers, dens, normal))
        summary.setdefault(variant or "_", {}).setdefault(kind, {})[str(size)] = entry
    write_csv(out / "eth_offdiag_hist.csv",
              ["variant", "size", "kind", "bin_center", "density", "normal_density"], rows)
    finite = {v: {k: {s: e for s, e in bs.items() if np.isfinite(e["var_offdiag"])} for k, bs in bk.items()}
              for v, bk in summary.items()}
    _write_variance_table(out, sweeps, kinds)
    return {"summary": summary, "slopes": _slopes(finite, "var_offdiag")}


def _write_variance_table(out, sweeps, kinds):
    cache = sweeps.get("_eth", {})
    diag = kinds.get("eth_diag")
    off = kinds.get("eth_offdiag")
    rows = []
    for (variant, size, kind), samples in sorted(cache.items()):
        vd = float("nan")
        vo = float("nan")
        if diag is not None and kind in diag["superoperators"]:
            mask = samples.diagonal & (np.abs(samples.omega_alpha) < float(diag["omega_cutoff"]))
            if mask.sum() >= 2:
                vd = float(np.var(samples.value[mask].real))
        if off is not None and kind in off["superoperators"]:
            x = _offdiag_values(samples, off)
            if x.size >= int(off["min_samples"]):
                vo = float(np.var(x))
        rows.append((variant, size, samples.liouville_dim, kind, vd, vo))
    write_csv(out / "eth_variance.csv", ["variant", "size", "liouville_dim", "kind", "var_diag", "var_offdiag"],
              rows)


def _dynamics(config, params, results, out, sweeps, kinds):
    _sweep(config, kinds.get("stripe_sweep"), results, sweeps)
    tg = params["time_grid"]
    times = np.linspace(float(tg["start"]), float(tg["stop"]), int(tg["num"]))
    observables = params["observable"]
    if not isinstance(observables, list):
        observables = [observables]
    variant_params = dict(config.variant_params())
    summary = {}
    for (variant, size), rs in results.items():
        decomp = load_decomposition(rs[0].cache_path, mmap=False)
        sector = build_model(config.model, variant_params[variant], size, None).sector
        for obs in observables:
            label = observable_label(obs)
            info = dynamics_summary(decomp, sector, size, obs, times, sweeps[(variant, size)].d_max,
                                    int(params["min_members"]))
            acc = sweeps.setdefault(("_dyn", label), ([], []))
            acc[0].extend((variant, size, label, g, w) for g, w in info["weight_sums"])
            acc[1].extend((variant, size, label, t, y.real, y.imag, ys.real, ys.imag)
                          for t, y, ys in zip(times, info["series"], info["stripe_series"]))
            summary.setdefault(label, {})[_key(variant, size)] = {
                k: v for k, v in info.items() if k not in ("weight_sums", "series", "stripe_series")}
    for obs in observables:
        label = observable_label(obs)
        wrows, srows = sweeps[("_dyn", label)]
        write_csv(out / f"weight_sums_{label}.csv", ["variant", "size", "observable", "gamma_bar", "weight_sum"],
                  wrows)
        write_csv(out / f"series_{label}.csv",
                  ["variant", "size", "observable", "t", "re", "im", "stripe_re", "stripe_im"], srows)
    return {"summary": summary, "observables": [observable_label(o) for o in observables]}


_HANDLERS = {
    "spectrum_stats": _spectrum_stats,
    "stripe_sweep": _stripe_sweep,
    "eth_diag": _eth_diag,
    "eth_offdiag": _eth_offdiag,
    "dynamics": _dynamics,
}
