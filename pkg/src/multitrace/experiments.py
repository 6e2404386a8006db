"""Declarative experiment runs: configs, presets, identity checks, artifacts."""

import copy
import hashlib
import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .assembly import (
    assemble_calderon,
    assemble_duality,
    discretize,
    field_traces,
)
from .geometry import (
    GeometryError,
    build_partition,
    fig1_config,
    gap_config,
    two_domain_circle_config,
)
from .mtf import (
    NumericalError,
    assemble_mtf,
    assemble_rhs,
    build_transmission,
    operator_matrix,
    solve,
    split_diag,
)
from .spectrum import (
    RESIDUAL_SEED,
    cluster_report,
    eig_dense,
    predicted_eigenvalues,
    write_eigs_csv,
    write_report_json,
)

TASKS = ("spectrum", "identities", "solve", "convergence")
EXACT_TOL = 1e-13


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# ------------------------------------------------------------- configs


def parse_alpha(value):
    if isinstance(value, dict):
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j").replace("jj", "j"))
        except ValueError as exc:
            raise ConfigError(f"cannot parse alpha {value!r}") from exc
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    return complex(float(value))


def alpha_label(a):
    a = complex(a)
    if a.imag == 0:
        return f"{a.real:g}"
    return f"{a.real:g}{a.imag:+g}i"


_GAP = re.compile(r"^gap\(\s*([^)]*)\)$")


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    Attributes
    ----------
    name : str
    geometries : list
        Geometry ids: ``"fig1-circle-in-square"``, ``"two-domain-circle"``,
        ``"gap(<delta>)"`` or a path to a partition JSON document.
    kappa : tuple of float
    alphas : list of complex
    hs : list of float
    tasks : list of str
    out : str
    incident : dict
        Plane wave ``{"direction": [dx, dy]}``; ``kappa0`` is taken from
        the exterior subdomain.
    solver : str
    plot_style : str
        ``"scatter"`` or ``"zoom-positive"``.
    base_dir : str
        Directory used to resolve relative geometry paths.
    """

    name: str
    geometries: list
    kappa: tuple
    alphas: list
    hs: list
    tasks: list
    out: str = "mtf-out"
    incident: dict = field(default_factory=lambda: {"direction": [1.0, 0.0]})
    solver: str = "direct"
    plot_style: str = "scatter"
    base_dir: str = "."

    def partition(self, geometry):
        """Build and validate the partition for one geometry id."""
        kap = list(self.kappa)
        if geometry == "fig1-circle-in-square":
            cfg = fig1_config(kap)
        elif geometry == "two-domain-circle":
            cfg = two_domain_circle_config(kap)
        elif _GAP.match(geometry):
            try:
                delta = float(_GAP.match(geometry).group(1))
            except ValueError as exc:
                raise ConfigError(f"bad gap width in {geometry!r}") from exc
            cfg = gap_config(delta, kap)
        else:
            path = os.path.join(self.base_dir, geometry)
            try:
                with open(path) as fh:
                    cfg = json.load(fh)
            except OSError:
                raise
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
            cfg = dict(cfg)
            if kap:
                cfg["subdomains"] = [{"kappa": k} for k in kap]
            cfg.setdefault("name", os.path.splitext(os.path.basename(geometry))[0])
        return build_partition(cfg)

    def echo(self):
        return {
            "name": self.name,
            "geometry": list(self.geometries),
            "kappa": list(self.kappa),
            "alpha": [{"re": a.real, "im": a.imag} for a in self.alphas],
            "h": list(self.hs),
            "tasks": list(self.tasks),
            "incident": self.incident,
            "solver": self.solver,
            "plot_style": self.plot_style,
        }


def load_config(source, base_dir=None):
    """Parse and validate a config dict or JSON file path.

    Raises
    ------
    ConfigError, GeometryError
        Validation failures.
    OSError
        Unreadable files.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{source}: invalid JSON ({exc})") from exc
        base_dir = base_dir or os.path.dirname(os.path.abspath(source))
    else:
        raw = copy.deepcopy(source)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    geoms = raw.get("geometry", "fig1-circle-in-square")
    geoms = [geoms] if isinstance(geoms, str) else list(geoms)
    if not geoms:
        raise ConfigError("at least one geometry is required")
    tasks = raw.get("tasks", ["spectrum"])
    tasks = [tasks] if isinstance(tasks, str) else list(tasks)
    if not tasks:
        raise ConfigError("task list must be nonempty")
    bad = [t for t in tasks if t not in TASKS]
    if bad:
        raise ConfigError(f"unknown tasks {bad}; choose from {list(TASKS)}")
    alphas = raw.get("alpha", [1.0])
    alphas = alphas if isinstance(alphas, list) else [alphas]
    alphas = [parse_alpha(a) for a in alphas]
    hs = raw.get("h", [0.05])
    hs = [float(h) for h in (hs if isinstance(hs, list) else [hs])]
    if not hs or any(not h > 0 for h in hs):
        raise ConfigError("mesh widths must be positive")
    kappa = tuple(float(k) for k in raw.get("kappa", []))
    if any(not k > 0 for k in kappa):
        raise ConfigError("wave numbers must be positive")
    solver = raw.get("solver", "direct")
    if solver not in ("direct", "gmres"):
        raise ConfigError(f"unknown solver {solver!r}")
    cfg = ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        geometries=geoms,
        kappa=kappa,
        alphas=alphas,
        hs=hs,
        tasks=tasks,
        out=raw.get("out", "mtf-out"),
        incident=raw.get("incident", {"direction": [1.0, 0.0]}),
        solver=solver,
        plot_style=raw.get("plot_style", "scatter"),
        base_dir=base_dir or ".",
    )
    for g in geoms:
        part = cfg.partition(g)
        if not kappa:
            cfg.kappa = part.kappas
        elif len(kappa) != part.n_subdomains:
            raise ConfigError(
                f"geometry {g!r} has {part.n_subdomains} subdomains but "
                f"{len(kappa)} wave numbers were given"
            )
    return cfg


def _preset(name, geometry, kappa, alpha, h=(0.05,), tasks=("spectrum",), style="scatter"):
    return {
        "name": name,
        "geometry": geometry,
        "kappa": list(kappa),
        "alpha": list(alpha),
        "h": list(h),
        "tasks": list(tasks),
        "plot_style": style,
    }


PRESETS = {
    "fig2": _preset("fig2", "fig1-circle-in-square", (1, 1, 1), [1.0]),
    "fig3a": _preset("fig3a", "fig1-circle-in-square", (1, 1, 1), [0.5]),
    "fig3b": _preset("fig3b", "fig1-circle-in-square", (1, 1, 1), [-0.25]),
    "fig3": _preset("fig3", "fig1-circle-in-square", (1, 1, 1), [0.5, -0.25]),
    "fig4": _preset("fig4", "fig1-circle-in-square", (1, 5, 2), [1.0]),
    "fig5a": _preset("fig5a", "gap(0.1)", (1, 1, 1), [1.0], style="zoom-positive"),
    "fig5b": _preset("fig5b", "gap(0.01)", (1, 1, 1), [1.0], style="zoom-positive"),
    "fig5c": _preset("fig5c", "gap(0.001)", (1, 1, 1), [1.0], style="zoom-positive"),
    "fig5": _preset(
        "fig5", ["gap(0.1)", "gap(0.01)", "gap(0.001)"], (1, 1, 1), [1.0], style="zoom-positive"
    ),
}


def preset_config(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


# -------------------------------------------------------- computations


class Problem:
    """Assembled matrices for one geometry and mesh width."""

    def __init__(self, partition, h, orders=None):
        self.partition = partition
        self.disc = discretize(partition, h, orders)
        self.B = assemble_calderon(self.disc)
        self.M = assemble_duality(self.disc)
        self.P = build_transmission(self.disc.dofmap)
        self._OA = None

    @property
    def dofmap(self):
        return self.disc.dofmap

    @property
    def OA(self):
        if self._OA is None:
            self._OA = operator_matrix(self.dofmap, self.M, self.B)
        return self._OA

    def spectrum(self, alpha, meta=None):
        system = assemble_mtf(self.B, self.M, self.P, alpha)
        eigs = eig_dense(system.B, self.M, self.dofmap)
        return cluster_report(eigs, alpha, meta)


def _rel(a, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a) / nb) if nb > 0 else float(np.linalg.norm(a))


def exact_identities(prob, alpha=1.0):
    """Residuals of the identities that hold exactly in the discrete setting."""
    M = prob.M.data
    P = prob.P
    MP = P.right_multiply(M)
    out = {
        "duality_antisymmetry": _rel(M + M.T, M),
        "transmission_involution": float(np.max(np.abs(P.apply(P.dense()) - np.eye(P.dim)))),
        "transmission_pairing_symmetry": _rel(MP - MP.T, MP),
    }
    k0 = prob.partition.kappas[0]
    d1 = np.array([0.6, 0.8])
    d2 = np.array([-0.28, 0.96])

    def wave(d):
        val = lambda xy: np.exp(1j * k0 * (xy @ d))  # noqa: E731
        grad = lambda xy: 1j * k0 * val(xy)[:, None] * d[None, :]  # noqa: E731
        return field_traces(prob.disc, val, grad)

    u, v = wave(d1), wave(d2)
    out["single_trace_fixed_point"] = _rel(P.apply(u) - u, u)
    out["single_trace_pairing"] = float(
        abs(u @ M @ v) / (np.linalg.norm(u) * np.linalg.norm(M, 2) * np.linalg.norm(v))
    )
    sys = assemble_mtf(prob.B, prob.M, P, alpha)
    OL = operator_matrix(prob.dofmap, prob.M, sys.B)
    ref = prob.OA - (1 - alpha) * np.eye(P.dim) - alpha * P.apply(np.eye(P.dim))
    out["operator_identity"] = _rel(OL - ref, ref)
    return out


def _norm2(A):
    return float(np.linalg.norm(A, 2))


def nilpotency_metrics(prob):
    """Relative residuals of the nilpotency identities in the spectral norm."""
    _, BT = split_diag(prob.B, prob.dofmap)
    OT = operator_matrix(prob.dofmap, prob.M, BT)
    nT = _norm2(OT)
    t2 = _norm2(OT @ OT) / nT**2 if nT > 0 else 0.0
    OA = prob.OA
    C = prob.P.apply(OA) + prob.P.right_multiply(OA)
    nC = _norm2(C)
    anti = nC / _norm2(OA)
    anti2 = _norm2(C @ C) / nC**2 if nC > 0 else 0.0
    X = prob.P.apply(OT)
    nX = _norm2(X)
    index = None
    if nX == 0:
        index = 1
    else:
        Y = X
        for k in range(2, prob.partition.n_subdomains + 2):
            Y = Y @ X
            if _norm2(Y) / nX**k < 0.05:
                index = k
                break
    return {"T_squared": t2, "anticommutator": anti, "anticommutator_squared": anti2,
            "PT_nilpotency_index": index}


def calderon_median(prob):
    eigs = eig_dense(prob.B, prob.M, prob.dofmap)
    return float(np.median(np.min(np.abs(eigs[:, None] - np.array([1.0, -1.0])), axis=1)))


def min_singular_ratio(prob, alpha):
    B = assemble_mtf(prob.B, prob.M, prob.P, alpha).B.data
    s = np.linalg.svd(B, compute_uv=False)
    return float(s[-1] / s[0])


def _record(name, h_values, values, threshold=None, ratio_max=None, applicable=True,
            exact=False, note=None):
    rec = {"identity": name, "h": list(h_values), "residual": list(values)}
    ratio = None
    if len(values) > 1 and values[-2] not in (0, None) and values[-1] is not None:
        ratio = values[-1] / values[-2]
    rec["h_ratio"] = ratio
    if not applicable:
        rec["status"] = "not applicable"
    else:
        ok = all(v is not None and v <= threshold for v in values) if exact else (
            values[-1] is not None and values[-1] <= threshold
        )
        if ratio_max is not None and ratio is not None and values[-1] > 1e-10:
            ok = ok and ratio < ratio_max
        rec["status"] = "pass" if ok else "fail"
    rec["threshold"] = threshold
    if ratio_max is not None:
        rec["h_ratio_max"] = ratio_max
    if note:
        rec["note"] = note
    return rec


def run_identity_suite(cfg, geometry=None, problems=None):
    """Identity residuals with pass, fail or not-applicable status.

    Parameters
    ----------
    cfg : ExperimentConfig
    geometry : str, optional
        Defaults to the first geometry of the config.
    problems : dict, optional
        Cache of ``Problem`` objects keyed by ``(geometry, h)``.

    Returns
    -------
    dict
        JSON-ready report.
    """
    geometry = geometry or cfg.geometries[0]
    problems = problems if problems is not None else {}
    part = cfg.partition(geometry)
    hs = sorted(cfg.hs, reverse=True)
    equal = len(set(part.kappas)) == 1
    exact, nil, cald = [], [], []
    for h in hs:
        key = (geometry, h)
        if key not in problems:
            problems[key] = Problem(part, h)
        prob = problems[key]
        exact.append(exact_identities(prob, cfg.alphas[0]))
        nil.append(nilpotency_metrics(prob))
        cald.append(calderon_median(prob))
    records = []
    for name in exact[0]:
        tol = 0.0 if name == "transmission_involution" else EXACT_TOL
        if name == "operator_identity":
            tol = 1e-12
        records.append(_record(name, hs, [e[name] for e in exact], tol, exact=True))
    records.append(_record(
        "calderon_clustering_median", hs, cald, 0.05,
        note="median distance of the spectrum of inv(M) B_A to {+1, -1}",
    ))
    records.append(_record("T_squared", hs, [n["T_squared"] for n in nil], 0.05, 0.7))
    two = part.n_subdomains == 2
    if two:
        records.append(_record(
            "anticommutator", hs, [n["anticommutator"] for n in nil], 0.05, 0.7,
            applicable=equal, note=None if equal else "requires equal wave numbers",
        ))
    else:
        records.append(_record(
            "anticommutator_squared", hs, [n["anticommutator_squared"] for n in nil], 0.05, 0.7,
            applicable=equal, note=None if equal else "requires equal wave numbers",
        ))
    chain = problems[(geometry, hs[-1])].disc.tree.longest_chain()
    idx = nil[-1]["PT_nilpotency_index"]
    records.append({
        "identity": "PT_nilpotency_index",
        "h": hs[-1],
        "residual": idx,
        "bound": chain,
        "status": ("pass" if idx is not None and idx <= max(chain, 1) else "fail")
        if equal else "not applicable",
    })
    sing = {alpha_label(a): min_singular_ratio(problems[(geometry, hs[-1])], a)
            for a in cfg.alphas}
    records.append({
        "identity": "uniqueness_min_singular_ratio",
        "h": hs[-1],
        "residual": sing,
        "threshold": 1e-6,
        "status": "pass" if all(v > 1e-6 for v in sing.values()) else "fail",
    })
    return {"geometry": geometry, "kappa": list(part.kappas), "records": records}


# ------------------------------------------------------------ artifacts


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _slug(text):
    if text.endswith(".json"):
        text = os.path.splitext(os.path.basename(text))[0]
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", text).strip("_")


def emit_plot_script(report_paths, style="scatter"):
    """Gnuplot script with one eigenvalue scatter panel per spectrum report.

    Each report JSON must sit next to its eigenvalue CSV with the same stem.
    Predicted points are drawn as crosses and always stay in frame.
    ``style="zoom-positive"`` keeps only eigenvalues with positive real part.
    The text depends only on the inputs.

    Raises
    ------
    FileNotFoundError
        If a report or its CSV is missing.
    """
    panels = []
    for path in report_paths:
        csv = os.path.splitext(path)[0] + ".csv"
        for q in (path, csv):
            if not os.path.exists(q):
                raise FileNotFoundError(f"missing spectrum file {q}")
        with open(path) as fh:
            rep = json.load(fh)
        pred = [complex(z["re"], z["im"]) for z in rep["predicted"]]
        meta = rep.get("meta", {})
        title = " ".join(f"{k}={meta[k]}" for k in ("geometry", "h", "alpha") if k in meta)
        panels.append((os.path.basename(csv), pred, title or os.path.basename(csv)))
    n = len(panels)
    lines = [
        "# eigenvalue scatter plots",
        "set terminal pngcairo size %d,400" % (420 * max(n, 1)),
        "set output 'spectrum.png'",
        "set datafile separator ','",
        "set key off",
        "set xlabel 'Re'",
        "set ylabel 'Im'",
        f"set multiplot layout 1,{n}",
    ]
    for i, (src, pred, title) in enumerate(panels):
        if style == "zoom-positive":
            pred = [z for z in pred if z.real > 0] or pred
            using = "using 1:($1 > 0 ? $2 : 1/0)"
        else:
            using = "using 1:2"
        lines.append(f"$pred{i} << EOD")
        lines += [f"{z.real!r} {z.imag!r}" for z in pred]
        lines.append("EOD")
        lines.append(f"set title '{title}'")
        lines.append(
            f"plot '{src}' skip 1 {using} with points pt 7 ps 0.4, "
            f"$pred{i} using 1:2 with points pt 2 ps 2 lw 2"
        )
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def verify_manifest(path):
    """Recompute the artifact checksums listed in a manifest."""
    with open(path) as fh:
        man = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    bad = []
    for task, items in man["artifacts"].items():
        for item in items:
            p = os.path.join(base, item["path"])
            if not os.path.exists(p) or sha256(p) != item["sha256"]:
                bad.append(item["path"])
    return bad


def run(cfg, out=None, parallel=1, log=None):
    """Execute every task of a config and write artifacts plus a manifest.

    Returns
    -------
    dict
        The manifest.
    """
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    log = log or (lambda msg: None)
    lock = threading.Lock()
    problems = {}
    timings = {}

    def problem(geometry, h):
        key = (geometry, h)
        with lock:
            if key in problems:
                return problems[key]
        t0 = time.perf_counter()
        prob = Problem(cfg.partition(geometry), h)
        with lock:
            problems.setdefault(key, prob)
            timings[f"assemble {geometry} h={h:g}"] = round(time.perf_counter() - t0, 3)
        return problems[key]

    grid = [(g, h) for g in cfg.geometries for h in cfg.hs]
    with ThreadPoolExecutor(max_workers=max(1, int(parallel))) as pool:
        list(pool.map(lambda gh: problem(*gh), grid))

    artifacts = {t: [] for t in cfg.tasks}

    def add(task, path):
        artifacts[task].append({"path": os.path.relpath(path, out), "sha256": sha256(path)})

    def spectrum_job(args):
        g, h, a = args
        t0 = time.perf_counter()
        meta = {"alpha": alpha_label(a), "kappa": list(problems[(g, h)].partition.kappas),
                "h": h, "geometry": g}
        rep = problems[(g, h)].spectrum(a, meta)
        return args, rep, time.perf_counter() - t0

    reports = {}
    if "spectrum" in cfg.tasks or "convergence" in cfg.tasks:
        jobs = [(g, h, a) for g, h in grid for a in cfg.alphas]
        with ThreadPoolExecutor(max_workers=max(1, int(parallel))) as pool:
            for args, rep, dt in pool.map(spectrum_job, jobs):
                reports[args] = rep
                timings[f"spectrum {args[0]} h={args[1]:g} alpha={alpha_label(args[2])}"] = round(dt, 3)

    if "spectrum" in cfg.tasks:
        jsons = []
        for g, h in grid:
            for a in cfg.alphas:
                rep = reports[(g, h, a)]
                stem = f"eigs_{_slug(g)}_h{h:g}_a{_slug(alpha_label(a))}"
                csv = os.path.join(out, stem + ".csv")
                write_eigs_csv(csv, rep.eigenvalues)
                js = os.path.join(out, stem + ".json")
                write_report_json(js, rep)
                add("spectrum", csv)
                add("spectrum", js)
                jsons.append(js)
                log(f"spectrum {g} h={h:g} alpha={alpha_label(a)}: "
                    f"median {rep.median:.4g}, max {rep.max:.4g}")
        gp = os.path.join(out, "plot.gp")
        with open(gp, "w") as fh:
            fh.write(emit_plot_script(jsons, cfg.plot_style))
        add("spectrum", gp)

    if "convergence" in cfg.tasks:
        conv = []
        for g in cfg.geometries:
            for a in cfg.alphas:
                hs = sorted(cfg.hs, reverse=True)
                med = [reports[(g, h, a)].median for h in hs]
                conv.append({
                    "geometry": g, "alpha": alpha_label(a), "h": hs, "median_distance": med,
                    "p90_distance": [reports[(g, h, a)].p90 for h in hs],
                    "monotone_decreasing": bool(all(x > y for x, y in zip(med, med[1:]))),
                })
        path = os.path.join(out, "convergence.json")
        with open(path, "w") as fh:
            json.dump(conv, fh, indent=2, sort_keys=True)
        add("convergence", path)

    if "identities" in cfg.tasks:
        for g in cfg.geometries:
            t0 = time.perf_counter()
            rep = run_identity_suite(cfg, g, problems)
            timings[f"identities {g}"] = round(time.perf_counter() - t0, 3)
            path = os.path.join(out, f"identities_{_slug(g)}.json")
            with open(path, "w") as fh:
                json.dump(rep, fh, indent=2, sort_keys=True)
            add("identities", path)
            for r in rep["records"]:
                log(f"identity {r['identity']}: {r['status']}")

    if "solve" in cfg.tasks:
        d = np.asarray(cfg.incident.get("direction", [1.0, 0.0]), dtype=float)
        for g, h in grid:
            prob = problems[(g, h)]
            k0 = prob.partition.kappas[0]
            rhs = assemble_rhs(prob.disc, prob.B, prob.M, d, k0)
            for a in cfg.alphas:
                t0 = time.perf_counter()
                system = assemble_mtf(prob.B, prob.M, prob.P, a, rhs=rhs)
                sol = solve(system, prob.disc, method=cfg.solver,
                            incident={"direction": d.tolist(), "kappa0": k0, "amplitude": 1.0})
                timings[f"solve {g} h={h:g} alpha={alpha_label(a)}"] = round(
                    time.perf_counter() - t0, 3)
                path = os.path.join(out, f"solution_{_slug(g)}_h{h:g}_a{_slug(alpha_label(a))}.json")
                sol.write_json(path, g)
                add("solve", path)
                log(f"solve {g} h={h:g} alpha={alpha_label(a)}: residual {sol.residual:.3e}")

    manifest = {
        "config": cfg.echo(),
        "artifacts": artifacts,
        "timings": timings,
        "software": {"package": "multitrace", "version": __version__,
                     "numpy": np.__version__},
        "seed": RESIDUAL_SEED,
        "predicted": {alpha_label(a): [alpha_label(z) for z in predicted_eigenvalues(a)]
                      for a in cfg.alphas},
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "GeometryError",
    "NumericalError",
    "PRESETS",
    "Problem",
    "emit_plot_script",
    "load_config",
    "preset_config",
    "run",
    "run_identity_suite",
    "verify_manifest",
]
