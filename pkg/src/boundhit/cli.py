"""Command-line front end.

Subcommands: solve, mc, convergence, fichera, crossval, sweep. Options
come from defaults, then a flat key=value config file (--config), then
command-line flags, in that precedence order (flags win). Every emitted
file carries the resolved configuration as a `# key=value` prologue.

Exit codes: 0 success, 1 invalid parameters or usage, 2 solver
non-convergence. Each command writes CSV data and, unless --no-figures is
given, a companion PNG next to it.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import analysis, fd, figures, io, mc
from .model import BoundarySpec, ModelParams, OmegaSpec, fichera, rho


def _parse_floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _parse_ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _parse_bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_probes(s: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in s.split(";"):
        part = part.strip()
        if not part:
            continue
        xy = _parse_floats(part)
        if len(xy) != 2:
            raise ValueError(f"probe must be x,z: {part!r}")
        out.append((xy[0], xy[1]))
    return tuple(out)


# every key a config file may set, with its parser
_CASTS = {
    "delta": float, "c": float, "R": float, "eta": float,
    "omega": str, "kappa": float,
    "f": str, "knots_z": _parse_floats, "knots_f": _parse_floats,
    "scheme": str, "w": float, "tol": float, "check_every": int,
    "max_iters": int, "filter_zero": _parse_bool,
    "paths": int, "dt": float, "t_max": float, "seed": int,
    "budget_cap": int, "paths_profile": str,
    "N": int, "N_list": _parse_ints, "N_ref": int, "reference": str,
    "x0": float, "z0": float, "field": str, "samples": int,
    "preset": str, "probes": _parse_probes,
    "out": str, "figures": _parse_bool,
}

SWEEP_PRESETS = {
    "nominal": {},
    "lowR": {"R": 0.05},
    "highc": {"c": 0.6},
    "highdelta": {"delta": 0.75},
}


def log(msg: str) -> None:
    prefix = "boundhit: "
    if sys.stderr.isatty() and not os.environ.get("NO_COLOR"):
        sys.stderr.write(f"\x1b[1m{prefix}\x1b[0m{msg}\n")
    else:
        sys.stderr.write(prefix + msg + "\n")


def parse_config_file(path: str) -> dict:
    out = {}
    with open(path, "r") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
            k, _, v = line.partition("=")
            k = k.strip()
            if k not in _CASTS:
                raise ValueError(f"{path}:{ln}: unknown key {k!r}")
            out[k] = v.strip()
    return out


class Resolver:
    """Merged view of defaults, config file, and flags (flags win)."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file = parse_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, key, default=None):
        v = getattr(self.args, key, None)
        if v is not None:
            return v
        if key in self.file:
            return _CASTS[key](self.file[key])
        return default


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved and validated inputs for one command invocation."""

    params: ModelParams
    omega: OmegaSpec
    boundary: BoundarySpec
    scheme: fd.SchemeConfig
    mc: mc.McConfig
    probes: tuple[tuple[float, float], ...]
    out_dir: str
    figures: bool


def make_run_config(r: Resolver, overrides: dict | None = None) -> RunConfig:
    ov = overrides or {}

    def get(key, default=None):
        if key in ov:
            return ov[key]
        return r.get(key, default)

    params = ModelParams(
        delta=get("delta", 0.5), c=get("c", 0.4),
        R=get("R", 0.2), eta=get("eta", 0.0),
    )
    omega = OmegaSpec(kind=get("omega", "linear"), kappa=get("kappa", 0.5))
    boundary = BoundarySpec(
        kind=get("f", "f1"),
        knots_z=tuple(get("knots_z", ())),
        knots_f=tuple(get("knots_f", ())),
    )
    scheme = fd.SchemeConfig(
        scheme=get("scheme", "monotone"), w=get("w", 0.5),
        tol=get("tol", 1e-12), check_every=get("check_every", 100),
        max_iters=get("max_iters", 1_000_000),
        filter_zero=bool(get("filter_zero", False)),
    )
    seed = get("seed", 12345)
    profile = get("paths_profile", "desk")
    if profile == "full":
        mc_cfg = mc.McConfig.full_profile(seed=seed)
    elif profile == "desk":
        mc_cfg = mc.McConfig(seed=seed)
    else:
        raise ValueError(f"unknown paths profile {profile!r}")
    replacements = {}
    for key, field_name in (("paths", "n_paths"), ("dt", "dt"),
                            ("t_max", "t_max"), ("budget_cap", "budget_cap")):
        v = get(key)
        if v is not None:
            replacements[field_name] = v
    if replacements:
        mc_cfg = dataclasses.replace(mc_cfg, **replacements)
    probes = get("probes") or ((0.5, 1.0),)
    return RunConfig(
        params=params, omega=omega, boundary=boundary, scheme=scheme,
        mc=mc_cfg, probes=tuple(probes), out_dir=get("out", "out"),
        figures=not getattr(r.args, "no_figures", False) and bool(get("figures", True)),
    )


def echo_config(cfg: RunConfig, **extra) -> dict:
    d = {
        "delta": cfg.params.delta, "c": cfg.params.c, "R": cfg.params.R,
        "eta": cfg.params.eta,
        "omega": cfg.omega.kind, "kappa": cfg.omega.kappa,
        "f": cfg.boundary.kind,
        "scheme": cfg.scheme.scheme, "w": cfg.scheme.w,
        "tol": cfg.scheme.tol, "check_every": cfg.scheme.check_every,
        "max_iters": cfg.scheme.max_iters,
        "filter_zero": cfg.scheme.filter_zero,
        "paths": cfg.mc.n_paths, "dt": cfg.mc.dt, "t_max": cfg.mc.t_max,
        "seed": cfg.mc.seed,
        "probes": ";".join(f"{x:g},{z:g}" for x, z in cfg.probes),
    }
    if cfg.boundary.kind == "tabulated":
        d["knots_z"] = ",".join(f"{v:g}" for v in cfg.boundary.knots_z)
        d["knots_f"] = ",".join(f"{v:g}" for v in cfg.boundary.knots_f)
    d.update(extra)
    return d


def _tag(cfg: RunConfig, N: int) -> str:
    return f"{cfg.boundary.kind}_{cfg.scheme.scheme}_N{N}"


def _solve_one(cfg: RunConfig, N: int):
    field, report = fd.solve(cfg.params, cfg.omega, cfg.boundary,
                             fd.Grid(N), cfg.scheme)
    return field, report


# ---------------------------------------------------------------- commands

def cmd_solve(args: argparse.Namespace) -> int:
    r = Resolver(args)
    cfg = make_run_config(r)
    N = r.get("N", 100)
    echo = echo_config(cfg, N=N, command="solve")
    log(f"solving {_tag(cfg, N)} (eta={cfg.params.eta:g})")
    field, report = _solve_one(cfg, N)
    tag = _tag(cfg, N)
    field_path = os.path.join(cfg.out_dir, f"field_{tag}.csv")
    io.write_field(field_path, field, echo)
    report_path = os.path.join(cfg.out_dir, f"solve_report_{tag}.csv")
    rows = [(j, int(report.iterations[j]), float(report.residuals[j]))
            for j in range(N + 1)]
    io.write_table(report_path, "j,iterations,residual", rows,
                   {**echo, "wall_time_s": f"{report.wall_time:.3f}",
                    "total_iterations": report.total_iterations})
    outputs = [field_path, report_path]
    if cfg.figures:
        fig_path = os.path.join(cfg.out_dir, f"field_{tag}.png")
        figures.save_field_heatmap(field, rho(cfg.params), fig_path,
                                   f"{tag}, eta={cfg.params.eta:g}")
        outputs.append(fig_path)
    print(f"solve {tag}: {report.total_iterations} sweeps, "
          f"{report.wall_time:.2f}s -> {', '.join(outputs)}")
    return 0


def cmd_mc(args: argparse.Namespace) -> int:
    r = Resolver(args)
    cfg = make_run_config(r)
    x0 = r.get("x0", 0.5)
    z0 = r.get("z0", 1.0)
    field_path = r.get("field")
    source = None
    if field_path:
        field, _ = io.read_field(field_path)
        source = mc.field_omega_source(field, cfg.omega)
    echo = echo_config(cfg, x0=x0, z0=z0, command="mc",
                       field=field_path or "")
    log(f"simulating {cfg.mc.n_paths} paths from ({x0:g}, {z0:g})")
    batch = mc.simulate_batch(x0, z0, cfg.params, cfg.mc, source)
    est = mc.estimate_from_batch(batch, cfg.boundary, cfg.params)
    out_path = os.path.join(cfg.out_dir, "mc_estimate.csv")
    io.write_table(out_path, "x0,z0,mean,std_error,n_hits,n_paths",
                   [(float(x0), float(z0), est.mean, est.std_error,
                     est.n_hits, est.n_paths)], echo)
    outputs = [out_path]
    if cfg.figures:
        fig_path = os.path.join(cfg.out_dir, "mc_tau_hist.png")
        figures.save_tau_hist(batch.tau[batch.hit], cfg.mc.t_max, fig_path)
        outputs.append(fig_path)
    print(f"mc ({x0:g},{z0:g}): mean={est.mean:.6g} se={est.std_error:.3g} "
          f"hits={est.n_hits}/{est.n_paths} -> {', '.join(outputs)}")
    return 0


def _solve_many(cfg: RunConfig, Ns) -> dict:
    """Solve one field per resolution, concurrently."""
    fields = {}
    with ThreadPoolExecutor(max_workers=min(4, len(Ns))) as ex:
        futures = {N: ex.submit(_solve_one, cfg, N) for N in Ns}
        for N, fut in futures.items():
            fields[N] = fut.result()[0]
    return fields


def cmd_convergence(args: argparse.Namespace) -> int:
    r = Resolver(args)
    cfg = make_run_config(r)
    Ns = list(r.get("N_list", (100, 200, 400, 800)))
    reference = r.get("reference", "pair")
    if reference not in ("pair", "fine", "mc"):
        raise ValueError(f"reference must be pair, fine, or mc, got {reference!r}")
    for a, b in zip(Ns, Ns[1:]):
        if b != 2 * a:
            raise ValueError(f"resolutions must double: {a} then {b}")

    echo = echo_config(cfg, N_list=",".join(map(str, Ns)),
                       reference=reference, command="convergence")
    tag = f"{cfg.boundary.kind}_{cfg.scheme.scheme}_{reference}"
    out_path = os.path.join(cfg.out_dir, f"convergence_{tag}.csv")

    if reference == "mc":
        # scalar error against a simulation estimate at the first probe
        px, pz = cfg.probes[0]
        log(f"reference simulation at ({px:g}, {pz:g})")
        if cfg.omega.kind != "linear":
            raise ValueError("reference=mc supports the linear model only")
        est = mc.estimate_V(px, pz, cfg.params, cfg.boundary, cfg.mc)
        log(f"solving N in {Ns}")
        fields = _solve_many(cfg, Ns)
        errors = [abs(analysis.probe(fields[N], px, pz) - est.mean) for N in Ns]
        rows = analysis.convergence_rows(Ns, errors)
        io.write_table(out_path, "N,error,rate",
                       [(row.N, row.error,
                         "" if row.rate is None else io.fmt(row.rate))
                        for row in rows],
                       {**echo, "mc_mean": io.fmt(est.mean),
                        "mc_std_error": io.fmt(est.std_error)})
        series = [(f"{tag}", Ns, errors)]
    else:
        if reference == "fine":
            N_ref = r.get("N_ref", 2 * Ns[-1])
            if N_ref % Ns[-1]:
                raise ValueError(f"reference N={N_ref} not nested over {Ns[-1]}")
            solve_Ns = Ns + [N_ref]
        else:
            solve_Ns = Ns + [2 * Ns[-1]]
        log(f"solving N in {solve_Ns}")
        fields = _solve_many(cfg, solve_Ns)
        if reference == "fine":
            ref = fields[solve_Ns[-1]]
            pairs = [analysis.norms(fields[N], ref) for N in Ns]
        else:
            # difference each resolution against the next refinement
            pairs = [analysis.norms(fields[a], fields[b])
                     for a, b in zip(solve_Ns, solve_Ns[1:])]
        e_l1 = [p[0] for p in pairs]
        e_linf = [p[1] for p in pairs]
        r_l1 = analysis.rates(e_l1)
        r_linf = analysis.rates(e_linf)
        rows = []
        for k, N in enumerate(Ns):
            rows.append((
                N, e_l1[k], io.fmt(r_l1[k]) if k < len(r_l1) else "",
                e_linf[k], io.fmt(r_linf[k]) if k < len(r_linf) else "",
            ))
        io.write_table(out_path, "N,error_l1,rate_l1,error_linf,rate_linf",
                       rows, echo)
        series = [(f"{tag} l1", Ns, e_l1), (f"{tag} linf", Ns, e_linf)]

    outputs = [out_path]
    if cfg.figures:
        fig_path = os.path.join(cfg.out_dir, f"convergence_{tag}.png")
        figures.save_rates(series, fig_path)
        outputs.append(fig_path)
    print(f"convergence {tag}: errors "
          + ", ".join(io.fmt(e) for _, _, es in series[:1] for e in es)
          + f" -> {', '.join(outputs)}")
    return 0


_EDGES = (
    ("x=0", lambda t: (0.0, t), (1.0, 0.0)),
    ("x=1", lambda t: (1.0, t), (-1.0, 0.0)),
    ("z=0", lambda t: (t, 0.0), (0.0, 1.0)),
    ("z=1", lambda t: (t, 1.0), (0.0, -1.0)),
)


def _flip_point(params: ModelParams, point_of, normal, samples: int):
    """Bisect the sign change of the boundary drift flux along one edge;
    None when the classification is uniform."""
    ts = np.linspace(0.0, 1.0, samples)
    vals = [fichera(*point_of(t), normal, params)[0] for t in ts]
    for k in range(len(ts) - 1):
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            # a sampled zero is a flip only if the sign changes across it;
            # an identically-zero edge has no flip
            if k > 0 and vals[k - 1] * b < 0.0:
                return float(ts[k])
            continue
        if a * b < 0.0:
            lo, hi = ts[k], ts[k + 1]
            flo = a
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fm = fichera(*point_of(mid), normal, params)[0]
                if fm == 0.0:
                    return float(mid)
                if (fm > 0.0) == (flo > 0.0):
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-15:
                    break
            return float(0.5 * (lo + hi))
    return None


def cmd_fichera(args: argparse.Namespace) -> int:
    r = Resolver(args)
    cfg = make_run_config(r)
    samples = r.get("samples", 1001)
    if samples < 2:
        raise ValueError("need at least two samples per edge")
    echo = echo_config(cfg, samples=samples, command="fichera")
    rows = []
    summary = []
    plot_edges = []
    for name, point_of, normal in _EDGES:
        ts = np.linspace(0.0, 1.0, samples)
        vals = []
        n_bc = 0
        for t in ts:
            value, needs_bc = fichera(*point_of(float(t)), normal, cfg.params)
            vals.append(value)
            n_bc += needs_bc
            rows.append((name, float(t), float(value), int(needs_bc)))
        flip = _flip_point(cfg.params, point_of, normal, samples)
        summary.append((name, "" if flip is None else io.fmt(flip),
                        float(n_bc / samples)))
        plot_edges.append((name, ts, vals))
    edges_path = os.path.join(cfg.out_dir, "fichera_edges.csv")
    io.write_table(edges_path, "edge,coord,value,needs_bc", rows, echo)
    summary_path = os.path.join(cfg.out_dir, "fichera_summary.csv")
    io.write_table(summary_path, "edge,flip_coord,bc_fraction", summary,
                   {**echo, "rho": io.fmt(rho(cfg.params))})
    outputs = [edges_path, summary_path]
    if cfg.figures:
        fig_path = os.path.join(cfg.out_dir, "fichera_edges.png")
        figures.save_fichera(plot_edges, rho(cfg.params), fig_path)
        outputs.append(fig_path)
    flips = {name: f for name, f, _ in summary if f != ""}
    print(f"fichera: rho={rho(cfg.params):.10g} flips={flips} "
          f"-> {', '.join(outputs)}")
    return 0


def cmd_crossval(args: argparse.Namespace) -> int:
    r = Resolver(args)
    cfg = make_run_config(r)
    N = r.get("N", 200)
    echo = echo_config(cfg, N=N, command="crossval")
    log(f"solving {_tag(cfg, N)} for the feedback field")
    field, _ = _solve_one(cfg, N)
    source = mc.field_omega_source(field, cfg.omega)
    rows = []
    fd_vals, means, errs = [], [], []
    for px, pz in cfg.probes:
        fd_val = analysis.probe(field, px, pz)
        log(f"simulating at probe ({px:g}, {pz:g})")
        est = mc.estimate_V(px, pz, cfg.params, cfg.boundary, cfg.mc, source)
        zscore = ((fd_val - est.mean) / est.std_error
                  if est.std_error > 0.0 else 0.0)
        rows.append((float(px), float(pz), fd_val, est.mean,
                     est.std_error, zscore))
        fd_vals.append(fd_val)
        means.append(est.mean)
        errs.append(est.std_error)
    out_path = os.path.join(cfg.out_dir, "crossval.csv")
    io.write_table(out_path, "x,z,fd,mc_mean,std_error,z_score", rows, echo)
    outputs = [out_path]
    if cfg.figures:
        fig_path = os.path.join(cfg.out_dir, "crossval.png")
        figures.save_crossval(cfg.probes, fd_vals, means, errs, fig_path)
        outputs.append(fig_path)
    worst = max((abs(z) for *_, z in rows), default=0.0)
    print(f"crossval N={N}: {len(rows)} probes, worst |z|={worst:.2f} "
          f"-> {', '.join(outputs)}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    r = Resolver(args)
    presets = getattr(args, "preset", None)
    if not presets:
        file_preset = r.get("preset")
        presets = [file_preset] if file_preset else list(SWEEP_PRESETS)
    for p in presets:
        if p not in SWEEP_PRESETS:
            raise ValueError(
                f"unknown preset {p!r}; choose from {sorted(SWEEP_PRESETS)}")
    # sweep defaults differ from solve: high-order scheme and the smooth
    # compatible payoff, unless the user says otherwise
    sweep_defaults = {}
    if r.get("scheme") is None:
        sweep_defaults["scheme"] = "filtered"
    if r.get("f") is None:
        sweep_defaults["f"] = "f3"
    base = make_run_config(r, overrides=sweep_defaults)
    N = r.get("N", 200)
    summary = []
    entries = []
    outputs = []
    for name in presets:
        cfg = make_run_config(r, overrides={**sweep_defaults,
                                            **SWEEP_PRESETS[name]})
        echo = echo_config(cfg, N=N, command="sweep", preset=name)
        log(f"sweep preset {name}: delta={cfg.params.delta:g} "
            f"c={cfg.params.c:g} R={cfg.params.R:g}")
        t0 = time.perf_counter()
        field, report = _solve_one(cfg, N)
        wall = time.perf_counter() - t0
        field_path = os.path.join(base.out_dir, f"sweep_{name}_N{N}.csv")
        io.write_field(field_path, field, echo)
        outputs.append(field_path)
        summary.append((name, cfg.params.delta, cfg.params.c, cfg.params.R,
                        rho(cfg.params), N, float(field.values.min()),
                        float(field.values.max()),
                        report.total_iterations, wall))
        entries.append((f"{name} (rho={rho(cfg.params):.4g})", field,
                        rho(cfg.params)))
    summary_path = os.path.join(base.out_dir, "sweep_summary.csv")
    io.write_table(summary_path,
                   "preset,delta,c,R,rho,N,min_V,max_V,iterations,wall_s",
                   summary, echo_config(base, N=N, command="sweep",
                                        presets=",".join(presets)))
    outputs.append(summary_path)
    if base.figures:
        fig_path = os.path.join(base.out_dir, "sweep_grid.png")
        figures.save_sweep_grid(entries, fig_path)
        outputs.append(fig_path)
    print(f"sweep [{', '.join(presets)}] N={N} -> {', '.join(outputs)}")
    return 0


# ------------------------------------------------------------------ parser

def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common")
    g.add_argument("--config", help="flat key=value config file")
    g.add_argument("--seed", type=int, help="simulation seed (u64)")
    g.add_argument("--out", help="output directory (default: out)")
    g.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering")
    m = p.add_argument_group("model")
    m.add_argument("--delta", type=float, help="source coupling in (0,1)")
    m.add_argument("--c", type=float, help="noise intensity")
    m.add_argument("--R", type=float, help="drive decay scale")
    m.add_argument("--eta", type=float, help="discount rate (>= 0)")
    m.add_argument("--omega", choices=("linear", "tanh", "shifted_tanh"),
                   help="feedback shape")
    m.add_argument("--kappa", type=float, help="feedback steepness")
    m.add_argument("--f", choices=("f1", "f2", "f3", "tabulated"),
                   help="boundary payoff")
    m.add_argument("--knots-z", dest="knots_z", type=_parse_floats,
                   help="tabulated payoff abscissae, comma separated")
    m.add_argument("--knots-f", dest="knots_f", type=_parse_floats,
                   help="tabulated payoff values, comma separated")
    return p


def _add_scheme_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scheme")
    g.add_argument("--scheme", choices=("monotone", "filtered"))
    g.add_argument("--w", type=float, help="relaxation damping in [0,1)")
    g.add_argument("--tol", type=float, help="sweep convergence tolerance")
    g.add_argument("--check-every", dest="check_every", type=int,
                   help="sweeps between convergence checks")
    g.add_argument("--max-iters", dest="max_iters", type=int)
    g.add_argument("--filter-zero", dest="filter_zero", action="store_const",
                   const=True, help="force the high-order correction to zero")


def _add_mc_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--paths", type=int, help="number of paths")
    g.add_argument("--dt", type=float, help="time step")
    g.add_argument("--t-max", dest="t_max", type=float, help="time horizon")
    g.add_argument("--budget-cap", dest="budget_cap", type=int,
                   help="max total steps (paths x steps)")
    g.add_argument("--paths-profile", dest="paths_profile",
                   choices=("desk", "full"),
                   help="desk: 1e5 paths, dt 1e-3; full: 2e6 paths, dt 5e-6")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="boundhit",
        description="Boundary-hitting statistics of a state-and-drive "
                    "diffusion: grid solver, path simulation, and "
                    "convergence/classification reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common],
                       help="solve the stationary equation on a grid")
    _add_scheme_args(p)
    p.add_argument("--N", type=int, help="grid resolution (default 100)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("mc", parents=[common],
                       help="estimate V by path simulation")
    _add_mc_args(p)
    p.add_argument("--x0", type=float, help="initial state")
    p.add_argument("--z0", type=float, help="initial drive")
    p.add_argument("--field", help="solved field CSV enabling feedback drift")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("convergence", parents=[common],
                       help="grid refinement study")
    _add_scheme_args(p)
    _add_mc_args(p)
    p.add_argument("--N-list", dest="N_list", type=_parse_ints,
                   help="doubling resolutions, e.g. 100,200,400,800")
    p.add_argument("--reference", choices=("pair", "fine", "mc"),
                   help="error reference: next refinement, a fixed fine "
                        "field, or a simulation estimate")
    p.add_argument("--N-ref", dest="N_ref", type=int,
                   help="reference resolution for --reference fine")
    p.add_argument("--probe", dest="probes", type=_parse_probes,
                   help="probe list x,z;x,z for --reference mc")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("fichera", parents=[common],
                       help="classify boundary edges by drift flux")
    p.add_argument("--samples", type=int, help="points per edge")
    p.set_defaults(func=cmd_fichera)

    p = sub.add_parser("crossval", parents=[common],
                       help="grid solve vs feedback simulation at probes")
    _add_scheme_args(p)
    _add_mc_args(p)
    p.add_argument("--N", type=int, help="grid resolution (default 200)")
    p.add_argument("--probe", dest="probes", type=_parse_probes,
                   help="probe list x,z;x,z")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("sweep", parents=[common],
                       help="solve the named parameter presets")
    _add_scheme_args(p)
    p.add_argument("--N", type=int, help="grid resolution (default 200)")
    p.add_argument("--preset", action="append",
                   choices=sorted(SWEEP_PRESETS),
                   help="repeatable; default runs all presets")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        code = e.code if isinstance(e.code, int) else 1
        return 0 if code == 0 else 1
    try:
        return args.func(args)
    except fd.ConvergenceError as e:
        log(f"error: {e}")
        return 2
    except (ValueError, TypeError, FileNotFoundError) as e:
        log(f"error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
