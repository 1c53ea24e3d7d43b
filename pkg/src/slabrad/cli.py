"""Batch command line front end.

Every subcommand reads a config (``--config``, YAML or JSON, or a previous
run's ``.meta.json`` sidecar), applies ``--section.key value`` overrides,
writes one CSV/JSON table to ``output.path`` plus ``<path>.meta.json``, and
exits with 0 (success), 2 (some grid points failed and hold NaN) or 1
(hard error).  ``SLABRAD_THREADS`` sets the worker count (0 = all cores);
results do not depend on it.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import RunConfig, leaf_keys, load_config
from .ensemble import disorder_average
from .errors import SlabradError
from .geometry import DisorderSpec, LatticeKind, LatticeSpec, generate_lattice
from .greens import LayerStack, homogeneous_batch, pair_radiated_power, slab_greens
from .modes import Polarization, SlabSpec, find_modes
from .oracle import compare_closed_form, random_case
from .quadrature import QuadratureConfig
from .spin import EmitterArray, Homogeneous, Slab, collective_spectrum, coupling_matrices
from .superradiance import dmin_scaling_check, fit_scaling, ordered_map, sweep_map

log = logging.getLogger("slabrad")

DIPOLES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
SUBCOMMANDS = (
    "modes", "greens", "pairpower", "spectrum", "map", "sizesweep", "scaling", "disorder", "oracle-check",
)


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple]
    failures: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    seed: int | None = None


# ---------------------------------------------------------------------------
# shared builders


def _stack(cfg: RunConfig) -> LayerStack:
    return LayerStack.symmetric(cfg.slab.index, cfg.slab.width_nm * 1e-9, cfg.wavelength_nm * 1e-9)


def _environment(cfg: RunConfig):
    if cfg.environment == "slab":
        return Slab(_stack(cfg))
    return Homogeneous(cfg.slab.index)


def _quad(cfg: RunConfig) -> QuadratureConfig:
    q = cfg.quadrature
    return QuadratureConfig(detour_height=q.detour_height, k_max=q.k_max_over_k0, rel_tol=q.rel_tol)


def _medium_wavelength(cfg: RunConfig) -> float:
    return cfg.wavelength_nm * 1e-9 / cfg.slab.index


def _grid(name: str, lo: float, hi: float, points: int) -> np.ndarray:
    if points == 0:
        raise SlabradError(f"empty sweep axis {name!r}")
    return np.linspace(lo, hi, points)


def _d_grid(cfg: RunConfig) -> np.ndarray:
    s = cfg.sweep
    return _grid("d_over_lambda", s.d_min, s.d_max, s.d_points)


def _phi_grid(cfg: RunConfig) -> np.ndarray:
    p = cfg.sweep.phi_points
    if p == 0:
        raise SlabradError("empty sweep axis 'phi'")
    return 2 * np.pi * np.arange(p) / p


def _lattice(cfg: RunConfig, spacing: float) -> LatticeSpec:
    lat = cfg.lattice
    kind = LatticeKind(lat.kind)
    if kind is LatticeKind.HEXAGONAL:
        return LatticeSpec(kind, spacing, z=0.0)
    return LatticeSpec(kind, spacing, sites=lat.sites, z=0.0)


def _array(cfg: RunConfig, spacing: float) -> EmitterArray:
    env = _environment(cfg)
    pos = generate_lattice(_lattice(cfg, spacing))
    if isinstance(env, Slab):
        pos[:, 2] = env.stack.mid_plane
    return EmitterArray(pos, DIPOLES[cfg.dipole.orientation], cfg.wavelength_nm * 1e-9, env)


# ---------------------------------------------------------------------------
# subcommands


def run_modes(cfg: RunConfig) -> Table:
    m = cfg.modes
    widths = _grid("width_nm", m.width_min_nm, m.width_max_nm, m.points)
    rows, failures = [], []
    for w in widths:
        spec = SlabSpec(cfg.slab.index, w * 1e-9, cfg.wavelength_nm * 1e-9)
        out = []
        for pol in (Polarization.TE, Polarization.TM):
            try:
                modes = find_modes(spec, pol)
                out.append((modes[0].n_eff, len(modes)))
            except SlabradError as exc:
                failures.append(f"width_nm={w!r} {pol.value}: {exc}")
                out.append((math.nan, 0))
        rows.append((w, out[0][0], out[1][0], out[0][1], out[1][1]))
    return Table(["width_nm", "te0_n_eff", "tm0_n_eff", "te_modes", "tm_modes"], rows, failures)


def run_greens(cfg: RunConfig) -> Table:
    d = _d_grid(cfg)
    lam = _medium_wavelength(cfg)
    stack = _stack(cfg)
    sep = np.zeros((d.size, 3))
    sep[:, 0] = d * lam
    g = homogeneous_batch(sep, stack.k2)
    if cfg.environment == "slab":
        ev = slab_greens(stack, stack.mid_plane, stack.mid_plane, _quad(cfg))
        gs, gp = ev.reflected(sep[:, 0], sep[:, 1])
        g = g + gs + gp
    g = g / stack.k0
    comps = [a + b for a in "xyz" for b in "xyz"]
    cols = ["d_over_lambda"] + [f"g_{c}_{part}" for c in comps for part in ("re", "im")]
    rows = []
    for k in range(d.size):
        flat = g[k].ravel()
        rows.append((d[k],) + tuple(v for z in flat for v in (z.real, z.imag)))
    return Table(cols, rows)


def run_pairpower(cfg: RunConfig) -> Table:
    d = _d_grid(cfg)
    stack = _stack(cfg)
    sep = d * _medium_wavelength(cfg)
    dip = DIPOLES[cfg.dipole.orientation]
    hom = pair_radiated_power(sep, dip, "homogeneous", stack)
    slab = pair_radiated_power(sep, dip, "slab", stack, _quad(cfg))
    return Table(["d_over_lambda", "homogeneous", "slab"], list(zip(d, hom, slab)))


def run_spectrum(cfg: RunConfig) -> Table:
    d = _d_grid(cfg)
    lam = _medium_wavelength(cfg)
    quad = _quad(cfg)
    n = _array(cfg, lam).n_emitters

    def point(x):
        try:
            c = coupling_matrices(_array(cfg, x * lam), quad)
            return tuple(collective_spectrum(c).eigenvalues / c.gamma_eps), None
        except SlabradError as exc:
            return (math.nan,) * n, f"d_over_lambda={x!r}: {exc}"

    res = ordered_map(point, list(d))
    rows = [(x,) + vals for x, (vals, _) in zip(d, res)]
    failures = [err for _, err in res if err]
    return Table(["d_over_lambda"] + [f"gamma_nu_{i + 1}" for i in range(n)], rows, failures)


def _map_table(smap) -> Table:
    failures = [f"grid point {idx}: {msg}" for idx, msg in smap.failures]
    return Table(list(smap.axes) + ["gamma_dot", "sign"], list(smap.rows()), failures)


def run_map(cfg: RunConfig) -> Table:
    d = _d_grid(cfg)
    base = _array(cfg, _medium_wavelength(cfg))
    if cfg.sweep.quantity == "total":
        smap = sweep_map(base, d, quantity="total", quad=_quad(cfg))
    else:
        smap = sweep_map(base, d, phi=_phi_grid(cfg), quad=_quad(cfg))
    return _map_table(smap)


def run_sizesweep(cfg: RunConfig) -> Table:
    d = _d_grid(cfg)
    if not cfg.sweep.n_list:
        raise SlabradError("empty sweep axis 'n'")
    base = _array(cfg, _medium_wavelength(cfg))
    kind = LatticeKind(cfg.lattice.kind)
    if kind is LatticeKind.HEXAGONAL:
        raise SlabradError("size sweeps support chain and square lattices only")

    def layout(n):
        return generate_lattice(LatticeSpec(kind, 1.0, sites=n))

    smap = sweep_map(
        base, d, n_list=cfg.sweep.n_list, phi_fixed=cfg.sweep.phi_fixed_over_pi * np.pi,
        layout=layout, quantity=cfg.sweep.quantity, quad=_quad(cfg),
    )
    smap.axes["n"] = smap.axes["n"].astype(int)
    return _map_table(smap)


def run_scaling(cfg: RunConfig) -> Table:
    s = cfg.scaling
    if not s.n_list:
        raise SlabradError("empty sweep axis 'n'")
    pts = dmin_scaling_check(s.alpha, s.dimensionality, s.n_list)
    rows = [(s.dimensionality, s.alpha, p.n, p.d_min) for p in pts]
    summary = {}
    if len(pts) >= 2 and all(p.d_min > 0 for p in pts):
        for law in ("log", "sqrt_log", "power"):
            f = fit_scaling(pts, law)
            summary[law] = {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}
    return Table(["dimensionality", "alpha", "n", "d_min_k0"], rows, summary=summary)


def run_disorder(cfg: RunConfig) -> Table:
    phis = _phi_grid(cfg)
    lam = _medium_wavelength(cfg)
    spacing = cfg.lattice.d_over_lambda * lam
    lat = _lattice(cfg, spacing)
    env = _environment(cfg)
    if isinstance(env, Slab):
        lat = LatticeSpec(lat.kind, lat.spacing, lat.sites, lat.rows, lat.cols, env.stack.mid_plane)
    dis = cfg.disorder
    if not dis.sigma_over_d:
        raise SlabradError("empty sweep axis 'sigma_over_d'")
    rows, failures, redraws = [], [], {}
    for sigma in dis.sigma_over_d:
        spec = DisorderSpec(sigma, dis.realizations, dis.seed)
        curve = disorder_average(
            lat, spec, phis, env, DIPOLES[cfg.dipole.orientation], cfg.wavelength_nm * 1e-9, quad=_quad(cfg)
        )
        for k in range(phis.size):
            rows.append((phis[k], curve.mean[k], curve.stderr[k], curve.realizations_used, sigma))
        failures += [f"sigma_over_d={sigma!r} realization {i}: {msg}" for i, msg in curve.failures]
        redraws[repr(sigma)] = curve.redraws
    return Table(
        ["phi", "mean_gamma_dot", "stderr", "realizations_used", "sigma_over_d"],
        rows, failures, summary={"redraws": redraws}, seed=dis.seed,
    )


def run_oracle_check(cfg: RunConfig) -> Table:
    o = cfg.oracle
    lam0 = cfg.wavelength_nm * 1e-9
    stack = _stack(cfg)
    quad = _quad(cfg)

    def one(i):
        case = random_case(o.seed, i, o.n, o.phi_points, lam0, cfg.slab.index)
        env = Slab(stack) if case.environment == "slab" else Homogeneous(cfg.slab.index)
        pos = case.positions.copy()
        if case.environment == "slab":
            pos[:, 2] = stack.mid_plane
        array = EmitterArray(pos, DIPOLES[case.orientation], lam0, env)
        c = coupling_matrices(array, quad)
        return case, compare_closed_form(array, c, case.phis)

    rows, n_fail = [], 0
    for i, (case, res) in enumerate(ordered_map(one, list(range(o.cases)))):
        for r in res:
            ok = r.rel_error <= o.tolerance
            n_fail += not ok
            phi = "" if r.phi is None else r.phi
            rows.append((i, case.n, case.environment, case.orientation, r.quantity, phi,
                         r.closed_form, r.finite_difference, r.rel_error, int(ok)))
    cols = ["case", "n", "environment", "orientation", "quantity", "phi",
            "closed_form", "finite_difference", "rel_error", "pass"]
    return Table(cols, rows, summary={"checks": len(rows), "failed": n_fail}, seed=o.seed)


RUNNERS = {
    "modes": run_modes,
    "greens": run_greens,
    "pairpower": run_pairpower,
    "spectrum": run_spectrum,
    "map": run_map,
    "sizesweep": run_sizesweep,
    "scaling": run_scaling,
    "disorder": run_disorder,
    "oracle-check": run_oracle_check,
}


# ---------------------------------------------------------------------------
# output


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return None if math.isnan(f) else f
    return v


def render_json(table: Table) -> str:
    rows = [[_json_value(v) for v in row] for row in table.rows]
    return json.dumps({"columns": table.columns, "rows": rows}, indent=1) + "\n"


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_outputs(cfg: RunConfig, subcommand: str, table: Table, wall: float) -> Path:
    path = Path(cfg.output.path)
    body = render_csv(table) if cfg.output.format == "csv" else render_json(table)
    meta = {
        "tool_version": __version__,
        "subcommand": subcommand,
        "config": cfg.model_dump(mode="json"),
        "seed": table.seed,
        "wall_time_s": wall,
        "columns": table.columns,
        "rows": len(table.rows),
        "failures": table.failures,
        "summary": table.summary,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(body)
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


# ---------------------------------------------------------------------------
# argument parsing


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slabrad",
        description="Emitter interactions and Dicke superradiance in a dielectric slab.",
    )
    parser.add_argument("--version", action="version", version=f"slabrad {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="YAML/JSON config or a previous run's .meta.json")
        p.add_argument("-o", "--output", dest="output.path", metavar="PATH", help="alias of --output.path")
        p.add_argument("-v", "--verbose", action="store_true")
        for key, info in leaf_keys():
            p.add_argument(_flag(key), dest=key, metavar="VALUE", help=info.description)
        if name == "oracle-check":
            p.add_argument("--n", dest="oracle.n", metavar="N", help="alias of --oracle.n")
            p.add_argument("--seed", dest="oracle.seed", metavar="SEED", help="alias of --oracle.seed")
        elif name == "disorder":
            p.add_argument("--seed", dest="disorder.seed", metavar="SEED", help="alias of --disorder.seed")
    return parser


def _parse_value(raw: str):
    try:
        return yaml.safe_load(raw)
    except yaml.YAMLError:
        return raw


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    subcommand = args.pop("subcommand")
    config_path = args.pop("config", None)
    verbose = args.pop("verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: _parse_value(v) for k, v in args.items()}
    try:
        cfg = load_config(config_path, overrides)
        start = time.perf_counter()
        table = RUNNERS[subcommand](cfg)
        path = write_outputs(cfg, subcommand, table, time.perf_counter() - start)
    except (SlabradError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if table.failures:
        print(f"{len(table.failures)} point(s) failed; see {sidecar_path(path)}", file=sys.stderr)
        return 2
    log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
