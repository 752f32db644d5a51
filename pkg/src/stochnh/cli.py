"""Command-line entry point.

Config is a single INI file (flat key = value within named sections); every
key is validated before any computation and unknown keys are hard errors.
All output files start with '#'-prefixed metadata (config echo, seed,
generator, version) sufficient to re-run the job, followed by RFC-4180-style
CSV with 17-significant-digit numbers.

Exit codes: 0 success, 2 config error, 3 width collapse, 4 boundary
overlap, 5 tolerance breach, 6 numerical overflow.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from . import __version__
from .errors import BoundaryOverlap, ConfigError, PastCollapse, StochNHError
from .field import GaussianInit, Grid, init_gaussian
from .model import deterministic_nh, random_dissipative
from .montecarlo import run_ensemble
from .oracles import (Eq2_inf, collapse_time, lattice_deterministic_check,
                      sigma2_inf)
from .stochastic import GENERATOR_NAME, generate_path
from .steppers import equivalence_check, evolve_prenormalized

EXIT_CODES = {
    "completed": 0,
    "config": 2,
    "width_collapse": 3,
    "boundary_overlap": 4,
    "tolerance": 5,
    "numerical_overflow": 6,
}

_SCHEMA = {
    "model": {"preset", "m", "lam", "gamma", "lam1", "lam2"},
    "grid": {"length", "nx"},
    "init": {"q0", "p0", "sigma0"},
    "stepper": {"dt", "t_final", "mode", "representation", "dt_list"},
    "stochastic": {"seed", "n_traj"},
    "output": {"output_times", "snapshots", "prefix"},
}


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


class Config:
    """Validated view of the INI file."""

    def __init__(self, path: str):
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        read = cp.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path!r}")
        for section in cp.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key in cp[section]:
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
        self.cp = cp
        self.path = path

    def has(self, section: str, key: str = None) -> bool:
        if key is None:
            return self.cp.has_section(section)
        return self.cp.has_option(section, key)

    def _get(self, section, key, cast, default):
        if not self.cp.has_option(section, key):
            if default is not None:
                return default
            raise ConfigError(f"missing required key {key!r} in [{section}]")
        raw = self.cp.get(section, key)
        try:
            return cast(raw)
        except ValueError as e:
            raise ConfigError(f"bad value for [{section}] {key} = {raw!r}: {e}")

    def flt(self, section, key, default=None):
        return self._get(section, key, float, default)

    def cpx(self, section, key, default=None):
        return self._get(section, key, lambda s: complex(s.replace(" ", "")),
                         default)

    def integer(self, section, key, default=None):
        return self._get(section, key, int, default)

    def text(self, section, key, default=None):
        return self._get(section, key, str, default)

    def flag(self, section, key, default=False):
        return self._get(section, key,
                         lambda s: s.lower() in ("1", "true", "yes"), default)

    def float_list(self, section, key, default=None):
        return self._get(
            section, key,
            lambda s: [float(p) for p in s.replace(";", ",").split(",") if p.strip()],
            default)

    def echo_lines(self):
        for section in self.cp.sections():
            for key, val in self.cp[section].items():
                yield f"{section}.{key} = {val}"


def _build_spec(cfg: Config):
    preset = cfg.text("model", "preset")
    if preset == "deterministic_nh":
        return deterministic_nh(cfg.cpx("model", "lam1", 0j),
                                cfg.cpx("model", "lam2"))
    if preset == "random_dissipative":
        return random_dissipative(cfg.flt("model", "m", 1.0),
                                  cfg.cpx("model", "lam"),
                                  cfg.cpx("model", "gamma", 0j))
    raise ConfigError(f"unknown preset {preset!r}")


def _build_init(cfg: Config) -> GaussianInit:
    return GaussianInit(q0=cfg.flt("init", "q0", 0.0),
                        p0=cfg.flt("init", "p0", 0.0),
                        sigma0=cfg.flt("init", "sigma0", 1.0))


def _build_grid(cfg: Config):
    if not cfg.has("grid"):
        return None
    return Grid(length=cfg.flt("grid", "length"), nx=cfg.integer("grid", "nx"))


def _write_csv(path, cfg: Config, seed, extra_meta, header, rows):
    with open(path, "w") as f:
        f.write(f"# stochnh {__version__}\n")
        f.write(f"# generator = {GENERATOR_NAME}\n")
        f.write(f"# seed = {seed}\n")
        for line in cfg.echo_lines():
            f.write(f"# {line}\n")
        for line in extra_meta:
            f.write(f"# {line}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _maybe_path(spec, cfg, seed, dt, t_final):
    if not spec.h2_terms:
        return None
    return generate_path(seed, 0.0, t_final, dt)


def cmd_evolve(cfg: Config, out_dir: str, seed: int) -> int:
    spec = _build_spec(cfg)
    init = _build_init(cfg)
    grid = _build_grid(cfg)
    dt = cfg.flt("stepper", "dt", 1e-3)
    t_final = cfg.flt("stepper", "t_final")
    mode = cfg.text("stepper", "mode", "exp2")
    representation = cfg.text("stepper", "representation", "auto")
    output_times = cfg.float_list("output", "output_times", [])
    path = _maybe_path(spec, cfg, seed, dt, t_final)
    res = evolve_prenormalized(spec, init, path, dt, t_final, mode=mode,
                               representation=representation, grid=grid,
                               output_times=output_times or None)
    prefix = cfg.text("output", "prefix", "trajectory")
    rows = [(t, s.q, s.sigma2, s.p_mean, s.residual, ln)
            for t, s, ln in zip(res.times, res.summaries, res.log_norms)]
    meta = [f"termination = {res.termination.kind}",
            f"t_reached = {_fmt(res.termination.t_reached)}"]
    tc = None
    if spec.preset == "deterministic_nh":
        tc = collapse_time(spec.lam2, init.sigma0)
    if tc is not None:
        meta.append(f"predicted_t_c = {_fmt(tc)}")
    _write_csv(os.path.join(out_dir, prefix + ".csv"), cfg, seed, meta,
               ["t", "q", "sigma2", "p_mean", "residual", "log_norm"], rows)
    if cfg.flag("output", "snapshots", False) and grid is not None:
        psi = init_gaussian(grid, init)
        _write_csv(os.path.join(out_dir, prefix + "_density0.csv"), cfg, seed,
                   [], ["x", "rho"],
                   zip(grid.x, np.abs(psi.amplitudes) ** 2))
    print(f"evolve: {res.termination.kind} at t = {res.termination.t_reached}")
    return EXIT_CODES.get(res.termination.kind, 0)


def cmd_ensemble(cfg: Config, out_dir: str, seed: int) -> int:
    spec = _build_spec(cfg)
    init = _build_init(cfg)
    grid = _build_grid(cfg)
    dt = cfg.flt("stepper", "dt", 1e-3)
    t_final = cfg.flt("stepper", "t_final")
    n_traj = cfg.integer("stochastic", "n_traj", 1000)
    output_times = cfg.float_list("output", "output_times", [])
    stats = run_ensemble(spec, init, n_traj, t_final, dt, master_seed=seed,
                         output_times=output_times or None, grid=grid,
                         representation=cfg.text("stepper", "representation",
                                                 "auto"))
    prefix = cfg.text("output", "prefix", "ensemble")
    rows = zip(stats.times, stats.mean_q, stats.var_q, stats.se_var_q,
               stats.mean_q2, stats.mean_sigma2, stats.mean_log_norm)
    meta = [f"n_traj = {n_traj}",
            "terminations = " + ",".join(f"{k}:{v}" for k, v
                                         in sorted(stats.terminations.items()))]
    _write_csv(os.path.join(out_dir, prefix + ".csv"), cfg, seed, meta,
               ["t", "mean_q", "var_q", "se_var_q", "mean_q2", "mean_sigma2",
                "mean_log_norm"], rows)
    print(f"ensemble: {n_traj} trajectories, var_q({stats.times[-1]}) = "
          f"{stats.var_q[-1]:.6g} +- {stats.se_var_q[-1]:.2g}")
    return 0


def cmd_oracle(cfg: Config, out_dir: str, seed: int) -> int:
    spec = _build_spec(cfg)
    if spec.preset != "random_dissipative":
        raise ConfigError("oracle subcommand needs the random_dissipative preset")
    s2 = sigma2_inf(spec.mass, spec.lam)
    q2 = Eq2_inf(spec.lam, spec.gamma)
    print(f"sigma2_inf={_fmt(s2)}")
    print(f"Eq2_inf={_fmt(q2)}")
    prefix = cfg.text("output", "prefix", "oracle")
    _write_csv(os.path.join(out_dir, prefix + ".csv"), cfg, seed, [],
               ["sigma2_inf", "Eq2_inf"], [(s2, q2)])
    return 0


def cmd_lattice_check(cfg: Config, out_dir: str, seed: int, tol=1e-3) -> int:
    init = _build_init(cfg)
    grid = _build_grid(cfg) or Grid(length=40.0, nx=512)
    t = cfg.flt("stepper", "t_final", 0.5)
    lam1 = cfg.cpx("model", "lam1", 0j) if cfg.has("model") else 0j
    quadrants = [0.1 + 0.3j, 0.1 - 0.3j, -0.1 + 0.3j, -0.1 - 0.3j]
    rows, worst = [], 0.0
    for lam2 in quadrants:
        r = lattice_deterministic_check(lam1, lam2, init, t, grid)
        rows.append((lam2.real, lam2.imag, r["q_num"], r["q_ref"],
                     r["sigma2_num"], r["sigma2_ref"], r["q_err"],
                     r["sigma2_rel_err"]))
        worst = max(worst, r["q_err"], r["sigma2_rel_err"])
        if r["q_err"] > tol or r["sigma2_rel_err"] > tol:
            print(f"lattice-check FAIL at lam2 = {lam2}: "
                  f"q {r['q_num']} vs {r['q_ref']}, "
                  f"sigma2 {r['sigma2_num']} vs {r['sigma2_ref']}")
    prefix = cfg.text("output", "prefix", "lattice") if cfg.has("output") else "lattice"
    _write_csv(os.path.join(out_dir, prefix + ".csv"), cfg, seed,
               [f"tolerance = {tol}"],
               ["lam2_re", "lam2_im", "q_num", "q_ref", "sigma2_num",
                "sigma2_ref", "q_err", "sigma2_rel_err"], rows)
    if worst > tol:
        return EXIT_CODES["tolerance"]
    print(f"lattice-check: all quadrants within {tol} (worst {worst:.2e})")
    return 0


def cmd_converge(cfg: Config, out_dir: str, seed: int) -> int:
    spec = _build_spec(cfg)
    init = _build_init(cfg)
    grid = _build_grid(cfg)
    if grid is None:
        raise ConfigError("converge needs a [grid] section")
    t_final = cfg.flt("stepper", "t_final")
    dt_list = cfg.float_list("stepper", "dt_list")
    if len(dt_list) < 2:
        raise ConfigError("converge needs dt_list with at least two entries "
                          "to fit a slope")
    path = generate_path(seed, 0.0, t_final, min(dt_list))
    rep = equivalence_check(spec, init, path, dt_list, t_final, grid,
                            mode=cfg.text("stepper", "mode", "exp2"))
    prefix = cfg.text("output", "prefix", "converge")
    _write_csv(os.path.join(out_dir, prefix + ".csv"), cfg, seed,
               [f"fitted_slope = {_fmt(rep.slope)}"],
               ["dt", "diff"], zip(rep.dts, rep.diffs))
    if rep.slope is None or rep.slope < 0.4:
        print(f"converge FAIL: slope {rep.slope} < 0.4")
        return EXIT_CODES["tolerance"]
    print(f"converge: slope = {rep.slope:.3f} over dt = {list(rep.dts)}")
    return 0


_COMMANDS = {
    "evolve": cmd_evolve,
    "ensemble": cmd_ensemble,
    "oracle": cmd_oracle,
    "lattice-check": cmd_lattice_check,
    "converge": cmd_converge,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stochnh",
        description="Stochastic non-Hermitian wave-packet dynamics")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for ensembles (vectorized "
                             "batches; recorded in metadata)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override [stochastic] seed")
    args = parser.parse_args(argv)
    try:
        cfg = Config(args.config)
        seed = args.seed
        if seed is None:
            seed = cfg.integer("stochastic", "seed", 0) if cfg.has("stochastic") else 0
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](cfg, args.out, seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CODES["config"]
    except BoundaryOverlap as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CODES["boundary_overlap"]
    except PastCollapse as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CODES["width_collapse"]
    except StochNHError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CODES["tolerance"]


if __name__ == "__main__":
    sys.exit(main())
