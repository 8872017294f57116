"""Command-line driver: coupled runs, the acceptance suite and one-shot reports.

Configuration files are INI style:

    [grid]      n1p, n1m, n2, n3
    [time]      steps (or T), dt (default: cfl_number times the CFL step), cfl_number
    [physics]   gamma, delta0, eps0
    [elliptic]  rtol
    [scenario]  name = equilibrium | perturbed, delta, phi_amp, seed
    [current]   kind = equilibrium | file, path
    [output]    dir, dump_every
    [regularized] eps   (optional)

PVLAB_THREADS caps the BLAS/OpenMP worker threads; it is applied before
numpy is first imported when the driver runs as ``python -m pvlab``.
"""

from __future__ import annotations

import os

_threads = os.environ.get("PVLAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import configparser  # noqa: E402
import json  # noqa: E402
import sys  # noqa: E402
from dataclasses import asdict, dataclass  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from .exceptions import ConfigError, CflViolated, PvlabError  # noqa: E402

EXIT_IO = 3
CSV_FIELDS = ("step", "t", "energy", "div_h_max", "HN_trace_max", "margin_min",
              "front_Hs_norms", "elliptic_residuals")
SCENARIOS = ("equilibrium", "perturbed")


@dataclass
class RunConfig:
    n1p: int = 17
    n1m: int = 17
    n2: int = 16
    n3: int = 16
    steps: int = 100
    T: float = 0.0
    dt: float = 0.0
    cfl_number: float = 0.5
    gamma: float = 5.0 / 3.0
    delta0: float = 0.5
    eps0: float = 0.1
    rtol: float = 1e-10
    scenario: str = "equilibrium"
    delta: float = 0.05
    phi_amp: float = 0.0
    seed: int = 0
    current: str = "equilibrium"
    current_path: str = ""
    out: str = "pvlab_out"
    dump_every: int = 0
    eps: float = 0.0

    def validate(self) -> "RunConfig":
        for k, lo in (("n1p", 5), ("n1m", 5), ("n2", 4), ("n3", 4)):
            if getattr(self, k) < lo:
                raise ConfigError(f"{k} must be at least {lo}, got {getattr(self, k)}")
        for k in ("n2", "n3"):
            if getattr(self, k) % 2:
                raise ConfigError(f"{k} must be even, got {getattr(self, k)}")
        for k in ("cfl_number", "gamma", "delta0", "eps0", "rtol"):
            if not getattr(self, k) > 0:
                raise ConfigError(f"{k} must be positive, got {getattr(self, k)}")
        if self.gamma <= 1:
            raise ConfigError("gamma must exceed 1")
        for k in ("steps", "T", "dt", "dump_every", "eps", "delta", "phi_amp"):
            if getattr(self, k) < 0:
                raise ConfigError(f"{k} must be nonnegative, got {getattr(self, k)}")
        if self.steps == 0 and self.T == 0:
            raise ConfigError("give either steps or T")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.current not in ("equilibrium", "file"):
            raise ConfigError(f"unknown current kind {self.current!r}")
        if self.current == "file" and not self.current_path:
            raise ConfigError("current kind 'file' needs a path")
        return self


_KEYS = {
    "grid": ("n1p", "n1m", "n2", "n3"),
    "time": ("steps", "T", "dt", "cfl_number"),
    "physics": ("gamma", "delta0", "eps0"),
    "elliptic": ("rtol",),
    "scenario": ("name", "delta", "phi_amp", "seed"),
    "current": ("kind", "path"),
    "output": ("dir", "dump_every"),
    "regularized": ("eps",),
}
_ALIAS = {("scenario", "name"): "scenario", ("current", "kind"): "current",
          ("current", "path"): "current_path", ("output", "dir"): "out"}


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    values = {}
    if path:
        if not os.path.exists(path):
            raise FileNotFoundError(f"config file not found: {path}")
        cp = configparser.ConfigParser()
        try:
            cp.read(path)
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}") from e
        for sec in cp.sections():
            if sec not in _KEYS:
                raise ConfigError(f"{path}: unknown section [{sec}]")
            for key, raw in cp.items(sec):
                if key not in _KEYS[sec]:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{sec}]")
                values[_ALIAS.get((sec, key), key)] = raw
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for name, raw in values.items():
        typ = type(getattr(cfg, name))
        try:
            setattr(cfg, name, typ(raw))
        except ValueError as e:
            raise ConfigError(f"bad value for {name}: {raw!r}") from e
    return cfg.validate()


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, data: bytes):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_dump(outdir: Path, name: str, fields: dict, meta: dict):
    """Little-endian float64, row-major (x1 slowest), plus a JSON sidecar."""
    names = sorted(fields)
    arrs = [np.ascontiguousarray(fields[k], dtype="<f8") for k in names]
    _atomic_write(outdir / f"{name}.bin", b"".join(a.tobytes(order="C") for a in arrs))
    side = dict(meta)
    side["fields"] = [{"name": k, "shape": list(a.shape)} for k, a in zip(names, arrs)]
    side["dtype"] = "<f8"
    side["order"] = "C"
    _atomic_write(outdir / f"{name}.json", (json.dumps(side, sort_keys=True, indent=1) + "\n").encode())


def read_dump(path_bin: str) -> dict:
    side = json.loads(Path(path_bin).with_suffix(".json").read_text())
    raw = np.fromfile(path_bin, dtype="<f8")
    out, i = {}, 0
    for f in side["fields"]:
        n = int(np.prod(f["shape"]))
        out[f["name"]] = raw[i: i + n].reshape(f["shape"])
        i += n
    return out


def _fmt(x) -> str:
    return repr(float(x))


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n").encode()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _build(cfg: RunConfig):
    from .geometry import SlabGrid, TorusGrid
    from .interface import CoupledConfig, SurfaceCurrent
    from .plasma import Eos
    from .scenarios import equilibrium_current, equilibrium_state, perturbed_state

    slab, tor = SlabGrid(cfg.n1p, cfg.n1m), TorusGrid(cfg.n2, cfg.n3)
    if cfg.current == "file":
        jext = SurfaceCurrent.from_file(cfg.current_path)
        if jext.values.shape[2:] != (cfg.n2, cfg.n3):
            raise ConfigError(f"{cfg.current_path}: current shape {jext.values.shape[2:]} "
                              f"does not match the torus grid {(cfg.n2, cfg.n3)}")
    else:
        jext = equilibrium_current(tor)
    cc = CoupledConfig(slab=slab, torus=tor, jext=jext, eos=Eos(cfg.gamma), delta0=cfg.delta0,
                       eps0=cfg.eps0, cfl_number=1.0, rtol=cfg.rtol)
    if cfg.scenario == "equilibrium":
        st = equilibrium_state(cc, cfg.phi_amp)
    else:
        st = perturbed_state(cc, cfg.delta)
    return cc, st


def run_simulation(cfg: RunConfig) -> dict:
    from .interface import coupled_cfl, coupled_step

    cc, st = _build(cfg)
    outdir = Path(cfg.out)
    cfl = coupled_cfl(st, cc)
    dt = cfg.dt if cfg.dt > 0 else cfg.cfl_number * cfl
    if dt > cfl * (1 + 1e-12):
        raise CflViolated(f"dt = {dt:.4g} exceeds the CFL cap {cfl:.4g}")
    steps = cfg.steps if cfg.steps > 0 else int(np.ceil(cfg.T / dt))
    if cfg.steps == 0:
        dt = cfg.T / steps
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {"n1p": cfg.n1p, "n1m": cfg.n1m, "n2": cfg.n2, "n3": cfg.n3,
            "x1p": [0.0, 1.0], "x1m": [-1.0, 0.0]}
    rows = []
    for k in range(1, steps + 1):
        st, d = coupled_step(st, dt, cc)
        rows.append((k, d))
        if cfg.dump_every and k % cfg.dump_every == 0:
            write_dump(outdir, f"fields_{k:06d}", {"U": st.U, "Hcal": st.Hcal, "phi": st.phi},
                       dict(meta, t=st.t, step=k))
    lines = [",".join(CSV_FIELDS)]
    for k, d in rows:
        lines.append(",".join([str(k)] + [_fmt(d[f]) for f in CSV_FIELDS[1:]]))
    _atomic_write(outdir / "diagnostics.csv", ("\n".join(lines) + "\n").encode())
    for f in CSV_FIELDS[2:]:
        txt = "".join(f"{_fmt(d['t'])} {_fmt(d[f])}\n" for _, d in rows)
        _atomic_write(outdir / f"{f}.dat", txt.encode())
    write_dump(outdir, "fields_final", {"U": st.U, "Hcal": st.Hcal, "phi": st.phi},
               dict(meta, t=st.t, step=steps))
    summary = {"steps": steps, "dt": dt, "t_final": st.t, "config": asdict(cfg)}
    if rows:
        first, last = rows[0][1], rows[-1][1]
        summary["drift"] = {f: abs(last[f] - first[f]) for f in CSV_FIELDS[2:]}
    if cfg.eps > 0:
        from .vacuum_reg import epsilon_sweep
        sw = epsilon_sweep(cc.slab, cc.torus, cc.jext(st.t), st.phi, eps_list=(cfg.eps,))
        summary["regularized"] = sw.as_dict()
    _atomic_write(outdir / "summary.json", _json_bytes(summary))
    return summary


def verify(elliptic_only: bool = False, out: str | None = None) -> tuple[list, bytes]:
    from .acceptance import ELLIPTIC, run_suite

    results = run_suite(ELLIPTIC if elliptic_only else None)
    report = {"criteria": [r.as_dict() for r in results],
              "passed": sum(r.passed for r in results), "total": len(results)}
    data = _json_bytes(report)
    if out:
        _atomic_write(Path(out), data)
    return results, data


def solve_vacuum(path: str, out: str | None = None) -> dict:
    """One-shot solve from an .npz holding g3, g5 and optionally chi, Xi, phi."""
    from .geometry import SlabGrid, TorusGrid, front_metric
    from .vacuum_elliptic import DivCurlData, solve_divcurl

    if not os.path.exists(path):
        raise FileNotFoundError(f"vacuum data file not found: {path}")
    with np.load(path) as f:
        d = {k: f[k] for k in f.files}
    if "g3" not in d or "g5" not in d:
        raise ConfigError(f"{path}: needs arrays g3 and g5")
    n2, n3 = d["g3"].shape
    n1m = int(d["chi"].shape[1]) if "chi" in d else int(d.get("n1m", 17))
    chi = d.get("chi", np.zeros((3, n1m, n2, n3)))
    Xi = d.get("Xi", np.zeros((n1m, n2, n3)))
    phi = d.get("phi", np.zeros((n2, n3)))
    slab, tor = SlabGrid(n1m, n1m), TorusGrid(n2, n3)
    m = front_metric(phi, slab, tor).vacuum
    sol = solve_divcurl(DivCurlData(chi, Xi, d["g3"], d["g5"]), m)
    rep = {"iterations": sol.iterations, "residuals": sol.residuals, "n1m": n1m, "n2": n2, "n3": n3}
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        write_dump(outdir, "vacuum", {"Hcal": sol.Hcal, "Hfrak": sol.Hfrak},
                   {"n1m": n1m, "n2": n2, "n3": n3, "x1m": [-1.0, 0.0]})
        _atomic_write(outdir / "vacuum_report.json", _json_bytes(rep))
    return rep


def cascade_report(cfg: RunConfig, depth: int = 2) -> dict:
    from .init_compat import InitialDataBundle, check_compat_order, derivative_cascade

    cc, st = _build(cfg)
    b = InitialDataBundle(st.U, st.phi, cc.jext, cc.slab, cc.torus, cc.eos)
    derivative_cascade(b, depth)
    rep = check_compat_order(b, depth + 1).as_dict()
    rep["jet_max"] = [float(np.max(np.abs(u))) for u in b.U]
    return rep


def linearize_report() -> dict:
    from .acceptance import frechet_setup
    from .linearized import frechet_verify

    basic, h = frechet_setup()
    return frechet_verify(basic, h).as_dict()


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pvlab", description="Plasma-vacuum interface laboratory.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def config_args(sp):
        sp.add_argument("--config", help="INI configuration file")
        for name, f in RunConfig.__dataclass_fields__.items():
            sp.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None,
                            help=f"override {name} (default {f.default!r})")

    config_args(sub.add_parser("run", help="coupled run with diagnostics and field dumps"))
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--elliptic-only", action="store_true", help="only the vacuum criteria")
    v.add_argument("--report", help="write the JSON report here")
    s = sub.add_parser("solve-vacuum", help="one-shot elliptic solve from an .npz data file")
    s.add_argument("data")
    s.add_argument("--out", help="directory for the field dump and report")
    c = sub.add_parser("cascade", help="initial-data compatibility report")
    config_args(c)
    c.add_argument("--depth", type=int, default=2)
    sub.add_parser("linearize-check", help="Frechet derivative report")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd in ("run", "cascade"):
            over = {k: getattr(args, k) for k in RunConfig.__dataclass_fields__}
            cfg = load_config(args.config, over)
        if args.cmd == "run":
            rep = run_simulation(cfg)
            print(f"completed {rep['steps']} steps, t = {rep['t_final']:.6g}; output in {cfg.out}")
        elif args.cmd == "verify":
            results, data = verify(args.elliptic_only, args.report)
            for r in results:
                print(r.line())
            if not args.report:
                sys.stdout.write(data.decode())
        elif args.cmd == "solve-vacuum":
            sys.stdout.write(_json_bytes(solve_vacuum(args.data, args.out)).decode())
        elif args.cmd == "cascade":
            sys.stdout.write(_json_bytes(cascade_report(cfg, args.depth)).decode())
        elif args.cmd == "linearize-check":
            sys.stdout.write(_json_bytes(linearize_report()).decode())
    except (FileNotFoundError, PermissionError, IsADirectoryError) as e:
        print(f"pvlab: IO error: {e}", file=sys.stderr)
        return EXIT_IO
    except PvlabError as e:
        print(f"pvlab: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
