"""Command-line driver: JSON config in, method/energy report out.

``dvr-qchem run --config cfg.json --methods hf,casci,jwci,dmrg --format json``
``dvr-qchem selftest``

Exit codes: 0 success, 2 config error, 3 convergence failure,
4 self-test mismatch.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from ._validation import ContractError
from .active_space import build_active_hamiltonian
from .detci import solve_casci
from .dmrg import chain_terms, dmrg_run
from .dvr import build_sinc_dvr, build_sine_dvr
from .jwci import JW_MAX_SITES, build_jw_hamiltonian, solve_jwci
from .model import ANGSTROM_TO_BOHR, ChainGeometry, IntegralSet, build_integrals
from .numerics import ConvergenceError
from .scf import AufbauDegeneracyError, scf_solve

__all__ = [
    "ConfigError",
    "RunConfig",
    "CasciSpec",
    "DmrgSpec",
    "load_config",
    "parse_config",
    "run",
    "render",
    "selftest",
    "main",
    "METHODS",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_CONVERGENCE",
    "EXIT_SELFTEST",
]

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_SELFTEST = 0, 2, 3, 4
METHODS = ("hf", "casci", "jwci", "dmrg")
_UNIT_SCALE = {"angstrom": ANGSTROM_TO_BOHR, "bohr": 1.0}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class CasciSpec:
    n_active_orb: int
    n_active_elec: int
    roots: int = 1


@dataclass(frozen=True)
class DmrgSpec:
    d_schedule: tuple
    sweeps: int = 4
    mu: float = 1.0
    lanczos_tol: float = 1e-9


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; all lengths in bohr."""

    basis_kind: str
    basis_low: float
    basis_high: float
    basis_n: int
    positions: tuple
    charges: tuple
    electrons: int
    casci: tuple = ()
    dmrg: tuple = ()
    scf: dict = field(default_factory=dict)
    output_format: str = "table"
    output_path: Optional[str] = None
    digest: str = ""
    source: dict = field(default_factory=dict, repr=False)

    def basis(self):
        if self.basis_kind == "sine":
            return build_sine_dvr(self.basis_low, self.basis_high, self.basis_n)
        dx = (self.basis_high - self.basis_low) / max(self.basis_n - 1, 1)
        return build_sinc_dvr(self.basis_low, dx, self.basis_n)

    def geometry(self) -> ChainGeometry:
        return ChainGeometry(np.array(self.positions), np.array(self.charges), self.electrons)

    def integrals(self) -> IntegralSet:
        return build_integrals(self.basis(), self.geometry())


# ---------------------------------------------------------------- config


def _get(obj: dict, key: str, where: str, kind=None, required=True, default=None):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    if key not in obj:
        if required:
            raise ConfigError(f"{where}.{key}: missing required key")
        return default
    val = obj[key]
    if kind is not None:
        if isinstance(val, bool) or not isinstance(val, kind):
            raise ConfigError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {val!r}")
    return val


def _positive_int(obj, key, where, required=True, default=None, allow_zero=False):
    val = _get(obj, key, where, int, required, default)
    if val is None:
        return val
    if isinstance(val, bool) or val < 0 or (val == 0 and not allow_zero):
        raise ConfigError(f"{where}.{key}: must be a {'non-negative' if allow_zero else 'positive'} integer")
    return val


def _units(obj, where) -> float:
    unit = _get(obj, "units", where, str)
    if unit.lower() not in _UNIT_SCALE:
        raise ConfigError(f"{where}.units: must be one of {sorted(_UNIT_SCALE)}, got {unit!r}")
    return _UNIT_SCALE[unit.lower()]


def _as_list(val):
    if val is None:
        return []
    return val if isinstance(val, list) else [val]


def parse_config(doc: dict) -> RunConfig:
    """Validate a config document and convert lengths to bohr."""
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a JSON object")
    known = {"basis", "geometry", "electrons", "scf", "casci", "dmrg", "output", "description"}
    extra = sorted(set(doc) - known)
    if extra:
        raise ConfigError(f"{extra[0]}: unknown top-level key")

    b = _get(doc, "basis", "config", dict)
    kind = _get(b, "kind", "basis", str)
    if kind not in ("sine", "sinc"):
        raise ConfigError(f"basis.kind: must be 'sine' or 'sinc', got {kind!r}")
    scale = _units(b, "basis")
    low = float(_get(b, "range_low", "basis", (int, float))) * scale
    high = float(_get(b, "range_high", "basis", (int, float))) * scale
    if not high > low:
        raise ConfigError("basis.range_high: must exceed range_low")
    n = _positive_int(b, "n", "basis")

    g = _get(doc, "geometry", "config", dict)
    gscale = _units(g, "geometry")
    pos = _get(g, "positions", "geometry", list)
    chg = _get(g, "charges", "geometry", list)
    if len(pos) != len(chg):
        raise ConfigError("geometry.charges: length differs from geometry.positions")
    if not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in pos):
        raise ConfigError("geometry.positions: entries must be numbers")
    if not all(isinstance(c, int) and not isinstance(c, bool) and c > 0 for c in chg):
        raise ConfigError("geometry.charges: entries must be positive integers")
    positions = tuple(float(p) * gscale for p in pos)

    electrons = _positive_int(doc, "electrons", "config", allow_zero=True)
    if electrons % 2:
        raise ConfigError("electrons: must be even for the closed-shell reference")
    if electrons > 2 * n:
        raise ConfigError("electrons: more electrons than spin orbitals")

    casci = []
    for i, c in enumerate(_as_list(doc.get("casci"))):
        where = f"casci[{i}]"
        n_orb = _positive_int(c, "n_active_orb", where)
        n_el = _positive_int(c, "n_active_elec", where, allow_zero=True)
        roots = _positive_int(c, "roots", where, required=False, default=1)
        if n_el > electrons:
            raise ConfigError(f"{where}.n_active_elec: exceeds electrons ({electrons})")
        if (electrons - n_el) % 2:
            raise ConfigError(f"{where}.n_active_elec: frozen-core electron count must be even")
        if n_el > 2 * n_orb:
            raise ConfigError(f"{where}.n_active_elec: does not fit in {n_orb} orbitals")
        if (electrons - n_el) // 2 + n_orb > n:
            raise ConfigError(f"{where}.n_active_orb: active window exceeds the basis size {n}")
        casci.append(CasciSpec(n_orb, n_el, roots))

    dmrg = []
    for i, d in enumerate(_as_list(doc.get("dmrg"))):
        where = f"dmrg[{i}]"
        sched = _get(d, "d_schedule", where, (int, list))
        sched = _as_list(sched)
        if not sched or not all(isinstance(x, int) and not isinstance(x, bool) and x > 0 for x in sched):
            raise ConfigError(f"{where}.d_schedule: must be a positive integer or a list of them")
        if any(y < x for x, y in zip(sched, sched[1:])):
            raise ConfigError(f"{where}.d_schedule: must be non-decreasing")
        sweeps = _positive_int(d, "sweeps", where, required=False, default=4)
        mu = float(_get(d, "mu", where, (int, float), required=False, default=1.0))
        if mu < 0:
            raise ConfigError(f"{where}.mu: must be non-negative")
        tol = float(_get(d, "lanczos_tol", where, (int, float), required=False, default=1e-9))
        if not tol > 0:
            raise ConfigError(f"{where}.lanczos_tol: must be positive")
        if n < 4 or n % 2:
            raise ConfigError(f"{where}: DMRG needs an even basis size >= 4, got basis.n = {n}")
        dmrg.append(DmrgSpec(tuple(sched), sweeps, mu, tol))

    scf_opts = dict(_get(doc, "scf", "config", dict, required=False, default={}))
    allowed = {"max_iter", "e_tol", "comm_tol", "mixing", "diis"}
    bad = sorted(set(scf_opts) - allowed)
    if bad:
        raise ConfigError(f"scf.{bad[0]}: unknown option")

    out = _get(doc, "output", "config", dict, required=False, default={})
    fmt = _get(out, "format", "output", str, required=False, default="table")
    if fmt not in ("table", "json", "csv"):
        raise ConfigError(f"output.format: must be table, json or csv, got {fmt!r}")
    path = _get(out, "path", "output", (str, type(None)), required=False, default=None)

    try:
        ChainGeometry(np.array(positions), np.array(chg), electrons)
    except ContractError as exc:
        raise ConfigError(f"geometry: {exc}") from None

    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return RunConfig(
        basis_kind=kind,
        basis_low=low,
        basis_high=high,
        basis_n=n,
        positions=positions,
        charges=tuple(chg),
        electrons=electrons,
        casci=tuple(casci),
        dmrg=tuple(dmrg),
        scf=scf_opts,
        output_format=fmt,
        output_path=path,
        digest=hashlib.sha256(canonical.encode()).hexdigest(),
        source=doc,
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return parse_config(doc)


# ------------------------------------------------------------------- run


def _row(method, label, params, energy, diagnostics, error=None):
    row = {
        "method": method,
        "label": label,
        "params": params,
        "energy_hartree": None if energy is None else float(energy),
        "diagnostics": diagnostics,
    }
    if error is not None:
        row["error"] = error
    return row


def _floats(a):
    return [float(x) for x in np.atleast_1d(a)]


def _run_hf(cfg, ints):
    res = scf_solve(ints, cfg.electrons, **cfg.scf)
    comm = res.fock @ res.density - res.density @ res.fock
    diag = {
        "iterations": res.iterations,
        "converged": bool(res.converged),
        "commutator_max": float(np.max(np.abs(comm))) if comm.size else 0.0,
        "homo": float(res.orbital_energies[res.n_occ - 1]) if res.n_occ else None,
        "lumo": float(res.orbital_energies[res.n_occ]) if res.n_occ < ints.n else None,
    }
    row = _row("hf", "HF", {"n_electrons": cfg.electrons, **cfg.scf}, res.e_hf, diag)
    if not res.converged:
        raise _StageFailure(row, f"SCF did not converge in {res.iterations} iterations")
    return res, row


def _run_casci(spec, scf, ints):
    ash = build_active_hamiltonian(scf, ints, spec.n_active_orb, spec.n_active_elec)
    res = solve_casci(ash, n_roots=spec.roots)
    diag = {
        "energies": _floats(res.energies),
        "spin_square": _floats(res.spin_square),
        "n_determinants": res.basis.size,
        "correlation_energy": float(res.energies[0] - scf.e_hf),
    }
    params = {"n_active_orb": spec.n_active_orb, "n_active_elec": spec.n_active_elec, "roots": spec.roots}
    label = f"CASCI({spec.n_active_orb},{spec.n_active_elec})"
    return _row("casci", label, params, res.energies[0], diag)


def _run_jwci(spec, scf, ints):
    params = {"n_active_orb": spec.n_active_orb, "n_active_elec": spec.n_active_elec, "roots": spec.roots}
    label = f"JWCI({spec.n_active_orb},{spec.n_active_elec})"
    if spec.n_active_orb > JW_MAX_SITES:
        reason = f"4^{spec.n_active_orb} states exceed the {JW_MAX_SITES}-site limit"
        return _row("jwci", label, params, None, {"skipped": reason})
    ash = build_active_hamiltonian(scf, ints, spec.n_active_orb, spec.n_active_elec)
    res = solve_jwci(build_jw_hamiltonian(ash), spec.roots, n_electrons=ash.n_elec)
    diag = {
        "energies": _floats(res.energies),
        "n_expectation": _floats(res.n_expectation),
        "sz_expectation": _floats(res.sz_expectation),
        "hilbert_dim": 4**spec.n_active_orb,
    }
    return _row("jwci", label, params, res.energies[0], diag)


def _run_dmrg(spec, cfg, ints):
    terms = chain_terms(ints, (spec.mu, cfg.electrons) if spec.mu else None)
    res = dmrg_run(terms, spec.d_schedule, spec.sweeps, spec.lanczos_tol)
    diag = {
        "sweep_energies": _floats(res.sweep_energies),
        "warmup_energies": _floats(res.warmup_energies),
        "max_truncation_error": float(np.max(res.truncation_errors)) if res.truncation_errors.size else 0.0,
        "n_expectation": float(res.n_expectation),
        "n_variance": float(res.n_variance),
        "n_flagged": bool(res.n_flagged),
    }
    params = {"d_schedule": list(spec.d_schedule), "sweeps": spec.sweeps, "mu": spec.mu,
              "lanczos_tol": spec.lanczos_tol}
    return _row("dmrg", f"DMRG(D={spec.d_schedule[-1]})", params, res.energy, diag)


class _StageFailure(Exception):
    def __init__(self, row, message):
        super().__init__(message)
        self.row = row


def _guarded(stage, fn, failures):
    try:
        return fn()
    except _StageFailure as exc:
        failures.append((stage, str(exc)))
        exc.row["error"] = str(exc)
        return exc.row
    except (ConvergenceError, AufbauDegeneracyError, ContractError) as exc:
        failures.append((stage, str(exc)))
        return _row(stage, stage.upper(), {}, None, {}, error=str(exc))


def run(cfg: RunConfig, methods=METHODS, parallel: bool = False) -> tuple[dict, list]:
    """Execute ``methods`` on ``cfg``.

    Returns the report and a list of ``(stage, message)`` failures.  Rows of
    stages that ran are always present, in the order hf, casci, jwci, dmrg.
    """
    methods = [m for m in METHODS if m in set(methods)]
    ints = cfg.integrals() if methods else None
    failures: list = []

    def hf_chain():
        rows = []
        if not {"hf", "casci", "jwci"} & set(methods):
            return rows
        scf_box = {}

        def do_hf():
            res, row = _run_hf(cfg, ints)
            scf_box["res"] = res
            return row

        hf_row = _guarded("hf", do_hf, failures)
        if "hf" in methods:
            rows.append(hf_row)
        scf = scf_box.get("res")
        for name, fn in (("casci", _run_casci), ("jwci", _run_jwci)):
            if name not in methods:
                continue
            for spec in cfg.casci:
                if scf is None:
                    failures.append((name, "skipped: Hartree-Fock stage failed"))
                    continue
                rows.append(_guarded(name, lambda s=spec, f=fn: f(s, scf, ints), failures))
        return rows

    def dmrg_chain():
        if "dmrg" not in methods:
            return []
        return [_guarded("dmrg", lambda s=spec: _run_dmrg(s, cfg, ints), failures) for spec in cfg.dmrg]

    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            a, b = pool.submit(hf_chain), pool.submit(dmrg_chain)
            rows = a.result() + b.result()
    else:
        rows = hf_chain() + dmrg_chain()

    report = {
        "config_digest": cfg.digest,
        "rows": rows,
        "versions": _versions(),
    }
    return report, failures


def _versions() -> dict:
    from . import __version__

    return {
        "dvr_qchem": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


# ---------------------------------------------------------------- output


def _table(report) -> str:
    lines = [f"{'method':<16}{'energy / hartree':>18}"]
    for r in report["rows"]:
        e = r["energy_hartree"]
        val = f"{e:18.6f}" if e is not None else f"{'n/a':>18}"
        note = ""
        if "error" in r:
            note = f"  [{r['error']}]"
        elif "skipped" in r["diagnostics"]:
            note = f"  [skipped: {r['diagnostics']['skipped']}]"
        lines.append(f"{r['label']:<16}{val}{note}")
    return "\n".join(lines) + "\n"


def _csv(report) -> str:
    flat = []
    for r in report["rows"]:
        rec = {"method": r["method"], "label": r["label"], "energy_hartree": r["energy_hartree"]}
        for k, v in r["params"].items():
            rec[f"param_{k}"] = json.dumps(v) if isinstance(v, (list, dict)) else v
        for k, v in r["diagnostics"].items():
            rec[f"diag_{k}"] = json.dumps(v) if isinstance(v, (list, dict)) else v
        if "error" in r:
            rec["error"] = r["error"]
        flat.append(rec)
    keys = ["method", "label", "energy_hartree"]
    for rec in flat:
        keys += [k for k in rec if k not in keys]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    writer.writerows(flat)
    return buf.getvalue()


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return _csv(report)
    return _table(report)


# -------------------------------------------------------------- selftest


def _random_chain(rng, n_sites):
    """Small random sine-DVR chain: 2 electrons, one or two unit charges."""
    half = rng.uniform(2.0, 4.0)
    basis = build_sine_dvr(-half, half, n_sites)
    n_nuc = int(rng.integers(1, 3))
    pos = np.sort(rng.uniform(-0.6 * half, 0.6 * half, n_nuc))
    if n_nuc == 2 and pos[1] - pos[0] < 0.3:
        pos[1] = pos[0] + 0.3
    return build_integrals(basis, ChainGeometry(pos, np.ones(n_nuc, dtype=int), 2))


def selftest(n_instances: int = 6, seed: int = 7, tol: float = 1e-8, stream=None) -> bool:
    """Small-instance oracle suite: determinant CI, JW diagonalization and
    untruncated DMRG must agree, and the sine DVR must reproduce box levels."""
    stream = stream or sys.stdout
    ok = True
    rng = np.random.default_rng(seed)
    for i in range(n_instances):
        n = (4, 6)[i % 2]
        ints = _random_chain(rng, n)
        scf = scf_solve(ints, 2, diis=True)
        ash = build_active_hamiltonian(scf, ints, n, 2)
        e_ci = solve_casci(ash).energies[0]
        e_jw = solve_jwci(build_jw_hamiltonian(ash), n_electrons=2).energies[0]
        e_dm = dmrg_run(chain_terms(ints, (1.0, 2)), (4 ** (n // 2),), 2).energy
        spread = max(e_ci, e_jw, e_dm) - min(e_ci, e_jw, e_dm)
        good = spread <= tol
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} oracle instance {i} (N={n}): "
              f"detci {e_ci:.10f} jwci {e_jw:.10f} dmrg {e_dm:.10f} spread {spread:.1e}", file=stream)

    from .dvr import kinetic_matrix

    basis = build_sine_dvr(0.0, np.pi, 64)
    levels = np.linalg.eigvalsh(kinetic_matrix(basis))[:5]
    exact = 0.5 * np.arange(1, 6) ** 2
    rel = float(np.max(np.abs(levels - exact) / exact))
    good = rel <= 1e-6
    ok &= good
    print(f"{'PASS' if good else 'FAIL'} sine DVR box levels k=1..5: max relative error {rel:.1e}", file=stream)
    return bool(ok)


# ------------------------------------------------------------------ main


def _parse_methods(text: str):
    if text is None:
        return list(METHODS)
    parts = [p.strip().lower() for p in text.split(",") if p.strip()]
    if parts == ["all"]:
        return list(METHODS)
    bad = [p for p in parts if p not in METHODS]
    if bad:
        raise ConfigError(f"--methods: unknown method {bad[0]!r} (choose from {', '.join(METHODS)})")
    return parts


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dvr-qchem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run methods on a JSON config")
    r.add_argument("--config", required=True, help="path to the JSON config")
    r.add_argument("--methods", default=None,
                   help="comma-separated subset of hf,casci,jwci,dmrg or 'all'; empty validates only")
    r.add_argument("--out", default=None, help="report path (default: config output.path or stdout)")
    r.add_argument("--format", choices=("table", "json", "csv"), default=None)
    r.add_argument("--parallel", action="store_true",
                   help="run DMRG concurrently with the HF/CI chain")
    s = sub.add_parser("selftest", help="run the small-instance oracle suite")
    s.add_argument("--instances", type=int, default=6)
    s.add_argument("--seed", type=int, default=7)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selftest":
        return EXIT_OK if selftest(args.instances, args.seed) else EXIT_SELFTEST

    try:
        cfg = load_config(args.config)
        methods = _parse_methods(args.methods)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    report, failures = run(cfg, methods, parallel=args.parallel)
    fmt = args.format or cfg.output_format
    text = render(report, fmt)
    out = args.out or cfg.output_path
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    for stage, msg in failures:
        print(f"[{stage}] {msg}", file=sys.stderr)
    return EXIT_CONVERGENCE if failures else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
