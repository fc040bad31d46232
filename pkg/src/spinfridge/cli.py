"""Command-line runner: manifests in, deterministic CSV/JSON artifacts out.

Five experiment kinds, one per subcommand:

* cool         -- cooling runs over a list of probe sizes (or bath
                  temperatures); emits fig2a.csv (efficiency per step) and
                  fig3.csv (distance to the pseudo-thermal target).
* sweep        -- one protocol config swept over dephasing rates (fig4.csv)
                  or partial-swap strengths (fig5.csv), grid points run in
                  parallel, rows ordered by grid value. With the default
                  waiting policy the per-step waits are optimized once on
                  the noise-free configuration and replayed identically on
                  every grid point, so the sweep compares like with like.
* thermometry  -- repeated finite-shot temperature estimates of the
                  pseudo-thermalized probe; emits thermometry.csv.
* nv-coupling  -- dipolar coefficient/coupling tables for listed geometry
                  pairs (nv_couplings.csv) plus an exact chain-yield report.
* verify       -- runs the four randomized structural oracles and writes
                  their JSON verdicts.

Every artifact embeds the package version, the manifest's SHA-256, and the
seed, so identical (manifest, seed, version) triples produce byte-identical
files. Exit codes: 0 success, 1 oracle/experiment failure, 2 manifest or
configuration error, 3 integration failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import logging
import math
import os
import sys
from decimal import Decimal
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import SwapSpec
from .errors import IntegrationError, ManifestError, SpinFridgeError
from .integrate import IntegratorConfig
from .nv import (
    DIAMOND_BOND_AXES,
    DipolarPair,
    chain_yield,
    dipolar_coefficients,
    nv_nv_effective_hamiltonian,
    nv_p1_coupling,
)
from .oracles import run_all_oracles
from .protocol import (ProtocolConfig, estimate_temperature,
                       ideal_waiting_schedule, run_protocol)

log = logging.getLogger("spinfridge")

SCHEMA_VERSION = 1
KINDS = ("cool", "thermometry", "sweep", "nv-coupling", "verify")

_RAD_PER_KHZ = 2.0 * math.pi * 1e3


def _fmt(x: float) -> str:
    """Canonical 12-significant-digit float serialization for CSV cells."""
    return f"{float(x):.11e}"


def _khz(rad_per_s: float) -> float:
    return rad_per_s / _RAD_PER_KHZ


# --------------------------------------------------------------------------
# manifest handling
# --------------------------------------------------------------------------

class Manifest:
    """Parsed and validated run manifest plus provenance for headers."""

    def __init__(self, data: dict, sha256: str, path: str):
        self.data = data
        self.sha256 = sha256
        self.path = path

    @property
    def kind(self) -> str:
        return self.data["kind"]

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))

    @property
    def out_dir(self) -> str | None:
        return self.data.get("out")

    def config(self) -> dict:
        return dict(self.data.get("config", {}))


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    try:
        data = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(data, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ManifestError(
            f"{path}: field 'schema_version' is {version!r}; this tool "
            f"(v{__version__}) requires {SCHEMA_VERSION}")
    kind = data.get("kind")
    if kind not in KINDS:
        raise ManifestError(
            f"{path}: field 'kind' is {kind!r}; expected one of {KINDS}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0 \
            or seed >= 2 ** 64:
        raise ManifestError(
            f"{path}: field 'seed' must be an unsigned 64-bit integer, "
            f"got {seed!r}")
    known = {"schema_version", "kind", "seed", "out", "config"}
    extra = sorted(set(data) - known)
    if extra:
        raise ManifestError(f"{path}: unknown top-level fields {extra}")
    return Manifest(data, digest, str(path))


def _take(cfg: dict, field: str, default):
    return cfg.pop(field, default)


def _reject_unknown(cfg: dict, where: str):
    if cfg:
        raise ManifestError(
            f"unknown fields {sorted(cfg)} in manifest section '{where}'")


def _swap_from_manifest(entry) -> SwapSpec:
    if entry is None:
        return SwapSpec.perfect()
    if not isinstance(entry, dict):
        raise ManifestError("'swap' must be an object")
    entry = dict(entry)
    mode = _take(entry, "mode", "perfect")
    try:
        if mode == "perfect":
            _reject_unknown(entry, "swap")
            return SwapSpec.perfect()
        if mode == "partial":
            strength = _take(entry, "interaction_strength", None)
            rate = _take(entry, "window_dephasing_rate", None)
            dephase_qubit = bool(_take(entry, "dephase_qubit", False))
            _reject_unknown(entry, "swap")
            if strength is None:
                raise ManifestError(
                    "swap mode 'partial' requires 'interaction_strength'")
            return SwapSpec.partial(
                float(strength),
                window_dephasing_rate=None if rate is None else float(rate),
                dephase_qubit=dephase_qubit)
    except SpinFridgeError as exc:
        raise ManifestError(f"invalid 'swap' section: {exc}") from exc
    raise ManifestError(f"unknown swap mode {mode!r}")


def _integrator_from_manifest(entry) -> IntegratorConfig:
    if entry is None:
        return IntegratorConfig()
    if not isinstance(entry, dict):
        raise ManifestError("'integrator' must be an object")
    entry = dict(entry)
    kwargs = {}
    for field in ("rel_tol", "abs_tol", "initial_step", "max_step",
                  "dense_grid_spacing"):
        if field in entry:
            kwargs[field] = float(entry.pop(field))
    _reject_unknown(entry, "integrator")
    try:
        return IntegratorConfig(**kwargs)
    except SpinFridgeError as exc:
        raise ManifestError(f"invalid 'integrator' section: {exc}") from exc


def _protocol_config(cfg: dict, where: str = "config") -> ProtocolConfig:
    cfg = dict(cfg)
    kwargs = {}
    for field, cast in (
        ("probe_size", int),
        ("bath_beta_tilde", float),
        ("coupling", float),
        ("dephasing_rate", float),
        ("steps", int),
        ("waiting_policy", str),
        ("fixed_jtau", float),
        ("grid_spacing", float),
        ("optimize_with_ideal", bool),
    ):
        if field in cfg:
            kwargs[field] = cast(cfg.pop(field))
    if "probe_beta_tildes" in cfg:
        temps = cfg.pop("probe_beta_tildes")
        if not isinstance(temps, list):
            raise ManifestError("'probe_beta_tildes' must be a list")
        kwargs["probe_beta_tildes"] = tuple(
            math.inf if t in ("inf", None) else float(t) for t in temps)
    if "tau_schedule" in cfg:
        taus = cfg.pop("tau_schedule")
        if not isinstance(taus, list):
            raise ManifestError("'tau_schedule' must be a list")
        kwargs["tau_schedule"] = tuple(float(t) for t in taus)
    if "swap" in cfg:
        kwargs["swap"] = _swap_from_manifest(cfg.pop("swap"))
    if "integrator" in cfg:
        kwargs["integrator"] = _integrator_from_manifest(cfg.pop("integrator"))
    _reject_unknown(cfg, where)
    try:
        return ProtocolConfig(**kwargs)
    except TypeError as exc:
        raise ManifestError(f"incomplete '{where}' section: {exc}") from exc
    except SpinFridgeError as exc:
        raise ManifestError(f"invalid '{where}' section: {exc}") from exc


# --------------------------------------------------------------------------
# artifact writing
# --------------------------------------------------------------------------

def _header_lines(manifest: Manifest, seed: int) -> list[str]:
    return [
        f"# spinfridge {__version__}",
        f"# manifest sha256={manifest.sha256}",
        f"# seed={seed}",
    ]


def _write_csv(path: Path, manifest: Manifest, seed: int,
               columns: list[str], rows: list[list]) -> None:
    lines = _header_lines(manifest, seed)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(
            cell if isinstance(cell, str) else
            str(cell) if isinstance(cell, int) else _fmt(cell)
            for cell in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("wrote %s (%d rows)", path, len(rows))


def _write_json(path: Path, manifest: Manifest, seed: int, payload) -> None:
    document = {
        "meta": {
            "tool": f"spinfridge {__version__}",
            "manifest_sha256": manifest.sha256,
            "seed": seed,
        },
        "result": payload,
    }
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    log.info("wrote %s", path)


# --------------------------------------------------------------------------
# experiment kinds
# --------------------------------------------------------------------------

def _run_cool(manifest: Manifest, out: Path, seed: int) -> int:
    cfg = manifest.config()
    sizes = cfg.pop("probe_sizes", None)
    temps = cfg.pop("bath_beta_tildes", None)
    if (sizes is None) == (temps is None):
        raise ManifestError(
            "cool config needs exactly one of 'probe_sizes' or "
            "'bath_beta_tildes' (the swept axis)")
    if sizes is not None:
        axis = [int(n) for n in sizes]
        configs = [_protocol_config({**cfg, "probe_size": n}) for n in axis]
    else:
        axis = [float(t) for t in temps]
        configs = [_protocol_config({**cfg, "bath_beta_tilde": t})
                   for t in axis]
    if not axis:
        raise ManifestError("cool sweep axis is empty")

    eta_rows: list[list] = []
    dist_rows: list[list] = []
    for value, pcfg in sorted(zip(axis, configs), key=lambda p: p[0]):
        log.info("cool run: axis value %s", value)
        report = run_protocol(pcfg)
        for record in report.records:
            eta_rows.append([value, record.index, record.eta])
        dist_rows.append([value, 0, report.initial_distance])
        for record in report.records:
            dist_rows.append([value, record.index,
                              record.distance_to_pseudothermal])
    _write_csv(out / "fig2a.csv", manifest, seed, ["N", "k", "eta_k"],
               eta_rows)
    _write_csv(out / "fig3.csv", manifest, seed,
               ["N_or_T", "k", "trace_distance"], dist_rows)
    return 0


def _sweep_point(args: tuple) -> list[list]:
    value, cfg_dict = args
    pcfg = _protocol_config(cfg_dict, where="sweep point")
    report = run_protocol(pcfg)
    drops = report.cumulative_entropy_drop
    rows = []
    for record, total in zip(report.records, drops):
        rows.append([value, record.index, record.eta, float(total),
                     record.probe_entropy, record.distance_to_pseudothermal])
    return rows


def _run_sweep(manifest: Manifest, out: Path, seed: int, threads: int) -> int:
    cfg = manifest.config()
    gammas = cfg.pop("dephasing_rates", None)
    strengths = cfg.pop("swap_strengths", None)
    if (gammas is None) == (strengths is None):
        raise ManifestError(
            "sweep config needs exactly one of 'dephasing_rates' or "
            "'swap_strengths' (the grid)")
    if gammas is not None:
        grid = [float(g) for g in gammas]
        points = [(g, {**cfg, "dephasing_rate": g}) for g in grid]
        filename = "fig4.csv"
    else:
        grid = [float(j) for j in strengths]
        base_swap = cfg.pop("swap", {})
        if not isinstance(base_swap, dict):
            raise ManifestError("'swap' must be an object")
        points = []
        for j in grid:
            swap = {**base_swap, "mode": "partial", "interaction_strength": j}
            points.append((j, {**cfg, "swap": swap}))
        filename = "fig5.csv"
    if not grid:
        raise ManifestError("sweep grid is empty")
    if len(set(grid)) != len(grid):
        raise ManifestError("sweep grid has duplicate values")

    # A comparison sweep must wait at the same moments on every grid point,
    # so the default per-step optimization is resolved once on the
    # noise-free configuration and replayed as a fixed schedule. Manifests
    # that pin 'fixed' (or an explicit schedule) are left untouched.
    if cfg.get("waiting_policy", "optimized") == "optimized":
        base = _protocol_config(dict(cfg), where="config")
        schedule = list(ideal_waiting_schedule(base))
        for _, point in points:
            point["waiting_policy"] = "schedule"
            point["tau_schedule"] = schedule

    # Validate every point before spending any compute on the grid.
    tasks = [(value, point) for value, point in points]
    for value, point in tasks:
        _protocol_config(dict(point), where=f"sweep point {value}")

    workers = threads if threads > 0 else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(tasks)))
    results: dict[float, list[list]] = {}
    failures: dict[float, BaseException] = {}
    if workers == 1:
        for task in tasks:
            try:
                results[task[0]] = _sweep_point(task)
            except SpinFridgeError as exc:
                failures[task[0]] = exc
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_sweep_point, task): task[0]
                       for task in tasks}
            for future in concurrent.futures.as_completed(futures):
                value = futures[future]
                try:
                    results[value] = future.result()
                except SpinFridgeError as exc:
                    failures[value] = exc

    rows = [row for value in sorted(results) for row in results[value]]
    column = "gamma" if gammas is not None else "J_I"
    _write_csv(out / filename, manifest, seed,
               [column, "k", "eta_k", "dS_total", "S_probe", "trace_distance"],
               rows)
    if failures:
        for value in sorted(failures):
            print(f"sweep point {value} failed: {failures[value]}",
                  file=sys.stderr)
        if any(isinstance(e, IntegrationError) for e in failures.values()):
            worst = next(e for e in failures.values()
                         if isinstance(e, IntegrationError))
            _print_integration_dump(worst)
            return 3
        return 1
    return 0


def _run_thermometry(manifest: Manifest, out: Path, seed: int) -> int:
    cfg = manifest.config()
    repetitions = int(cfg.pop("repetitions", 1))
    shots = cfg.pop("shots_per_site", 1000)
    shots = None if shots is None else int(shots)
    if repetitions < 1:
        raise ManifestError("'repetitions' must be >= 1")
    cfg.setdefault("steps", 30)
    pcfg = _protocol_config(cfg)
    log.info("thermometry: pseudo-thermalizing for %d steps", pcfg.steps)
    report = run_protocol(pcfg)
    probe = report.final_probe
    truth = pcfg.bath_beta_tilde
    rep_seeds = np.random.default_rng(seed).integers(2 ** 63,
                                                     size=repetitions)
    rows: list[list] = []
    for rep in range(repetitions):
        result = estimate_temperature(probe, shots_per_site=shots,
                                      seed=int(rep_seeds[rep]))
        err = result.beta_tilde - truth
        covered = (not result.boundary and not result.inverted
                   and abs(err) <= 3.0 * result.stderr)
        rows.append([rep, result.beta_tilde, result.stderr, err,
                     int(covered)])
    _write_csv(out / "thermometry.csv", manifest, seed,
               ["rep", "beta_tilde_est", "stderr", "error", "covered_3sigma"],
               rows)
    return 0


def _axis_from_manifest(entry, field: str) -> np.ndarray:
    if isinstance(entry, str):
        if entry not in DIAMOND_BOND_AXES:
            raise ManifestError(
                f"'{field}' names unknown axis {entry!r}; known: "
                f"{sorted(DIAMOND_BOND_AXES)}")
        return DIAMOND_BOND_AXES[entry]
    if isinstance(entry, list) and len(entry) == 3:
        return np.asarray([float(v) for v in entry])
    raise ManifestError(f"'{field}' must be a 3-vector or a named axis")


def _exact_decimal(fraction) -> str:
    """Finite decimal string of a dyadic rational (denominator 2^k)."""
    value = Decimal(fraction.numerator) / Decimal(fraction.denominator)
    return format(value.normalize(), "f")


def _run_nv_coupling(manifest: Manifest, out: Path, seed: int) -> int:
    cfg = manifest.config()
    pairs = cfg.pop("pairs", [])
    yield_length = cfg.pop("yield_chain_length", None)
    _reject_unknown(cfg, "config")
    if not isinstance(pairs, list):
        raise ManifestError("'pairs' must be a list")

    rows: list[list] = []
    for i, entry in enumerate(pairs):
        if not isinstance(entry, dict):
            raise ManifestError(f"pair {i} must be an object")
        entry = dict(entry)
        try:
            pos1 = [float(v) for v in _take(entry, "position1_nm", None)]
            pos2 = [float(v) for v in _take(entry, "position2_nm", None)]
        except TypeError as exc:
            raise ManifestError(
                f"pair {i}: 'position1_nm'/'position2_nm' must be "
                "3-vectors in nm") from exc
        z1 = _axis_from_manifest(_take(entry, "z_axis1", None), f"pair {i}: z_axis1")
        z2 = _axis_from_manifest(_take(entry, "z_axis2", None), f"pair {i}: z_axis2")
        gauge = _take(entry, "gauge", "lab-x")
        _reject_unknown(entry, f"pair {i}")
        try:
            pair = DipolarPair.from_positions(pos1, pos2, z1, z2, gauge=gauge)
        except SpinFridgeError as exc:
            raise ManifestError(f"pair {i}: {exc}") from exc
        coeffs = dipolar_coefficients(pair)
        probe = nv_p1_coupling(pair)
        chain = nv_nv_effective_hamiltonian(pair)
        rows.append([
            i, pair.r_nm, coeffs.q, coeffs.g_plus, coeffs.g_minus,
            coeffs.h_plus, coeffs.h_minus,
            _khz(probe["ising_strength"]),
            _khz(probe["hhcp_flipflop_strength"]),
            _khz(chain["xx_yy_coeff"]),
            _khz(chain["zz_coeff"]),
            _khz(chain["xy_antisym_coeff"]),
            _khz(chain["heisenberg_strength"]),
        ])
    _write_csv(out / "nv_couplings.csv", manifest, seed,
               ["pair", "r_nm", "q", "g_plus", "g_minus", "h_plus", "h_minus",
                "ising_khz", "hhcp_flipflop_khz", "xx_yy_khz", "zz_khz",
                "xy_antisym_khz", "heisenberg_khz"],
               rows)
    summary: dict = {"pairs": len(rows)}
    if yield_length is not None:
        length = int(yield_length)
        fraction = chain_yield(length)
        summary["chain_yield"] = {
            "length": length,
            "fraction": f"{fraction.numerator}/{fraction.denominator}",
            "decimal": _exact_decimal(fraction),
        }
    _write_json(out / "nv_summary.json", manifest, seed, summary)
    return 0


def _run_verify(manifest: Manifest, out: Path, seed: int) -> int:
    verdicts = run_all_oracles(seed=seed)
    payload = [v.to_json() for v in verdicts]
    _write_json(out / "oracle_verdicts.json", manifest, seed, payload)
    failed = [v for v in verdicts if not v.passed]
    for v in verdicts:
        status = "pass" if v.passed else "FAIL"
        print(f"{v.name}: {status} ({v.trials} trials, {v.duration_s:.1f}s)")
    return 1 if failed else 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

_DEFAULT_VERIFY_MANIFEST = {
    "schema_version": SCHEMA_VERSION,
    "kind": "verify",
    "seed": 20260814,
}


def _print_integration_dump(exc: IntegrationError) -> None:
    print("integration failure:", exc, file=sys.stderr)
    t = getattr(exc, "t", None)
    step = getattr(exc, "step", None)
    ratio = getattr(exc, "ratio", None)
    print(f"  at t={t!r}, step={step!r}, error ratio={ratio!r}",
          file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinfridge",
        description="Spin-chain refrigerator simulations, thermometry, "
                    "dipolar coupling tables, and structural verification.",
    )
    parser.add_argument("--version", action="version",
                        version=f"spinfridge {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a '{kind}' manifest")
        p.add_argument("--manifest", default=None,
                       help="path to the JSON run manifest"
                            + (" (optional)" if kind == "verify" else ""))
        p.add_argument("--out", default=None,
                       help="output directory (overrides the manifest)")
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (overrides the manifest)")
        p.add_argument("--threads", type=int, default=None,
                       help="parallel workers for sweeps; 0 = auto "
                            "(default: SPINFRIDGE_THREADS or 1)")
        p.add_argument("--verbose", action="store_true",
                       help="log progress to stderr")
    return parser


def _resolve_threads(flag: int | None) -> int:
    if flag is not None:
        if flag < 0:
            raise ManifestError("--threads must be >= 0")
        return flag
    env = os.environ.get("SPINFRIDGE_THREADS")
    if env is None:
        return 1
    try:
        value = int(env)
    except ValueError as exc:
        raise ManifestError(
            f"SPINFRIDGE_THREADS={env!r} is not an integer") from exc
    if value < 0:
        raise ManifestError("SPINFRIDGE_THREADS must be >= 0")
    return value


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.manifest is not None:
            manifest = load_manifest(args.manifest)
        elif args.kind == "verify":
            raw = json.dumps(_DEFAULT_VERIFY_MANIFEST, sort_keys=True)
            manifest = Manifest(dict(_DEFAULT_VERIFY_MANIFEST),
                                hashlib.sha256(raw.encode()).hexdigest(),
                                "<builtin-verify>")
        else:
            raise ManifestError(f"'{args.kind}' requires --manifest")
        if manifest.kind != args.kind:
            raise ManifestError(
                f"manifest kind {manifest.kind!r} does not match "
                f"subcommand {args.kind!r}")
        seed = args.seed if args.seed is not None else manifest.seed
        out = Path(args.out if args.out is not None
                   else (manifest.out_dir or "."))
        out.mkdir(parents=True, exist_ok=True)
        threads = _resolve_threads(args.threads)

        if args.kind == "cool":
            return _run_cool(manifest, out, seed)
        if args.kind == "sweep":
            return _run_sweep(manifest, out, seed, threads)
        if args.kind == "thermometry":
            return _run_thermometry(manifest, out, seed)
        if args.kind == "nv-coupling":
            return _run_nv_coupling(manifest, out, seed)
        return _run_verify(manifest, out, seed)
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return 2
    except IntegrationError as exc:
        _print_integration_dump(exc)
        return 3
    except SpinFridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
