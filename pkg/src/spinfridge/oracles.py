"""Brute-force randomized oracles for the protocol's structural guarantees.

Each oracle hammers one claim with randomized small-system trials and
returns a verdict object instead of raising: a failure carries a plain-dict
witness (seed, trial index, drawn parameters, offending numbers) sufficient
to replay it. All randomness flows from one seed, so verdicts are
reproducible bit for bit.

The claims, in the order exercised here:

* always cools   -- a qubit attached at the bath temperature and swapped
                    (perfectly or partially) with a probe whose sites all
                    started at least as cold never comes out hotter.
* stationarity   -- the bath-temperature product state is an exact fixed
                    point of wait-plus-swap, and nearby product states at a
                    different temperature are not.
* entropy bounds -- per step the probe's entropy gain covers the emitted
                    qubit's entropy drop, and the cumulative drop never
                    exceeds the probe's capacity N*S_T.
* majorization   -- within every excitation sector, the spectrum before a
                    unital z-conserving channel majorizes the one after.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .dynamics import (
    IntegratorConfig,
    LindbladGenerator,
    SpinNetwork,
    SwapSpec,
    conserves_z_excitation,
    evolve,
    evolve_exact,
    is_unital,
    partial_swap,
    perfect_swap,
    window_generator,
    xxz_network_hamiltonian,
)
from .errors import DomainError
from .protocol import (
    ProtocolConfig,
    ProtocolReport,
    attach_thermal_qubit,
    entropy_accounting,
    run_protocol,
)
from .registers import SpinRegister
from .states import (
    QuantumState,
    partial_trace,
    sector_decompose,
    temperature_of,
    thermal_product_state,
    trace_distance,
)
from . import sectors

_COOL_TOL = 1e-9
_FIXED_POINT_TOL = 1e-8
_DISPLACEMENT_MIN = 1e-6
_MAJORIZATION_TOL = 1e-10


# --------------------------------------------------------------------------
# verdicts and samples
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    """Outcome of one oracle run; falsy when the property failed."""

    name: str
    passed: bool
    trials: int
    duration_s: float
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "duration_s": round(self.duration_s, 3),
            "witness": self.witness,
            "details": self.details,
        }


@dataclass
class ChannelSample:
    """One randomly drawn wait-plus-swap channel on qubit + probe.

    `apply` maps a joint state (labels 0..N) through the channel. The
    factory verifies unitality and z-excitation conservation on random
    states before releasing the sample, since those two properties are the
    hypotheses of the cooling guarantee.
    """

    description: str
    params: dict
    joint_register: SpinRegister
    apply: Callable[[QuantumState], QuantumState]


def random_channel_sample(rng: np.random.Generator, probe_size: int,
                          check_seed: int = 0,
                          integrator: IntegratorConfig | None = None
                          ) -> ChannelSample:
    """Draw a z-conserving network, dephasing rate, wait, and swap.

    Couplings are uniform in [-1, 1] on every pair, anisotropies uniform in
    [0, 2], so the Hamiltonian commutes with total spin-z by construction.
    The dephasing rate mixes point masses at 0 and J with a uniform draw so
    both edge regimes always appear across a batch.
    """
    reg = SpinRegister.of_size(probe_size)
    labels = reg.labels
    pairs = [(a, b) for i, a in enumerate(labels) for b in labels[i + 1:]]
    couplings = {p: float(rng.uniform(-1.0, 1.0)) for p in pairs}
    deltas = {p: float(rng.uniform(0.0, 2.0)) for p in pairs}
    draw = rng.random()
    gamma = 0.0 if draw < 0.25 else (1.0 if draw < 0.5 else
                                     float(rng.uniform(0.0, 1.0)))
    tau = float(rng.uniform(0.0, probe_size))
    joint_reg = SpinRegister.with_qubit(probe_size)
    joint_net = SpinNetwork(joint_reg, couplings, deltas)
    wait_gen = LindbladGenerator.from_network(joint_net, gamma,
                                              dephasing_sites=labels)
    params = {
        "probe_size": probe_size,
        "couplings": {f"{a},{b}": j for (a, b), j in couplings.items()},
        "anisotropies": {f"{a},{b}": d for (a, b), d in deltas.items()},
        "gamma": gamma,
        "tau": tau,
    }
    if rng.random() < 0.5:
        params["swap"] = "perfect"
        swap_fn = lambda s: perfect_swap(s, 0, 1)  # noqa: E731
        desc = "perfect swap"
    else:
        j_i = float(math.exp(rng.uniform(math.log(0.5), math.log(100.0))))
        net = SpinNetwork(reg, couplings, deltas)
        spec = SwapSpec.partial(
            j_i,
            probe_background=xxz_network_hamiltonian(net),
            window_dephasing_rate=gamma,
        )
        wgen = window_generator(joint_reg, spec)
        swap_fn = lambda s: partial_swap(s, spec, integrator, _gen=wgen)  # noqa: E731
        params["swap"] = f"partial J_I={j_i:.4g}"
        desc = params["swap"]

    def apply(joint: QuantumState) -> QuantumState:
        if gamma == 0:
            waited = evolve_exact(joint, wait_gen, tau)
        else:
            waited = evolve(joint, wait_gen, tau, integrator)
        return swap_fn(waited)

    sample = ChannelSample(
        description=f"wait tau={tau:.4g}, gamma={gamma:.4g}, {desc}",
        params=params,
        joint_register=joint_reg,
        apply=apply,
    )
    if not conserves_z_excitation(apply, joint_reg, trials=1, seed=check_seed):
        raise DomainError("drawn channel failed z-conservation check")
    if not is_unital(apply, joint_reg):
        raise DomainError("drawn channel failed unitality check")
    return sample


# --------------------------------------------------------------------------
# theorem: the protocol always cools
# --------------------------------------------------------------------------

def oracle_always_cools(trials: int = 500, max_sites: int = 4,
                        seed: int = 20260814,
                        inject_violation: bool = False,
                        integrator: IntegratorConfig | None = None
                        ) -> OracleResult:
    """Randomized check that no emitted qubit is ever hotter than the bath.

    Each trial draws a probe size in {2..max_sites}, a channel sample, a
    bath temperature, valid per-site probe temperatures (all at least as
    cold as the bath, with point masses at equality and at fully
    polarized), and runs one to three rounds, checking every emission.

    `inject_violation=True` deliberately starts every probe hotter than the
    bath (beta_tilde = bath/2) to confirm the oracle detects the failure.
    """
    if integrator is None:
        # Same tolerances as the protocol default; only the step ceiling is
        # raised, because these systems are tiny and slow and the error
        # controller (not the cap) should set the pace.
        integrator = IntegratorConfig(max_step=0.5)
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    coldest = math.inf
    for trial in range(trials):
        n = int(rng.integers(2, max_sites + 1))
        sample = random_channel_sample(rng, n, check_seed=seed + trial,
                                       integrator=integrator)
        bath = float(rng.uniform(0.05, 3.0))
        temps = []
        for _ in range(n):
            u = rng.random()
            if u < 0.2:
                temps.append(math.inf)
            elif u < 0.4:
                temps.append(bath)
            else:
                temps.append(bath + float(rng.uniform(0.0, 4.0)))
        if inject_violation:
            temps = [bath / 2.0] * n
        probe = thermal_product_state(temps)
        rounds = int(rng.integers(1, 4))
        for step in range(1, rounds + 1):
            joint = attach_thermal_qubit(probe, bath)
            out = sample.apply(joint)
            qubit = partial_trace(out, keep=(0,))
            beta_out = temperature_of(qubit).beta_tilde
            coldest = min(coldest, beta_out - bath)
            if beta_out < bath - _COOL_TOL:
                return OracleResult(
                    name="always_cools",
                    passed=False,
                    trials=trial + 1,
                    duration_s=time.perf_counter() - start,
                    witness={
                        "seed": seed,
                        "trial": trial,
                        "step": step,
                        "bath_beta_tilde": bath,
                        "probe_beta_tildes": [float(t) for t in temps],
                        "beta_tilde_out": float(beta_out),
                        "channel": sample.params,
                    },
                )
            probe = partial_trace(out, keep=probe.register.labels)
    return OracleResult(
        name="always_cools",
        passed=True,
        trials=trials,
        duration_s=time.perf_counter() - start,
        details={"min_margin": float(coldest)},
    )


# --------------------------------------------------------------------------
# theorem: the bath product state is the stationary state
# --------------------------------------------------------------------------

def oracle_stationary_state(net: SpinNetwork | None = None,
                            dephasing_rates: Sequence[float] = (0.0, 0.3),
                            bath_beta_tilde: float = 0.2,
                            tau_count: int = 10,
                            seed: int = 7,
                            integrator: IntegratorConfig | None = None
                            ) -> OracleResult:
    """Fixed-point and displacement check for the bath product state.

    For each dephasing rate, each sampled waiting time, and each swap
    flavor (perfect and a partial J_I = 5 window with the network as
    background), one full round applied to chi(bath)^(N+1) must return it
    to within 1e-8. A probe at twice the bath beta_tilde must move by more
    than 1e-6 after one round for at least one sampled waiting time.
    """
    if net is None:
        net = SpinNetwork.uniform_chain(4, 1.0)
    n = net.register.count
    if n > 5:
        raise DomainError("stationarity oracle is a small-system check (N <= 5)")
    rng = np.random.default_rng(seed)
    taus = rng.uniform(0.0, n, size=tau_count)
    start = time.perf_counter()
    joint_reg = SpinRegister.with_qubit(n)
    joint_net = SpinNetwork(joint_reg, net.couplings, net.anisotropies)
    probe_h = xxz_network_hamiltonian(net)
    stationary = thermal_product_state([bath_beta_tilde] * n)
    perturbed = thermal_product_state([2.0 * bath_beta_tilde] * n)

    trials = 0
    worst_fixed = 0.0
    best_displacement = 0.0
    witness = None
    for gamma in dephasing_rates:
        wait_gen = LindbladGenerator.from_network(joint_net, gamma,
                                                  dephasing_sites=net.register.labels)
        swaps: list[tuple[str, Callable[[QuantumState], QuantumState]]] = [
            ("perfect", lambda s: perfect_swap(s, 0, 1)),
        ]
        spec = SwapSpec.partial(5.0, probe_background=probe_h,
                                window_dephasing_rate=gamma)
        wgen = window_generator(joint_reg, spec)
        swaps.append(
            ("partial J_I=5",
             lambda s, _spec=spec, _w=wgen: partial_swap(s, _spec, integrator,
                                                         _gen=_w)))

        def one_round(probe, tau, swap_fn):
            joint = attach_thermal_qubit(probe, bath_beta_tilde)
            if gamma == 0:
                waited = evolve_exact(joint, wait_gen, tau)
            else:
                waited = evolve(joint, wait_gen, tau, integrator)
            return swap_fn(waited)

        for tau in taus:
            for swap_name, swap_fn in swaps:
                trials += 1
                fixed_in = attach_thermal_qubit(stationary, bath_beta_tilde)
                if gamma == 0:
                    waited = evolve_exact(fixed_in, wait_gen, tau)
                else:
                    waited = evolve(fixed_in, wait_gen, tau, integrator)
                fixed_out = swap_fn(waited)
                dev = trace_distance(fixed_out, fixed_in)
                worst_fixed = max(worst_fixed, dev)
                if dev > _FIXED_POINT_TOL and witness is None:
                    witness = {
                        "seed": seed,
                        "kind": "fixed point moved",
                        "gamma": float(gamma),
                        "tau": float(tau),
                        "swap": swap_name,
                        "trace_distance": float(dev),
                    }
                moved = one_round(perturbed, tau, swap_fn)
                probe_after = partial_trace(moved, keep=net.register.labels)
                best_displacement = max(
                    best_displacement,
                    trace_distance(probe_after, perturbed))
    if witness is None and best_displacement <= _DISPLACEMENT_MIN:
        witness = {
            "seed": seed,
            "kind": "perturbed state did not move",
            "max_displacement": float(best_displacement),
        }
    elapsed = time.perf_counter() - start
    return OracleResult(
        name="stationary_state",
        passed=witness is None,
        trials=trials,
        duration_s=elapsed,
        witness=witness,
        details={
            "worst_fixed_point_distance": float(worst_fixed),
            "max_perturbed_displacement": float(best_displacement),
        },
    )


# --------------------------------------------------------------------------
# theorem: entropy bookkeeping
# --------------------------------------------------------------------------

def _standard_reports() -> list[ProtocolReport]:
    runs = [
        ProtocolConfig(probe_size=4, bath_beta_tilde=0.2, steps=12),
        ProtocolConfig(probe_size=1, bath_beta_tilde=0.2, steps=1),
        ProtocolConfig(probe_size=3, bath_beta_tilde=0.2, steps=6,
                       probe_beta_tildes=(0.2, 0.2, 0.2)),
        ProtocolConfig(probe_size=3, bath_beta_tilde=0.4, steps=8,
                       dephasing_rate=0.4, waiting_policy="fixed"),
        ProtocolConfig(probe_size=3, bath_beta_tilde=0.2, steps=6,
                       swap=SwapSpec.partial(5.0)),
    ]
    return [run_protocol(cfg) for cfg in runs]


def oracle_entropy_bounds(reports: Iterable[ProtocolReport] | None = None
                          ) -> OracleResult:
    """Second-law accounting on a set of completed runs.

    Every report must pass the per-step and cumulative entropy checks; on
    top of that, runs that started from the fully polarized probe must show
    a non-decreasing probe entropy staying below the N*S_T capacity.
    """
    start = time.perf_counter()
    if reports is None:
        reports = _standard_reports()
    reports = list(reports)
    witness = None
    for i, report in enumerate(reports):
        audit = entropy_accounting(report)
        if not audit.passed:
            witness = {
                "report": i,
                "kind": "accounting violation",
                "offending_step": audit.offending_step,
                "config": _config_summary(report.config),
            }
            break
        temps = report.config.probe_beta_tildes
        if temps and all(math.isinf(t) for t in temps):
            entropies = np.concatenate(
                ([report.initial_probe_entropy], report.probe_entropies))
            capacity = report.config.probe_size * report.bath_entropy
            if np.any(np.diff(entropies) < -_COOL_TOL) \
                    or entropies[-1] > capacity + _COOL_TOL:
                witness = {
                    "report": i,
                    "kind": "pure-probe entropy approach violated",
                    "entropies": [float(s) for s in entropies],
                    "capacity": float(capacity),
                    "config": _config_summary(report.config),
                }
                break
    return OracleResult(
        name="entropy_bounds",
        passed=witness is None,
        trials=len(reports),
        duration_s=time.perf_counter() - start,
        witness=witness,
    )


def _config_summary(cfg: ProtocolConfig) -> dict:
    return {
        "probe_size": cfg.probe_size,
        "bath_beta_tilde": cfg.bath_beta_tilde,
        "dephasing_rate": cfg.dephasing_rate,
        "steps": cfg.steps,
        "swap": cfg.swap.mode,
        "waiting_policy": cfg.waiting_policy,
    }


# --------------------------------------------------------------------------
# lemma: unital z-conserving channels flatten sector spectra
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SectorSpectrum:
    """Per-sector diagonals and sorted spectra of a blocked state."""

    diagonals: tuple[np.ndarray, ...]
    spectra: tuple[np.ndarray, ...]

    @classmethod
    def from_state(cls, state: QuantumState) -> "SectorSpectrum":
        diags = []
        spectra = []
        for block in state.blocks:
            if block.size:
                diags.append(np.real(np.diag(block)).copy())
                vals = np.linalg.eigvalsh(block)
                spectra.append(np.sort(vals)[::-1])
            else:
                diags.append(np.zeros(0))
                spectra.append(np.zeros(0))
        for d, s in zip(diags, spectra):
            if d.size and (s[-1] < -1e-12 or
                           abs(d.sum() - s.sum()) > 1e-10):
                raise DomainError("inconsistent sector spectrum")
        return cls(tuple(diags), tuple(spectra))


def _majorizes(before: np.ndarray, after: np.ndarray,
               tol: float = _MAJORIZATION_TOL) -> tuple[bool, float]:
    """Partial-sum dominance of two descending-sorted vectors."""
    gaps = np.cumsum(before) - np.cumsum(after)
    return bool(np.all(gaps >= -tol)), float(gaps.min() if gaps.size else 0.0)


def _random_blocked_state(rng: np.random.Generator, n: int) -> QuantumState:
    blocks = []
    for basis in sectors.sector_bases(n):
        d = len(basis)
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        blocks.append(g @ g.conj().T)
    total = sum(np.trace(b).real for b in blocks)
    return QuantumState(SpinRegister.of_size(n),
                        blocks=[b / total for b in blocks])


def _reset_site_one(state: QuantumState) -> QuantumState:
    """Negative control: re-prepare site 1 in its ground state."""
    rest = partial_trace(state, keep=state.register.labels[1:]) \
        if state.register.count > 1 else None
    if rest is None:
        dense = np.diag([0.0, 1.0]).astype(complex)
    else:
        dense = np.kron(np.diag([0.0, 1.0]).astype(complex), rest.matrix)
    return QuantumState(state.register, dense=dense)


def oracle_majorization(trials: int = 300, max_sites: int = 4,
                        seed: int = 99,
                        negative_control: bool = False,
                        integrator: IntegratorConfig | None = None
                        ) -> OracleResult:
    """Within-sector spectral dominance under the evolution channel.

    Each trial draws a random blocked state and a random z-conserving
    network with a dephasing rate from {0, 0.5, uniform}, evolves for a
    random time, and checks that each sector's sorted spectrum before
    majorizes the one after. With `negative_control=True` the channel is
    replaced by a non-unital site reset, which must be caught violating
    dominance.
    """
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    strictest = 0.0
    for trial in range(trials):
        n = int(rng.integers(2, max_sites + 1))
        state = _random_blocked_state(rng, n)
        reg = state.register
        labels = reg.labels
        pairs = [(a, b) for i, a in enumerate(labels) for b in labels[i + 1:]]
        net = SpinNetwork(
            reg,
            {p: float(rng.uniform(-1, 1)) for p in pairs},
            {p: float(rng.uniform(0, 2)) for p in pairs},
        )
        draw = rng.random()
        gamma = 0.0 if draw < 0.25 else (0.5 if draw < 0.5 else
                                         float(rng.uniform(0, 1)))
        tau = float(rng.uniform(0.0, 2.0))
        gen = LindbladGenerator.from_network(net, gamma)
        if negative_control:
            # the reset creates no inter-sector coherence, so the blocked
            # view below is exact
            out = sector_decompose(_reset_site_one(state))
        elif gamma == 0:
            out = evolve_exact(state, gen, tau)
        else:
            out = evolve(state, gen, tau, integrator)
        before = SectorSpectrum.from_state(state)
        after = SectorSpectrum.from_state(out)
        for l, (b, a) in enumerate(zip(before.spectra, after.spectra)):
            if not b.size:
                continue
            ok, worst_gap = _majorizes(b, a)
            if ok and gamma > 0:
                strict = float((np.cumsum(b) - np.cumsum(a)).max())
                strictest = max(strictest, strict)
            if not ok:
                return OracleResult(
                    name="majorization",
                    passed=False,
                    trials=trial + 1,
                    duration_s=time.perf_counter() - start,
                    witness={
                        "seed": seed,
                        "trial": trial,
                        "sector": l,
                        "worst_partial_sum_gap": worst_gap,
                        "gamma": gamma,
                        "tau": tau,
                        "negative_control": negative_control,
                    },
                )
    return OracleResult(
        name="majorization",
        passed=True,
        trials=trials,
        duration_s=time.perf_counter() - start,
        details={"max_strict_dominance": float(strictest)},
    )


def run_all_oracles(seed: int = 20260814) -> list[OracleResult]:
    """The full battery with default sizes, as run by the CLI."""
    return [
        oracle_always_cools(seed=seed),
        oracle_stationary_state(seed=seed % 1000),
        oracle_entropy_bounds(),
        oracle_majorization(seed=seed % 4096),
    ]
