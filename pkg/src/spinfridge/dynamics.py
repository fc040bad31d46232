"""Hamiltonians, the dephasing master equation, and swap channels.

The generator implemented throughout is

    d rho / dt = i [rho, H] + Gamma * sum_n (sz_n rho sz_n - rho),

with H built from XXZ-type pair couplings J_nm (Delta_nm anisotropies), all
of which commute with the total spin-z. That conservation law is what the
sector-blocked fast path exploits: a blocked state stays blocked, each block
evolves on its own, and per-site dephasing collapses to one Hadamard product
per block (see sectors.py).

Two evolution routes exist deliberately:

* evolve()       -- adaptive RKF4(5), dense or blocked; the reference method.
* evolve_exact() -- eigendecomposition propagator, Gamma = 0 only; used by
                    the protocol for its unitary segments and as the
                    independent check the integrator is validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import sectors
from .errors import DomainError, IntegrationError
from .integrate import IntegratorConfig, rkf45
from .operators import Observable, PAULIS, site_operator
from .registers import SpinRegister
from .states import QuantumState, sector_decompose, trace_distance

Z_CONSERVATION_TOL = 1e-12


# --------------------------------------------------------------------------
# networks and Hamiltonians
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinNetwork:
    """Pairwise XXZ couplings on a register.

    couplings maps ordered pairs (n, m), n < m, to J_nm (angular-frequency
    units); anisotropies maps the same keys to the dimensionless Delta_nm
    multiplying the zz term (missing keys default to 1).
    """

    register: SpinRegister
    couplings: dict[tuple[int, int], float]
    anisotropies: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        labels = set(self.register.labels)
        for (n, m), j in self.couplings.items():
            if n >= m:
                raise DomainError(f"coupling key ({n},{m}) must have n < m")
            if n not in labels or m not in labels:
                raise DomainError(f"coupling ({n},{m}) outside register {labels}")
            if not math.isfinite(j):
                raise DomainError(f"coupling J[{n},{m}] = {j} is not finite")
        for key in self.anisotropies:
            if key not in self.couplings:
                raise DomainError(f"anisotropy for absent coupling {key}")

    @classmethod
    def uniform_chain(cls, count: int, coupling: float) -> "SpinNetwork":
        """Nearest-neighbour chain, J_{n,n+1} = J, Delta = 1."""
        reg = SpinRegister.of_size(count)
        pairs = {(n, n + 1): coupling for n in range(1, count)}
        return cls(reg, pairs, {k: 1.0 for k in pairs})

    def delta(self, key: tuple[int, int]) -> float:
        return self.anisotropies.get(key, 1.0)


def xxz_network_hamiltonian(net: SpinNetwork) -> Observable:
    """H = sum_nm J_nm (Delta_nm sz sz + sx sx + sy sy), dense."""
    reg = net.register
    h = np.zeros((reg.dim, reg.dim), dtype=complex)
    for (n, m), j in net.couplings.items():
        delta = net.delta((n, m))
        for axis, weight in (("x", 1.0), ("y", 1.0), ("z", delta)):
            h += j * weight * (
                site_operator(reg, n, PAULIS[axis])
                @ site_operator(reg, m, PAULIS[axis])
            )
    return Observable(reg, h)


def heisenberg_hamiltonian(count: int, coupling: float) -> Observable:
    """Uniform nearest-neighbour chain, H = J sum sigma_n . sigma_{n+1}."""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    return xxz_network_hamiltonian(SpinNetwork.uniform_chain(count, coupling))


def blocked_xxz_hamiltonian(net: SpinNetwork) -> list[np.ndarray]:
    """Per-sector blocks of the XXZ Hamiltonian, built combinatorially.

    zz terms are diagonal (spin-sign products); the xx+yy pair gives the hop
    <..0_n 1_m..|H|..1_n 0_m..> = 2 J_nm.
    """
    reg = net.register
    n_spins = reg.count
    blocks = []
    for l in range(n_spins + 1):
        basis = sectors.sector_bases(n_spins)[l]
        dim = len(basis)
        block = np.zeros((dim, dim), dtype=complex)
        signs = sectors.spin_signs(n_spins, l)
        for (a, b), j in net.couplings.items():
            pa, pb = reg.bit_position(a), reg.bit_position(b)
            ia, ib = n_spins - 1 - pa, n_spins - 1 - pb  # sign-column indices
            block[np.diag_indices(dim)] += (
                j * net.delta((a, b)) * signs[:, ia] * signs[:, ib]
            )
            bit_a = (basis >> pa) & 1
            bit_b = (basis >> pb) & 1
            src = np.nonzero((bit_a == 1) & (bit_b == 0))[0]
            if src.size:
                partner = basis[src] - (1 << pa) + (1 << pb)
                dst = np.searchsorted(basis, partner)
                block[dst, src] += 2.0 * j
                block[src, dst] += 2.0 * j
        blocks.append(block)
    return blocks


# --------------------------------------------------------------------------
# the Lindblad generator
# --------------------------------------------------------------------------

class LindbladGenerator:
    """Hamiltonian plus per-site sigma^z dephasing at rate Gamma >= 0.

    `dephasing_sites` restricts the dissipator to a subset of site labels
    (None = every site); the protocol uses that to keep the external qubit
    coherent during swap windows unless asked otherwise.

    Instances are immutable by convention and cache their sector blocks and
    eigendecompositions, so reuse the same generator across protocol steps.
    """

    def __init__(self, hamiltonian: Observable, dephasing_rate: float = 0.0,
                 dephasing_sites: tuple[int, ...] | None = None,
                 _blocks: list[np.ndarray] | None = None):
        if not math.isfinite(dephasing_rate) or dephasing_rate < 0:
            raise DomainError(f"dephasing rate must be >= 0, got {dephasing_rate}")
        self.hamiltonian = hamiltonian
        self.dephasing_rate = float(dephasing_rate)
        if dephasing_sites is not None:
            dephasing_sites = tuple(sorted(dephasing_sites))
            for s in dephasing_sites:
                if s not in hamiltonian.register.labels:
                    raise DomainError(f"dephasing site {s} not in register")
        self.dephasing_sites = dephasing_sites
        self._cache: dict = {}
        if _blocks is not None:
            self._cache["blocks"] = _blocks

    @classmethod
    def from_network(cls, net: SpinNetwork, dephasing_rate: float = 0.0,
                     dephasing_sites: tuple[int, ...] | None = None
                     ) -> "LindbladGenerator":
        """Build with the blocked Hamiltonian constructed directly (exact
        z-conservation by construction, no dense slicing)."""
        blocks = blocked_xxz_hamiltonian(net)
        dense = sectors.scatter_blocks(blocks, net.register.count)
        return cls(Observable(net.register, dense), dephasing_rate,
                   dephasing_sites, _blocks=blocks)

    @property
    def register(self) -> SpinRegister:
        return self.hamiltonian.register

    def without_dephasing(self) -> "LindbladGenerator":
        """A Gamma = 0 twin sharing this generator's spectral caches.

        The cache only ever holds Hamiltonian-derived objects (sector blocks,
        eigensystems, propagators), all independent of the dephasing rate, so
        the twin can reuse them wholesale. Used by the waiting-time optimizer,
        which always works with the coherent dynamics.
        """
        if self.dephasing_rate == 0:
            return self
        twin = LindbladGenerator(self.hamiltonian, 0.0, self.dephasing_sites)
        twin._cache = self._cache
        return twin

    # -- caches ------------------------------------------------------------

    def hamiltonian_blocks(self) -> list[np.ndarray] | None:
        """Sector blocks of H, or None if H does not conserve total spin-z."""
        if "blocks" not in self._cache:
            n = self.register.count
            h = self.hamiltonian.matrix
            if sectors.max_intersector_coherence(h, n) > Z_CONSERVATION_TOL:
                self._cache["blocks"] = None
            else:
                self._cache["blocks"] = sectors.gather_blocks(h, n)
        return self._cache["blocks"]

    def block_eigensystems(self) -> list[tuple[np.ndarray, np.ndarray]]:
        if "block_eig" not in self._cache:
            blocks = self.hamiltonian_blocks()
            if blocks is None:
                raise DomainError("Hamiltonian does not conserve total spin-z")
            self._cache["block_eig"] = [
                np.linalg.eigh(b) if b.size else (np.zeros(0), np.zeros((0, 0)))
                for b in blocks
            ]
        return self._cache["block_eig"]

    def dense_eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        if "dense_eig" not in self._cache:
            self._cache["dense_eig"] = np.linalg.eigh(self.hamiltonian.matrix)
        return self._cache["dense_eig"]

    def _sign_columns(self) -> list[int] | None:
        if self.dephasing_sites is None:
            return None
        labels = self.register.labels
        return [labels.index(s) for s in self.dephasing_sites]

    def _dense_weights(self) -> tuple[np.ndarray, int]:
        n = self.register.count
        cols = self._sign_columns()
        if cols is None:
            return sectors.dense_dephasing_weights(n), n
        s = sectors.dense_spin_signs(n)[:, cols]
        return s @ s.T, len(cols)

    def _block_weights(self, l: int) -> tuple[np.ndarray, int]:
        n = self.register.count
        cols = self._sign_columns()
        if cols is None:
            return sectors.dephasing_weights(n, l), n
        s = sectors.spin_signs(n, l)[:, cols]
        return s @ s.T, len(cols)

    def blocked_propagators(self, duration: float) -> list[np.ndarray]:
        """Per-sector unitaries exp(-i H_l t), cached for a few durations.

        Repeated durations (fixed-wait protocols, swap windows) hit the
        cache; optimized protocols produce a fresh duration per step, so the
        cache is bounded to keep memory flat over long runs.
        """
        key = ("prop", float(duration))
        if key not in self._cache:
            props = []
            for d, u in self.block_eigensystems():
                if d.size:
                    props.append((u * np.exp(-1j * d * duration)) @ u.conj().T)
                else:
                    props.append(np.zeros((0, 0), dtype=complex))
            stale = [k for k in self._cache if isinstance(k, tuple) and k[0] == "prop"]
            for k in stale[:max(0, len(stale) - 7)]:
                del self._cache[k]
            self._cache[key] = props
        return self._cache[key]


def apply_generator(gen: LindbladGenerator, state: QuantumState) -> np.ndarray:
    """d(rho)/dt as a dense matrix: i[rho, H] + dissipator."""
    if gen.register.labels != state.register.labels:
        raise DomainError("generator and state registers do not match")
    rho = state.matrix
    h = gen.hamiltonian.matrix
    out = 1j * (rho @ h - h @ rho)
    if gen.dephasing_rate > 0:
        w, n_sites = gen._dense_weights()
        out = out + gen.dephasing_rate * (w * rho - n_sites * rho)
    return out


# --------------------------------------------------------------------------
# time evolution
# --------------------------------------------------------------------------

def _dense_rhs(gen: LindbladGenerator) -> Callable[[float, np.ndarray], np.ndarray]:
    h = gen.hamiltonian.matrix
    gamma = gen.dephasing_rate
    if gamma > 0:
        w, n_sites = gen._dense_weights()

    def rhs(_t, y):
        # For Hermitian y, (H y)^dag = y H, so one product gives both sides
        # of the commutator and the result is Hermitian to the last bit.
        m = h @ y
        d = 1j * (m.conj().T - m)
        if gamma > 0:
            d += gamma * (w * y - n_sites * y)
        return d

    return rhs


def _block_rhs(h_l: np.ndarray, gamma: float, w_l: np.ndarray | None,
               n_sites: int) -> Callable[[float, np.ndarray], np.ndarray]:
    def rhs(_t, y):
        m = h_l @ y
        d = 1j * (m.conj().T - m)
        if gamma > 0:
            d += gamma * (w_l * y - n_sites * y)
        return d

    return rhs


_TRACE_DRIFT_TOL = 1e-9


def _repair_positivity(blocks: list[np.ndarray], cfg: IntegratorConfig,
                       duration: float) -> list[np.ndarray]:
    """Project integrator output back onto physical states.

    Adaptive stepping leaves the result off the positive cone by an amount
    set by the tolerances; for near-pure states that shows up as slightly
    negative eigenvalues. Dips within a tolerance-scaled budget are clamped
    to zero and the global trace renormalized; larger dips (or trace drift
    past 1e-9) mean the integration itself went wrong and raise.
    """
    budget = 100.0 * (cfg.abs_tol + cfg.rel_tol)
    total = sum(float(np.trace(b).real) for b in blocks if b.size)
    if abs(total - 1.0) > _TRACE_DRIFT_TOL:
        raise IntegrationError(
            f"trace drifted to {total!r} during integration",
            t=duration, step=math.nan, ratio=abs(total - 1.0))
    repaired = []
    for block in blocks:
        if not block.size or not block.any():
            repaired.append(block)
            continue
        vals, vecs = np.linalg.eigh(0.5 * (block + block.conj().T))
        dip = float(vals[0])
        if dip < -budget:
            raise IntegrationError(
                f"eigenvalue {dip:.3e} exceeds the positivity budget "
                f"{-budget:.3e}", t=duration, step=math.nan, ratio=-dip)
        if dip < 0.0:
            block = (vecs * np.maximum(vals, 0.0)) @ vecs.conj().T
        repaired.append(block)
    norm = sum(float(np.trace(b).real) for b in repaired if b.size)
    return [b / norm for b in repaired]


def evolve(state: QuantumState, gen: LindbladGenerator, duration: float,
           cfg: IntegratorConfig | None = None) -> QuantumState:
    """Adaptive RKF4(5) integration of the master equation.

    Blocked states with a z-conserving Hamiltonian evolve sector by sector;
    anything else goes through the dense route (a blocked state whose
    Hamiltonian mixes sectors is densified first, since it would not stay
    blocked anyway).
    """
    final, _ = evolve_sampled(state, gen, duration, cfg)
    return final


def evolve_sampled(state: QuantumState, gen: LindbladGenerator, duration: float,
                   cfg: IntegratorConfig | None = None,
                   t_eval=None) -> tuple[QuantumState, list[tuple[float, QuantumState]]]:
    """evolve() plus dense-output samples at the requested times."""
    if gen.register.labels != state.register.labels:
        raise DomainError("generator and state registers do not match")
    if duration < 0:
        raise DomainError(f"duration must be >= 0, got {duration}")
    cfg = cfg or IntegratorConfig()

    if gen.hamiltonian_blocks() is not None:
        if not state.is_blocked:
            # A dense input without inter-sector coherence stays blocked
            # under this generator, so route it through the fast path.
            coherence = sectors.max_intersector_coherence(
                state.matrix, state.register.count)
            if coherence <= Z_CONSERVATION_TOL:
                state = sector_decompose(state)
        if state.is_blocked:
            return _evolve_blocked(state, gen, duration, cfg, t_eval)
    dense_state = state.to_dense()
    rho0 = dense_state.matrix
    rho0 = 0.5 * (rho0 + rho0.conj().T)
    result = rkf45(_dense_rhs(gen), rho0, duration, cfg, t_eval)
    repaired, = _repair_positivity([result.y], cfg, duration)
    final = QuantumState(state.register, dense=repaired, validate=False)
    samples = [(t, QuantumState(state.register, dense=y, validate=False))
               for t, y in result.samples]
    return final, samples


def _evolve_blocked(state, gen, duration, cfg, t_eval):
    n = state.register.count
    h_blocks = gen.hamiltonian_blocks()
    gamma = gen.dephasing_rate
    out_blocks = []
    sampled: dict[float, list[np.ndarray]] = {}
    eval_times = list(t_eval) if t_eval is not None else []
    for l, block in enumerate(state.blocks):
        if not block.size:
            out_blocks.append(block.copy())
            for t in eval_times:
                sampled.setdefault(t, []).append(block.copy())
            continue
        if not block.any():
            # An empty sector stays empty (the generator is linear and
            # sector-preserving); skip the integrator entirely.
            out_blocks.append(np.zeros_like(block))
            for t in eval_times:
                sampled.setdefault(t, []).append(np.zeros_like(block))
            continue
        w_l, n_sites = gen._block_weights(l) if gamma > 0 else (None, n)
        y0 = 0.5 * (block + block.conj().T)
        result = rkf45(_block_rhs(h_blocks[l], gamma, w_l, n_sites),
                       y0, duration, cfg, eval_times)
        out_blocks.append(result.y)
        for t, y in result.samples:
            sampled.setdefault(t, []).append(y)
    out_blocks = _repair_positivity(out_blocks, cfg, duration)
    final = QuantumState(state.register, blocks=out_blocks, validate=False)
    samples = [
        (t, QuantumState(state.register, blocks=blks, validate=False))
        for t, blks in sorted(sampled.items())
    ]
    return final, samples


def evolve_exact(state: QuantumState, gen: LindbladGenerator,
                 duration: float) -> QuantumState:
    """Unitary evolution through the cached eigendecomposition of H.

    Only valid for Gamma = 0; this is the independent reference route the
    RKF path is checked against, and the protocol's fast path for waits and
    swap windows without dephasing.
    """
    if gen.dephasing_rate != 0:
        raise DomainError("exact propagation requires zero dephasing")
    if gen.register.labels != state.register.labels:
        raise DomainError("generator and state registers do not match")
    if state.is_blocked and gen.hamiltonian_blocks() is not None:
        props = gen.blocked_propagators(duration)
        out = []
        for block, p in zip(state.blocks, props):
            if block.size and block.any():
                out.append(p @ block @ p.conj().T)
            else:
                out.append(np.zeros_like(block))
        return QuantumState(state.register, blocks=out, validate=False)
    d, u = gen.dense_eigensystem()
    phase = np.exp(-1j * d * duration)
    prop = (u * phase) @ u.conj().T
    rho = prop @ state.to_dense().matrix @ prop.conj().T
    return QuantumState(state.register, dense=rho, validate=False)


# --------------------------------------------------------------------------
# swaps
# --------------------------------------------------------------------------

def perfect_swap(state: QuantumState, i: int, j: int) -> QuantumState:
    """Exchange two sites by conjugating with SWAP (a basis permutation)."""
    reg = state.register
    if i not in reg.labels or j not in reg.labels:
        raise DomainError(f"sites ({i},{j}) not both in register {reg.labels}")
    if i == j:
        raise DomainError("swap needs two distinct sites")
    n = reg.count
    bi, bj = reg.bit_position(i), reg.bit_position(j)
    if state.is_blocked:
        positions = sectors.sector_positions(n)
        out = []
        for l, block in enumerate(state.blocks):
            if not block.size:
                out.append(block.copy())
                continue
            basis = sectors.sector_bases(n)[l]
            swapped = _swap_bits(basis, bi, bj)
            perm = positions[swapped]
            out.append(block[np.ix_(perm, perm)])
        return QuantumState(reg, blocks=out, validate=False)
    idx = _swap_bits(np.arange(reg.dim), bi, bj)
    return QuantumState(reg, dense=state.matrix[np.ix_(idx, idx)], validate=False)


def _swap_bits(values: np.ndarray, bi: int, bj: int) -> np.ndarray:
    bit_i = (values >> bi) & 1
    bit_j = (values >> bj) & 1
    out = values & ~(1 << bi) & ~(1 << bj)
    return out | (bit_j << bi) | (bit_i << bj)


@dataclass(frozen=True)
class SwapSpec:
    """How the probe exchanges its target spin with the external qubit.

    mode "perfect": instantaneous SWAP.
    mode "partial": a rectangular window of Heisenberg coupling of strength
    J_I between qubit (site 0) and target (site 1), lasting pi/(4 J_I) --
    exactly a SWAP up to phases when nothing else acts. Optional background
    Hamiltonians act during the window (None means zero). `window_dephasing_
    rate` applies per-site dephasing during the window to every probe site,
    and to the qubit as well only if `dephase_qubit` is set; None means
    "inherit the ambient rate" (the protocol fills it in from its config;
    standalone partial_swap treats it as zero).
    """

    mode: str
    interaction_strength: float | None = None
    probe_background: Observable | None = None
    qubit_background: Observable | None = None
    window_dephasing_rate: float | None = None
    dephase_qubit: bool = False

    def __post_init__(self):
        if self.mode not in ("perfect", "partial"):
            raise DomainError(f"unknown swap mode {self.mode!r}")
        if self.mode == "partial":
            j = self.interaction_strength
            if j is None or not math.isfinite(j) or j <= 0:
                raise DomainError(f"partial swap needs J_I > 0, got {j}")
        if self.window_dephasing_rate is not None and \
                self.window_dephasing_rate < 0:
            raise DomainError("window dephasing rate must be >= 0")
        if self.qubit_background is not None and \
                self.qubit_background.register.count != 1:
            raise DomainError("qubit background must be a single-site observable")

    @classmethod
    def perfect(cls) -> "SwapSpec":
        return cls(mode="perfect")

    @classmethod
    def partial(cls, interaction_strength: float, **kw) -> "SwapSpec":
        return cls(mode="partial", interaction_strength=interaction_strength, **kw)

    @property
    def window_duration(self) -> float:
        if self.mode != "partial":
            return 0.0
        return math.pi / (4.0 * self.interaction_strength)


def window_generator(joint_register: SpinRegister, spec: SwapSpec
                     ) -> LindbladGenerator:
    """The Lindblad generator active during a partial-swap window."""
    if spec.mode != "partial":
        raise DomainError("window generator only exists for partial swaps")
    labels = joint_register.labels
    if labels[0] != 0 or 1 not in labels:
        raise DomainError("joint register must contain the qubit site 0 and "
                          "target site 1")
    net = SpinNetwork(joint_register, {(0, 1): spec.interaction_strength},
                      {(0, 1): 1.0})
    h = sectors.scatter_blocks(blocked_xxz_hamiltonian(net), joint_register.count)
    if spec.probe_background is not None:
        hp = spec.probe_background
        if hp.register.labels != labels[1:]:
            raise DomainError(
                f"probe background register {hp.register.labels} does not "
                f"match probe sites {labels[1:]}"
            )
        h = h + np.kron(np.eye(2), hp.matrix)
    if spec.qubit_background is not None:
        h = h + np.kron(spec.qubit_background.matrix,
                        np.eye(joint_register.dim // 2))
    sites = None if spec.dephase_qubit else labels[1:]
    rate = spec.window_dephasing_rate or 0.0
    return LindbladGenerator(Observable(joint_register, h), rate,
                             dephasing_sites=sites)


def partial_swap(joint_state: QuantumState, spec: SwapSpec,
                 cfg: IntegratorConfig | None = None, *,
                 _gen: LindbladGenerator | None = None) -> QuantumState:
    """Finite-duration swap: evolve qubit+probe under the window generator
    for pi/(4 J_I). Site 0 must be the qubit, site 1 the target spin.

    `_gen` lets the protocol reuse one prebuilt window generator (and its
    cached propagators) across steps instead of rebuilding per call.
    """
    gen = _gen if _gen is not None else window_generator(joint_state.register, spec)
    duration = spec.window_duration
    if gen.dephasing_rate == 0:
        return evolve_exact(joint_state, gen, duration)
    return evolve(joint_state, gen, duration, cfg)


# --------------------------------------------------------------------------
# channel-property checkers
# --------------------------------------------------------------------------

@dataclass
class CheckResult:
    """Boolean witness for a channel property check."""

    passed: bool
    deviation: float
    counterexample: QuantumState | None = None

    def __bool__(self) -> bool:
        return self.passed


def _random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def conserves_z_excitation(channel: Callable[[QuantumState], QuantumState],
                           register: SpinRegister, trials: int,
                           seed: int = 0, tol: float = 1e-9) -> CheckResult:
    """Check sum_n <sz_n> is preserved on random states; first failure wins."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    signs = sectors.dense_spin_signs(register.count)
    total = signs.sum(axis=1)
    worst = 0.0
    for _ in range(trials):
        state = QuantumState(register, dense=_random_density(rng, register.dim),
                             validate=False)
        before = float(np.real(np.diag(state.matrix)) @ total)
        after_state = channel(state)
        after = float(np.real(np.diag(after_state.matrix)) @ total)
        dev = abs(after - before)
        worst = max(worst, dev)
        if dev > tol:
            return CheckResult(False, dev, state)
    return CheckResult(True, worst)


def is_unital(channel: Callable[[QuantumState], QuantumState],
              register: SpinRegister, tol: float = 1e-9) -> CheckResult:
    """Check the maximally mixed state is a fixed point."""
    eye = QuantumState(register,
                       dense=np.eye(register.dim, dtype=complex) / register.dim,
                       validate=False)
    out = channel(eye)
    if out.is_blocked:
        out = out.to_dense()
    dev = trace_distance(eye, out)
    return CheckResult(dev <= tol, dev, None if dev <= tol else eye)
