"""Sources, receivers, sampling, source spectra, forward data generation,
and noise injection.

Receivers and sources snap to the nearest grid node (exact midpoints round
toward the lower index). The observation operator is never materialized:
sampling is fancy indexing and its adjoint is scatter-add, with duplicate
receivers kept and accumulating.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .errors import ValidationError
from .helmholtz import HelmholtzOperator, PmlProfile, assemble_A
from .model import Grid, Model, slowness2_to_velocity


@dataclass(frozen=True)
class Survey:
    """Acquisition geometry plus the inverted frequencies.

    Positions are (x, z) in meters. ``ricker_f_dom_hz`` sets the dominant
    frequency of the source spectrum used to scale each frequency's source.
    """

    sources: tuple[tuple[float, float], ...]
    receivers: tuple[tuple[float, float], ...]
    frequencies: tuple[float, ...]
    ricker_f_dom_hz: float = 5.0

    def __post_init__(self):
        if not self.sources or not self.receivers or not self.frequencies:
            raise ValidationError("survey needs >= 1 source, receiver and frequency")
        if any(f <= 0 for f in self.frequencies):
            raise ValidationError("frequencies must be > 0")
        if self.ricker_f_dom_hz <= 0:
            raise ValidationError("dominant frequency must be > 0")
        object.__setattr__(self, "sources", tuple(map(tuple, self.sources)))
        object.__setattr__(self, "receivers", tuple(map(tuple, self.receivers)))
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_receivers(self) -> int:
        return len(self.receivers)

    def subset(self, freq_indices: list[int]) -> "Survey":
        return replace(self, frequencies=tuple(self.frequencies[i] for i in freq_indices))


def sampling_indices(survey: Survey, grid: Grid) -> np.ndarray:
    """Grid node index of each receiver, order preserved, duplicates kept."""
    return np.array([grid.node_index(x, z) for (x, z) in survey.receivers], dtype=int)


def source_node_indices(survey: Survey, grid: Grid) -> np.ndarray:
    return np.array([grid.node_index(x, z) for (x, z) in survey.sources], dtype=int)


def check_inside_physical_domain(survey: Survey, grid: Grid, pml: PmlProfile) -> None:
    """Reject positions that fall inside the absorbing layers, where data
    would be meaninglessly damped."""
    lo_x = pml.n_pml * grid.dx
    hi_x = (grid.nx - 1 - pml.n_pml) * grid.dx
    lo_z = pml.n_pml * grid.dz
    hi_z = (grid.nz - 1 - pml.n_pml) * grid.dz
    for kind, positions in (("source", survey.sources), ("receiver", survey.receivers)):
        for (x, z) in positions:
            if not (lo_x <= x <= hi_x and lo_z <= z <= hi_z):
                raise ValidationError(
                    f"{kind} at (x={x}, z={z}) lies inside the absorbing layer; "
                    f"physical domain is x in [{lo_x}, {hi_x}], z in [{lo_z}, {hi_z}]"
                )


def ricker_amplitude(f: float, f_dom: float) -> float:
    """Amplitude spectrum of a Ricker wavelet with dominant frequency f_dom."""
    if f < 0 or f_dom <= 0:
        raise ValidationError("need f >= 0 and f_dom > 0")
    return (2.0 / np.sqrt(np.pi)) * (f**2 / f_dom**3) * np.exp(-(f**2) / f_dom**2)


def source_vector(
    grid: Grid, survey: Survey, src: int, freq_hz: float, amplitude: float = 1.0
) -> np.ndarray:
    """Discrete delta at the source node, scaled by the cell area and the
    Ricker spectrum at this frequency."""
    b = np.zeros(grid.n, dtype=complex)
    idx = grid.node_index(*survey.sources[src])
    b[idx] = amplitude * ricker_amplitude(freq_hz, survey.ricker_f_dom_hz) / (grid.dz * grid.dx)
    return b


def build_sources(grid: Grid, survey: Survey, amplitude: float = 1.0) -> np.ndarray:
    """All source vectors, shape (n_freq, n_sources, N)."""
    out = np.zeros((len(survey.frequencies), survey.n_sources, grid.n), dtype=complex)
    for i, f in enumerate(survey.frequencies):
        for s in range(survey.n_sources):
            out[i, s] = source_vector(grid, survey, s, f, amplitude)
    return out


@dataclass(frozen=True)
class DataSet:
    """Recorded complex data per (frequency, source): shape (n_freq, n_sources, M).

    ``noise_norms`` holds the L2 norm of the injected noise per gather when
    noise was added (used for residual-based stopping on noisy data).
    """

    entries: np.ndarray
    snr_db: float | None = None
    noise_norms: np.ndarray | None = None

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 3 or e.size == 0:
            raise ValidationError("data entries must be a non-empty (nf, ns, M) array")
        object.__setattr__(self, "entries", e)

    def subset(self, freq_indices: list[int]) -> "DataSet":
        nn = None if self.noise_norms is None else self.noise_norms[freq_indices]
        return DataSet(self.entries[freq_indices], self.snr_db, nn)


def build_operators(
    grid: Grid,
    frequencies,
    pml: PmlProfile,
    v_max: float,
) -> list[HelmholtzOperator]:
    """One Helmholtz assembly per frequency with a shared, resolved PML."""
    sigma = pml.resolve_sigma_max(grid, v_max)
    resolved = PmlProfile(pml.n_pml, sigma, pml.exponent)
    return [HelmholtzOperator.build(grid, f, resolved, v_max) for f in frequencies]


def forward_wavefields(
    m: Model,
    survey: Survey,
    pml: PmlProfile,
    amplitude: float = 1.0,
    threads: int = 1,
    operators: list[HelmholtzOperator] | None = None,
) -> np.ndarray:
    """Exact PDE solves for every (frequency, source), shape (nf, ns, N)."""
    grid = m.grid
    if operators is None:
        v_max = float(slowness2_to_velocity(m).max())
        operators = build_operators(grid, survey.frequencies, pml, v_max)
    sources = build_sources(grid, survey, amplitude)
    fields = np.zeros_like(sources)

    def solve_one_freq(i: int) -> None:
        fact = linalg.factor(assemble_A(operators[i], m))
        for s in range(survey.n_sources):
            fields[i, s] = fact.solve(sources[i, s])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(solve_one_freq, range(len(operators))))
    else:
        for i in range(len(operators)):
            solve_one_freq(i)
    return fields


def forward_model(
    m: Model,
    survey: Survey,
    pml: PmlProfile,
    amplitude: float = 1.0,
    threads: int = 1,
    operators: list[HelmholtzOperator] | None = None,
) -> DataSet:
    """Synthesize noiseless data: sample the exact wavefields at the receivers."""
    check_inside_physical_domain(survey, m.grid, pml)
    fields = forward_wavefields(m, survey, pml, amplitude, threads, operators)
    idx = sampling_indices(survey, m.grid)
    return DataSet(entries=fields[:, :, idx])


def add_noise(data: DataSet, snr_db: float, seed: int) -> DataSet:
    """Add circular complex Gaussian noise, variance set per gather so the
    expected signal-to-noise ratio equals ``snr_db``; deterministic in seed.

    An infinite ``snr_db`` is the no-noise flag and returns the data
    unchanged (fresh copy).
    """
    if not np.isfinite(snr_db):
        return DataSet(data.entries.copy(), None, None)
    nf, ns, m_rec = data.entries.shape
    rng = np.random.default_rng(seed)
    noisy = data.entries.copy()
    norms = np.zeros((nf, ns))
    for i in range(nf):
        for s in range(ns):
            gather = data.entries[i, s]
            sigma = np.linalg.norm(gather) * 10.0 ** (-snr_db / 20.0) / np.sqrt(m_rec)
            noise = sigma * (
                rng.standard_normal(m_rec) + 1j * rng.standard_normal(m_rec)
            ) / np.sqrt(2.0)
            noisy[i, s] = gather + noise
            norms[i, s] = np.linalg.norm(noise)
    return DataSet(noisy, float(snr_db), norms)
