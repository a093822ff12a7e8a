"""Reproducible experiment driver.

A :class:`RunConfig` pins every parameter and seed of an experiment; `run`
executes it, writes plot-ready CSV/JSON files plus a manifest (config,
hash, versions, derived seeds) into the output directory, and returns a
summary.  Re-running an identical config reproduces the outputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (HeatingFit, SpectrumResult, fit_power_law,
                       half_frequency_contrast, lifetime, phase_diagram,
                       dft_micromotion, dft_stroboscopic, symbol_dft)
from .codec import Message, decode, decode_margins, encode
from .dephasing import DephasingParams, model_signal, predicted_rate
from .evolution import (BlockPropagatorFactory, SignalTrace, compile_program, evolve,
                        evolve_blockwise, initial_state, total_ix, _check_norm)
from .sequences import (MonopoleSpec, SymbolStream, floquet_stream, sample_rmd,
                        thue_morse_stream)
from .spins import build_hamiltonian, compute_couplings, generate_graph
from . import serialize

KINDS = ("trace", "phase-diagram", "heating-eps", "heating-period",
         "heating-highfreq", "spectrum", "encode", "decode")
ENGINES = ("full", "dephasing")
SPECTRUM_KINDS = ("symbol", "micromotion", "stroboscopic")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Flat bag of every knob an experiment can turn.

    Fields irrelevant to the chosen `kind` are ignored but still recorded
    in the manifest, so a config file fully determines its outputs.
    """

    kind: str
    out_dir: str
    engine: str = "full"
    seed: int = 0
    threads: int = 1
    # spin system
    num_spins: int = 10
    edge_length: float | None = None
    r_min: float = 0.9
    r_max: float = 1.1
    graph_seed: int = 0
    coupling_median: float = 1.0
    coupling_model: str = "isotropic"
    decay_time: float = 0.0
    # drive timing
    pulses_per_block: int = 300
    kick_plus: int = 200
    kick_minus: int = 100
    tau: float = 0.05
    theta_x: float = math.pi / 2
    gamma_y: float = math.pi
    n_order: str = "0"
    cycles: int = 128
    realizations: int = 1
    readout_noise: float = 0.0
    # dephasing engine
    gamma_0: float = 0.0
    # sweeps
    graph_realizations: int = 1
    gamma_grid: tuple = ()
    eps_grid: tuple = ()
    tau_grid: tuple = ()
    n_orders: tuple = ()
    sweep_slope: float = 0.0
    max_cycles: int = 32768
    normalization: str = "row"
    # spectrum
    spectrum_kind: str = "micromotion"
    # codec
    text: str = ""
    trace_file: str = ""
    threshold: float = 0.0

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.cycles < 1:
            raise ConfigError("cycles must be >= 1")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.spectrum_kind not in SPECTRUM_KINDS:
            raise ConfigError(f"unknown spectrum kind {self.spectrum_kind!r}")
        if self.kind == "phase-diagram" and not self.gamma_grid:
            raise ConfigError("phase-diagram requires a gamma_grid")
        if self.kind == "heating-eps" and not self.eps_grid:
            raise ConfigError("heating-eps requires an eps_grid")
        if self.kind in ("heating-period", "heating-highfreq") and not self.tau_grid:
            raise ConfigError(f"{self.kind} requires a tau_grid")
        if self.kind == "encode" and not self.text:
            raise ConfigError("encode requires text")
        if self.kind == "decode" and not self.trace_file:
            raise ConfigError("decode requires a trace_file")
        _parse_order(self.n_order)
        for n in self.n_orders:
            _parse_order(n)

    def spec(self) -> MonopoleSpec:
        return MonopoleSpec(
            pulses_per_block=self.pulses_per_block, kick_plus=self.kick_plus,
            kick_minus=self.kick_minus, tau=self.tau, theta_x=self.theta_x,
            gamma_y=self.gamma_y,
        )

    def hash(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _parse_order(label) -> int | float:
    if isinstance(label, (int, float)) and not isinstance(label, bool):
        if label == math.inf:
            return math.inf
        if float(label).is_integer() and label >= 0:
            return int(label)
        raise ConfigError(f"invalid multipole order {label!r}")
    text = str(label).strip().lower()
    if text in ("inf", "tm", "thue-morse"):
        return math.inf
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"invalid multipole order {label!r}") from None
    if value < 0:
        raise ConfigError(f"invalid multipole order {label!r}")
    return value


def derive_seed(master: int, *key: int) -> int:
    """Stable per-task seed, independent of scheduling order."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def make_stream(order, cycles: int, seed: int, exact: bool = True,
                offset: int = 0) -> SymbolStream:
    """Stream covering `cycles` blocks for the given multipole order.

    With ``exact`` the cycle count must respect the 2**n alignment of the
    multipole; otherwise the stream is rounded up to the next multiple and
    callers simply stop evolving early.  For the deterministic n -> inf
    drive, ``offset`` selects the window that plays the role of a
    realization; ``seed`` is ignored there.
    """
    order = _parse_order(order)
    if order == math.inf:
        return thue_morse_stream(cycles, offset=offset)
    chunk = 2**order
    if exact and cycles % chunk:
        raise ConfigError(
            f"cycles ({cycles}) must be a multiple of 2**n ({chunk}) for order {order}")
    rounded = ((cycles + chunk - 1) // chunk) * chunk
    return sample_rmd(order, rounded, seed)


def _parallel_map(fn, items, threads: int):
    """Order-preserving map; results independent of worker scheduling."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class FullSystem:
    """Graph, Hamiltonian, initial state, and propagator caches for one run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.graph = generate_graph(
            config.num_spins, edge_length=config.edge_length,
            r_min=config.r_min, r_max=config.r_max, seed=config.graph_seed,
        )
        self.couplings = compute_couplings(
            self.graph, coupling_median=config.coupling_median,
            model=config.coupling_model,
        )
        self.hamiltonian = build_hamiltonian(self.couplings)
        self.psi0 = initial_state(config.num_spins, self.hamiltonian,
                                  decay_time=config.decay_time)
        self._factories: dict[float, BlockPropagatorFactory] = {}

    def factory(self, spec: MonopoleSpec) -> BlockPropagatorFactory:
        key = spec.tau
        if key not in self._factories:
            self._factories[key] = BlockPropagatorFactory(self.hamiltonian,
                                                          spec.with_gamma(math.pi))
        return self._factories[key]

    def s0(self) -> float:
        return total_ix(self.psi0, self.config.num_spins)


def blockwise_trace(system: FullSystem, stream: SymbolStream, spec: MonopoleSpec,
                    include_half: bool = True,
                    readout_noise: float = 0.0, noise_seed=None) -> SignalTrace:
    props = system.factory(spec).block_set(spec.gamma_y, include_half=include_half)
    return evolve_blockwise(stream, spec, system.hamiltonian, system.psi0,
                            propagators=props, include_half=include_half,
                            readout_noise=readout_noise, noise_seed=noise_seed)


def dephasing_trace(config: RunConfig, stream: SymbolStream, spec: MonopoleSpec,
                    noise_seed=None) -> SignalTrace:
    params = DephasingParams(spec=spec, epsilon=spec.epsilon, gamma_0=config.gamma_0)
    return model_signal(stream, params, amplitude=1.0,
                        readout_noise=config.readout_noise, noise_seed=noise_seed)


def stroboscopic_rundown(symbols: np.ndarray, props, hamiltonian, psi0,
                         max_cycles: int, stop_factor: float = 0.8) -> SignalTrace:
    """Blockwise evolution that stops soon after the 1/e crossing.

    Records only stroboscopic samples; once the envelope falls below
    ``stop_factor / e`` of its initial value the remaining cycles cannot
    move the lifetime argmin, so the run ends early.
    """
    spec = props.spec
    T = spec.block_duration
    full = props.full_ops()
    num_spins = int(round(math.log2(psi0.size)))
    psi = np.array(psi0, dtype=complex)
    values = [total_ix(psi, num_spins)]
    target = abs(values[0]) * stop_factor / math.e
    limit = min(max_cycles, symbols.size)
    for ell in range(limit):
        psi = full[int(symbols[ell])] @ psi
        values.append(total_ix(psi, num_spins))
        if (ell + 1) % 64 == 0:
            _check_norm(psi, f"cycle {ell + 1}")
        if abs(values[-1]) < target:
            break
    m = len(values) - 1
    times = T * np.arange(m + 1)
    per_block = spec.slots_per_block
    return SignalTrace(
        times=times, values=np.array(values),
        cycle_index=np.maximum(np.arange(m + 1) - 1, 0),
        pulse_index=np.where(np.arange(m + 1) == 0, 0, per_block),
        block_duration=T, num_cycles=m,
        meta={"engine": "full-blockwise", "gamma_y": spec.gamma_y, "tau": spec.tau},
    )


def measure_rate(system: FullSystem | None, config: RunConfig, spec: MonopoleSpec,
                 order, seed: int, max_cycles: int | None = None,
                 offset: int = 0) -> HeatingFit:
    """1/e decay rate of one drive realization under either engine."""
    max_cycles = max_cycles or config.max_cycles
    if config.engine == "dephasing" or system is None:
        # the model's own rate bounds the cycles needed to reach 1/e
        params = DephasingParams(spec=spec, epsilon=spec.epsilon, gamma_0=config.gamma_0)
        rate = predicted_rate(params)
        budget = max_cycles
        if rate > 0:
            budget = min(max_cycles, max(64, int(3.0 / (rate * spec.block_duration))))
        stream = make_stream(order, budget, seed, exact=False, offset=offset)
        trace = dephasing_trace(config, stream, spec)
        return lifetime(trace)
    stream = make_stream(order, max_cycles, seed, exact=False, offset=offset)
    props = system.factory(spec).block_set(spec.gamma_y, include_half=False)
    trace = stroboscopic_rundown(stream.symbols, props, system.hamiltonian,
                                 system.psi0, max_cycles)
    return lifetime(trace)


def mean_rate(systems, config: RunConfig, spec: MonopoleSpec, order,
              point_index: int, realizations: int | None = None,
              max_cycles: int | None = None) -> tuple[float, float, bool]:
    """Rate averaged over graph and drive realizations: (mean, std, all_crossed)."""
    if not isinstance(systems, (list, tuple)):
        systems = [systems]
    order_val = _parse_order(order)
    reps = realizations or config.realizations
    fits = []
    for gi, system in enumerate(systems):
        for r in range(reps):
            seed = derive_seed(config.seed, point_index, gi, r)
            # deterministic drives vary by window offset instead of seed
            offset = r if order_val == math.inf else 0
            fits.append(measure_rate(system, config, spec, order, seed,
                                     max_cycles, offset=offset))
    rates = np.array([f.rate for f in fits])
    return float(rates.mean()), float(rates.std()), all(f.crossed for f in fits)


# -- experiment handlers ----------------------------------------------------

def _run_trace(config: RunConfig, out: Path) -> dict:
    spec = config.spec()
    stream = make_stream(config.n_order, config.cycles, derive_seed(config.seed, 0, 0))
    if config.engine == "dephasing":
        trace = dephasing_trace(config, stream, spec,
                                noise_seed=derive_seed(config.seed, 0, 1))
    else:
        system = FullSystem(config)
        program = compile_program(stream, spec)
        trace = evolve(program, system.hamiltonian, system.psi0,
                       readout_noise=config.readout_noise,
                       noise_seed=derive_seed(config.seed, 0, 1))
        serialize.write_graph(out / "graph.csv", system.graph)
        serialize.write_couplings(out / "couplings.csv", system.couplings)
    serialize.write_stream(out / "stream.txt", stream)
    serialize.write_trace(out / "trace.csv", trace)
    fit = lifetime(trace)
    return {"samples": len(trace), "lifetime": fit.lifetime,
            "rate": fit.rate, "crossed": fit.crossed}


def _run_spectrum(config: RunConfig, out: Path) -> dict:
    spec = config.spec()
    system = None
    if config.engine == "full" and config.spectrum_kind != "symbol":
        system = FullSystem(config)

    def one(r: int):
        seed = derive_seed(config.seed, 0, r)
        stream = make_stream(config.n_order, config.cycles, seed)
        if config.spectrum_kind == "symbol":
            return symbol_dft(stream)
        if config.engine == "dephasing":
            trace = dephasing_trace(config, stream, spec)
        else:
            trace = blockwise_trace(system, stream, spec,
                                    include_half=config.spectrum_kind == "micromotion")
        if config.spectrum_kind == "micromotion":
            return dft_micromotion(trace, spec)
        return dft_stroboscopic(trace, spec)

    spectra = _parallel_map(one, list(range(config.realizations)), config.threads)
    amps = np.vstack([s.amplitudes for s in spectra])
    mean = SpectrumResult(omegas=spectra[0].omegas, amplitudes=amps.mean(axis=0),
                          kind=spectra[0].kind)
    serialize.write_spectrum(
        out / "spectrum.csv", mean, std=amps.std(axis=0),
        extra_meta={"realizations": config.realizations, "n_order": config.n_order,
                    "engine": config.engine, "seed": config.seed},
    )
    return {"kind": config.spectrum_kind, "realizations": config.realizations,
            "cycles": config.cycles}


def _run_phase_diagram(config: RunConfig, out: Path) -> dict:
    spec = config.spec()
    system = FullSystem(config) if config.engine == "full" else None
    order_val = _parse_order(config.n_order)
    reps = 1 if order_val == math.inf else config.realizations

    def one(task):
        i, gamma, r = task
        seed = derive_seed(config.seed, i, r)
        stream = make_stream(config.n_order, config.cycles, seed)
        gspec = spec.with_gamma(gamma)
        if config.engine == "dephasing":
            return gamma, dephasing_trace(config, stream, gspec)
        return gamma, blockwise_trace(system, stream, gspec, include_half=False)

    tasks = [(i, g, r) for i, g in enumerate(config.gamma_grid) for r in range(reps)]
    sweep = _parallel_map(one, tasks, config.threads)
    diagram = phase_diagram(sweep, n_order=config.n_order,
                            normalization=config.normalization)
    serialize.write_phase_diagram(out / "phase_diagram.csv", diagram)
    contrasts = {repr(float(g)): half_frequency_contrast(row)
                 for g, row in zip(diagram.gamma_grid, diagram.intensity)}
    serialize.write_json(out / "contrast.json", {"half_frequency_contrast": contrasts})
    return {"gammas": len(config.gamma_grid), "realizations": reps,
            "cycles": config.cycles}


def _systems_for(config: RunConfig):
    """One FullSystem per graph realization, or [None] for the dephasing engine."""
    if config.engine != "full":
        return [None]
    systems = []
    for g in range(config.graph_realizations):
        cfg = dataclasses.replace(config, graph_seed=config.graph_seed + g)
        systems.append(FullSystem(cfg))
    return systems


def _run_heating_eps(config: RunConfig, out: Path) -> dict:
    spec = config.spec()
    systems = _systems_for(config)
    orders = config.n_orders or (config.n_order,)
    rows, fits = [], {}
    for order in orders:
        base_index = 1000 * len(fits)
        gamma0_mean, gamma0_std, _ = mean_rate(
            systems, config, spec.with_gamma(math.pi), order, base_index)

        def one(task):
            j, eps = task
            return mean_rate(systems, config, spec.with_gamma(math.pi + eps),
                             order, base_index + 1 + j)

        results = _parallel_map(one, list(enumerate(config.eps_grid)), config.threads)
        eps = np.array(config.eps_grid, dtype=float)
        rates = np.array([r[0] for r in results])
        excess = rates - gamma0_mean
        usable = excess > 0
        entry = {"rate_at_pi": gamma0_mean, "points_used": int(usable.sum())}
        if usable.sum() >= 3:
            fit = fit_power_law(np.abs(eps[usable]), excess[usable])
            entry.update(exponent=fit.exponent, stderr=fit.stderr)
        else:
            entry["error"] = "fewer than 3 points above the reference rate"
        fits[str(order)] = entry
        for j, e in enumerate(eps):
            rows.append((str(order), e, rates[j], results[j][1],
                         excess[j], results[j][2]))
    _write_heating_csv(out / "heating_eps.csv", "epsilon", rows)
    serialize.write_json(out / "fits.json", fits)
    return {"fits": fits}


def _run_heating_period(config: RunConfig, out: Path) -> dict:
    base = config.spec()
    systems = _systems_for(config)
    orders = config.n_orders or (config.n_order,)
    rows, fits = [], {}
    for k, order in enumerate(orders):
        def one(task):
            j, tau = task
            spec = base.with_tau(tau)
            gamma = math.pi + config.sweep_slope * spec.block_duration
            return mean_rate(systems, config, spec.with_gamma(gamma), order,
                             2000 * k + j)

        results = _parallel_map(one, list(enumerate(config.tau_grid)), config.threads)
        periods = np.array([base.with_tau(t).block_duration for t in config.tau_grid])
        rates = np.array([r[0] for r in results])
        fit = fit_power_law(periods, rates)
        fits[str(order)] = {"exponent": fit.exponent, "stderr": fit.stderr}
        for j, T in enumerate(periods):
            rows.append((str(order), T, rates[j], results[j][1], rates[j],
                         results[j][2]))
    _write_heating_csv(out / "heating_period.csv", "period", rows)
    serialize.write_json(out / "fits.json", fits)
    return {"fits": fits}


def _run_heating_highfreq(config: RunConfig, out: Path) -> dict:
    base = config.spec()
    systems = _systems_for(config)
    orders = config.n_orders or ("0", "1", "3", "inf")
    rows = []
    summary = {}
    for k, order in enumerate(orders):
        def one(task):
            j, tau = task
            spec = base.with_tau(tau)
            gamma = math.pi + config.sweep_slope * spec.block_duration
            return mean_rate(systems, config, spec.with_gamma(gamma), order,
                             3000 * k + j)

        results = _parallel_map(one, list(enumerate(config.tau_grid)), config.threads)
        periods = np.array([base.with_tau(t).block_duration for t in config.tau_grid])
        rates = np.array([r[0] for r in results])
        crossed = [r[2] for r in results]
        ok = np.array(crossed)
        if ok.sum() >= 3:
            fit = fit_power_law(periods[ok], rates[ok])
            summary[str(order)] = {"exponent": fit.exponent, "stderr": fit.stderr,
                                   "smallest_period_rate": float(rates[0])}
        for j, T in enumerate(periods):
            rows.append((str(order), T, rates[j], results[j][1], rates[j], crossed[j]))
    _write_heating_csv(out / "heating_highfreq.csv", "period", rows)
    serialize.write_json(out / "fits.json", summary)
    return {"fits": summary}


def _write_heating_csv(path: Path, xname: str, rows):
    lines = [f"n_order,{xname},rate_mean,rate_std,excess_rate,crossed"]
    for order, x, mean, std, excess, crossed in rows:
        lines.append(f"{order},{x!r},{mean!r},{std!r},{excess!r},{int(crossed)}")
    path.write_text("\n".join(lines) + "\n")


def _run_encode(config: RunConfig, out: Path) -> dict:
    message = Message(config.text)
    stream = encode(message)
    spec = config.spec()
    serialize.write_stream(out / "stream.txt", stream)
    if config.engine == "dephasing":
        trace = dephasing_trace(config, stream, spec,
                                noise_seed=derive_seed(config.seed, 0, 1))
    else:
        system = FullSystem(config)
        trace = blockwise_trace(system, stream, spec,
                                readout_noise=config.readout_noise,
                                noise_seed=derive_seed(config.seed, 0, 1))
    serialize.write_trace(out / "trace.csv", trace)
    return {"characters": len(message.text), "cycles": len(stream)}


def _run_decode(config: RunConfig, out: Path) -> dict:
    trace = serialize.read_trace(config.trace_file)
    message = decode(trace, threshold=config.threshold)
    margins = decode_margins(trace)
    serialize.write_json(out / "decoded.json", {
        "text": message.text,
        "margins": [float(m) for m in margins],
        "threshold": config.threshold,
    })
    return {"text": message.text, "cycles": int(margins.size)}


_HANDLERS = {
    "trace": _run_trace,
    "phase-diagram": _run_phase_diagram,
    "heating-eps": _run_heating_eps,
    "heating-period": _run_heating_period,
    "heating-highfreq": _run_heating_highfreq,
    "spectrum": _run_spectrum,
    "encode": _run_encode,
    "decode": _run_decode,
}


def run(config: RunConfig) -> dict:
    """Validate, execute, and write the manifest; returns a summary dict."""
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = _HANDLERS[config.kind](config, out)
    manifest = {
        "config": dataclasses.asdict(config),
        "config_hash": config.hash(),
        "versions": {"rondeau": __version__, "numpy": np.__version__},
        "summary": summary,
        "outputs": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
    }
    serialize.write_json(out / "manifest.json", manifest)
    return summary
