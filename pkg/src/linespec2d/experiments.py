"""Randomized recovery experiments: success rate versus sample count, and
dual polynomial surfaces for a single drawn signal.

A trial is fully determined by ``(seed, trial index, m)``: the signal comes
from the stream labelled ``signal`` and the sample set from ``samples/<m>``
(see :mod:`linespec2d.rng`). Both methods see the same signal and sample set,
so their outcomes are paired.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

from . import sdp
from .certificate import (CertificateError, SubbandPrior, build_unweighted, build_weighted,
                          extract_certificate, prior_complement)
from .recovery import eval_dual_poly, find_peaks, score_frequencies
from .rng import Stream, stream_key
from .signal_model import Frequency2D, SampleSet, SpectralSignal, synthesize
from .trig import RawSubband

logger = logging.getLogger(__name__)

FIG2_REGIONS = (RawSubband(0.0, 0.2, 0.0, 0.2), RawSubband(0.5, 0.7, 0.5, 0.7))
FIG3_REGION = RawSubband(0.1, 0.4, 0.1, 0.4)
DEFAULT_M_LIST = (10, 15, 20, 25, 30, 35, 40, 45, 49)
METHODS = ("weighted", "unweighted")
DEFAULT_SOLVER_TOL = 1e-5
PRNG_NAME = "Philox-4x64 keyed by SHA-256(seed/trial/label), Box-Muller normals"


class ConfigError(ValueError):
    pass


def fig2_priors() -> tuple[SubbandPrior, ...]:
    return tuple(SubbandPrior.from_weight(r, 1.0) for r in FIG2_REGIONS)


def fig3_priors() -> tuple[SubbandPrior, ...]:
    return tuple(prior_complement([SubbandPrior.from_weight(FIG3_REGION, 0.242)], 71.42))


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of a sweep or surface run.

    ``split`` fixes how many of the ``s`` components land in each region;
    ``None`` draws the region of every component with probability
    proportional to its area. Magnitudes are ``amplitude_offset + chi2(1)``
    with uniform phase. An empty ``priors`` runs the unweighted
    method only.
    """

    n: int = 7
    s: int = 4
    trials: int = 100
    seed: int = 0
    m_list: tuple[int, ...] = DEFAULT_M_LIST
    priors: tuple[SubbandPrior, ...] = field(default_factory=fig2_priors)
    regions: tuple[RawSubband, ...] = FIG2_REGIONS
    split: tuple[int, ...] | None = (2, 2)
    amplitude_offset: float = 0.5
    resolution: int = 256
    radius: float = 1e-2
    eps: float = 1e-3
    solver_tol: float = DEFAULT_SOLVER_TOL
    covering: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "m_list", tuple(int(m) for m in self.m_list))
        object.__setattr__(self, "priors", tuple(self.priors))
        object.__setattr__(self, "regions", tuple(self.regions))
        if self.split is not None:
            object.__setattr__(self, "split", tuple(int(c) for c in self.split))
        self.validate()

    def validate(self) -> None:
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not 1 <= self.s <= self.n ** 2:
            raise ConfigError(f"s must lie in [1, n^2], got {self.s}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.m_list:
            raise ConfigError("m list is empty")
        for m in self.m_list:
            if not 1 <= m <= self.n ** 2:
                raise ConfigError(f"measurement count {m} outside [1, n^2]")
        if not self.regions:
            raise ConfigError("at least one frequency region is required")
        for r in self.regions:
            if r.fh1 > 1.0 or r.fh2 > 1.0:
                raise ConfigError(f"region {r} leaves the unit square")
        if self.split is None:
            if sum(r.area for r in self.regions) <= 0:
                raise ConfigError("regions have zero total area")
        elif len(self.split) != len(self.regions) or sum(self.split) != self.s \
                or min(self.split) < 0:
            raise ConfigError(f"split {self.split} does not distribute s={self.s} "
                              f"over {len(self.regions)} regions")
        if self.resolution < 4 * self.n:
            raise ConfigError(f"resolution must be at least 4n = {4 * self.n}")
        if not self.amplitude_offset > 0:
            raise ConfigError("amplitude_offset must be positive")
        if not (self.radius > 0 and 0 < self.eps < 1 and self.solver_tol > 0):
            raise ConfigError("radius, eps and solver_tol must be positive (eps < 1)")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @property
    def methods(self) -> tuple[str, ...]:
        return METHODS if self.priors else ("unweighted",)

    def to_json(self) -> dict:
        d = asdict(self)
        d["priors"] = priors_to_json(self.priors)
        d["regions"] = [[r.fl1, r.fh1, r.fl2, r.fh2] for r in self.regions]
        return d

    @classmethod
    def from_json(cls, obj: dict, **overrides) -> "ExperimentConfig":
        d = dict(obj)
        if "priors" in d:
            d["priors"] = parse_priors(d["priors"])
        if "regions" in d:
            d["regions"] = tuple(RawSubband(*r) for r in d["regions"])
        d.update(overrides)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def fig2_config(**overrides) -> ExperimentConfig:
    """Two-band sweep; the default m list is capped at ``n^2`` when ``n`` changes."""
    if "m_list" not in overrides:
        full = overrides.get("n", 7) ** 2
        overrides["m_list"] = tuple(m for m in DEFAULT_M_LIST if m < full) + (full,)
    return ExperimentConfig(**overrides)


def fig3_config(**overrides) -> ExperimentConfig:
    """Single band plus complement, full observation."""
    base = dict(m_list=(overrides.get("n", 7) ** 2,), priors=fig3_priors(),
                regions=(FIG3_REGION,), split=None)
    base.update(overrides)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# Prior files


def parse_priors(obj) -> tuple[SubbandPrior, ...]:
    """Read ``[{"f1": [lo, hi], "f2": [lo, hi], "prob": p}, ..., {"complement": true, "prob": p}]``.

    The string ``"none"`` (or an empty list) means no prior.
    """
    if obj == "none" or obj is None:
        return ()
    if not isinstance(obj, list):
        raise ConfigError("prior file must hold a JSON list")
    bands, comp = [], None
    for entry in obj:
        try:
            prob = float(entry["prob"])
            if entry.get("complement"):
                if comp is not None:
                    raise ConfigError("more than one complement entry")
                comp = prob
            else:
                (lo1, hi1), (lo2, hi2) = entry["f1"], entry["f2"]
                bands.append(SubbandPrior(RawSubband(lo1, hi1, lo2, hi2), prob))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad prior entry {entry!r}: {exc}") from exc
    if comp is not None:
        try:
            return tuple(prior_complement(bands, 1.0 / comp))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return tuple(bands)


def priors_to_json(priors: Sequence[SubbandPrior]) -> list[dict]:
    out = []
    for p in priors:
        if p.complement:
            out.append({"complement": True, "prob": p.probability})
        else:
            r = p.raw
            out.append({"f1": [r.fl1, r.fh1], "f2": [r.fl2, r.fh2], "prob": p.probability})
    return out


def load_priors(path: str | Path) -> tuple[SubbandPrior, ...]:
    if str(path) == "none":
        return ()
    try:
        return parse_priors(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read prior file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Draws


def draw_signal(config: ExperimentConfig, trial: int) -> SpectralSignal:
    """Random signal of ``config.s`` components for one trial.

    Draw order on the ``signal`` stream: region indices (only without a fixed
    split), then ``(f1, f2)`` uniforms per component, then ``s`` normals for
    the magnitudes ``offset + z^2``, then ``s`` phase uniforms.
    """
    st = Stream(config.seed, trial, "signal")
    regions = config.regions
    if config.split is None:
        cum = np.cumsum([r.area for r in regions])
        picks = [int(np.searchsorted(cum, u * cum[-1], side="right")) for u in st.uniform(config.s)]
        picks = [min(p, len(regions) - 1) for p in picks]
    else:
        picks = [i for i, c in enumerate(config.split) for _ in range(c)]
    u = st.uniform(2 * config.s).reshape(config.s, 2)
    freqs = [Frequency2D(regions[i].fl1 + a * (regions[i].fh1 - regions[i].fl1),
                         regions[i].fl2 + b * (regions[i].fh2 - regions[i].fl2))
             for i, (a, b) in zip(picks, u)]
    mags = config.amplitude_offset + st.chi2_1(config.s)
    phases = 2.0 * np.pi * st.uniform(config.s)
    amps = mags * np.exp(1j * phases)
    return SpectralSignal(config.n, tuple(zip(freqs, amps)))


def draw_samples(config: ExperimentConfig, trial: int, m: int) -> SampleSet:
    flat = Stream(config.seed, trial, f"samples/{m}").choose(config.n ** 2, m)
    return SampleSet.from_flat(config.n, np.sort(flat))


# ---------------------------------------------------------------------------
# Trials


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    m: int
    method: str
    signal: SpectralSignal
    success: bool
    errors: tuple[float, ...]
    peaks: int
    status: str
    iterations: int
    wall_time: float

    def to_json(self) -> dict:
        return {"trial": self.trial, "seed": self.seed, "m": self.m, "method": self.method,
                "signal_key": stream_key(self.seed, self.trial, "signal"),
                "signal": self.signal.to_json(), "success": self.success,
                "errors": [e if math.isfinite(e) else None for e in self.errors],
                "peaks": self.peaks, "status": self.status, "iterations": self.iterations,
                "wall_time": self.wall_time}


def _program(config: ExperimentConfig, method: str, x, samples: SampleSet):
    if method == "unweighted":
        return build_unweighted(x, samples)
    return build_weighted(x, samples, config.priors, config.covering)


def run_trial(config: ExperimentConfig, trial: int, m: int, method: str) -> TrialRecord:
    """Draw, solve, recover and score one trial; solver trouble is a failure, not an error."""
    if method not in config.methods:
        raise ConfigError(f"method {method!r} not available for this config")
    signal = draw_signal(config, trial)
    samples = draw_samples(config, trial, m)
    x = synthesize(signal)
    t0 = time.perf_counter()
    program = _program(config, method, x, samples)
    sol = sdp.solve(program.problem, config.solver_tol)
    success, errors, peaks = False, (math.inf,) * signal.r, 0
    if sol.optimal:
        try:
            cert = extract_certificate(program, sol)
        except CertificateError as exc:
            logger.warning("trial %d m=%d %s: %s", trial, m, method, exc)
        else:
            families = None if method == "unweighted" else program.families
            found = find_peaks(eval_dual_poly(cert, config.resolution), families, config.eps)
            result = score_frequencies(signal, found, config.radius)
            success, errors, peaks = result.success, result.errors, len(found)
    return TrialRecord(trial, config.seed, m, method, signal, success, errors, peaks,
                       sol.status.value, sol.iterations, time.perf_counter() - t0)


def _run_cell(args) -> list[TrialRecord]:
    config, trial, m = args
    return [run_trial(config, trial, m, method) for method in config.methods]


def run_trials(config: ExperimentConfig, cells: Iterable[tuple[int, int]]) -> list[TrialRecord]:
    """Run every method on each ``(trial, m)`` cell; output order follows ``cells``."""
    jobs = [(config, t, m) for t, m in cells]
    if config.workers == 1:
        chunks = map(_run_cell, jobs)
        return [r for chunk in chunks for r in chunk]
    with ProcessPoolExecutor(config.workers) as pool:
        return [r for chunk in pool.map(_run_cell, jobs) for r in chunk]


# ---------------------------------------------------------------------------
# Sweep


@dataclass(frozen=True)
class SweepRow:
    m: int
    method: str
    trials: int
    successes: int
    rate: float
    ci_lo: float
    ci_hi: float


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def summarize(records: Sequence[TrialRecord]) -> list[SweepRow]:
    groups: dict[tuple[int, str], list[bool]] = {}
    for r in records:
        groups.setdefault((r.m, r.method), []).append(r.success)
    rows = []
    for (m, method), flags in sorted(groups.items(), key=lambda kv: (kv[0][0], METHODS.index(kv[0][1]))):
        k, t = sum(flags), len(flags)
        lo, hi = wilson_interval(k, t)
        rows.append(SweepRow(m, method, t, k, k / t, lo, hi))
    return rows


@dataclass(frozen=True)
class SweepReport:
    config: ExperimentConfig
    rows: tuple[SweepRow, ...]
    records: tuple[TrialRecord, ...]

    @property
    def failure_fraction(self) -> float:
        bad = sum(r.status == sdp.Status.NUMERICAL_FAILURE.value for r in self.records)
        return bad / max(len(self.records), 1)

    @property
    def systematic_failure(self) -> bool:
        return self.failure_fraction > 0.5

    def rate(self, m: int, method: str) -> SweepRow:
        for row in self.rows:
            if row.m == m and row.method == method:
                return row
        raise KeyError((m, method))

    def write(self, out: str | Path) -> None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "method", "trials", "successes", "rate", "ci_lo", "ci_hi"])
            for r in self.rows:
                w.writerow([r.m, r.method, r.trials, r.successes, f"{r.rate:.6f}",
                            f"{r.ci_lo:.6f}", f"{r.ci_hi:.6f}"])
        with open(out / "trials.jsonl", "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec.to_json()) + "\n")
        summary = {"kind": "sweep", "config": self.config.to_json(), "prng": PRNG_NAME,
                   "component_split": self.config.split, "m_list": self.config.m_list,
                   "numerical_failure_fraction": self.failure_fraction,
                   "rows": [asdict(r) for r in self.rows]}
        (out / "summary.json").write_text(json.dumps(summary, indent=2))


def run_sweep(config: ExperimentConfig, out: str | Path | None = None) -> SweepReport:
    cells = [(t, m) for m in config.m_list for t in range(config.trials)]
    records = run_trials(config, cells)
    report = SweepReport(config, tuple(summarize(records)), tuple(records))
    if out is not None:
        report.write(out)
    return report


# ---------------------------------------------------------------------------
# Dual polynomial surfaces


@dataclass(frozen=True)
class SurfaceResult:
    method: str
    grid: object
    peaks: tuple[Frequency2D, ...]
    success: bool
    status: str
    objective: float | None


def run_dualpoly(config: ExperimentConfig, trial: int = 0,
                 out: str | Path | None = None) -> dict[str, SurfaceResult]:
    """Solve every method on one drawn signal and keep the full ``|Q|`` surfaces.

    Uses the largest entry of ``config.m_list`` as the sample count.
    """
    m = max(config.m_list)
    signal = draw_signal(config, trial)
    samples = draw_samples(config, trial, m)
    x = synthesize(signal)
    results = {}
    for method in config.methods:
        program = _program(config, method, x, samples)
        sol = sdp.solve(program.problem, config.solver_tol)
        if not sol.optimal:
            results[method] = SurfaceResult(method, None, (), False, sol.status.value, None)
            continue
        cert = extract_certificate(program, sol)
        families = None if method == "unweighted" else program.families
        grid = eval_dual_poly(cert, config.resolution)
        peaks = tuple(find_peaks(grid, families, config.eps))
        ok = score_frequencies(signal, peaks, config.radius).success
        results[method] = SurfaceResult(method, grid, peaks, ok, sol.status.value, cert.objective)

    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for method, res in results.items():
            if res.grid is not None:
                with open(out / f"surface_{method}.csv", "w", newline="") as fh:
                    res.grid.write_csv(fh)
        summary = {
            "kind": "dualpoly", "config": config.to_json(), "prng": PRNG_NAME,
            "trial": trial, "m": m, "signal": signal.to_json(),
            "true_frequencies": [[f.f1, f.f2] for f in signal.frequencies],
            "methods": {k: {"status": v.status, "objective": v.objective, "success": v.success,
                            "peaks": [[p.f1, p.f2] for p in v.peaks]}
                        for k, v in results.items()},
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return results


def replay(record: TrialRecord, config: ExperimentConfig) -> TrialRecord:
    """Re-run the trial behind ``record`` with the same config."""
    return run_trial(replace(config, seed=record.seed), record.trial, record.m, record.method)
