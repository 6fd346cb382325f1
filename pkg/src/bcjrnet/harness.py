"""Monte-Carlo symbol-error-rate evaluation.

Runs the detectors over seeded random blocks, sweeps SNR and channel draws
under the perfect-knowledge and noisy-estimate scenarios, and provides the
brute-force enumeration oracle used to verify the trellis engine.

All randomness derives from the config's master seed through fixed-purpose
substreams, so every record is reproducible and sweep points are independent
jobs. A manifest alongside the outputs records completed points; re-running
an interrupted sweep computes only the missing ones.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import stats

from . import __version__
from .channels import (
    ChannelSpec,
    decay_profile,
    perturb_taps,
    poisson_rates,
    random_symbols,
    sample_block,
    signal_levels,
    snr_from_db,
    substream,
    Family,
)
from .config import (
    DETECTOR_BCJRNET,
    DETECTOR_EXACT,
    SCENARIO_PERFECT,
    SCENARIO_UNCERTAIN,
    ConfigError,
    ExperimentConfig,
    config_hash,
)
from .exact import ExactNode
from .kernels import ACTIVE_IMPL
from .learned import LearnedNode, build_training_set, train_bcjrnet
from .trellis import FunctionNodeBackend, PosteriorTable, map_detect, symbol_posterior

__all__ = [
    "SerRecord",
    "bruteforce_map_oracle",
    "run_ser_point",
    "run_sweep",
    "oracle_check",
    "write_records_csv",
    "summarize",
]

# substream purpose tags
_TRAIN_PERFECT = 0
_PERTURB_EXACT = 1
_PERTURB_TRAIN = 2
_TRAIN_UNCERTAIN = 3
_TEST = 4
_ORACLE = 5
_CLASSIFIER = 7

_ENUM_LIMIT = 16384  # |X|^n cap for the enumeration oracle (n <= 14 binary)


@dataclass(frozen=True)
class SerRecord:
    """One Monte-Carlo measurement row."""

    detector: str
    scenario: str
    snr_db: float
    gamma: float
    errors: int
    trials: int
    ser: float
    failures: int = 0  # blocks where detection failed and was scored all-errors

    def __post_init__(self) -> None:
        if not 0 <= self.errors <= self.trials:
            raise ValueError("errors must lie in [0, trials]")
        if abs(self.ser - self.errors / self.trials) > 1e-15:
            raise ValueError("ser must equal errors / trials")


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic integer child seed for (seed, keys)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def bruteforce_map_oracle(y_block: np.ndarray, spec: ChannelSpec) -> PosteriorTable:
    """Exact per-symbol posteriors by enumerating every input sequence.

    Sums the joint over all |X|^n symbol sequences and all |X|^L uniform
    initial states - the same prior model the trellis engine uses - with
    scipy densities, independent of the engine's likelihood code.
    """
    y = np.asarray(y_block, dtype=np.float64)
    n = y.shape[0]
    q = spec.alphabet.size
    num_states = spec.num_states
    if q**n > _ENUM_LIMIT:
        raise ValueError(f"enumeration oracle rejects n={n}: {q}^{n} sequences is too many")
    if spec.family is Family.ISI_AWGN:
        like = stats.norm.pdf(y[:, None], loc=signal_levels(spec)[None, :])
    else:
        like = stats.poisson.pmf(y[:, None], mu=poisson_rates(spec)[None, :])
    seqs = np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64)
    base = q ** (spec.memory - 1)
    cols = np.arange(n)
    post = np.zeros((n, q))
    for s0 in range(num_states):
        states = np.empty_like(seqs)
        state = np.full(seqs.shape[0], s0, dtype=np.int64)
        for t in range(n):
            state = seqs[:, t] * base + state // q
            states[:, t] = state
        weights = like[cols[None, :], states].prod(axis=1)
        for e in range(q):
            post[:, e] += (weights[:, None] * (seqs == e)).sum(axis=0)
    post /= post.sum(axis=1, keepdims=True)
    return PosteriorTable(post, spec.alphabet)


# ---------------------------------------------------------------------------
# SER measurement
# ---------------------------------------------------------------------------


def _block_sizes(total: int, block_len: int) -> list[int]:
    sizes = [block_len] * (total // block_len)
    if total % block_len:
        sizes.append(total % block_len)
    return sizes


def _count_block_errors(
    backend: FunctionNodeBackend, x_block: np.ndarray, y_block: np.ndarray
) -> tuple[int, int]:
    """(symbol errors, failed flag); a failed block scores all-errors."""
    try:
        decisions = map_detect(y_block, backend)
    except FloatingPointError:
        return len(x_block), 1
    return int(np.count_nonzero(decisions != x_block)), 0


def run_ser_point(
    detector: str,
    scenario: str,
    backend: FunctionNodeBackend,
    spec: ChannelSpec,
    test_size: int,
    seed: int,
    block_len: int = 1000,
    snr_db: float | None = None,
    gamma: float | None = None,
) -> SerRecord:
    """Transmit seeded random blocks through ``spec`` and score ``backend``.

    Deterministic given ``seed``; per-block randomness comes from substreams
    so the block count does not change the drawn data.
    """
    errors = 0
    failures = 0
    for b, size in enumerate(_block_sizes(test_size, block_len)):
        rng = substream(seed, b)
        x = random_symbols(spec.alphabet, size, rng)
        y = sample_block(spec, x, rng)
        block_errors, failed = _count_block_errors(backend, x, y)
        errors += block_errors
        failures += failed
    if snr_db is None:
        snr_db = 10.0 * math.log10(spec.snr)
    if gamma is None:
        gamma = spec.profile.gamma if spec.profile.gamma is not None else float("nan")
    return SerRecord(
        detector, scenario, snr_db, gamma, errors, test_size, errors / test_size, failures
    )


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


def _training_blocks(cfg: ExperimentConfig, spec: ChannelSpec, purpose: int, si: int, gj: int,
                     extra: tuple[int, ...] = ()) -> tuple[list[np.ndarray], list[np.ndarray]]:
    xs, ys = [], []
    for tb, size in enumerate(_block_sizes(cfg.train_size, cfg.block_len)):
        rng = substream(cfg.seed, purpose, si, gj, *extra, tb)
        x = random_symbols(spec.alphabet, size, rng)
        xs.append(x)
        ys.append(sample_block(spec, x, rng))
    return xs, ys


def train_detector(cfg: ExperimentConfig, scenario: str, true_spec: ChannelSpec,
                   si: int = 0, gj: int = 0) -> BcjrnetFit:
    """Fit a learned node for one sweep point (or a standalone config).

    Perfect scenario trains on samples of the true channel; the uncertain
    scenario pools samples from ``uncertain_realizations`` independently
    perturbed tap estimates, keeping the same total budget.
    """
    if scenario == SCENARIO_PERFECT:
        xs, ys = _training_blocks(cfg, true_spec, _TRAIN_PERFECT, si, gj)
    else:
        # pool samples from independently perturbed tap estimates
        xs, ys = [], []
        reals = cfg.uncertain_realizations
        sizes = [cfg.train_size // reals] * reals
        for r in range(cfg.train_size % reals):
            sizes[r] += 1
        for r, size in enumerate(sizes):
            noisy = perturb_taps(
                true_spec.profile, cfg.sigma_e_sq, substream(cfg.seed, _PERTURB_TRAIN, si, gj, r)
            )
            noisy_spec = replace(true_spec, profile=noisy)
            rng = substream(cfg.seed, _TRAIN_UNCERTAIN, si, gj, r)
            x = random_symbols(true_spec.alphabet, size, rng)
            xs.append(x)
            ys.append(sample_block(noisy_spec, x, rng))
    dataset = build_training_set(xs, ys, cfg.memory, true_spec.alphabet)
    scen_id = 0 if scenario == SCENARIO_PERFECT else 1
    train_config = cfg.classifier.to_train_config(
        derive_seed(cfg.seed, _CLASSIFIER, si, gj, scen_id)
    )
    return train_bcjrnet(
        dataset,
        true_spec.alphabet,
        cfg.memory,
        train_config,
        cfg.mixture.to_em_config(),
        cfg.mixture.components,
    )


def _build_backend(cfg: ExperimentConfig, si: int, gj: int, detector: str, scenario: str,
                   true_spec: ChannelSpec) -> FunctionNodeBackend:
    if detector == DETECTOR_EXACT:
        if scenario == SCENARIO_PERFECT:
            return ExactNode(true_spec)
        noisy = perturb_taps(
            true_spec.profile, cfg.sigma_e_sq, substream(cfg.seed, _PERTURB_EXACT, si, gj)
        )
        return ExactNode(replace(true_spec, profile=noisy))
    return train_detector(cfg, scenario, true_spec, si, gj).node


def run_cell(cfg: ExperimentConfig, si: int, gj: int) -> list[SerRecord]:
    """All (detector, scenario) records for one (snr, gamma) sweep point.

    Every backend at the point is scored on the same test blocks, drawn from
    the true channel, which pairs the comparisons.
    """
    snr_db = cfg.snr_db[si]
    gamma = float(cfg.gamma_grid.values()[gj])
    true_spec = ChannelSpec(cfg.family, decay_profile(gamma, cfg.memory), snr_from_db(snr_db))
    blocks = []
    for b, size in enumerate(_block_sizes(cfg.test_size, cfg.block_len)):
        rng = substream(cfg.seed, _TEST, si, gj, b)
        x = random_symbols(true_spec.alphabet, size, rng)
        blocks.append((x, sample_block(true_spec, x, rng)))
    records = []
    for scenario in cfg.scenarios:
        for detector in cfg.detectors:
            backend = _build_backend(cfg, si, gj, detector, scenario, true_spec)
            errors = 0
            failures = 0
            for x, y in blocks:
                block_errors, failed = _count_block_errors(backend, x, y)
                errors += block_errors
                failures += failed
            records.append(
                SerRecord(
                    detector, scenario, snr_db, gamma,
                    errors, cfg.test_size, errors / cfg.test_size, failures,
                )
            )
    return records


def _record_sort_key(rec: SerRecord):
    return (rec.detector, rec.scenario, rec.snr_db, rec.gamma)


def _atomic_write(path: str, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


class SweepManifest:
    """Completion ledger for a sweep's (snr, gamma) points."""

    def __init__(self, path: str, cfg: ExperimentConfig):
        self.path = path
        self.cfg_hash = config_hash(cfg)
        self.seed = cfg.seed
        self.points: dict[str, list[dict]] = {}
        if os.path.exists(path):
            with open(path) as fh:
                stored = json.load(fh)
            if stored.get("config_sha256") != self.cfg_hash:
                raise ConfigError(
                    f"{path}: manifest belongs to a different config "
                    f"({stored.get('config_sha256')!r}); use a fresh output directory"
                )
            self.points = stored["points"]

    def done(self, si: int, gj: int) -> bool:
        return f"{si}:{gj}" in self.points

    def records_for(self, si: int, gj: int) -> list[SerRecord]:
        return [SerRecord(**row) for row in self.points[f"{si}:{gj}"]]

    def mark(self, si: int, gj: int, records: list[SerRecord]) -> None:
        self.points[f"{si}:{gj}"] = [asdict(rec) for rec in records]
        payload = {
            "config_sha256": self.cfg_hash,
            "seed": self.seed,
            "version": __version__,
            "kernel": ACTIVE_IMPL,
            "points": self.points,
        }
        _atomic_write(self.path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_records_csv(records: list[SerRecord], path: str) -> None:
    """Exact column layout: detector, scenario, snr_db, gamma, errors, trials, ser."""
    lines = ["detector,scenario,snr_db,gamma,errors,trials,ser"]
    for rec in records:
        lines.append(
            f"{rec.detector},{rec.scenario},{rec.snr_db!r},{rec.gamma!r},"
            f"{rec.errors},{rec.trials},{rec.ser!r}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def summarize(records: list[SerRecord]) -> dict:
    """Per-SNR aggregate SER per detector/scenario.

    ``mean_ser`` pools errors over trials; ``geomean_ser`` is the geometric
    mean of the per-gamma SERs (exactly 0 if any draw saw zero errors).
    """
    grouped: dict[tuple[str, str, float], list[SerRecord]] = {}
    for rec in records:
        grouped.setdefault((rec.detector, rec.scenario, rec.snr_db), []).append(rec)
    summary: dict = {}
    for (detector, scenario, snr_db), group in sorted(grouped.items()):
        sers = np.array([rec.ser for rec in group])
        errors = int(sum(rec.errors for rec in group))
        trials = int(sum(rec.trials for rec in group))
        geomean = 0.0 if np.any(sers == 0) else float(np.exp(np.mean(np.log(sers))))
        summary.setdefault(detector, {}).setdefault(scenario, {})[f"{snr_db:g}"] = {
            "geomean_ser": geomean,
            "mean_ser": errors / trials,
            "errors": errors,
            "trials": trials,
        }
    return summary


def run_sweep(
    cfg: ExperimentConfig,
    out_dir: str,
    jobs: int = 1,
    progress: bool = False,
) -> list[SerRecord]:
    """Evaluate every sweep point, resuming from the manifest if present.

    Writes ``ser.csv``, ``summary.json``, and ``manifest.json`` into
    ``out_dir``. With ``jobs > 1`` points run in separate processes; error
    counts are integers summed per point, so results do not depend on
    completion order.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest = SweepManifest(os.path.join(out_dir, "manifest.json"), cfg)
    cells = [
        (si, gj)
        for si in range(len(cfg.snr_db))
        for gj in range(cfg.gamma_grid.count)
    ]
    pending = [cell for cell in cells if not manifest.done(*cell)]
    if jobs <= 1:
        for si, gj in pending:
            manifest.mark(si, gj, run_cell(cfg, si, gj))
            if progress:
                print(f"done snr={cfg.snr_db[si]:g} dB gamma index {gj}", flush=True)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(run_cell, cfg, si, gj): (si, gj) for si, gj in pending}
            for future in as_completed(futures):
                si, gj = futures[future]
                manifest.mark(si, gj, future.result())
                if progress:
                    print(f"done snr={cfg.snr_db[si]:g} dB gamma index {gj}", flush=True)
    records = []
    for si, gj in cells:
        records.extend(manifest.records_for(si, gj))
    records.sort(key=_record_sort_key)
    write_records_csv(records, os.path.join(out_dir, "ser.csv"))
    _atomic_write(
        os.path.join(out_dir, "summary.json"),
        json.dumps(summarize(records), indent=2, sort_keys=True) + "\n",
    )
    return records


# ---------------------------------------------------------------------------
# Oracle check
# ---------------------------------------------------------------------------


def oracle_check(
    cfg: ExperimentConfig, instances: int = 100, max_n: int = 10
) -> tuple[float, int]:
    """Compare engine posteriors against the enumeration oracle.

    Runs ``instances`` random short blocks (n in 1..max_n) at random grid
    SNRs and gamma draws; returns the max abs posterior error and the
    instance count.
    """
    rng = substream(cfg.seed, _ORACLE)
    max_err = 0.0
    for _ in range(instances):
        n = int(rng.integers(1, max_n + 1))
        gamma = float(rng.uniform(cfg.gamma_grid.low, cfg.gamma_grid.high))
        snr_db = float(rng.choice(np.asarray(cfg.snr_db)))
        spec = ChannelSpec(cfg.family, decay_profile(gamma, cfg.memory), snr_from_db(snr_db))
        x = random_symbols(spec.alphabet, n, rng)
        y = sample_block(spec, x, rng)
        engine = symbol_posterior(y, ExactNode(spec))
        oracle = bruteforce_map_oracle(y, spec)
        max_err = max(max_err, float(np.abs(engine.probs - oracle.probs).max()))
    return max_err, instances
