"""Seeded Monte Carlo simulation of augmented error systems.

Every stochastic quantity is derived from a single master seed through a
splittable counter scheme, so trial streams are independent of each other
and of execution order, and reports are bitwise reproducible.  Reductions
across trials always run in ascending trial order.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DIVERGENCE_LIMIT = 1e12

_MASK64 = (1 << 64) - 1


class DivergenceError(RuntimeError):
    """A simulated state left the finite range."""

    def __init__(self, step: int, trial: int | None = None):
        self.step = step
        self.trial = trial
        where = f"step {step}" if trial is None else f"trial {trial}, step {step}"
        super().__init__(f"state diverged at {where}")


def splitmix64(seed: int, index: int) -> int:
    """Counter-based 64-bit mix: stream `index` of master `seed`."""
    z = (int(seed) + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def trial_seed(master_seed: int, trial: int) -> int:
    return splitmix64(master_seed, trial)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean, unit-variance i.i.d. driving noise."""

    distribution: str = "standard-normal"
    n_w: int = 1

    def __post_init__(self):
        if self.distribution not in ("standard-normal", "rademacher"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.n_w <= 0:
            raise ValueError("n_w must be positive")

    def draw(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        if self.distribution == "standard-normal":
            return rng.standard_normal((horizon, self.n_w))
        return rng.integers(0, 2, size=(horizon, self.n_w)) * 2.0 - 1.0


def sample_noise(model: NoiseModel, seed: int, horizon: int) -> np.ndarray:
    """A (horizon, n_w) noise array fully determined by `seed`."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    rng = np.random.default_rng(int(seed) & _MASK64)
    return model.draw(rng, horizon)


@dataclass(frozen=True)
class DisturbanceSignal:
    """Square-summable disturbance driving the error system.

    Kinds: "zero"; "geometric" with v_k = amplitude * ratio**k on every
    component; "state-feedback" with v_k = gain @ eta_k evaluated before
    the step; "explicit" replaying a stored sequence (zero past its end).
    """

    kind: str
    n_v: int = 1
    amplitude: float = 0.0
    ratio: float = 0.0
    gain: np.ndarray | None = None
    sequence: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "geometric", "state-feedback", "explicit"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.kind == "geometric" and not abs(self.ratio) < 1.0:
            raise ValueError("geometric disturbances need |ratio| < 1")
        if self.kind == "state-feedback":
            if self.gain is None:
                raise ValueError("state-feedback disturbance needs a gain")
            object.__setattr__(self, "gain", np.asarray(self.gain, dtype=float))
            object.__setattr__(self, "n_v", self.gain.shape[0])
        if self.kind == "explicit":
            if self.sequence is None:
                raise ValueError("explicit disturbance needs a sequence")
            seq = np.asarray(self.sequence, dtype=float)
            if seq.ndim == 1:
                seq = seq.reshape(-1, 1)
            if not np.all(np.isfinite(seq)):
                raise ValueError("explicit sequence must be finite")
            object.__setattr__(self, "sequence", seq)
            object.__setattr__(self, "n_v", seq.shape[1])

    @classmethod
    def zero(cls, n_v: int = 1) -> "DisturbanceSignal":
        return cls(kind="zero", n_v=n_v)

    @classmethod
    def geometric(cls, amplitude: float, ratio: float, n_v: int = 1) -> "DisturbanceSignal":
        return cls(kind="geometric", amplitude=float(amplitude),
                   ratio=float(ratio), n_v=n_v)

    @classmethod
    def state_feedback(cls, gain) -> "DisturbanceSignal":
        return cls(kind="state-feedback", gain=np.asarray(gain, dtype=float))

    @classmethod
    def explicit(cls, sequence) -> "DisturbanceSignal":
        return cls(kind="explicit", sequence=sequence)

    def value(self, k: int, eta: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(self.n_v)
        if self.kind == "geometric":
            return np.full(self.n_v, self.amplitude * self.ratio**k)
        if self.kind == "state-feedback":
            return self.gain @ eta
        if k < self.sequence.shape[0]:
            return self.sequence[k]
        return np.zeros(self.n_v)

    def describe(self) -> dict:
        doc = {"kind": self.kind, "n_v": self.n_v}
        if self.kind == "geometric":
            doc.update(amplitude=self.amplitude, ratio=self.ratio)
        if self.kind == "state-feedback":
            doc["gain"] = self.gain.tolist()
        if self.kind == "explicit":
            doc["length"] = int(self.sequence.shape[0])
        return doc


@dataclass(frozen=True)
class Trajectory:
    """One realization: states eta_0..eta_T, outputs and disturbances 0..T."""

    eta: np.ndarray
    z_tilde: np.ndarray
    v: np.ndarray
    seed: int

    @property
    def horizon(self) -> int:
        return self.eta.shape[0] - 1

    def cumulative_energies(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.cumsum(np.sum(self.z_tilde**2, axis=1)),
                np.cumsum(np.sum(self.v**2, axis=1)))


def simulate_trajectory(aug, dist: DisturbanceSignal, noise: NoiseModel | None,
                        eta0, horizon: int, seed: int) -> Trajectory:
    """Iterate the augmented recursion for `horizon` steps.

    `noise=None` runs the deterministic pass with w identically zero.
    State-feedback disturbances are evaluated from the pre-step state.
    Raises DivergenceError when any state magnitude exceeds 1e12.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    eta0 = np.asarray(eta0, dtype=float).reshape(-1)
    if eta0.shape != (aug.n_eta,):
        raise ValueError(f"eta0: expected length {aug.n_eta}, got {eta0.shape}")
    if noise is not None and noise.n_w != aug.n_w:
        raise ValueError(f"noise dimension {noise.n_w} != system noise dimension {aug.n_w}")
    if dist.kind != "state-feedback" and dist.n_v != aug.n_v:
        raise ValueError(f"disturbance dimension {dist.n_v} != system n_v {aug.n_v}")

    if noise is None:
        w_seq = np.zeros((horizon, aug.n_w))
    else:
        w_seq = sample_noise(noise, seed, horizon)

    eta = np.empty((horizon + 1, aug.n_eta))
    z = np.empty((horizon + 1, aug.n_z))
    v = np.empty((horizon + 1, aug.n_v))
    eta[0] = eta0
    for k in range(horizon + 1):
        if not np.all(np.isfinite(eta[k])) or np.max(np.abs(eta[k])) > DIVERGENCE_LIMIT:
            raise DivergenceError(step=k)
        v[k] = dist.value(k, eta[k])
        z[k] = aug.output(k, eta[k], v[k])
        if k < horizon:
            eta[k + 1] = aug.step(k, eta[k], w_seq[k], v[k])
    return Trajectory(eta=eta, z_tilde=z, v=v, seed=int(seed))


@dataclass(frozen=True)
class EnergyReport:
    """Per-step cumulative output/disturbance energies averaged over trials."""

    horizon: int
    trials: int
    cum_z: np.ndarray
    cum_v: np.ndarray
    stderr_z: np.ndarray
    stderr_v: np.ndarray
    master_seed: int
    final_z_per_trial: np.ndarray = field(repr=False, default=None)
    final_v_per_trial: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {
            "horizon": self.horizon,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "cum_z": self.cum_z.tolist(),
            "cum_v": self.cum_v.tolist(),
            "stderr_z": self.stderr_z.tolist(),
            "stderr_v": self.stderr_v.tolist(),
        }


def _default_workers() -> int:
    value = os.environ.get("HFK_THREADS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def monte_carlo(aug, dist: DisturbanceSignal, noise: NoiseModel | None, eta0,
                horizon: int, trials: int, master_seed: int,
                max_workers: int | None = None) -> EnergyReport:
    """Average cumulative energies over independent seeded trials.

    Trial i uses the stream splitmix64(master_seed, i); trials may run on
    several workers but the reduction is always in ascending trial order,
    so the report does not depend on the worker count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    workers = _default_workers() if max_workers is None else max(1, max_workers)

    def run(i: int) -> tuple[np.ndarray, np.ndarray]:
        try:
            traj = simulate_trajectory(aug, dist, noise, eta0, horizon,
                                       trial_seed(master_seed, i))
        except DivergenceError as err:
            raise DivergenceError(step=err.step, trial=i) from None
        return traj.cumulative_energies()

    if workers == 1:
        results = [run(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(trials)))

    cz = np.stack([r[0] for r in results])
    cv = np.stack([r[1] for r in results])
    if trials > 1:
        se_z = np.std(cz, axis=0, ddof=1) / np.sqrt(trials)
        se_v = np.std(cv, axis=0, ddof=1) / np.sqrt(trials)
    else:
        se_z = np.zeros(horizon + 1)
        se_v = np.zeros(horizon + 1)
    return EnergyReport(horizon=horizon, trials=trials,
                        cum_z=cz.mean(axis=0), cum_v=cv.mean(axis=0),
                        stderr_z=se_z, stderr_v=se_v,
                        master_seed=int(master_seed),
                        final_z_per_trial=cz[:, -1], final_v_per_trial=cv[:, -1])


class UndefinedRatioError(ValueError):
    """Gain ratio is undefined because the disturbance energy is zero."""


@dataclass(frozen=True)
class GainCheck:
    ratio: float
    satisfied: bool
    worst_margin: float

    def to_json(self) -> dict:
        return {"ratio": self.ratio, "satisfied": self.satisfied,
                "worst_margin": self.worst_margin}


def empirical_gain(report: EnergyReport, gamma: float) -> GainCheck:
    """Check the cumulative energy inequality at attenuation level gamma.

    satisfied iff cum_z[k] <= gamma^2 cum_v[k] + 3 * combined stderr for
    every k; the slack absorbs finite-sample fluctuation around an
    inequality that holds in expectation.
    """
    if report.cum_v[-1] <= 0.0:
        raise UndefinedRatioError("disturbance energy is zero over the horizon")
    gamma = float(gamma)
    slack = 3.0 * np.sqrt(report.stderr_z**2 + gamma**4 * report.stderr_v**2)
    margins = report.cum_z - gamma**2 * report.cum_v - slack
    return GainCheck(ratio=float(report.cum_z[-1] / (gamma**2 * report.cum_v[-1])),
                     satisfied=bool(np.all(margins <= 0.0)),
                     worst_margin=float(np.max(margins)))


@dataclass(frozen=True)
class DecayProbe:
    eta0: np.ndarray
    decay_fraction: float
    final_norms: np.ndarray
    sup_norms: np.ndarray


@dataclass(frozen=True)
class DecayReport:
    horizon: int
    trials: int
    tol_decay: float
    probes: tuple[DecayProbe, ...]
    master_seed: int

    def to_json(self) -> dict:
        return {
            "horizon": self.horizon,
            "trials": self.trials,
            "tol_decay": self.tol_decay,
            "master_seed": self.master_seed,
            "probes": [
                {
                    "eta0": p.eta0.tolist(),
                    "decay_fraction": p.decay_fraction,
                    "final_norm_max": float(np.max(p.final_norms)),
                    "sup_norm_max": float(np.max(p.sup_norms)),
                    "sup_norm_mean": float(np.mean(p.sup_norms)),
                }
                for p in self.probes
            ],
        }


def internal_stability_probe(aug, noise: NoiseModel | None, eta0_set,
                             horizon: int, trials: int, master_seed: int,
                             tol_decay: float = 1e-3) -> DecayReport:
    """Empirical decay check of the undisturbed system.

    For each initial state, runs `trials` noise realizations with the
    disturbance forced to zero and reports the fraction whose final state
    norm falls below tol_decay, plus the distribution of sup-norms along
    the way (small initial states should stay small, and trajectories
    should approach the origin).
    """
    zero = DisturbanceSignal.zero(aug.n_v)
    probes = []
    for j, eta0 in enumerate(eta0_set):
        eta0 = np.asarray(eta0, dtype=float)
        finals = np.empty(trials)
        sups = np.empty(trials)
        for i in range(trials):
            traj = simulate_trajectory(aug, zero, noise, eta0, horizon,
                                       splitmix64(master_seed, j * trials + i))
            norms = np.linalg.norm(traj.eta, axis=1)
            finals[i] = norms[-1]
            sups[i] = norms.max()
        probes.append(DecayProbe(eta0=eta0,
                                 decay_fraction=float(np.mean(finals < tol_decay)),
                                 final_norms=finals, sup_norms=sups))
    return DecayReport(horizon=horizon, trials=trials, tol_decay=tol_decay,
                       probes=tuple(probes), master_seed=int(master_seed))


def energy_report_to_csv(report: EnergyReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "cum_z", "cum_v", "stderr_z", "stderr_v"])
        for k in range(report.horizon + 1):
            writer.writerow([k, repr(float(report.cum_z[k])),
                             repr(float(report.cum_v[k])),
                             repr(float(report.stderr_z[k])),
                             repr(float(report.stderr_v[k]))])


def energy_report_to_json(report: EnergyReport, path, metadata: dict | None = None) -> None:
    doc = report.to_json()
    if metadata:
        doc["metadata"] = metadata
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def trajectory_to_csv(traj: Trajectory, path) -> None:
    n_eta = traj.eta.shape[1]
    n_z = traj.z_tilde.shape[1]
    n_v = traj.v.shape[1]
    header = (["k"] + [f"eta_{i}" for i in range(n_eta)]
              + [f"z_{i}" for i in range(n_z)] + [f"v_{i}" for i in range(n_v)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(traj.eta.shape[0]):
            row = [k] + [repr(float(x)) for x in traj.eta[k]]
            row += [repr(float(x)) for x in traj.z_tilde[k]]
            row += [repr(float(x)) for x in traj.v[k]]
            writer.writerow(row)


def trajectory_to_json(traj: Trajectory, path, metadata: dict | None = None) -> None:
    doc = {
        "seed": traj.seed,
        "horizon": traj.horizon,
        "eta": traj.eta.tolist(),
        "z_tilde": traj.z_tilde.tolist(),
        "v": traj.v.tolist(),
    }
    if metadata:
        doc["metadata"] = metadata
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
