"""Central execution authority for every quantum evaluation.

All circuit simulations go through :meth:`Executor.run`.  A job is a gate
structure, a batch of angle rows and a measurement request; its content
hash keys the result cache and seeds the shot sampling, so identical jobs
yield identical results regardless of submission order or thread.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import state as sv
from .observables import measurement_groups

log = logging.getLogger("qmlkit.executor")

CACHE_ENV = "QMLKIT_CACHE_DIR"
MAX_RETRIES = 3


class TransientError(RuntimeError):
    """A job failure worth retrying (injected in tests)."""


class ExecutionError(RuntimeError):
    def __init__(self, key: str, message: str):
        super().__init__(f"job {key[:16]}: {message}")
        self.key = key


@dataclass(frozen=True)
class Backend:
    kind: str = "exact"
    shots: int | None = None
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("exact", "sampled", "depolarizing"):
            raise ValueError(f"unknown backend {self.kind!r}")
        if self.kind != "exact" and (self.shots is None or self.shots < 1):
            raise ValueError(f"{self.kind} backend needs shots >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"depolarizing strength must lie in [0, 1], got {self.p}")

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"

    def describe(self) -> str:
        if self.kind == "exact":
            return "exact"
        if self.kind == "sampled":
            return f"sampled(shots={self.shots})"
        return f"depolarizing(shots={self.shots},p={self.p!r})"


def Exact() -> Backend:
    return Backend("exact")


def Sampled(shots: int) -> Backend:
    return Backend("sampled", int(shots))


def Depolarizing(shots: int, p: float) -> Backend:
    return Backend("depolarizing", int(shots), float(p))


@dataclass(frozen=True)
class ExecutionPlan:
    backend: Backend = field(default_factory=Exact)
    base_seed: int = 0
    cache: str = "memory"
    cache_path: str | None = None
    log_level: str = "WARNING"
    n_jobs: int = 1

    def __post_init__(self):
        if self.cache not in ("off", "memory", "disk"):
            raise ValueError(f"cache must be off, memory or disk, got {self.cache!r}")

    def resolved_cache_path(self) -> Path:
        if self.cache_path:
            return Path(self.cache_path)
        return Path(os.environ.get(CACHE_ENV, ".qmlkit-cache")) / "jobs.log"


def derive_seed(base_seed: int, path: Sequence) -> int:
    """Stable 128-bit seed for a job path; distinct paths collide with p ~ 2**-128."""
    payload = json.dumps([int(base_seed), [str(p) for p in path]]).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=16).digest(), "little")


@dataclass(frozen=True)
class Job:
    """One batched evaluation.

    ``measurement`` is a tuple of Pauli strings (expectation values, result
    shape ``(B, S)``), ``"zero"`` (probability of the all-zero outcome,
    ``(B,)``) or ``"state"`` (amplitudes, exact backend only).
    """

    n_qubits: int
    structure: tuple
    angles: np.ndarray
    measurement: tuple | str
    shots: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "angles", np.ascontiguousarray(np.atleast_2d(self.angles), dtype=float))
        if self.shots is not None:
            shots = np.broadcast_to(np.asarray(self.shots, dtype=np.int64), (self.angles.shape[0],)).copy()
            if np.any(shots < 1):
                raise ValueError("shots must be >= 1")
            object.__setattr__(self, "shots", shots)

    @property
    def batch(self) -> int:
        return self.angles.shape[0]

    def key(self, backend: Backend) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.n_qubits, [[k, list(q)] for k, q in self.structure],
                             self.measurement, backend.describe()]).encode())
        h.update(str(self.angles.shape).encode())
        h.update(self.angles.tobytes())
        if self.shots is not None:
            h.update(self.shots.tobytes())
        return h.hexdigest()


# ----------------------------------------------------------------------------
# caches


class MemoryCache:
    def __init__(self):
        self._data: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            v = self._data.get(key)
        return None if v is None else v.copy()

    def put(self, key, value):
        with self._lock:
            self._data[key] = np.array(value, copy=True)

    def __len__(self):
        return len(self._data)


class DiskCache(MemoryCache):
    """Append-only record log with an in-memory index.

    Each line is a JSON record carrying a SHA-256 checksum of its payload;
    records that fail to parse or verify are ignored (treated as misses).
    """

    def __init__(self, path):
        super().__init__()
        self.path = Path(path)
        self.corrupt = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                rec = self._decode(line)
                if rec is None:
                    self.corrupt += 1 if line.strip() else 0
                else:
                    self._data[rec[0]] = rec[1]

    @staticmethod
    def _checksum(key, dtype, shape, blob) -> str:
        return hashlib.sha256(f"{key}|{dtype}|{shape}|{blob}".encode()).hexdigest()

    def _decode(self, line):
        try:
            r = json.loads(line)
            if r["c"] != self._checksum(r["k"], r["d"], r["s"], r["b"]):
                return None
            arr = np.frombuffer(base64.b64decode(r["b"]), dtype=np.dtype(r["d"])).reshape(r["s"])
            return r["k"], arr.copy()
        except (ValueError, KeyError, TypeError):
            return None

    def put(self, key, value):
        arr = np.ascontiguousarray(value)
        blob = base64.b64encode(arr.tobytes()).decode()
        rec = {"k": key, "d": arr.dtype.str, "s": list(arr.shape), "b": blob,
               "c": self._checksum(key, arr.dtype.str, list(arr.shape), blob)}
        line = json.dumps(rec) + "\n"
        with self._lock:
            with open(self.path, "a") as fh:
                fh.write(line)
            self._data[key] = arr.copy()


# ----------------------------------------------------------------------------


class Executor:
    """Runs jobs under an :class:`ExecutionPlan`.

    ``fail_hook(job_key, attempt)`` may raise :class:`TransientError` to
    exercise the retry path.
    """

    def __init__(self, plan: ExecutionPlan | None = None, fail_hook: Callable | None = None, log_stream=None):
        self.plan = plan or ExecutionPlan()
        self.fail_hook = fail_hook
        self.stats = {"jobs": 0, "simulations": 0, "circuits": 0, "cache_hits": 0,
                      "sampling_passes": 0, "shots": 0, "retries": 0}
        self._lock = threading.Lock()
        if self.plan.cache == "off":
            self.cache = None
        elif self.plan.cache == "memory":
            self.cache = MemoryCache()
        else:
            self.cache = DiskCache(self.plan.resolved_cache_path())
        log.setLevel(getattr(logging, str(self.plan.log_level).upper(), logging.WARNING))
        if log_stream is not None:
            handler = logging.StreamHandler(log_stream)
            handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
            log.addHandler(handler)

    # executors are shared, never copied, when estimators are cloned
    def __deepcopy__(self, memo):
        return self

    @property
    def backend(self) -> Backend:
        return self.plan.backend

    def with_plan(self, **changes) -> "Executor":
        import dataclasses

        return Executor(dataclasses.replace(self.plan, **changes), self.fail_hook)

    def _count(self, **inc):
        with self._lock:
            for k, v in inc.items():
                self.stats[k] += v

    # -- public API ----------------------------------------------------------------
    def run(self, job: Job) -> np.ndarray:
        key = job.key(self.backend)
        self._count(jobs=1)
        log.info("submitted key=%s rows=%d", key[:16], job.batch)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                self._count(cache_hits=1)
                log.info("cache-hit key=%s", key[:16])
                return hit
        seed = derive_seed(self.plan.base_seed, [key])
        last = None
        for attempt in range(MAX_RETRIES + 1):
            try:
                if self.fail_hook is not None:
                    self.fail_hook(key, attempt)
                result = self._simulate(job, seed)
                break
            except TransientError as exc:
                last = exc
                self._count(retries=1)
                log.warning("retry key=%s attempt=%d error=%s", key[:16], attempt + 1, exc)
            except Exception as exc:
                raise ExecutionError(key, f"permanent failure: {exc}") from exc
        else:
            raise ExecutionError(key, f"failed after {MAX_RETRIES} retries: {last}") from last
        if self.cache is not None:
            self.cache.put(key, result)
        log.info("completed key=%s", key[:16])
        return result

    def run_many(self, jobs: Sequence[Job]) -> list[np.ndarray]:
        """Run independent jobs, in parallel when ``plan.n_jobs > 1``; order preserved."""
        if self.plan.n_jobs > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(self.plan.n_jobs) as pool:
                return list(pool.map(self.run, jobs))
        return [self.run(j) for j in jobs]

    # -- convenience wrappers -----------------------------------------------------------
    def expectations(self, n_qubits, structure, angles, strings, shots=None) -> np.ndarray:
        return self.run(Job(n_qubits, tuple(structure), angles, tuple(strings), shots))

    def zero_probability(self, n_qubits, structure, angles, shots=None) -> np.ndarray:
        return self.run(Job(n_qubits, tuple(structure), angles, "zero", shots))

    def statevectors(self, n_qubits, structure, angles) -> np.ndarray:
        return self.run(Job(n_qubits, tuple(structure), angles, "state"))

    # -- simulation ---------------------------------------------------------------------
    def _simulate(self, job: Job, seed: int) -> np.ndarray:
        t0 = time.perf_counter()
        amps = sv.run_ops(job.n_qubits, job.structure, job.angles)
        self._count(simulations=1, circuits=job.batch)
        be = self.backend
        if job.measurement == "state":
            if not be.is_exact:
                raise ValueError("statevectors are only available on the exact backend")
            out = amps
        elif be.is_exact:
            if job.measurement == "zero":
                out = np.abs(amps[:, 0]) ** 2
            else:
                out = sv.pauli_expectations(amps, job.measurement)
        else:
            shots = job.shots if job.shots is not None else np.full(job.batch, be.shots)
            if job.measurement == "zero":
                out = self._sample_zero(amps, shots, seed)
            else:
                out = self._sample_paulis(amps, job.measurement, shots, seed)
        log.debug("simulated rows=%d in %.4fs", job.batch, time.perf_counter() - t0)
        return out

    def _distribution(self, amps):
        probs = sv.probabilities(amps)
        if self.backend.kind == "depolarizing":
            probs = sv.depolarize(probs, self.backend.p)
        return probs

    def _sample_zero(self, amps, shots, seed):
        probs = self._distribution(amps)
        out = np.empty(amps.shape[0])
        for b in range(amps.shape[0]):
            counts = sv.sample_counts(probs[b], shots[b], sv.make_rng(derive_seed(seed, [b, 0])))
            out[b] = counts[0] / shots[b]
        self._count(sampling_passes=amps.shape[0], shots=int(shots.sum()))
        return out

    def _sample_paulis(self, amps, strings, shots, seed):
        B, dim = amps.shape
        out = np.ones((B, len(strings)))
        idx = np.arange(dim)
        for gi, (basis, members) in enumerate(measurement_groups(strings)):
            probs = self._distribution(sv.basis_rotation(amps, basis))
            parity = []
            for k in members:
                _, support, _ = sv.pauli_masks(strings[k].replace("X", "Z").replace("Y", "Z"))
                parity.append(1.0 - 2.0 * (np.bitwise_count(idx & support) & 1))
            parity = np.array(parity)  # (M, dim)
            for b in range(B):
                counts = sv.sample_counts(probs[b], shots[b], sv.make_rng(derive_seed(seed, [b, gi])))
                out[b, members] = parity @ counts / shots[b]
            self._count(sampling_passes=B, shots=int(shots.sum()))
        return out
