"""Teacher-student experiments at desk scale.

Teachers are networks with coefficients drawn uniformly from [-c, c];
students are trained with Adam on MSE using an exponentially decaying
learning rate. The min-max error is

    sup over teachers  inf over (architecture, batch size)
        mean over seeds  ( mean_j |u(X_j) - student(X_j)|^p )^(1/p)

with a single shared set of evaluation points X_j (plain max for p = inf).
Inputs live on the centred cube [-0.5, 0.5]^d.

Every random stream is derived from ``numpy.random.SeedSequence`` with
entropy ``[experiment_seed, stream_tag, *indices]`` where ``stream_tag`` is
0 for teachers, 1 for training points, 2 for student initialisation and
shuffling, and 3 for evaluation points. Trials are therefore independent of
execution order and of the number of worker processes.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .nn import INF, Mlp, NetworkClass, forward_batch, format_exponent, mse_and_grad_arrays, parse_exponent

TEACHER, DATA, STUDENT, EVAL = 0, 1, 2, 3


class TrainingDiverged(RuntimeError):
    pass


def rng_for(experiment_seed: int, tag: int, *idx: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(experiment_seed), tag, *[int(i) for i in idx]]))


@dataclass
class AdamParams:
    lr_init: float = 1e-4
    lr_final: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr_init >= self.lr_final > 0:
            raise ValueError("need lr_init >= lr_final > 0")


@dataclass
class ExperimentConfig:
    d: int = 1
    m: list = field(default_factory=lambda: [100])
    teacher_arch: list = field(default_factory=lambda: [1, 32, 32, 32, 32, 1])
    teacher_c: float = 0.5
    n_teachers: int = 5
    student_archs: list = field(default_factory=lambda: [[1, 64, 64, 64, 64, 1]])
    batch_sizes: list = field(default_factory=lambda: ["m/5"])
    n_seeds: int = 2
    n_eval: int = 2**16
    p_list: list = field(default_factory=lambda: [1, 2, "inf"])
    adam: AdamParams = field(default_factory=AdamParams)
    epochs: int = 5000
    seed: int = 0
    centred: bool = True

    def __post_init__(self):
        if isinstance(self.m, int):
            self.m = [self.m]
        if isinstance(self.adam, dict):
            self.adam = AdamParams(**self.adam)
        self.p_list = [parse_exponent(p) for p in self.p_list]
        for name in ("d", "n_teachers", "n_seeds", "n_eval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0 or any(m < 1 for m in self.m):
            raise ValueError("epochs must be >= 0 and every m >= 1")
        if self.teacher_arch[0] != self.d or any(a[0] != self.d or a[-1] != 1 for a in self.student_archs):
            raise ValueError("architectures must map R^d to R")

    @property
    def teacher_class(self) -> NetworkClass:
        return NetworkClass(self.teacher_arch, self.teacher_c, INF)

    def batch_size(self, spec, m: int) -> int:
        if isinstance(spec, str):
            spec = spec.replace(" ", "")
            if spec.startswith("m/"):
                return max(1, m // int(spec[2:]))
            spec = int(spec)
        return max(1, min(int(spec), m))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_list"] = [format_exponent(p) for p in self.p_list]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)


@dataclass
class TrialResult:
    m: int
    teacher_id: int
    seed: int
    student_arch: list
    batch_size: int
    errors: dict
    epochs: int
    initial_loss: float
    final_loss: float
    flagged: bool
    train_time: float = 0.0


def sample_teacher(cls: NetworkClass, seed: int) -> Mlp:
    """Coefficients i.i.d. uniform on [-c, c]."""
    if cls.q != INF:
        raise ValueError("teachers are sampled from q = inf classes")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    a, c = cls.arch, cls.c
    ws, bs = [], []
    for i in range(len(a) - 1):
        ws.append(rng.uniform(-c, c, size=(a[i + 1], a[i])))
        bs.append(rng.uniform(-c, c, size=a[i + 1]))
    return Mlp(a, ws, bs)


def init_student(arch: Sequence[int], rng: np.random.Generator) -> Mlp:
    """Layer l coefficients uniform on [-sqrt(1/N_{l-1}), sqrt(1/N_{l-1})]."""
    ws, bs = [], []
    for i in range(len(arch) - 1):
        r = math.sqrt(1.0 / arch[i])
        ws.append(rng.uniform(-r, r, size=(arch[i + 1], arch[i])))
        bs.append(rng.uniform(-r, r, size=arch[i + 1]))
    return Mlp(arch, ws, bs)


class Adam:
    def __init__(self, params: List[np.ndarray], hp: AdamParams):
        self.params = params
        self.hp = hp
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: List[np.ndarray], lr: float):
        self.t += 1
        b1, b2, eps = self.hp.beta1, self.hp.beta2, self.hp.eps
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def train_student(arch, X, Y, batch_size: int, epochs: int, adam: AdamParams | None = None, seed=0, init: Mlp | None = None):
    """Adam on MSE with learning rate ``lr_init * decay**epoch``, where
    ``decay = (lr_final / lr_init) ** (1 / epochs)``.

    Returns ``(net, info)`` with the training loss before and after.
    """
    adam = adam or AdamParams()
    X = np.asarray(X, dtype=np.float64).reshape(len(X), -1)
    Y = np.asarray(Y, dtype=np.float64).reshape(len(X), -1)
    if len(X) < 1:
        raise ValueError("need at least one sample")
    if not 1 <= batch_size <= len(X):
        raise ValueError(f"batch size {batch_size} must lie in [1, {len(X)}]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    net = init if init is not None else init_student(arch, rng)
    ws = [np.array(W) for W in net.weights]
    bs = [np.array(b) for b in net.biases]
    L = len(ws)
    opt = Adam(ws + bs, adam)
    decay = (adam.lr_final / adam.lr_init) ** (1.0 / epochs) if epochs > 0 else 1.0
    n = len(X)
    lr = adam.lr_init
    # overflow is caught by the finiteness checks below
    with np.errstate(over="ignore", invalid="ignore"):
        initial, _, _ = mse_and_grad_arrays(ws, bs, X, Y)
        for epoch in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                loss, gW, gb = mse_and_grad_arrays(ws, bs, X[idx], Y[idx])
                if not math.isfinite(loss):
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch} (lr={lr:.3g}); lower the learning rate")
                opt.step(gW + gb, lr)
            lr *= decay
        final, _, _ = mse_and_grad_arrays(ws, bs, X, Y)
    if not math.isfinite(final):
        raise TrainingDiverged("non-finite final loss")
    out = Mlp(net.arch, ws[:L], bs[:L])
    return out, {"initial_loss": initial, "final_loss": final, "epochs": epochs}


def lp_errors(pred: np.ndarray, truth: np.ndarray, p_list) -> dict:
    """Empirical L^p errors on shared samples; p = inf is the plain max."""
    e = np.abs(np.asarray(pred).reshape(-1) - np.asarray(truth).reshape(-1))
    out = {}
    for p in p_list:
        if p == INF:
            out[p] = float(e.max())
        elif p == 1:
            out[p] = float(np.mean(e))
        else:
            out[p] = float(np.mean(e**p) ** (1.0 / p))
    return out


def _domain(rng, n, d, centred):
    X = rng.random((n, d))
    return X - 0.5 if centred else X


def _run_trial(task):
    cfg_dict, m, t, si, vi, arch, bs = task
    cfg = ExperimentConfig.from_dict(cfg_dict)
    with threadpool_limits(limits=1):
        teacher = sample_teacher(cfg.teacher_class, rng_for(cfg.seed, TEACHER, t))
        X = _domain(rng_for(cfg.seed, DATA, m, t, si), m, cfg.d, cfg.centred)
        Y = teacher(X)
        t0 = time.perf_counter()
        student, info = train_student(arch, X, Y, bs, cfg.epochs, cfg.adam, rng_for(cfg.seed, STUDENT, m, t, si, vi))
        wall = time.perf_counter() - t0
        Xe = _domain(rng_for(cfg.seed, EVAL), cfg.n_eval, cfg.d, cfg.centred)
        errs = lp_errors(student(Xe), teacher(Xe), cfg.p_list)
    return TrialResult(
        m=m,
        teacher_id=t,
        seed=si,
        student_arch=list(arch),
        batch_size=bs,
        errors=errs,
        epochs=cfg.epochs,
        initial_loss=info["initial_loss"],
        final_loss=info["final_loss"],
        flagged=not info["final_loss"] <= info["initial_loss"],
        train_time=wall,
    )


def trial_tasks(cfg: ExperimentConfig):
    cd = cfg.to_dict()
    tasks = []
    for m in cfg.m:
        variants = [(a, cfg.batch_size(b, m)) for a in cfg.student_archs for b in cfg.batch_sizes]
        for t in range(cfg.n_teachers):
            for si in range(cfg.n_seeds):
                for vi, (arch, bs) in enumerate(variants):
                    tasks.append((cd, m, t, si, vi, list(arch), bs))
    return tasks


def run_trials(cfg: ExperimentConfig, threads: int = 1) -> List[TrialResult]:
    tasks = trial_tasks(cfg)
    if threads <= 1:
        return [_run_trial(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(_run_trial, tasks))


def aggregate(cfg: ExperimentConfig, trials: List[TrialResult]) -> dict:
    """{(m, p): err_hat} from a list of trials."""
    table = {}
    for m in cfg.m:
        for p in cfg.p_list:
            worst = -math.inf
            for t in range(cfg.n_teachers):
                per_variant = {}
                for tr in trials:
                    if tr.m == m and tr.teacher_id == t:
                        per_variant.setdefault((tuple(tr.student_arch), tr.batch_size), []).append(tr.errors[p])
                best = min(math.fsum(v) / len(v) for v in per_variant.values())
                worst = max(worst, best)
            table[(m, p)] = worst
    return table


def estimate_err_hat(cfg: ExperimentConfig, threads: int = 1):
    trials = run_trials(cfg, threads)
    return aggregate(cfg, trials), trials


def write_outputs(cfg: ExperimentConfig, table: dict, trials: List[TrialResult], out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trials.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "teacher_id", "seed", "arch", "batch", "p", "error", "epochs", "wall_s"])
        for tr in trials:
            for p, e in tr.errors.items():
                w.writerow([tr.m, tr.teacher_id, tr.seed, "-".join(map(str, tr.student_arch)), tr.batch_size, format_exponent(p), repr(e), tr.epochs, f"{tr.train_time:.3f}"])
    summary = {
        "config": cfg.to_dict(),
        "table": [{"m": m, "p": format_exponent(p), "err_hat": v} for (m, p), v in table.items()],
        "series": {str(format_exponent(p)): [[m, table[(m, p)]] for m in cfg.m] for p in cfg.p_list},
        "flagged_trials": [[tr.m, tr.teacher_id, tr.seed, tr.student_arch, tr.batch_size] for tr in trials if tr.flagged],
    }
    with open(os.path.join(out_dir, "err_hat.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def fig1_target(x):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return np.log(np.sin(50.0 * x) + 2.0) + np.sin(5.0 * x)


def spike_demo(m: int = 1000, width: int = 50, depth: int = 6, batch_size: int = 20, epochs: int = 600, n_eval: int = 2**16, seed: int = 0, adam: AdamParams | None = None) -> dict:
    """Train one student on the oscillating 1-d target and report its L1, L2
    and L-inf errors on [-0.5, 0.5].

    The default schedule (1e-3 decaying to 1e-5) is shorter and hotter than
    the one used for teacher-student runs so the demo finishes in seconds.
    """
    if adam is None:
        adam = AdamParams(lr_init=1e-3, lr_final=1e-5)
    with threadpool_limits(limits=1):
        X = rng_for(seed, DATA, m).random((m, 1)) - 0.5
        Y = fig1_target(X)
        arch = [1] + [width] * (depth - 1) + [1]
        net, info = train_student(arch, X, Y, batch_size, epochs, adam, rng_for(seed, STUDENT, m))
        Xe = rng_for(seed, EVAL).random((n_eval, 1)) - 0.5
        errs = lp_errors(net(Xe), fig1_target(Xe), [1, 2, INF])
    return {"errors": {str(format_exponent(k)): v for k, v in errs.items()}, **info}
