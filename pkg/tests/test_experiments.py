import json
import math

import numpy as np
import pytest

from unilearn.experiments import (
    Adam,
    AdamParams,
    ExperimentConfig,
    TrainingDiverged,
    aggregate,
    estimate_err_hat,
    fig1_target,
    init_student,
    lp_errors,
    rng_for,
    run_trials,
    sample_teacher,
    train_student,
    write_outputs,
)
from unilearn.nn import INF, Mlp, NetworkClass, coefficient_norm, in_class


def tiny_config(**kw):
    base = dict(
        d=1,
        m=[20],
        teacher_arch=[1, 8, 8, 1],
        teacher_c=0.5,
        n_teachers=2,
        student_archs=[[1, 8, 8, 1], [1, 4, 1]],
        batch_sizes=["m/5", 20],
        n_seeds=2,
        n_eval=512,
        epochs=20,
        adam={"lr_init": 1e-3, "lr_final": 1e-4},
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestTeacher:
    cls = NetworkClass([2, 16, 16, 1], 0.5, INF)

    def test_same_seed_same_bytes(self):
        a, b = sample_teacher(self.cls, 3), sample_teacher(self.cls, 3)
        assert a.to_json() == b.to_json()

    def test_in_class(self):
        for s in range(20):
            net = sample_teacher(self.cls, s)
            assert coefficient_norm(net, INF) <= 0.5
            assert in_class(net, self.cls, 0.0)

    def test_entry_mean(self):
        cls = NetworkClass([1, 1], 2.0, INF)
        draws = np.array([sample_teacher(cls, s).weights[0][0, 0] for s in range(10_000)])
        sigma = 2.0 / math.sqrt(3 * 10_000)
        assert abs(draws.mean()) <= 3 * sigma

    def test_requires_q_inf(self):
        with pytest.raises(ValueError):
            sample_teacher(NetworkClass([1, 2, 1], 1.0, 2), 0)


class TestStudent:
    def test_init_range(self, rng):
        net = init_student([3, 16, 4, 1], rng)
        for W, b, fan_in in zip(net.weights, net.biases, [3, 16, 4]):
            r = math.sqrt(1 / fan_in)
            assert np.abs(W).max() <= r and np.abs(b).max() <= r

    def test_zero_epochs_returns_init(self, rng):
        init = init_student([1, 5, 1], rng)
        X = rng.random((10, 1))
        net, info = train_student([1, 5, 1], X, np.zeros(10), 5, 0, init=init)
        for a, b in zip(net.weights + net.biases, init.weights + init.biases):
            assert a.tobytes() == b.tobytes()
        assert info["initial_loss"] == info["final_loss"]

    def test_constant_target_bias_path(self, rng):
        # zero hidden weights: the output is the last bias alone, a convex scalar problem
        init = Mlp([1, 4, 1], [np.zeros((4, 1)), np.zeros((1, 4))], [np.zeros(4), [0.0]])
        X = rng.random((50, 1))
        net, info = train_student([1, 4, 1], X, np.full(50, 0.7), 10, 2000, AdamParams(1e-2, 1e-3), 0, init=init)
        assert info["final_loss"] <= 1e-6

    def test_deterministic(self, rng):
        X = rng.random((30, 1))
        Y = np.sin(6 * X[:, 0])
        a, _ = train_student([1, 8, 1], X, Y, 7, 15, seed=4)
        b, _ = train_student([1, 8, 1], X, Y, 7, 15, seed=4)
        assert a.to_json() == b.to_json()

    def test_learning_rate_schedule(self):
        hp = AdamParams(1e-2, 1e-4)
        p = [np.zeros(1)]
        opt = Adam(p, hp)
        opt.step([np.ones(1)], 1e-2)
        # bias-corrected first step moves by lr * g / (|g| + eps)
        assert math.isclose(p[0][0], -1e-2 / (1 + 1e-8), rel_tol=1e-12)

    def test_divergence_reported(self, rng):
        X = rng.random((10, 1))
        with pytest.raises(TrainingDiverged):
            train_student([1, 8, 8, 1], X, 1e300 * np.ones(10), 10, 3, AdamParams(1e3, 1e2), 0)

    def test_batch_size_validated(self, rng):
        with pytest.raises(ValueError):
            train_student([1, 2, 1], rng.random((5, 1)), np.zeros(5), 6, 1)

    def test_lr_params_validated(self):
        with pytest.raises(ValueError):
            AdamParams(1e-5, 1e-4)


class TestErrors:
    def test_power_mean_order(self, rng):
        for _ in range(20):
            e = lp_errors(rng.standard_normal(200), rng.standard_normal(200), [1, 2, 3, INF])
            assert e[1] <= e[2] <= e[3] <= e[INF]

    def test_sup_is_plain_max(self):
        assert lp_errors(np.array([0.0, 0.0]), np.array([1.0, -3.0]), [INF])[INF] == 3.0


class TestErrHat:
    def test_zero_teacher(self):
        cfg = tiny_config(
            teacher_c=1e-300,
            epochs=300,
            n_teachers=1,
            student_archs=[[1, 1], [1, 8, 8, 1]],
            batch_sizes=[4],
            adam={"lr_init": 1e-2, "lr_final": 1e-4},
        )
        table, _ = estimate_err_hat(cfg)
        assert all(v <= 1e-3 for v in table.values())

    def test_monotone_in_p_per_trial(self):
        for tr in run_trials(tiny_config()):
            assert tr.errors[1] <= tr.errors[2] <= tr.errors[INF]

    def test_min_max_order(self):
        cfg = tiny_config()
        trials = run_trials(cfg)
        table = aggregate(cfg, trials)
        for (m, p), v in table.items():
            per_teacher = []
            for t in range(cfg.n_teachers):
                variants = {}
                for tr in trials:
                    if tr.teacher_id == t:
                        variants.setdefault((tuple(tr.student_arch), tr.batch_size), []).append(tr.errors[p])
                per_teacher.append(min(np.mean(x) for x in variants.values()))
            assert math.isclose(v, max(per_teacher), rel_tol=1e-14)

    def test_threads_do_not_change_results(self, tmp_path):
        cfg = tiny_config(epochs=5)
        t1, tr1 = estimate_err_hat(cfg, threads=1)
        t2, tr2 = estimate_err_hat(cfg, threads=2)
        assert t1 == t2
        assert [t.errors for t in tr1] == [t.errors for t in tr2]

    def test_streams_independent_of_order(self):
        a = rng_for(0, 1, 5, 2).random(3)
        rng_for(0, 1, 4, 2).random(100)
        assert np.array_equal(a, rng_for(0, 1, 5, 2).random(3))

    def test_outputs(self, tmp_path):
        cfg = tiny_config(epochs=2, n_teachers=1, n_seeds=1)
        table, trials = estimate_err_hat(cfg)
        summary = write_outputs(cfg, table, trials, str(tmp_path))
        rows = (tmp_path / "trials.csv").read_text().strip().splitlines()
        assert rows[0] == "m,teacher_id,seed,arch,batch,p,error,epochs,wall_s"
        assert len(rows) == 1 + len(trials) * 3
        on_disk = json.loads((tmp_path / "err_hat.json").read_text())
        assert on_disk == json.loads(json.dumps(summary))
        assert set(on_disk["series"]) == {"1", "2", "inf"}

    def test_config_round_trip(self):
        cfg = tiny_config()
        back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back == cfg

    def test_config_validation(self):
        with pytest.raises(ValueError):
            tiny_config(n_seeds=0)
        with pytest.raises(ValueError):
            tiny_config(student_archs=[[2, 4, 1]])


def test_fig1_target_values():
    assert fig1_target([0.0])[0] == math.log(2.0)
    x = 0.3
    assert math.isclose(fig1_target([x])[0], math.log(math.sin(50 * x) + 2) + math.sin(5 * x), rel_tol=1e-15)
