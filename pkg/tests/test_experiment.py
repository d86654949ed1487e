import numpy as np
import pytest
from scipy.stats import binom

from slqns import dynamics, experiment, qcore
from slqns.experiment import DatasetError, MeasurementPlan, ObservationSet

MIXED = np.eye(4) / 4


def pure(label):
    return dynamics.spinlock_initial_state(label)


class TestSampleObservables:
    def test_deterministic_outcome(self, rng):
        res = experiment.sample_observables(pure("+x+x"), ["tz1", "tz2", "Kzz"], 50, rng=rng)
        assert res["tz1"] == (1.0, experiment.STD_FLOOR)
        assert res["tz2"] == (1.0, experiment.STD_FLOOR)
        assert res["Kzz"] == (0.0, experiment.STD_FLOOR)

    def test_mixed_state_binomial_oracle(self):
        m = 10_000
        hits = sum(
            abs(experiment.sample_observables(MIXED, ["tz1"], m, seed=s)["tz1"][0]) < 5 / np.sqrt(m)
            for s in range(200)
        )
        # |mean| < 5/sqrt(M) is a 5-sigma event, so essentially every seed passes
        assert hits >= 198

    def test_large_sample_converges(self, rng):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        labels = ["tz1", "tz2", "Kxx", "Kxy", "Kzz", "Kyz"]
        res = experiment.sample_observables(rho, labels, 1_000_000, rng=rng)
        want = dynamics.observable_table(rho[None, None], labels)[0, 0]
        for lab, w in zip(labels, want):
            mean, std = res[lab]
            assert abs(mean - w) < 3 * std + 1e-12

    def test_single_qubit_std_matches_binomial(self):
        rho = qcore.embed(qcore.I2 + 0.4 * qcore.SZ, 0, (2, 2)) / 4
        m = 5000
        mean, std = experiment.sample_observables(rho, ["tz1"], m, seed=1)["tz1"]
        assert std == pytest.approx(np.sqrt((1 - 0.4**2) / m), rel=0.05)

    def test_shot_noise_scaling(self):
        rho = qcore.embed(qcore.I2 + 0.3 * qcore.SZ, 0, (2, 2)) / 4
        ms = np.array([100, 1000, 10_000])
        stds = [np.mean([experiment.sample_observables(rho, ["tz1"], m, seed=s)["tz1"][1] for s in range(20)])
                for m in ms]
        slope = np.polyfit(np.log(ms), np.log(stds), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.05)

    def test_bootstrap_std_of_covariance(self):
        # the spread of K across seeds should match the reported bootstrap std
        rho = 0.7 * pure("+x+x") + 0.3 * pure("-x-x")
        rho = qcore.embed(qcore.I2, 0, (2, 2)) / 4 * 0.2 + 0.8 * rho
        draws = [experiment.sample_observables(rho, ["Kzz"], 2000, seed=s)["Kzz"] for s in range(300)]
        means, stds = np.array(draws).T
        assert np.std(means, ddof=1) == pytest.approx(np.mean(stds), rel=0.15)

    @pytest.mark.parametrize("shots", [1000, 10_000])
    def test_covariance_consistent_over_seeds(self, shots):
        rho = 0.6 * pure("+x+x") + 0.4 * pure("-x-x")
        want = dynamics.observable_table(rho[None, None], ["Kzz"])[0, 0, 0]
        assert want == pytest.approx(0.96)
        draws = np.array([experiment.sample_observables(rho, ["Kzz"], shots, seed=s)["Kzz"] for s in range(300)])
        se = np.sqrt(np.mean(draws[:, 1] ** 2) / len(draws))
        # the plug-in covariance has expectation (M - 1)/M times the true one
        assert abs(draws[:, 0].mean() - want * (shots - 1) / shots) < 3 * se
        if shots >= 10_000:
            assert abs(draws[:, 0].mean() - want) < 3 * se

    def test_negative_probability(self):
        bad = np.diag([1.2, -0.2, 0.0, 0.0]).astype(complex)
        with pytest.raises(ValueError, match="zz"):
            experiment.sample_observables(bad, ["Kzz"], 10, seed=0)

    def test_unknown_observable(self):
        with pytest.raises(ValueError):
            experiment.sample_observables(MIXED, ["q"], 10, seed=0)


def _plan(**kw):
    kw.setdefault("times", (1e-6, 2e-5, 1.5e-4))
    kw.setdefault("shots", 500)
    return MeasurementPlan(**kw)


def _dataset(plan, omega=2 * np.pi * 2e6):
    model = dynamics.ReducedModel(omega, dynamics.QubitRates(gamma1_q1=1e4, gamma1_q2=2e4))
    theta = np.r_[np.full(2, 3e3), 1e3, 0.0, np.full(2, 2e4), 1e4, 0.0, 0.0]
    states = dynamics.reduced_states(model, theta, plan.initial_states, plan.times)
    return experiment.simulate_observations(states, plan, omega, {"model": "reduced"})


class TestCampaign:
    def test_full_plan_record_count(self, design_plan):
        assert design_plan.n_records == 1144
        data = _dataset(MeasurementPlan(times=design_plan.times, shots=100))
        assert len(data) == 1144

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            MeasurementPlan(times=())
        with pytest.raises(ValueError):
            MeasurementPlan(times=(1.0,), shots=1)

    def test_reproducible(self):
        assert _dataset(_plan(seed=7)).equals(_dataset(_plan(seed=7)))
        assert not _dataset(_plan(seed=7)).equals(_dataset(_plan(seed=8)))

    def test_order_independent(self):
        full = _dataset(_plan(seed=3))
        sub = _dataset(_plan(seed=3, initial_states=("-x+x",)))
        assert np.array_equal(full.mean[full.state == "-x+x"], sub.mean)

    def test_exact_observations_match_model(self):
        plan = _plan()
        omega = 2 * np.pi * 2e6
        states = dynamics.reduced_states(dynamics.ReducedModel(omega), np.r_[np.full(8, 1e4), 0.0], plan.initial_states,
                                         plan.times)
        data = experiment.exact_observations(states, plan, omega)
        table = dynamics.observable_table(states, plan.observables)
        assert np.allclose(data.mean, table.reshape(-1))
        assert np.all(data.std == experiment.STD_FLOOR)

    def test_mean_range_enforced(self):
        data = _dataset(_plan())
        with pytest.raises(DatasetError, match="out of range"):
            data.copy(mean=np.full(len(data), 1.5))


class TestContaminate:
    def test_p_zero_identity(self):
        data = _dataset(_plan())
        out = experiment.contaminate(data, 0.0, seed=1)
        assert np.array_equal(out.mean, data.mean)
        assert out.metadata["contamination"]["mask"] == []

    def test_p_one_uniform(self):
        data = _dataset(_plan(times=tuple(np.linspace(1e-6, 1e-4, 100))))
        out = experiment.contaminate(data, 1.0, seed=2)
        assert np.all(np.abs(out.mean) <= 1.0)
        assert len(out.metadata["contamination"]["mask"]) == len(data)
        # Uniform(-1, 1) has std 1/sqrt(3)
        assert abs(out.mean.mean()) < 4 / np.sqrt(3 * len(data))
        assert np.array_equal(out.std, data.std)

    def test_binomial_count(self, design_plan):
        data = _dataset(MeasurementPlan(times=design_plan.times, shots=100))
        lo, hi = binom.interval(0.99, 1144, 0.1)
        for seed in range(5):
            n = len(experiment.contaminate(data, 0.1, seed=seed).metadata["contamination"]["mask"])
            assert lo <= n <= hi

    def test_bad_probability(self):
        with pytest.raises(ValueError):
            experiment.contaminate(_dataset(_plan()), 1.5)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        data = experiment.contaminate(_dataset(_plan()), 0.2, seed=4)
        path = tmp_path / "d.csv"
        experiment.write_dataset(data, path)
        back = experiment.read_dataset(path)
        assert back.equals(data)

    def test_negative_std_reports_line(self, tmp_path):
        data = _dataset(_plan())
        path = tmp_path / "d.csv"
        experiment.write_dataset(data, path)
        lines = path.read_text().splitlines()
        fields = lines[3].split(",")
        fields[4] = "-0.01"
        lines[3] = ",".join(fields)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError, match=r"d\.csv:4: std must be positive"):
            experiment.read_dataset(path)

    def test_bad_header(self, tmp_path):
        data = _dataset(_plan())
        path = tmp_path / "d.csv"
        experiment.write_dataset(data, path)
        path.write_text("a,b\n" + "\n".join(path.read_text().splitlines()[1:]))
        with pytest.raises(DatasetError, match=":1:"):
            experiment.read_dataset(path)

    def test_short_row(self, tmp_path):
        data = _dataset(_plan())
        path = tmp_path / "d.csv"
        experiment.write_dataset(data, path)
        with open(path, "a") as fh:
            fh.write("+x+x,1e-6\n")
        with pytest.raises(DatasetError, match=f":{len(data) + 2}:"):
            experiment.read_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            experiment.read_dataset(tmp_path / "none.csv")

    def test_schema(self, tmp_path):
        data = _dataset(_plan())
        path = tmp_path / "d.csv"
        experiment.write_dataset(data, path)
        assert path.read_text().splitlines()[0] == "state,time_s,observable,mean,std,shots"
        assert b"\r\n" not in path.read_bytes()


def test_observation_set_length_mismatch():
    with pytest.raises(DatasetError):
        ObservationSet(["+x+x"], [1.0, 2.0], ["tz1"], [0.0], [0.1], [10], 1.0)
