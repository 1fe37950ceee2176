import numpy as np
import pytest

from elastinv import training as T
from elastinv.forward import Disk, PhantomSpec, generate_dataset
from elastinv.losses import NETS, LossWeights
from elastinv.networks import NonFiniteError

pytestmark = pytest.mark.filterwarnings("ignore::elastinv.fields.PoissonRangeWarning")

TINY = T.ModelConfig(depth=2, width=8)


@pytest.fixture(scope="module")
def plate():
    spec = PhantomSpec(1.0, 0.3, (Disk(5.0, 5.0, 2.5, 2.0, 0.4),))
    return generate_dataset(spec, 12, 12, snr=1000, seed=0)


def test_schedule_scaling_and_stages():
    s = T.TrainingSchedule(desk_scale_factor=0.02)
    assert s.stages() == [("A", 1000), ("B", 2000), ("C", 1000)]
    assert T.TrainingSchedule(10, 20, 30, pretrain=False).stages() == [("joint", 60)]
    assert T.TrainingSchedule(1, 2, 3).total_iters == 6
    for bad in (dict(desk_scale_factor=0.0), dict(desk_scale_factor=1.5), dict(learning_rate=0.0),
                dict(stage_a_iters=-1)):
        with pytest.raises(ValueError):
            T.TrainingSchedule(**bad)


def test_stage_weights_mask_terms():
    w = LossWeights()
    assert T.stage_weights("A", w) == LossWeights(2.0, 0.0, 0.0, 0.0)
    assert T.stage_weights("B", w) == LossWeights(2.0, 1.0, 0.0, 0.0)
    assert T.stage_weights("C", w) == w
    assert T.stage_weights("joint", w) == w


def test_zero_iteration_schedule_records_initial_loss(plate):
    st = T.train(plate, T.TrainingSchedule(0, 0, 0), model=TINY)
    assert len(st.history) == 1
    assert st.history[0].iteration == 0 and st.history[0].stage == "init"
    fresh = T.init_state(TINY.networks(), 0)
    assert all(st.params[k].equals(fresh.params[k]) for k in NETS)


def test_history_layout_and_frozen_networks(plate):
    fresh = T.init_state(TINY.networks(), 0)
    st = T.train(plate, T.TrainingSchedule(3, 2, 2), model=TINY)
    its = [e.iteration for e in st.history]
    assert its == list(range(8))
    assert [e.stage for e in st.history] == ["init", "A", "A", "A", "B", "B", "C", "C"]
    assert st.moments["displacement"].step == 7
    assert st.moments["strain"].step == 4
    assert st.moments["elasticity"].step == 2
    # after stage A only the displacement net moved
    st_a = T.train(plate, T.TrainingSchedule(3, 0, 0), model=TINY)
    assert not st_a.params["displacement"].equals(fresh.params["displacement"])
    assert st_a.params["strain"].equals(fresh.params["strain"])
    assert st_a.params["elasticity"].equals(fresh.params["elasticity"])
    # stage objectives only carry the active terms
    a_entry = st.history[3]
    assert a_entry.objective == pytest.approx(2.0 * a_entry.losses.L_u)
    c_entry = st.history[-1]
    assert c_entry.objective == pytest.approx(c_entry.losses.total)


def test_training_is_deterministic(plate):
    a = T.train(plate, T.TrainingSchedule(4, 4, 4, seed=3), model=TINY)
    b = T.train(plate, T.TrainingSchedule(4, 4, 4, seed=3), model=TINY)
    assert [e.losses for e in a.history] == [e.losses for e in b.history]
    assert all(a.params[k].equals(b.params[k]) for k in NETS)
    c = T.train(plate, T.TrainingSchedule(4, 4, 4, seed=4), model=TINY)
    assert not a.params["elasticity"].equals(c.params["elasticity"])


def test_adam_first_step_moves_by_learning_rate():
    from elastinv.networks import NetworkParameters

    p = NetworkParameters([np.array([[1.0, 2.0]])], [np.array([0.0, 0.0])])
    g = NetworkParameters([np.array([[3.0, -0.5]])], [np.array([0.0, 1e-3])])
    mom = T.AdamMoments(p.zeros_like(), p.zeros_like())
    T.adam_update(p, g, mom, 0.1, 0.9, 0.999, 1e-8)
    np.testing.assert_allclose(p.weights[0], [[0.9, 2.1]], rtol=1e-7)
    np.testing.assert_allclose(p.biases[0], [0.0, -0.1], atol=1e-6)
    assert mom.step == 1


def test_checkpoint_round_trip(plate, tmp_path):
    path = tmp_path / "ck.npk"
    st = T.train(plate, T.TrainingSchedule(2, 2, 2), model=TINY, checkpoint_path=path)
    back, model = T.load_checkpoint(path)
    assert model == TINY
    assert back.iteration == 6 and back.stage == "C"
    for k in NETS:
        assert back.params[k].equals(st.params[k])
        assert back.moments[k].m.equals(st.moments[k].m)
        assert back.moments[k].step == st.moments[k].step
    assert not (tmp_path / "ck.npk.tmp").exists()


def test_history_and_prediction_files(plate, tmp_path):
    st = T.train(plate, T.TrainingSchedule(2, 1, 1), model=TINY)
    T.write_history_csv(st.history, tmp_path / "h.csv")
    assert T.read_history_csv(tmp_path / "h.csv") == st.history
    pred = T.predict_fields(st, plate, TINY)
    assert pred.elasticity.shape == (11, 11) and pred.residual.shape == (9, 9)
    T.save_predictions(pred, tmp_path / "p.efd")
    back = T.load_predictions(tmp_path / "p.efd")
    np.testing.assert_array_equal(back.stress.txy.values, pred.stress.txy.values)
    np.testing.assert_array_equal(back.residual.ry.values, pred.residual.ry.values)


def test_nonfinite_training_raises_with_last_good_state(plate, monkeypatch):
    real = T.adam_update
    calls = {"n": 0}

    def poisoned(p, g, mom, *args):
        calls["n"] += 1
        real(p, g, mom, *args)
        if calls["n"] == 5:
            p.weights[0][0, 0] = np.nan

    monkeypatch.setattr(T, "adam_update", poisoned)
    with pytest.raises(T.TrainingError) as info:
        T.train(plate, T.TrainingSchedule(10, 0, 0), model=TINY)
    assert isinstance(info.value.__cause__, NonFiniteError)
    assert info.value.state.params["displacement"].is_finite()


@pytest.mark.slow
def test_stage_a_fits_clean_displacement():
    ds = generate_dataset(PhantomSpec(1.0, 0.3), 16, 16)
    model = T.ModelConfig(depth=4, width=32)
    st = T.train(ds, T.TrainingSchedule(2000, 0, 0, learning_rate=1e-4), model=model)
    assert st.history[-1].losses.L_u < st.history[0].losses.L_u / 20
