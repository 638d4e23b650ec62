import math

import numpy as np
import pytest

from freqbal.errors import NumericError
from freqbal.intervention import TrainConfig, TrainTrace, train, warmup_iterations, weighted_loss
from freqbal.synthdata import ModalitySpec, generate, imbalanced_specs
from freqbal.tinynet import cross_entropy

SMALL = dict(n_train=96, n_test=32, seed=21)


def small_dataset(seed=21):
    return generate(imbalanced_specs(), n_train=96, n_test=32, seed=seed)


def params_equal(a, b):
    return set(a) == set(b) and all(np.array_equal(a[n], b[n]) for n in a)


class TestWeightedLoss:
    def test_unit_weights_with_aux_equal_main(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(6, 4))
        labels = rng.integers(0, 4, size=6)
        aux = [logits.copy(), logits.copy()]
        total = weighted_loss(logits, aux, labels, [1.0, 1.0])
        assert total == pytest.approx(3 * cross_entropy(logits, labels), rel=1e-12)

    def test_zero_weights_leave_main_only(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(5, 3))
        labels = rng.integers(0, 3, size=5)
        aux = [rng.normal(size=(5, 3)), rng.normal(size=(5, 3))]
        total = weighted_loss(logits, aux, labels, [0.0, 0.0])
        assert total == cross_entropy(logits, labels)

    def test_hand_computed_sum(self):
        rng = np.random.default_rng(2)
        logits = rng.normal(size=(4, 3))
        labels = rng.integers(0, 3, size=4)
        aux = [rng.normal(size=(4, 3)), rng.normal(size=(4, 3))]
        k = [1.2, 0.8]
        expected = (
            cross_entropy(logits, labels)
            + 1.2 * cross_entropy(aux[0], labels)
            + 0.8 * cross_entropy(aux[1], labels)
        )
        assert weighted_loss(logits, aux, labels, k) == pytest.approx(expected, rel=1e-12)

    def test_missing_aux_rejected(self):
        with pytest.raises(ValueError):
            weighted_loss(np.zeros((2, 3)), None, np.array([0, 1]), [1.0])


class TestModeLattice:
    def test_none_equals_gradient_with_unit_override(self):
        ds = small_dataset()
        base = dict(epochs=2, eta=0.2, batch_size=32, seed=3, weight_override=(1.0, 1.0, 1.0))
        _, p_none, t_none = train(TrainConfig(mode="none", **base), ds)
        _, p_grad, t_grad = train(TrainConfig(mode="gradient", **base), ds)
        assert params_equal(p_none, p_grad)
        assert t_none.rows == t_grad.rows

    def test_zero_weight_freezes_encoder_through_training(self):
        ds = small_dataset()
        cfg = TrainConfig(
            mode="gradient", epochs=2, eta=0.2, batch_size=32, seed=4,
            weight_override=(1.0, 1.0, 0.0),
        )
        net_cfg, params, _ = train(cfg, ds)
        from freqbal.tinynet import init_network

        init = init_network(net_cfg)
        for l in range(len(cfg.hidden)):
            assert np.array_equal(params[f"enc2.w{l}"], init[f"enc2.w{l}"])
        assert not np.array_equal(params["enc0.w0"], init["enc0.w0"])

    def test_loss_mode_changes_only_loss_path(self):
        # Same seeds: none and loss share data/shuffle/banks, so the
        # preference columns coincide while the parameter paths diverge.
        ds = small_dataset()
        base = dict(epochs=1, eta=0.2, batch_size=32, seed=5)
        _, p_none, t_none = train(TrainConfig(mode="none", **base), ds)
        _, p_loss, t_loss = train(TrainConfig(mode="loss", **base), ds)
        for col in ("frm_raw_m0", "frm_smooth_m1", "t_m2", "k_m0"):
            assert np.array_equal(t_none.column(col), t_loss.column(col))
        assert not params_equal(p_none, p_loss)

    def test_determinism(self):
        ds = small_dataset()
        cfg = TrainConfig(mode="hybrid", epochs=2, eta=0.2, batch_size=32, seed=6)
        _, p1, t1 = train(cfg, ds)
        _, p2, t2 = train(cfg, ds)
        assert params_equal(p1, p2)
        assert t1.rows == t2.rows


class TestLoop:
    def test_classifier_update_unscaled(self):
        ds = small_dataset()
        cfg = TrainConfig(
            mode="gradient", epochs=1, eta=0.25, batch_size=96, seed=7,
            weight_override=(0.0, 0.0, 0.0),
        )
        net_cfg, params, trace = train(cfg, ds)
        from freqbal.seeds import stream_rng
        from freqbal.tinynet import backward, init_network

        init = init_network(net_cfg)
        order = stream_rng(cfg.seed, "shuffle").permutation(96)
        tr_in, tr_lab = ds.train_split()
        xb = [img[order] for img in tr_in]
        grads, _ = backward(net_cfg, init, xb, tr_lab[order])
        assert np.array_equal(params["clf.w"], init["clf.w"] - 0.25 * grads["clf.w"])
        assert np.array_equal(params["enc0.w0"], init["enc0.w0"])

    def test_warmup_forces_unit_weights(self):
        ds = small_dataset()
        cfg = TrainConfig(mode="hybrid", epochs=2, eta=0.2, batch_size=16, warmup_frac=0.25, seed=8)
        _, _, trace = train(cfg, ds)
        warm = warmup_iterations(cfg, 96)
        assert warm == 3
        for i in range(3):
            k = trace.column("k_m0")
            assert k[i] == 1.0
        assert trace.column("k_m0")[warm] != 1.0

    def test_trace_schema_and_length(self):
        ds = small_dataset()
        cfg = TrainConfig(mode="hybrid", epochs=2, eta=0.2, batch_size=32, seed=9)
        _, _, trace = train(cfg, ds)
        assert len(trace) == 2 * 3
        cols = TrainTrace.columns(3)
        assert cols[:2] == ["iteration", "total_loss"]
        assert len(trace.rows[0]) == len(cols)
        assert math.isfinite(trace.column("total_loss")[-1])

    def test_aux_losses_nan_without_heads(self):
        ds = small_dataset()
        cfg = TrainConfig(mode="none", epochs=1, eta=0.2, batch_size=32, seed=10)
        _, _, trace = train(cfg, ds)
        assert math.isnan(trace.column("aux_loss_m0")[0])

    def test_nan_loss_aborts_with_trace(self):
        ds = small_dataset()
        cfg = TrainConfig(mode="none", epochs=3, eta=1e12, batch_size=32, seed=11)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericError) as err:
                train(cfg, ds)
        assert err.value.trace is not None
        assert len(err.value.trace) >= 1

    def test_epoch_callback_sees_every_epoch(self):
        ds = small_dataset()
        seen = []
        cfg = TrainConfig(mode="none", epochs=3, eta=0.2, batch_size=32, seed=12)
        train(cfg, ds, on_epoch_end=lambda epoch, net_cfg, params: seen.append(epoch))
        assert seen == [0, 1, 2]

    def test_weighted_equals_plain_for_unit_band_blend(self):
        # mp_weighted with full weight on the low band is exactly mp_low,
        # so the two metrics must produce bit-identical runs.
        ds = small_dataset()
        base = dict(mode="hybrid", epochs=2, eta=0.2, batch_size=32, seed=13)
        _, p_low, t_low = train(TrainConfig(metric="mp_low", **base), ds)
        _, p_w, t_w = train(TrainConfig(metric="mp_weighted", omega_band=1.0, **base), ds)
        assert params_equal(p_low, p_w)
        assert t_low.rows == t_w.rows

    def test_invalid_mode_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(mode="both")


class TestDirectional:
    def test_hybrid_helps_weak_modality_single_seed(self):
        ds = generate(imbalanced_specs(), seed=1000)
        from freqbal.tinynet import evaluate

        accs = {}
        for mode in ("none", "hybrid"):
            cfg = TrainConfig(mode=mode, seed=0)
            net_cfg, params, _ = train(cfg, ds)
            te_in, te_lab = ds.test_split()
            accs[mode] = evaluate(net_cfg, params, te_in, te_lab, [False, True, False])
        assert accs["hybrid"] > accs["none"]
