import math

import numpy as np
import pytest
import torch

import oracles
from conftest import randomize, to_np
from restore_lab.errors import ConfigError
from restore_lab.gradcheck import check_module
from restore_lab.primitives import resize
from restore_lab.scam import SCAM, BidirectionalCrossAttention


def rand(gen, *shape):
    return torch.randn(*shape, generator=gen, dtype=torch.float64)


def pyramid_feats(gen, base=4, size=16):
    return [rand(gen, 1, base * 2**i, size // 2**i, size // 2**i) for i in range(4)]


def set_lambdas(m, low, high):
    with torch.no_grad():
        m.lambda_low.fill_(low)
        m.lambda_high.fill_(high)


class TestCrossAttention:
    def test_zero_init_output_is_zero(self, gen):
        m = BidirectionalCrossAttention(4).double()
        with torch.no_grad():
            for name, p in m.named_parameters():
                if "lambda" not in name:
                    p.add_(rand(gen, *p.shape))
        assert torch.count_nonzero(m(rand(gen, 2, 4, 3, 3), rand(gen, 2, 4, 3, 3))) == 0

    def test_single_token(self, gen):
        m = BidirectionalCrossAttention(4).double()
        randomize(m, gen)
        xe, xm = rand(gen, 1, 4, 1, 1), rand(gen, 1, 4, 1, 1)
        ve = m.value_enc(m.norm_enc(xe))
        vm = m.value_mid(m.norm_mid(xm))
        torch.testing.assert_close(m(xe, xm), m.lambda_low * ve + m.lambda_high * vm, rtol=1e-12, atol=1e-12)

    def test_micro_instance_matches_matmul(self, gen):
        m = BidirectionalCrossAttention(2).double()
        randomize(m, gen)
        set_lambdas(m, 1.0, 1.0)
        xe, xm = rand(gen, 1, 2, 1, 2), rand(gen, 1, 2, 1, 2)

        def tokens(conv, z):
            return oracles.conv1x1(z, to_np(conv.weight), to_np(conv.bias))[0].reshape(2, 2).T

        ne = oracles.layer_norm(to_np(xe), to_np(m.norm_enc.weight), to_np(m.norm_enc.bias))
        nm = oracles.layer_norm(to_np(xm), to_np(m.norm_mid.weight), to_np(m.norm_mid.bias))
        qe, qm, ve, vm = tokens(m.query_enc, ne), tokens(m.query_mid, nm), tokens(m.value_enc, ne), tokens(m.value_mid, nm)
        beta = math.sqrt(2)
        m2e = oracles.matmul(oracles.softmax_rows(oracles.matmul(qm, qe.T) / beta), ve)
        e2m = oracles.matmul(oracles.softmax_rows(oracles.matmul(qe, qm.T) / beta), vm)
        expect = (m2e + e2m).T.reshape(1, 2, 1, 2)
        np.testing.assert_allclose(to_np(m(xe, xm)), expect, rtol=1e-6, atol=1e-12)

    def test_rows_stochastic(self, gen):
        m = BidirectionalCrossAttention(4).double()
        randomize(m, gen)
        _, maps = m(rand(gen, 2, 4, 4, 4), rand(gen, 2, 4, 4, 4), return_attention=True)
        for a in maps:
            assert a.shape == (2, 16, 16)
            assert torch.allclose(a.sum(-1), torch.ones(2, 16, dtype=torch.float64), atol=1e-6)

    def test_argmax_invariant_to_row_shift(self, gen):
        m = BidirectionalCrossAttention(4).double()
        randomize(m, gen)
        _, (a, _) = m(rand(gen, 1, 4, 3, 3), rand(gen, 1, 4, 3, 3), return_attention=True)
        logits = torch.log(a)
        shifted = torch.softmax(logits + rand(gen, 1, 9, 1) * 30, -1)
        assert torch.equal(a.argmax(-1), shifted.argmax(-1))

    def test_symmetric_streams_swap(self, gen):
        m = BidirectionalCrossAttention(4).double()
        randomize(m, gen)
        with torch.no_grad():
            for a, b in ((m.norm_mid, m.norm_enc), (m.query_mid, m.query_enc), (m.value_mid, m.value_enc)):
                a.weight.copy_(b.weight)
                a.bias.copy_(b.bias)
        xe, xm = rand(gen, 1, 4, 3, 3), rand(gen, 1, 4, 3, 3)
        set_lambdas(m, 1.0, 0.0)
        mid_to_enc = m(xe, xm)
        set_lambdas(m, 0.0, 1.0)
        enc_to_mid_swapped = m(xm, xe)
        torch.testing.assert_close(mid_to_enc, enc_to_mid_swapped, rtol=1e-12, atol=1e-12)

    def test_shape_mismatch(self, gen):
        with pytest.raises(ConfigError):
            BidirectionalCrossAttention(4)(torch.zeros(1, 4, 2, 2), torch.zeros(1, 4, 4, 4))


class TestAggregate:
    def test_zero_features(self):
        m = SCAM((4, 8, 16, 32), 32)
        feats = [torch.zeros(1, 4 * 2**i, 16 // 2**i, 16 // 2**i) for i in range(4)]
        for level in range(4):
            assert torch.count_nonzero(m.aggregate_encoder(feats, level)) == 0

    def test_shapes(self, gen):
        m = SCAM((4, 8, 16, 32), 32).double()
        feats = pyramid_feats(gen)
        for level in range(4):
            assert m.aggregate_encoder(feats, level).shape == feats[level].shape

    def test_two_level_matches_composition(self, gen):
        m = SCAM((2, 4), 4).double()
        randomize(m, gen)
        feats = [rand(gen, 1, 2, 4, 4), rand(gen, 1, 4, 2, 2)]
        f0, f1 = to_np(feats[0])[0], to_np(feats[1])[0]
        up = np.stack([oracles.bilinear_up(f1[c], 2) for c in range(4)])
        down = np.stack([oracles.avg_pool2(f0[c]) for c in range(2)])
        w0, w1 = to_np(m.aggregate[0].weight), to_np(m.aggregate[1].weight)
        np.testing.assert_allclose(to_np(m.aggregate_encoder(feats, 0)), oracles.conv1x1(np.concatenate([f0, up])[None], w0, None), atol=1e-12)
        np.testing.assert_allclose(to_np(m.aggregate_encoder(feats, 1)), oracles.conv1x1(np.concatenate([down, f1])[None], w1, None), atol=1e-12)

    def test_level_out_of_range(self, gen):
        with pytest.raises(ConfigError):
            SCAM((4, 8, 16, 32), 32).aggregate_encoder(pyramid_feats(gen), 4)

    def test_middle_projection_commutes_with_resize(self, gen):
        m = SCAM((4, 8, 16, 32), 32).double()
        randomize(m, gen)
        middle = rand(gen, 1, 32, 2, 2)
        a = m.middle_at(middle, 0, (16, 16))
        b = m.middle_proj[0](resize(middle, (16, 16)))
        torch.testing.assert_close(a, b, rtol=1e-10, atol=1e-12)


class TestForward:
    def test_zero_at_init(self, gen):
        m = SCAM((4, 8, 16, 32), 32).double()
        outs = m(pyramid_feats(gen), rand(gen, 1, 32, 2, 2))
        assert all(torch.count_nonzero(o) == 0 for o in outs)

    def test_level_shapes(self, gen):
        feats = pyramid_feats(gen)
        outs = SCAM((4, 8, 16, 32), 32).double()(feats, rand(gen, 1, 32, 2, 2))
        assert [o.shape for o in outs] == [f.shape for f in feats]

    def test_lambda_gradients_nonzero_at_init(self, gen):
        m = SCAM((4, 8, 16, 32), 32).double()
        outs = m(pyramid_feats(gen), rand(gen, 1, 32, 2, 2))
        sum((o * rand(gen, *o.shape)).sum() for o in outs).backward()
        for cross in m.cross:
            assert cross.lambda_low.grad.abs().sum() > 0
            assert cross.lambda_high.grad.abs().sum() > 0

    def test_gradients_reach_everything(self):
        results = check_module("scam")
        assert max(r.max_rel_err for r in results) <= 1e-4
        assert all(r.grad_norm > 0 for r in results)
