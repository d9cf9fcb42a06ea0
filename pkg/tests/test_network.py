"""Tests for convolution layers and the detector network."""
import numpy as np
import pytest

from face_rfcn.errors import ShapeError
from face_rfcn.net import ConvLayer, NetworkSpec, backward, build_network, forward
from face_rfcn.net.layers import conv2d_backward, conv2d_forward, conv_output_size

from . import oracles


class TestConvLayer:
    """Forward and backward of strided, dilated convolution."""

    @pytest.mark.parametrize(
        "stride,dilation,padding", [(1, 1, 1), (2, 1, 1), (1, 2, 2), (2, 2, 0)]
    )
    def test_finite_differences(self, rng, stride, dilation, padding):
        x = rng.normal(size=(2, 7, 6))
        kernel = rng.normal(size=(3, 2, 3, 3))
        bias = rng.normal(size=3)
        out, cols = conv2d_forward(x, kernel, bias, stride, dilation, padding)
        upstream = rng.normal(size=out.shape)

        def loss():
            out = conv2d_forward(x, kernel, bias, stride, dilation, padding)[0]
            return float(np.sum(upstream * out))

        grad_x, grad_k, grad_b = conv2d_backward(
            upstream, cols, x.shape, kernel, stride, dilation, padding
        )
        np.testing.assert_allclose(
            grad_x, oracles.numerical_gradient(loss, x), rtol=1e-5, atol=1e-8
        )
        np.testing.assert_allclose(
            grad_k, oracles.numerical_gradient(loss, kernel), rtol=1e-5, atol=1e-8
        )
        np.testing.assert_allclose(
            grad_b, oracles.numerical_gradient(loss, bias), rtol=1e-5, atol=1e-8
        )

    def test_matches_direct_sum(self, rng):
        x = rng.normal(size=(1, 5, 5))
        kernel = rng.normal(size=(1, 1, 3, 3))
        out, _ = conv2d_forward(x, kernel, np.zeros(1), 1, 2, 0)
        assert out.shape == (1, 1, 1)
        expected = sum(kernel[0, 0, i, j] * x[0, 2 * i, 2 * j] for i in range(3) for j in range(3))
        assert out[0, 0, 0] == pytest.approx(expected)

    def test_output_size(self):
        assert conv_output_size(16, 3, 1, 2, 2) == 16
        assert conv_output_size(16, 3, 2, 1, 1) == 8

    def test_wrong_channels(self, rng):
        with pytest.raises(ShapeError):
            conv2d_forward(np.zeros((2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1), 1, 1, 1)

    def test_relu_masks_gradient(self):
        layer = ConvLayer(name="c", kernel=np.ones((1, 1, 1, 1)), bias=np.zeros(1))
        x = np.array([[[-1.0, 2.0]]])
        out, cache = layer.forward(x)
        assert out.tolist() == [[[0.0, 2.0]]]
        grad_x = layer.backward(np.ones_like(out), cache)
        assert grad_x.tolist() == [[[0.0, 1.0]]]
        assert layer.grad_kernel.ravel().tolist() == [2.0]

    def test_gradients_accumulate(self, rng):
        layer = ConvLayer.initialize("c", 2, 2, 3, rng, padding=1, relu=False)
        x = rng.normal(size=(2, 4, 4))
        out, cache = layer.forward(x)
        layer.backward(np.ones_like(out), cache)
        once = layer.grad_kernel.copy()
        layer.backward(np.ones_like(out), cache)
        np.testing.assert_allclose(layer.grad_kernel, 2 * once)
        layer.zero_grad()
        assert not layer.grad_kernel.any()


class TestNetwork:
    """Backbone and head shapes, atrous stage and end-to-end gradients."""

    def test_output_shapes(self, tiny_state):
        out = forward(np.zeros((3, 32, 24)), tiny_state)
        assert out.feature_shape == (4, 3)
        assert out.rpn_logits.shape == (6, 4, 3)
        assert out.rpn_deltas.shape == (12, 4, 3)
        assert out.cls_maps.shape == (18, 4, 3)
        assert out.box_maps.shape == (36, 4, 3)

    def test_atrous_doubles_map_size(self, tiny_spec):
        strided_spec = tiny_spec.model_copy(update={"atrous": False})
        atrous = build_network(tiny_spec, np.random.default_rng(0))
        strided = build_network(strided_spec, np.random.default_rng(0))
        assert atrous.num_parameters == strided.num_parameters
        assert tiny_spec.feature_stride == 8 and strided_spec.feature_stride == 16

        image = np.random.default_rng(1).uniform(size=(3, 32, 32))
        assert forward(image, atrous).feature_shape == (4, 4)
        assert forward(image, strided).feature_shape == (2, 2)

    def test_zero_image_gives_zero_logits(self, tiny_state):
        out = forward(np.zeros((3, 16, 16)), tiny_state)
        assert not out.rpn_logits.any()
        assert not out.cls_maps.any()

    def test_indivisible_input(self, tiny_state):
        with pytest.raises(ShapeError):
            forward(np.zeros((3, 20, 16)), tiny_state)

    def test_wrong_channel_count(self, tiny_state):
        with pytest.raises(ShapeError):
            forward(np.zeros((1, 16, 16)), tiny_state)

    def test_spec_from_config(self, anchor_cfg, train_cfg):
        spec = NetworkSpec.from_config(anchor_cfg, train_cfg)
        assert spec.num_anchors == 3
        assert spec.cls_channels == 18
        assert spec.box_channels == 36

    def test_parameter_names(self, tiny_state):
        names = [p.name for p in tiny_state.parameters()]
        assert names[:2] == ["conv1.weight", "conv1.bias"]
        assert names[-2:] == ["cls_pool.w", "box_pool.w"]
        assert len(names) == len(set(names))

    def test_freeze(self, tiny_state):
        tiny_state.freeze(stem_layers=2, box_weights=True)
        assert [layer.frozen for layer in tiny_state.backbone][:3] == [True, True, False]
        assert tiny_state.box_weights.frozen
        with pytest.raises(ValueError):
            tiny_state.freeze(stem_layers=7)

    def test_backward_matches_finite_differences(self, tiny_state):
        rng = np.random.default_rng(3)
        image = rng.uniform(size=(3, 16, 16))
        outputs = forward(image, tiny_state)
        upstream = [rng.normal(size=t.shape) for t in outputs]

        def loss():
            out = forward(image, tiny_state)
            return float(sum(np.sum(u * t) for u, t in zip(upstream, out)))

        tiny_state.zero_grad()
        backward(tiny_state, forward(image, tiny_state), *upstream)

        layers = [
            tiny_state.backbone[0],
            tiny_state.backbone[-1],
            tiny_state.rpn_conv,
            tiny_state.head_conv,
            tiny_state.cls_conv,
        ]
        for layer in layers:
            flat = layer.kernel.reshape(-1)
            analytic = layer.grad_kernel.reshape(-1)
            for idx in rng.choice(flat.size, size=4, replace=False):
                saved = flat[idx]
                flat[idx] = saved + 1e-6
                plus = loss()
                flat[idx] = saved - 1e-6
                minus = loss()
                flat[idx] = saved
                numeric = (plus - minus) / 2e-6
                assert analytic[idx] == pytest.approx(numeric, rel=1e-4, abs=1e-6)

    def test_frozen_layers_get_no_gradient(self, tiny_state):
        tiny_state.freeze(stem_layers=2)
        image = np.random.default_rng(4).uniform(size=(3, 16, 16))
        out = forward(image, tiny_state)
        tiny_state.zero_grad()
        backward(tiny_state, out, np.ones_like(out.rpn_logits))
        assert not tiny_state.backbone[0].grad_kernel.any()
        assert not tiny_state.backbone[1].grad_kernel.any()
        assert tiny_state.backbone[2].grad_kernel.any()
