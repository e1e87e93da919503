import struct

import numpy as np
import pytest

from greenseg.src.libs import autodiff, networks
from greenseg.src.libs.autodiff import Mode, Tensor
from greenseg.src.libs.networks import (Architecture, GraphBuilder, Network,
                                        OpKind)
from greenseg.src.libs.networks.exceptions import (CheckpointError,
                                                   CheckpointVersionError)
from greenseg.src.libs.networks.models import INPUT


def _bn_channels(spec) -> int:
    return sum(n.channels for n in spec.nodes if n.op is OpKind.BATCH_NORM)


def _small(builder_fn, channels=2):
    """Single-block graph built with GraphBuilder and a fresh network."""
    g = GraphBuilder(channels)
    out = builder_fn(g)
    return Network(g.build(out, base_width=channels, depth=2), seed=3)


def _standardized(rng, shape):
    x = rng.standard_normal(shape)
    return (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)


class TestBaseline:

    def test_parameter_count_matches_reference(self):
        total, trainable = networks.count_parameters(networks.build_baseline(6, 16))
        assert trainable == 1_941_537
        assert total == trainable

    def test_width_one_forward(self, rng):
        net = Network(networks.build_baseline(6, 1))
        out = net(rng.standard_normal((1, 6, 64, 64)).astype(np.float32))
        assert out.shape == (1, 1, 64, 64)

    def test_doubling_width_quadruples_parameters(self):
        _, narrow = networks.count_parameters(networks.build_baseline(6, 16))
        _, wide = networks.count_parameters(networks.build_baseline(6, 32))
        assert wide / narrow == pytest.approx(4.0, rel=0.05)

    def test_rejects_zero_width(self):
        with pytest.raises(ValueError):
            networks.build_baseline(6, 0)

    def test_dropout_follows_pooling(self):
        spec = networks.build_baseline()
        drops = [n for n in spec.nodes if n.op is OpKind.DROPOUT]
        assert len(drops) == 4
        assert all(n.attrs["rate"] == 0.1 for n in drops)
        assert all(spec.node(n.inputs[0]).op is OpKind.MAX_POOL for n in drops)


class TestBlocks:

    def test_computational_unit_with_dirac_kernel_is_leaky_relu(self, rng):
        net = _small(lambda g: g.computational_unit("u", INPUT, 2))
        weight = np.zeros((2, 2, 3, 3), dtype=np.float32)
        weight[0, 0, 1, 1] = weight[1, 1, 1, 1] = 1.0
        net.params["u.conv.weight"].assign(weight)

        x = _standardized(rng, (4, 2, 8, 8)).astype(np.float32)
        out = net(x, Mode.TRAIN).data
        expected = np.where(x > 0, x, 0.1 * x)
        np.testing.assert_allclose(out, expected, atol=1e-4)

    def test_computational_unit_zero_input(self):
        net = _small(lambda g: g.computational_unit("u", INPUT, 3))
        assert not np.any(net(np.zeros((2, 2, 6, 6), dtype=np.float32)).data)

    def test_computational_unit_gradients(self, rng):
        net = _small(lambda g: g.computational_unit("u", INPUT, 2))
        x = rng.standard_normal((2, 2, 5, 5))
        direction = rng.standard_normal((2, 2, 5, 5))
        err = autodiff.grad_check(lambda: _projection_loss(net(x, Mode.TRAIN), direction),
                                  net.params.trainable(), samples=6)
        assert err < 1e-4

    def test_computational_block_zero_units_equals_projection(self, rng):
        net = _small(lambda g: g.computational_block("b", INPUT, 4)[0])
        for name in ("b.unit1.conv.weight", "b.unit2.conv.weight"):
            net.params[name].assign(np.zeros_like(net.params[name].data))
        x = rng.standard_normal((2, 2, 6, 6)).astype(np.float32)
        proj = autodiff.conv2d(Tensor(x), net.params["b.proj.weight"], net.params["b.proj.bias"])
        np.testing.assert_allclose(net(x, Mode.TRAIN).data, proj.data, atol=1e-6)

    def test_computational_block_identity_shortcut(self, rng):
        net = _small(lambda g: g.computational_block("b", INPUT, 2)[0])
        assert "b.proj.weight" not in net.params
        for name in ("b.unit1.conv.weight", "b.unit2.conv.weight"):
            net.params[name].assign(np.zeros_like(net.params[name].data))
        x = rng.standard_normal((2, 2, 6, 6)).astype(np.float32)
        assert np.array_equal(net(x, Mode.TRAIN).data, x)

    def test_computational_block_gradient_reaches_both_branches(self, rng):
        net = _small(lambda g: g.computational_block("b", INPUT, 4)[0])
        x = rng.standard_normal((2, 2, 6, 6)).astype(np.float32)
        _projection_loss(net(x, Mode.TRAIN), rng.standard_normal((2, 4, 6, 6))).backward()
        assert np.any(net.params["b.proj.weight"].grad)
        assert np.any(net.params["b.unit1.conv.weight"].grad)

    def test_expansive_unit_without_transposed_path(self, rng):
        net = _small(lambda g: g.expansive_unit("e", INPUT, 3))
        net.params["e.tconv.weight"].assign(np.zeros_like(net.params["e.tconv.weight"].data))
        x = rng.standard_normal((1, 2, 4, 5)).astype(np.float32)
        up = autodiff.bilinear_upsample2x(Tensor(x))
        expected = autodiff.conv2d(up, net.params["e.proj.weight"], net.params["e.proj.bias"])
        out = net(x).data
        assert out.shape == (1, 3, 8, 10)
        np.testing.assert_allclose(out, expected.data, atol=1e-6)

    def test_expansive_unit_all_zero(self, rng):
        net = _small(lambda g: g.expansive_unit("e", INPUT, 3))
        for p in net.params.values():
            p.assign(np.zeros_like(p.data))
        assert not np.any(net(rng.standard_normal((2, 2, 3, 3)).astype(np.float32)).data)

    def test_downsample_block_on_constant_input(self):
        net = _small(lambda g: g.downsample_block("d", INPUT), channels=1)
        net.params["d.conv.weight"].assign(np.zeros((1, 1, 3, 3), dtype=np.float32))
        net.params["d.conv.bias"].assign(np.array([0.25], dtype=np.float32))
        out = net(np.full((1, 1, 8, 8), 3.0, dtype=np.float32)).data
        assert out.shape == (1, 3, 4, 4)
        np.testing.assert_allclose(out[0, 0], 0.25)
        np.testing.assert_allclose(out[0, 1], 3.0)
        np.testing.assert_allclose(out[0, 2], 3.0)

    def test_downsample_block_keeps_bright_pixel(self):
        net = _small(lambda g: g.downsample_block("d", INPUT), channels=1)
        x = np.zeros((1, 1, 8, 8), dtype=np.float32)
        x[0, 0, 5, 2] = 100.0
        out = net(x).data
        assert out[0, 1, 2, 1] == 100.0

    def test_downsample_block_rejects_odd_size(self):
        net = _small(lambda g: g.downsample_block("d", INPUT), channels=1)
        with pytest.raises(autodiff.ContractViolation):
            net(np.zeros((1, 1, 7, 8), dtype=np.float32))

    def test_dilated_bottleneck_zero_stages_equal_projection(self, rng):
        net = _small(lambda g: g.dilated_bottleneck("z", INPUT, 3))
        for i in (1, 2, 3):
            for suffix in ("weight", "bias"):
                p = net.params[f"z.b{i}.conv.{suffix}"]
                p.assign(np.zeros_like(p.data))
        x = rng.standard_normal((2, 2, 9, 9)).astype(np.float32)
        b0 = autodiff.conv2d(Tensor(x), net.params["z.b0.weight"], net.params["z.b0.bias"])
        out = net(x, Mode.TRAIN).data
        assert out.shape == (2, 3, 9, 9)
        np.testing.assert_allclose(out, b0.data, atol=1e-6)

    def test_dilated_bottleneck_receptive_field(self):
        net = _small(lambda g: g.dilated_bottleneck("z", INPUT, 1), channels=1)
        net.params["z.b0.weight"].assign(np.ones((1, 1, 1, 1), dtype=np.float32))
        for i in (1, 2, 3):
            net.params[f"z.b{i}.conv.weight"].assign(np.ones((1, 1, 3, 3), dtype=np.float32))
        x = np.zeros((1, 1, 31, 31), dtype=np.float32)
        x[0, 0, 15, 15] = 1.0
        support = net(x).data[0, 0] != 0
        rows = np.flatnonzero(support.any(axis=1))
        cols = np.flatnonzero(support.any(axis=0))
        assert rows[-1] - rows[0] + 1 >= 15
        assert cols[-1] - cols[0] + 1 >= 15


class TestModelA:

    def test_parameter_report(self):
        spec = networks.build_model_a()
        report = networks.parameter_report(spec)
        assert report.total - report.trainable == 2 * _bn_channels(spec)
        assert report.published_trainable == 2_436_801
        assert abs(report.trainable_delta_pct) < 25.0

    def test_forward_shape(self, rng):
        net = Network(networks.build_model_a(base_width=4))
        out = net(rng.standard_normal((2, 6, 64, 64)).astype(np.float32), Mode.TRAIN)
        assert out.shape == (2, 1, 64, 64)

    def test_decoder_mixes_bilinear_and_transposed_paths(self):
        spec = networks.build_model_a()
        for level in range(3):
            audit = spec.audit(f"dec{level}.expand")
            assert audit[OpKind.UPSAMPLE] == 1
            assert audit[OpKind.TRANSPOSED_CONV] == 1

    def test_gradients_at_toy_scale(self, rng):
        net = Network(networks.build_model_a(base_width=4), seed=5)
        x = rng.standard_normal((2, 6, 8, 8))
        direction = rng.standard_normal((2, 1, 8, 8))

        def forward():
            net.reseed(11)
            return _projection_loss(net(x, Mode.TRAIN), direction)

        err = autodiff.grad_check(forward, net.params.trainable(), samples=2,
                                  rng=np.random.default_rng(2))
        assert err < 1e-3


class TestModelB:

    def test_parameter_report(self):
        spec = networks.build_model_b()
        report = networks.parameter_report(spec)
        assert report.total - report.trainable == 2 * _bn_channels(spec)
        assert abs(report.trainable_delta_pct) < 25.0

    def test_forward_shape(self, rng):
        net = Network(networks.build_model_b(base_width=4))
        assert net(rng.standard_normal((2, 6, 64, 64)).astype(np.float32)).shape == (2, 1, 64, 64)

    def test_has_no_transposed_convolutions_or_dropout(self):
        audit = networks.build_model_b().audit()
        assert audit[OpKind.TRANSPOSED_CONV] == 0
        assert audit[OpKind.DROPOUT] == 0

    def test_dilations(self):
        spec = networks.build_model_b()
        dilations = [n.attrs["dilation"] for n in spec.nodes if n.name.startswith("bottleneck.b")
                     and n.op is OpKind.CONV and n.attrs["kernel"] == (3, 3)]
        assert dilations == [1, 2, 4]

    def test_decoder_upsampling_is_bilinear_then_plain_conv(self):
        spec = networks.build_model_b()
        for level in range(3):
            assert spec.audit(f"dec{level}.up") == {OpKind.UPSAMPLE: 1, OpKind.CONV: 1}
            assert spec.node(f"dec{level}.upconv").attrs["kernel"] == (3, 3)


class TestGraph:

    @pytest.mark.parametrize("arch", list(Architecture))
    def test_every_skip_has_one_consumer(self, arch):
        spec = networks.NetworkFactory(base_width=2).create_spec(arch)
        skips = [n.name for n in spec.nodes if n.skip]
        consumers = [e for n in spec.nodes if n.op is OpKind.CONCAT for e in n.inputs]
        assert skips
        assert all(consumers.count(s) == 1 for s in skips)

    @pytest.mark.parametrize("arch", list(Architecture))
    def test_only_parameterised_ops_own_parameters(self, arch):
        spec = networks.NetworkFactory(base_width=2).create_spec(arch)
        owners = {name.rsplit(".", 1)[0] for name in spec.param_shapes()}
        assert owners == {n.name for n in spec.nodes if n.op.has_params()}

    def test_rejects_shallow_graph(self):
        g = GraphBuilder(1)
        out = g.conv("head", INPUT, 1, kernel=1)
        with pytest.raises(ValueError):
            g.build(out, base_width=1, depth=1)

    def test_infer_mode_is_deterministic(self, rng):
        net = Network(networks.build_model_a(base_width=2))
        x = rng.standard_normal((1, 6, 16, 16)).astype(np.float32)
        assert np.array_equal(net.logits(x), net.logits(x))

    def test_wrong_channel_count(self):
        net = Network(networks.build_model_b(base_width=2))
        with pytest.raises(autodiff.ContractViolation):
            net(np.zeros((1, 4, 16, 16), dtype=np.float32))

    def test_param_store_is_name_sorted(self):
        store = Network(networks.build_model_b(base_width=2)).params
        assert list(store) == sorted(store)


class TestCheckpoint:

    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        net = Network(networks.build_model_a(base_width=2), seed=9)
        net(rng.standard_normal((2, 6, 16, 16)).astype(np.float32), Mode.TRAIN)
        path = tmp_path / "best.gsck"
        networks.save_checkpoint(path, net.spec, net.params, {"epoch": 3, "val_f1": 0.5})

        loaded = networks.load_checkpoint(path)
        assert loaded.spec == net.spec
        assert loaded.metadata == {"epoch": 3, "val_f1": 0.5}
        for name, param in net.params.items():
            assert param.data.tobytes() == loaded.params[name].data.tobytes()

    def test_version_mismatch(self, tmp_path):
        net = Network(networks.build_baseline(base_width=1))
        path = tmp_path / "old.gsck"
        networks.save_checkpoint(path, net.spec, net.params)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointVersionError, match="99"):
            networks.load_checkpoint(path)

    def test_truncated_file(self, tmp_path):
        net = Network(networks.build_baseline(base_width=1))
        path = tmp_path / "cut.gsck"
        networks.save_checkpoint(path, net.spec, net.params)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CheckpointError, match="truncated"):
            networks.load_checkpoint(path)

    @pytest.mark.parametrize("header", [b"{not json", b"\xff\xfe\x00", b'{"metadata": {}}',
                                        b'["spec", "metadata"]', b'{"spec": {}, "metadata": {}}'])
    def test_corrupt_header(self, tmp_path, header):
        path = tmp_path / "header.gsck"
        path.write_bytes(b"".join([networks.checkpoint.MAGIC, struct.pack("<I", networks.checkpoint.VERSION),
                                   struct.pack("<I", len(header)), header, struct.pack("<I", 0)]))
        with pytest.raises(CheckpointError):
            networks.load_checkpoint(path)


def _projection_loss(t: Tensor, direction: np.ndarray) -> Tensor:
    out = np.array((t.data * direction).sum())
    return autodiff.record(out, (t,), lambda g: (direction * g,))
