"""
Tests for ModelBundle, build_model and reparameterize.
"""

import numpy as np
import pytest

from timbre_forge.exceptions import ConfigError, ShapeError, UnknownDomain
from timbre_forge.model.bundle import (
    ModelBundle,
    VariantFlags,
    build_model,
    reparameterize,
)


class TestReparameterize:
    """Tests for reparameterize."""

    def test_deterministic(self, rng):
        """Deterministic mode returns the mean itself."""
        mu = rng.standard_normal((2, 128, 16, 16)).astype(np.float32)
        assert reparameterize(mu, deterministic=True) is mu

    def test_noise_statistics(self):
        """Over 100000 draws the noise has mean 0 and variance 1."""
        mu = np.full(100_000, 0.7)
        noise = reparameterize(mu, np.random.default_rng(42)) - mu
        assert -0.02 <= noise.mean() <= 0.02
        assert 0.98 <= noise.var() <= 1.02

    def test_same_seed_same_code(self):
        """Two generators with the same seed give the same code."""
        mu = np.zeros((1, 128, 16, 16), dtype=np.float32)
        first = reparameterize(mu, np.random.default_rng(9))
        second = reparameterize(mu, np.random.default_rng(9))
        np.testing.assert_array_equal(first, second)
        assert first.dtype == np.float32

    def test_requires_rng(self):
        """Sampling needs a generator."""
        with pytest.raises(ValueError):
            reparameterize(np.zeros(3))


class TestBuildModel:
    """Tests for build_model and the bundle's structure."""

    def test_two_domains(self, bundle):
        """A two-domain bundle holds one encoder, one shared block, two decoders and two discriminators."""
        assert bundle.domains == ["flute", "cello"]
        assert sorted(bundle.decoders) == ["cello", "flute"]
        assert sorted(bundle.discriminators) == ["cello", "flute"]

    def test_four_domains_many_to_many(self):
        """Four domains get four decoder-discriminator pairs around a single encoder."""
        bundle = build_model(["a", "b", "c", "d"], VariantFlags(topology="many_to_many"), seed=0)
        assert len(bundle.decoders) == 4
        assert len(bundle.discriminators) == 4
        assert sum(1 for key in bundle.parameter_report() if key.startswith("encoder")) == 1

    def test_duplicate_domains(self):
        """Duplicate names are rejected."""
        with pytest.raises(ConfigError):
            build_model(["a", "a"])

    @pytest.mark.parametrize("domains", [["a"], ["a", "b", "c"]])
    def test_one_to_one_needs_two_domains(self, domains):
        """The one-to-one topology takes exactly two domains."""
        with pytest.raises(ConfigError):
            build_model(domains)

    def test_same_seed_same_parameters(self):
        """Initialization is a function of the seed."""
        first = ModelBundle(["x", "y"], seed=5)
        second = ModelBundle(["x", "y"], seed=5)
        for (name, a), (_, b) in zip(first.named_parameters(), second.named_parameters()):
            assert np.array_equal(a.data, b.data), name

    def test_domain_parameters_disjoint(self, bundle):
        """Decoders and discriminators of different domains share no arrays."""

        def arrays(name):
            return {id(p.data) for p in bundle.decoders[name].parameters() + bundle.discriminators[name].parameters()}

        assert not arrays("flute") & arrays("cello")

    def test_parameter_report(self, bundle):
        """The report adds up to the total and the bottleneck variant is smaller."""
        report = bundle.parameter_report()
        assert report["total"] == sum(value for key, value in report.items() if key != "total")
        smaller = ModelBundle(["flute", "cello"], VariantFlags(residual_kind="bottleneck"), seed=0)
        assert smaller.parameter_report()["total"] < report["total"]

    def test_parameter_groups(self, bundle):
        """A pair's generator group spans the encoder, the shared block and the pair's decoders."""
        names = bundle.generator_parameter_names(["flute"])
        assert any(name.startswith("encoder.") for name in names)
        assert any(name.startswith("shared.") for name in names)
        assert not any(name.startswith("decoders.cello.") for name in names)
        assert all(name.startswith("discriminators.cello.") for name in bundle.discriminator_parameter_names(["cello"]))

    def test_presets(self):
        """Named presets map onto flag combinations."""
        assert VariantFlags.preset("initial") == VariantFlags()
        assert VariantFlags.preset("no-kld-cyclic").cyclic_kld is False
        assert VariantFlags.preset("bottleneck-residual").residual_kind == "bottleneck"
        with pytest.raises(ConfigError):
            VariantFlags.preset("huge")


class TestForwardPaths:
    """Shape and value contracts of the bundle's forward paths."""

    @pytest.mark.parametrize("kind", ["basic", "bottleneck"])
    def test_round_trip_shapes(self, kind, rng):
        """encode, reparameterize, decode and discriminate keep the documented shapes for every domain."""
        bundle = ModelBundle(["flute", "cello"], VariantFlags(residual_kind=kind), seed=1)
        x = rng.uniform(0.0, 1.0, (2, 1, 128, 128)).astype(np.float32)

        mu, _ = bundle.encode(x)
        assert mu.shape == (2, 128, 16, 16)
        for domain in bundle.domains:
            out, _ = bundle.decode(reparameterize(mu, rng), domain)
            assert out.shape == x.shape
            assert 0.0 <= out.min() and out.max() <= 1.0
            scores, _ = bundle.discriminate(out, domain)
            assert scores.shape == (2, 1, 4, 4)

    def test_encoder_deterministic_and_finite(self, bundle):
        """Equal inputs give equal means; an all-zero input gives finite means."""
        x = np.zeros((2, 1, 128, 128), dtype=np.float32)
        mu, _ = bundle.encode(x)
        assert np.isfinite(mu).all()
        np.testing.assert_array_equal(mu[0], mu[1])

    def test_translate(self, bundle, rng):
        """Translation in deterministic mode is repeatable and domain-dependent."""
        x = rng.uniform(0.0, 1.0, (1, 1, 128, 128)).astype(np.float32)
        to_cello = bundle.translate(x, "flute", "cello")
        np.testing.assert_array_equal(to_cello, bundle.translate(x, "flute", "cello"))
        assert not np.array_equal(to_cello, bundle.translate(x, "flute", "flute"))

    def test_unknown_domain(self, bundle):
        """Decoding or discriminating for an unknown domain raises UnknownDomain."""
        with pytest.raises(UnknownDomain):
            bundle.decode(np.zeros((1, 128, 16, 16), dtype=np.float32), "harp")
        with pytest.raises(UnknownDomain):
            bundle.discriminate(np.zeros((1, 1, 128, 128), dtype=np.float32), "harp")

    def test_wrong_input_shape(self, bundle):
        """The encoder only takes 128x128 single-channel patches."""
        with pytest.raises(ShapeError):
            bundle.encode(np.zeros((1, 1, 64, 128), dtype=np.float32))
