"""
Tests for the training objectives.
"""

import csv
import itertools

import numpy as np
import pytest

from timbre_forge.exceptions import ConfigError, NonFiniteLoss, ShapeError
from timbre_forge.losses import (
    CSV_HEADER,
    LossCsvWriter,
    LossWeights,
    adversarial_loss_d,
    adversarial_loss_d_grad,
    adversarial_loss_g,
    adversarial_loss_g_grad,
    cyclic_loss,
    cyclic_loss_grad_mu,
    kl_loss,
    kl_loss_grad,
    latent_loss,
    latent_loss_grad,
    mean_pair_distance,
    recon_l1,
    recon_l1_grad,
    total_objective,
    vae_loss,
)
from timbre_forge.nn.gradcheck import numerical_gradient, relative_error

ZERO_PARTS = {"gan_g": 0.0, "gan_d": 0.0, "kl": 0.0, "recon": 0.0, "cc_kl": 0.0, "cc_recon": 0.0, "latent": 0.0}


class TestAdversarial:
    """Tests for the least-squares adversarial losses."""

    @pytest.mark.parametrize(
        "real, fake, expected",
        [(1.0, 0.0, 0.0), (0.5, 0.5, 0.5), (0.0, 1.0, 2.0)],
    )
    def test_discriminator_constant_grids(self, real, fake, expected):
        """Constant score grids give closed-form values."""
        assert adversarial_loss_d(np.full((2, 1, 4, 4), real), np.full((2, 1, 4, 4), fake)) == pytest.approx(expected)

    @pytest.mark.parametrize("fake, expected", [(1.0, 0.0), (0.0, 1.0), (0.5, 0.25)])
    def test_generator_constant_grids(self, fake, expected):
        """The generator loss is minimized by scores of one."""
        assert adversarial_loss_g(np.full((2, 1, 4, 4), fake)) == pytest.approx(expected)

    def test_permutation_invariance(self, rng):
        """Shuffling score positions does not change the loss."""
        real, fake = rng.standard_normal(16), rng.standard_normal(16)
        order = rng.permutation(16)
        assert adversarial_loss_d(real, fake) == pytest.approx(adversarial_loss_d(real[order], fake[order]))

    def test_shape_mismatch(self):
        """Real and fake grids must match."""
        with pytest.raises(ShapeError):
            adversarial_loss_d(np.zeros((1, 1, 4, 4)), np.zeros((2, 1, 4, 4)))

    def test_gradients(self, rng):
        """Analytic gradients match finite differences."""
        real, fake = rng.standard_normal((2, 1, 4, 4)), rng.standard_normal((2, 1, 4, 4))
        d_real, d_fake = adversarial_loss_d_grad(real, fake)
        assert relative_error(d_real, numerical_gradient(lambda: adversarial_loss_d(real, fake), real)) < 1e-6
        assert relative_error(d_fake, numerical_gradient(lambda: adversarial_loss_d(real, fake), fake)) < 1e-6
        d_gen = adversarial_loss_g_grad(fake)
        assert relative_error(d_gen, numerical_gradient(lambda: adversarial_loss_g(fake), fake)) < 1e-6


class TestVaeTerms:
    """Tests for the KL and L1 terms."""

    def test_kl_closed_form(self):
        """Zero means cost nothing; a single mean of 2 costs 2."""
        assert kl_loss(np.zeros((3, 128, 16, 16))) == 0.0
        assert kl_loss(np.array([2.0])) == 2.0

    def test_kl_quadratic(self, rng):
        """Scaling the means by 3 scales the loss by 9."""
        mu = rng.standard_normal((2, 8, 4, 4))
        assert kl_loss(3.0 * mu) == pytest.approx(9.0 * kl_loss(mu))

    def test_kl_batch_average(self):
        """The KL term is summed over elements and averaged over the batch."""
        mu = np.ones((4, 2, 2, 2))
        assert kl_loss(mu) == pytest.approx(0.5 * 8)

    @pytest.mark.parametrize("squared_norm", [1.0, 10.0, 100.0])
    def test_kl_matches_monte_carlo(self, squared_norm):
        """The closed form agrees with a sampled log-density-ratio estimate within 2%."""
        rng = np.random.default_rng(int(squared_norm))
        direction = rng.standard_normal(8)
        mu = direction / np.linalg.norm(direction) * np.sqrt(squared_norm)
        z = mu + rng.standard_normal((200_000, 8))
        log_ratio = -0.5 * np.sum((z - mu) ** 2, axis=1) + 0.5 * np.sum(z**2, axis=1)
        assert np.mean(log_ratio) == pytest.approx(kl_loss(mu[None]), rel=0.02)

    def test_kl_gradient(self, rng):
        """The KL gradient is mu over the batch size."""
        mu = rng.standard_normal((2, 3, 2, 2))
        assert relative_error(kl_loss_grad(mu), numerical_gradient(lambda: kl_loss(mu), mu)) < 1e-6

    def test_l1_values(self):
        """Perfect reconstruction costs 0; all-wrong by one costs 1."""
        assert recon_l1(np.zeros((8, 8)), np.zeros((8, 8))) == 0.0
        assert recon_l1(np.zeros((8, 8)), np.ones((8, 8))) == 1.0

    def test_l1_matches_loop(self, rng):
        """The vectorized L1 matches an explicit loop."""
        x, x_hat = rng.uniform(size=(8, 8)), rng.uniform(size=(8, 8))
        total = 0.0
        for i, j in itertools.product(range(8), range(8)):
            total += abs(x_hat[i, j] - x[i, j])
        assert recon_l1(x, x_hat) == pytest.approx(total / 64, abs=1e-7)

    def test_l1_gradient(self, rng):
        """The L1 gradient is the sign of the error over the element count."""
        x, x_hat = rng.uniform(size=(2, 1, 4, 4)), rng.uniform(size=(2, 1, 4, 4))
        assert relative_error(recon_l1_grad(x, x_hat), numerical_gradient(lambda: recon_l1(x, x_hat), x_hat)) < 1e-6

    def test_vae_loss(self):
        """With zero means only the weighted reconstruction term remains."""
        x = np.zeros((1, 1, 4, 4))
        assert vae_loss(np.zeros(3), x, x, LossWeights()) == 0.0
        assert vae_loss(np.zeros((1, 3)), x, np.full_like(x, 0.1), LossWeights()) == pytest.approx(10.0)

    def test_vae_loss_linear_in_lambda1(self, rng):
        """Doubling lambda1 adds exactly one more KL contribution."""
        mu, x, x_hat = rng.standard_normal((1, 4)), rng.uniform(size=(4, 4)), rng.uniform(size=(4, 4))
        base = vae_loss(mu, x, x_hat, LossWeights())
        doubled = vae_loss(mu, x, x_hat, LossWeights(lambda1=0.2))
        assert doubled - base == pytest.approx(0.1 * kl_loss(mu))


class TestCyclicLoss:
    """Tests for cyclic_loss."""

    @pytest.mark.parametrize("include_kld", [True, False])
    def test_perfect_cycle(self, include_kld):
        """A perfect cycle with zero means costs nothing."""
        x = np.full((1, 1, 4, 4), 0.3)
        assert cyclic_loss(np.zeros((1, 8)), x, x, LossWeights(), include_kld) == 0.0

    def test_without_kld_ignores_mu(self, rng):
        """Without the KL term the loss does not depend on the re-encoded mean."""
        x, x_cc = rng.uniform(size=(1, 1, 4, 4)), rng.uniform(size=(1, 1, 4, 4))
        first = cyclic_loss(rng.standard_normal((1, 8)), x, x_cc, LossWeights(), include_kld=False)
        second = cyclic_loss(rng.standard_normal((1, 8)) * 50, x, x_cc, LossWeights(), include_kld=False)
        assert first == second
        assert not cyclic_loss_grad_mu(rng.standard_normal((1, 8)), LossWeights(), include_kld=False).any()

    def test_weighted_kl(self):
        """A single re-encoded mean of one costs lambda3 * 0.5."""
        x = np.zeros((1, 1, 2, 2))
        assert cyclic_loss(np.array([1.0]), x, x, LossWeights()) == pytest.approx(0.05)


class TestLatentLoss:
    """Tests for latent_loss."""

    def test_identical_means(self, rng):
        """Identical means cost nothing."""
        mu = rng.standard_normal((1, 8))
        assert latent_loss([mu, mu.copy()], LossWeights()) == 0.0

    def test_two_scalars(self):
        """Means 0 and 1 with lambda5 = 10 cost 10."""
        assert latent_loss([np.array([0.0]), np.array([1.0])], LossWeights()) == pytest.approx(10.0)

    def test_four_means_average_six_pairs(self, rng):
        """Four means average over the six unordered pairs."""
        mus = [rng.standard_normal(5) for _ in range(4)]
        pairs = [np.mean(np.abs(a - b)) for a, b in itertools.combinations(mus, 2)]
        assert len(pairs) == 6
        assert mean_pair_distance(mus) == pytest.approx(sum(pairs) / 6)

    def test_order_invariant(self, rng):
        """Reordering the means leaves the loss unchanged."""
        mus = [rng.standard_normal(5) for _ in range(4)]
        assert latent_loss(mus, LossWeights()) == pytest.approx(latent_loss(mus[::-1], LossWeights()))

    def test_needs_two_means(self):
        """A single mean is a configuration error."""
        with pytest.raises(ConfigError):
            latent_loss([np.zeros(3)], LossWeights())

    def test_gradients(self, rng):
        """Per-mean gradients match finite differences."""
        mus = [rng.standard_normal((1, 2, 3)) for _ in range(3)]
        grads = latent_loss_grad(mus, LossWeights())
        for mu, grad in zip(mus, grads):
            assert relative_error(grad, numerical_gradient(lambda: latent_loss(mus, LossWeights()), mu)) < 1e-6


class TestTotalObjective:
    """Tests for total_objective."""

    def test_all_zero(self):
        """Zero parts give zero totals."""
        report = total_objective(**ZERO_PARTS, weights=LossWeights())
        assert report.total_g == 0.0
        assert report.total_d == 0.0

    def test_weighted_sum(self):
        """Totals match a hand-computed weighted sum and components are echoed unweighted."""
        parts = {"gan_g": 0.5, "gan_d": 0.3, "kl": 20.0, "recon": 0.1, "cc_kl": 30.0, "cc_recon": 0.2, "latent": 0.05}

        report = total_objective(**parts, weights=LossWeights())

        assert report.total_g == pytest.approx(10 * 0.5 + 0.1 * 20 + 100 * 0.1 + 0.1 * 30 + 100 * 0.2 + 10 * 0.05)
        assert report.total_d == pytest.approx(3.0)
        assert report.l_kl == 20.0
        assert report.l_latent == 0.05

    def test_without_cyclic_kld(self):
        """Dropping the cyclic KL removes its contribution."""
        parts = dict(ZERO_PARTS, cc_kl=30.0)
        assert total_objective(**parts, weights=LossWeights(), include_kld=False).total_g == 0.0

    def test_linear_in_weights(self):
        """Doubling a weight doubles its contribution."""
        parts = dict(ZERO_PARTS, recon=0.25)
        single = total_objective(**parts, weights=LossWeights(lambda2=100.0)).total_g
        double = total_objective(**parts, weights=LossWeights(lambda2=200.0)).total_g
        assert double == pytest.approx(2 * single)

    def test_non_finite_term(self):
        """A NaN part raises NonFiniteLoss naming the term."""
        with pytest.raises(NonFiniteLoss) as exc:
            total_objective(**dict(ZERO_PARTS, cc_recon=float("nan")), weights=LossWeights())
        assert exc.value.term == "l_cc_recon"
        assert "l_kl" in exc.value.report

    def test_negative_weight_rejected(self):
        """Weights must be non-negative."""
        with pytest.raises(ValueError):
            LossWeights(lambda0=-1.0)


class TestLossCsvWriter:
    """Tests for LossCsvWriter."""

    def test_header_and_rows(self, tmp_path):
        """The header names every scalar and rows are readable before close."""
        report = total_objective(**dict(ZERO_PARTS, recon=0.125), weights=LossWeights())
        writer = LossCsvWriter(tmp_path / "losses.csv")
        writer.write(1, 0, "flute+cello", 1e-4, report)

        with (tmp_path / "losses.csv").open(encoding="utf8") as handle:
            rows = list(csv.reader(handle))
        writer.close()

        assert tuple(rows[0]) == CSV_HEADER
        assert rows[0][4:] == ["l_gan_g", "l_gan_d", "l_kl", "l_recon", "l_cc_kl", "l_cc_recon", "l_latent",
                               "total_g", "total_d"]
        assert rows[1][:3] == ["1", "0", "flute+cello"]
        assert float(rows[1][CSV_HEADER.index("total_g")]) == 12.5

    def test_append_keeps_single_header(self, tmp_path):
        """Appending to an existing file does not repeat the header."""
        report = total_objective(**ZERO_PARTS, weights=LossWeights())
        with LossCsvWriter(tmp_path / "losses.csv") as writer:
            writer.write(1, 0, "a+b", 1e-4, report)
        with LossCsvWriter(tmp_path / "losses.csv", append=True) as writer:
            writer.write(2, 0, "a+b", 1e-4, report)

        lines = (tmp_path / "losses.csv").read_text(encoding="utf8").splitlines()
        assert len(lines) == 3
