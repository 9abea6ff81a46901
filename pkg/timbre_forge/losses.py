"""
Training objectives: least-squares adversarial terms, the VAE and cyclic terms,
latent alignment and the weighted totals.

Each loss returns a Python float. The ``*_grad`` companions return gradients
with respect to the arrays the trainer back-propagates through.
"""

import csv
import itertools
import logging
import math
from pathlib import Path

import numpy as np
from attrs import asdict, field, fields, frozen, validators

from .exceptions import ConfigError, NonFiniteLoss, ShapeError

logger = logging.getLogger(__name__)

_non_negative = [validators.instance_of(float), validators.ge(0.0)]


@frozen
class LossWeights:
    """Weights of the objective terms: adversarial, KL, reconstruction, cyclic KL, cyclic reconstruction, latent."""

    lambda0: float = field(default=10.0, converter=float, validator=_non_negative)
    lambda1: float = field(default=0.1, converter=float, validator=_non_negative)
    lambda2: float = field(default=100.0, converter=float, validator=_non_negative)
    lambda3: float = field(default=0.1, converter=float, validator=_non_negative)
    lambda4: float = field(default=100.0, converter=float, validator=_non_negative)
    lambda5: float = field(default=10.0, converter=float, validator=_non_negative)


@frozen
class LossReport:
    """Unweighted loss components of one step and the two weighted totals."""

    l_gan_g: float
    l_gan_d: float
    l_kl: float
    l_recon: float
    l_cc_kl: float
    l_cc_recon: float
    l_latent: float
    total_g: float
    total_d: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


REPORT_FIELDS = tuple(attribute.name for attribute in fields(LossReport))
CSV_HEADER = ("step", "epoch", "pair", "lr") + REPORT_FIELDS


def _same_shape(name, a, b):
    if np.shape(a) != np.shape(b):
        raise ShapeError(f"{name} inputs differ in shape", expected=np.shape(a), got=np.shape(b))


def _batch_size(mu: np.ndarray) -> int:
    return mu.shape[0] if np.ndim(mu) > 0 else 1


# -------------------------------------------------------------------------
# Adversarial (least squares)
# -------------------------------------------------------------------------

def adversarial_loss_d(real_scores: np.ndarray, fake_scores: np.ndarray) -> float:
    """``mean((real - 1)^2) + mean(fake^2)``; fake scores come from detached generator output."""
    _same_shape("adversarial_loss_d", real_scores, fake_scores)
    return float(np.mean(np.square(real_scores - 1.0)) + np.mean(np.square(fake_scores)))


def adversarial_loss_d_grad(real_scores: np.ndarray, fake_scores: np.ndarray):
    """Gradients of adversarial_loss_d with respect to (real_scores, fake_scores)."""
    return 2.0 * (real_scores - 1.0) / real_scores.size, 2.0 * fake_scores / fake_scores.size


def adversarial_loss_g(fake_scores: np.ndarray) -> float:
    """``mean((fake - 1)^2)``."""
    return float(np.mean(np.square(fake_scores - 1.0)))


def adversarial_loss_g_grad(fake_scores: np.ndarray) -> np.ndarray:
    return 2.0 * (fake_scores - 1.0) / fake_scores.size


# -------------------------------------------------------------------------
# VAE and cyclic terms
# -------------------------------------------------------------------------

def kl_loss(mu: np.ndarray) -> float:
    """KL(N(mu, I) || N(0, I)): half the squared norm of each mean, averaged over the batch."""
    return float(0.5 * np.sum(np.square(mu, dtype=np.float64)) / _batch_size(mu))


def kl_loss_grad(mu: np.ndarray) -> np.ndarray:
    return mu / _batch_size(mu)


def recon_l1(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean absolute difference."""
    _same_shape("recon_l1", x, x_hat)
    return float(np.mean(np.abs(np.asarray(x_hat, dtype=np.float64) - x)))


def recon_l1_grad(x: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    """Gradient of recon_l1 with respect to ``x_hat``."""
    return np.sign(x_hat - x) / x_hat.size


def vae_loss(mu: np.ndarray, x: np.ndarray, x_hat: np.ndarray, weights: LossWeights) -> float:
    return weights.lambda1 * kl_loss(mu) + weights.lambda2 * recon_l1(x, x_hat)


def cyclic_loss(mu_cc: np.ndarray, x: np.ndarray, x_cc: np.ndarray, weights: LossWeights,
                include_kld: bool = True) -> float:
    """Cyclic reconstruction loss; the KL term on the re-encoded mean is optional."""
    recon = weights.lambda4 * recon_l1(x, x_cc)
    return weights.lambda3 * kl_loss(mu_cc) + recon if include_kld else recon


def cyclic_loss_grad_mu(mu_cc: np.ndarray, weights: LossWeights, include_kld: bool = True) -> np.ndarray:
    """Gradient of cyclic_loss with respect to ``mu_cc``; exactly zero without the KL term."""
    if not include_kld:
        return np.zeros_like(mu_cc)
    return weights.lambda3 * kl_loss_grad(mu_cc)


# -------------------------------------------------------------------------
# Latent alignment
# -------------------------------------------------------------------------

def _check_means(mus):
    if len(mus) < 2:
        raise ConfigError("Latent alignment needs at least two means", {"mus": f"got {len(mus)}"})
    for mu in mus[1:]:
        _same_shape("latent_loss", mus[0], mu)


def mean_pair_distance(mus) -> float:
    """Mean over unordered pairs of the mean absolute difference between two means."""
    _check_means(mus)
    distances = [np.mean(np.abs(np.asarray(a, dtype=np.float64) - b)) for a, b in itertools.combinations(mus, 2)]
    return float(np.mean(distances))


def latent_loss(mus, weights: LossWeights) -> float:
    return weights.lambda5 * mean_pair_distance(mus)


def latent_loss_grad(mus, weights: LossWeights) -> list[np.ndarray]:
    """Gradient of latent_loss with respect to each mean."""
    _check_means(mus)
    pairs = list(itertools.combinations(range(len(mus)), 2))
    scale = weights.lambda5 / (len(pairs) * mus[0].size)
    grads = [np.zeros_like(mu) for mu in mus]
    for i, j in pairs:
        sign = np.sign(mus[i] - mus[j]) * scale
        grads[i] += sign.astype(grads[i].dtype, copy=False)
        grads[j] -= sign.astype(grads[j].dtype, copy=False)
    return grads


# -------------------------------------------------------------------------
# Totals
# -------------------------------------------------------------------------

def total_objective(
    *,
    gan_g: float,
    gan_d: float,
    kl: float,
    recon: float,
    cc_kl: float,
    cc_recon: float,
    latent: float,
    weights: LossWeights,
    include_kld: bool = True,
) -> LossReport:
    """
    Weight unweighted components into the generator and discriminator totals.

    ``latent`` is the unweighted mean pair distance.
    """
    parts = {
        "l_gan_g": gan_g,
        "l_gan_d": gan_d,
        "l_kl": kl,
        "l_recon": recon,
        "l_cc_kl": cc_kl,
        "l_cc_recon": cc_recon,
        "l_latent": latent,
    }
    for term, value in parts.items():
        if not math.isfinite(value):
            raise NonFiniteLoss(term, parts)
    total_g = (
        weights.lambda0 * gan_g
        + weights.lambda1 * kl
        + weights.lambda2 * recon
        + (weights.lambda3 * cc_kl if include_kld else 0.0)
        + weights.lambda4 * cc_recon
        + weights.lambda5 * latent
    )
    total_d = weights.lambda0 * gan_d
    for term, value in (("total_g", total_g), ("total_d", total_d)):
        if not math.isfinite(value):
            raise NonFiniteLoss(term, parts)
    return LossReport(**{name: float(value) for name, value in parts.items()}, total_g=float(total_g),
                      total_d=float(total_d))


class LossCsvWriter:
    """Append one row per step to a loss CSV, flushing after every row."""

    def __init__(self, path, append: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        write_header = not (append and self.path.exists() and self.path.stat().st_size > 0)
        self._handle = self.path.open("a" if append else "w", newline="", encoding="utf8")
        self._writer = csv.writer(self._handle, lineterminator="\n")
        if write_header:
            self._writer.writerow(CSV_HEADER)
            self._handle.flush()

    def write(self, step: int, epoch: int, pair: str, lr: float, report: LossReport):
        self._writer.writerow([step, epoch, pair, repr(float(lr))] + [repr(getattr(report, f)) for f in REPORT_FIELDS])
        self._handle.flush()

    def close(self):
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
