"""Model variants: Gauss VAE, SB-VAE (three fraction parametrizations), and
their semi-supervised counterparts.

Objectives are maximized. Gradient functions return gradients of the *sum* of
per-example objectives over the batch; callers scale by whatever batch weight
they need. All stochasticity enters through explicit noise arrays so the same
computation can be replayed for finite-difference checks.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import distributions as dist
from . import nn
from .numerics import draw_standard_normal, draw_uniform
from .stick import compose_sticks, stick_backward

GAUSS_VAE = "gauss_vae"
SB_VAE = "sb_vae"
FRACTION_PARAMS = ("kumaraswamy", "gamma", "gauss_logit")


@dataclass
class ModelSpec:
    variant: str
    input_dim: int
    latent_dim: int  # truncation level K for sb_vae
    hidden: tuple = (200,)
    fraction_param: str = "kumaraswamy"
    alpha0: float = 5.0
    n_classes: int = 0  # 0 = unsupervised, >0 = semi-supervised M2
    mc_samples: int = 1
    kl_terms: int = 10
    encoder_skip: tuple = None
    decoder_skip: tuple = None

    def __post_init__(self):
        if self.variant not in (GAUSS_VAE, SB_VAE):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == SB_VAE and self.fraction_param not in FRACTION_PARAMS:
            raise ValueError(f"unknown fraction parametrization {self.fraction_param!r}")
        if self.variant == SB_VAE and self.latent_dim < 2:
            raise ValueError("stick-breaking needs a truncation level of at least 2")
        if self.mc_samples < 1:
            raise ValueError("need at least one Monte Carlo sample")
        self.hidden = tuple(int(h) for h in self.hidden)

    @property
    def n_stochastic(self) -> int:
        """Number of stochastic latent coordinates (the Kth fraction is fixed)."""
        return self.latent_dim - 1 if self.variant == SB_VAE else self.latent_dim

    @property
    def encoder_cfg(self) -> nn.MlpConfig:
        return nn.MlpConfig((self.input_dim, *self.hidden), self.encoder_skip)

    @property
    def decoder_cfg(self) -> nn.MlpConfig:
        return nn.MlpConfig(
            (self.latent_dim + self.n_classes, *self.hidden), self.decoder_skip
        )


@dataclass
class ModelParams:
    enc_hidden: list
    enc_out: nn.LayerParams
    dec_hidden: list
    dec_out: nn.LayerParams
    classifier: nn.LayerParams = None

    def layers(self) -> list:
        out = [*self.enc_hidden, self.enc_out, *self.dec_hidden, self.dec_out]
        if self.classifier is not None:
            out.append(self.classifier)
        return out


@dataclass
class ElboEstimate:
    expected_reconstruction: float
    kl: float
    per_example: np.ndarray  # per-example ELBO

    @property
    def elbo(self) -> float:
        return self.expected_reconstruction - self.kl


def init_model_params(spec: ModelSpec, rng) -> ModelParams:
    enc_hidden = nn.init_hidden_stack(spec.encoder_cfg, rng)
    enc_out = nn.init_linear(spec.hidden[-1], 2 * spec.n_stochastic, rng)
    dec_hidden = nn.init_hidden_stack(spec.decoder_cfg, rng)
    dec_out = nn.init_linear(spec.hidden[-1], spec.input_dim, rng)
    classifier = (
        nn.init_linear(spec.hidden[-1], spec.n_classes, rng)
        if spec.n_classes > 0
        else None
    )
    return ModelParams(enc_hidden, enc_out, dec_hidden, dec_out, classifier)


def zeros_like_params(params: ModelParams) -> ModelParams:
    def zl(layer):
        return nn.LayerParams(np.zeros_like(layer.W), np.zeros_like(layer.b))

    return ModelParams(
        [zl(l) for l in params.enc_hidden],
        zl(params.enc_out),
        [zl(l) for l in params.dec_hidden],
        zl(params.dec_out),
        zl(params.classifier) if params.classifier is not None else None,
    )


def flatten_params(params: ModelParams) -> np.ndarray:
    return np.concatenate(
        [np.concatenate([l.W.ravel(), l.b.ravel()]) for l in params.layers()]
    )


def unflatten_params(params: ModelParams, theta: np.ndarray) -> ModelParams:
    out = zeros_like_params(params)
    offset = 0
    for layer in out.layers():
        n = layer.W.size
        layer.W[...] = theta[offset : offset + n].reshape(layer.W.shape)
        offset += n
        n = layer.b.size
        layer.b[...] = theta[offset : offset + n]
        offset += n
    if offset != theta.size:
        raise ValueError("flat parameter vector has the wrong length")
    return out


def add_scaled(into: ModelParams, grads: ModelParams, scale: float) -> None:
    for dst, src in zip(into.layers(), grads.layers()):
        dst.W += scale * src.W
        dst.b += scale * src.b


# ---------------------------------------------------------------------------
# Noise handling
# ---------------------------------------------------------------------------

def draw_noise(spec: ModelSpec, rng, n: int) -> dict:
    m = spec.n_stochastic
    if spec.variant == GAUSS_VAE:
        return {"eps": draw_standard_normal(rng, (n, m))}
    if spec.fraction_param == "kumaraswamy":
        return {"u": draw_uniform(rng, (n, m))}
    if spec.fraction_param == "gamma":
        return {"u_x": draw_uniform(rng, (n, m)), "u_y": draw_uniform(rng, (n, m))}
    return {"eps": draw_standard_normal(rng, (n, m))}


# ---------------------------------------------------------------------------
# Encoder / latent pipeline
# ---------------------------------------------------------------------------

_warned_gamma_clamp = False


def _gamma_shapes(t_half):
    """Positive shape parameters clamped to <= 1, where the approximation holds."""
    global _warned_gamma_clamp
    raw = dist.positive_from_unconstrained(t_half)
    clamped = raw > 1.0
    if np.any(clamped) and not _warned_gamma_clamp:
        warnings.warn(
            "gamma-composition shape parameters clamped to 1; the asymptotic "
            "inverse CDF degrades for larger shapes"
        )
        _warned_gamma_clamp = True
    return np.minimum(raw, 1.0), clamped


class _LatentState:
    """Caches everything the latent backward pass needs."""

    def __init__(self):
        self.kl = None  # per-example KL vector
        self.z = None  # latent batch handed to the decoder (pi for sb)
        self.post = None  # posterior parameter arrays, per parametrization


def _latent_forward(
    spec: ModelSpec, t: np.ndarray, noise: dict, exact_kl: bool = False
) -> _LatentState:
    st = _LatentState()
    m = spec.n_stochastic
    if spec.variant == GAUSS_VAE:
        mu = t[:, :m]
        sraw = t[:, m:]
        sigma = dist.positive_from_unconstrained(sraw)
        z = mu + sigma * noise["eps"]
        st.z = z
        st.kl = dist.kl_diag_gaussian_std_normal(mu, sigma)
        st.post = {"mu": mu, "sigma": sigma, "sraw": sraw}
        return st

    alpha0 = spec.alpha0
    if spec.fraction_param == "kumaraswamy":
        a = dist.positive_from_unconstrained(t[:, :m])
        b = dist.positive_from_unconstrained(t[:, m:])
        v = dist.kumaraswamy_inverse_cdf(noise["u"], a, b)
        kl_mat = dist.kl_kumaraswamy_beta(
            a, b, 1.0, alpha0, spec.kl_terms, tail_correction=exact_kl
        )
        st.post = {"a": a, "b": b, "ta": t[:, :m], "tb": t[:, m:]}
    elif spec.fraction_param == "gamma":
        a_x, cl_x = _gamma_shapes(t[:, :m])
        a_y, cl_y = _gamma_shapes(t[:, m:])
        v = dist.gamma_composition_fraction(noise["u_x"], noise["u_y"], a_x, a_y)
        kl_mat = dist.beta_log_pdf(v, a_x, a_y) - dist.beta_log_pdf(v, 1.0, alpha0)
        st.post = {
            "a_x": a_x,
            "a_y": a_y,
            "cl_x": cl_x,
            "cl_y": cl_y,
            "tx": t[:, :m],
            "ty": t[:, m:],
        }
    else:  # gauss_logit
        mu = t[:, :m]
        sraw = t[:, m:]
        s = dist.positive_from_unconstrained(sraw)
        v = dist.gauss_logit_fraction(noise["eps"], mu, s)
        kl_mat = dist.kl_gauss_logit(mu, s, 1.0, alpha0, v)
        st.post = {"mu": mu, "s": s, "sraw": sraw}

    # extreme posterior parameters can round a fraction onto the boundary,
    # where the fraction densities blow up; keep draws strictly interior
    v = np.clip(v, 1e-12, 1.0 - 1e-12)
    st.post["v"] = v
    vfull = np.concatenate([v, np.ones((v.shape[0], 1))], axis=1)
    st.post["vfull"] = vfull
    st.z = compose_sticks(vfull)
    st.kl = kl_mat.sum(axis=1)
    return st


def _latent_backward(spec: ModelSpec, st: _LatentState, noise: dict, dz: np.ndarray):
    """Map dJ/dz plus the direct -KL contribution back to dJ/dt."""
    m = spec.n_stochastic
    if spec.variant == GAUSS_VAE:
        mu, sigma, sraw = st.post["mu"], st.post["sigma"], st.post["sraw"]
        dmu = dz - mu
        dsigma = dz * noise["eps"] - (sigma - 1.0 / sigma)
        return np.concatenate([dmu, dsigma * dist.sigmoid(sraw)], axis=1)

    alpha0 = spec.alpha0
    dv = stick_backward(st.post["vfull"], dz)  # recon-path gradient w.r.t. fractions

    if spec.fraction_param == "kumaraswamy":
        a, b = st.post["a"], st.post["b"]
        dx_da, dx_db = dist.kumaraswamy_inverse_cdf_grad(noise["u"], a, b)
        dkl_da, dkl_db = dist.kl_kumaraswamy_beta_grad(a, b, 1.0, alpha0, spec.kl_terms)
        da = dv * dx_da - dkl_da
        db = dv * dx_db - dkl_db
        return np.concatenate(
            [da * dist.sigmoid(st.post["ta"]), db * dist.sigmoid(st.post["tb"])], axis=1
        )

    if spec.fraction_param == "gamma":
        a_x, a_y = st.post["a_x"], st.post["a_y"]
        v, dv_dax, dv_day = dist.gamma_composition_fraction_grad(
            noise["u_x"], noise["u_y"], a_x, a_y
        )
        dq_dax, dq_day = dist.beta_log_pdf_grad_params(v, a_x, a_y)
        dlogr_dv = dist.beta_log_pdf_grad_x(v, a_x, a_y) - dist.beta_log_pdf_grad_x(
            v, 1.0, alpha0
        )
        dax = dv * dv_dax - (dq_dax + dlogr_dv * dv_dax)
        day = dv * dv_day - (dq_day + dlogr_dv * dv_day)
        dax = np.where(st.post["cl_x"], 0.0, dax * dist.sigmoid(st.post["tx"]))
        day = np.where(st.post["cl_y"], 0.0, day * dist.sigmoid(st.post["ty"]))
        return np.concatenate([dax, day], axis=1)

    # gauss_logit
    mu, s, sraw = st.post["mu"], st.post["s"], st.post["sraw"]
    v = st.post["v"]
    eps = noise["eps"]
    dv_dl = v * (1.0 - v)
    dl_recon = dv * dv_dl
    # d/dmu of the sample KL estimate, with v = logistic(mu + s*eps)
    dkl_dmu = (2.0 * v - 1.0) + (alpha0 - 1.0) * v
    dkl_ds = -1.0 / s + eps * dkl_dmu
    dmu = dl_recon - dkl_dmu
    ds = dl_recon * eps - dkl_ds
    return np.concatenate([dmu, ds * dist.sigmoid(sraw)], axis=1)


def encode(spec: ModelSpec, params: ModelParams, x: np.ndarray, rng):
    """Posterior parameters, one latent sample per row, and per-example KL."""
    noise = draw_noise(spec, rng, x.shape[0])
    _, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, x)
    t = nn.linear_forward(params.enc_out, h)
    st = _latent_forward(spec, t, noise)
    return st.post, st.z, st.kl


def posterior_mean_latent(spec: ModelSpec, params: ModelParams, x: np.ndarray):
    """Deterministic latent summary: mu for Gaussian, composed fraction means for sb."""
    _, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, x)
    t = nn.linear_forward(params.enc_out, h)
    m = spec.n_stochastic
    if spec.variant == GAUSS_VAE:
        return t[:, :m]
    if spec.fraction_param == "kumaraswamy":
        a = dist.positive_from_unconstrained(t[:, :m])
        b = dist.positive_from_unconstrained(t[:, m:])
        v = dist.kumaraswamy_mean(a, b)
    elif spec.fraction_param == "gamma":
        a_x, _ = _gamma_shapes(t[:, :m])
        a_y, _ = _gamma_shapes(t[:, m:])
        v = a_x / (a_x + a_y)  # Beta mean of the approximated target
    else:
        mu = t[:, :m]
        v = dist.sigmoid(mu)  # logistic of the median
    v = np.clip(v, 1e-12, 1.0 - 1e-12)
    vfull = np.concatenate([v, np.ones((v.shape[0], 1))], axis=1)
    return compose_sticks(vfull)


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------

def _decoder_forward(spec, params, z_in):
    trace, hd = nn.hidden_forward(params.dec_hidden, spec.decoder_cfg, z_in)
    logits = nn.linear_forward(params.dec_out, hd)
    return trace, hd, logits


def _decoder_backward(spec, params, trace, hd, d_logits, grads: ModelParams):
    g_out, dhd = nn.linear_backward(params.dec_out, hd, d_logits)
    grads.dec_out.W += g_out.W
    grads.dec_out.b += g_out.b
    g_hidden, dz_in = nn.hidden_backward(params.dec_hidden, spec.decoder_cfg, trace, dhd)
    for dst, src in zip(grads.dec_hidden, g_hidden):
        dst.W += src.W
        dst.b += src.b
    return dz_in


def _encoder_backward(spec, params, enc_trace, h, dt, grads: ModelParams, dh_extra=None):
    g_out, dh = nn.linear_backward(params.enc_out, h, dt)
    grads.enc_out.W += g_out.W
    grads.enc_out.b += g_out.b
    if dh_extra is not None:
        dh = dh + dh_extra
    g_hidden, _ = nn.hidden_backward(params.enc_hidden, spec.encoder_cfg, enc_trace, dh)
    for dst, src in zip(grads.enc_hidden, g_hidden):
        dst.W += src.W
        dst.b += src.b


def _one_hot(y, n_classes):
    out = np.zeros((len(y), n_classes))
    out[np.arange(len(y)), y] = 1.0
    return out


def elbo_and_grads(spec, params, x, noise, want_grads=True, exact_kl=False):
    """Unsupervised ELBO; gradients are of the summed per-example ELBO.

    The training objective keeps the truncated KL series so value and
    gradient agree; pass exact_kl=True when reporting bounds, where the
    series tail matters.
    """
    enc_trace, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, x)
    t = nn.linear_forward(params.enc_out, h)
    st = _latent_forward(spec, t, noise, exact_kl=exact_kl)
    dec_trace, hd, logits = _decoder_forward(spec, params, st.z)
    recon = nn.bernoulli_log_likelihood(logits, x)
    est = ElboEstimate(
        expected_reconstruction=float(recon.mean()),
        kl=float(st.kl.mean()),
        per_example=recon - st.kl,
    )
    if not want_grads:
        return est, None
    grads = zeros_like_params(params)
    d_logits = nn.bernoulli_log_likelihood_grad_logits(logits, x)
    dz = _decoder_backward(spec, params, dec_trace, hd, d_logits, grads)
    dt = _latent_backward(spec, st, noise, dz)
    _encoder_backward(spec, params, enc_trace, h, dt, grads)
    return est, grads


def _class_marginal_elbo(spec, params, x, noise) -> ElboEstimate:
    """Evaluation bound for class-conditional decoders: E_q(y)[log p(x|z,y)]
    plus the classifier entropy stands in for the reconstruction term."""
    _, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, x)
    t = nn.linear_forward(params.enc_out, h)
    st = _latent_forward(spec, t, noise, exact_kl=True)
    _, q, logq = _classifier_forward(spec, params, h)
    n, c = x.shape[0], spec.n_classes
    recon = np.empty((n, c))
    for j in range(c):
        z_in = np.concatenate([st.z, _one_hot(np.full(n, j), c)], axis=1)
        _, _, logits = _decoder_forward(spec, params, z_in)
        recon[:, j] = nn.bernoulli_log_likelihood(logits, x)
    recon_pe = (q * recon).sum(axis=1) - (q * logq).sum(axis=1)
    return ElboEstimate(
        expected_reconstruction=float(recon_pe.mean()),
        kl=float(st.kl.mean()),
        per_example=recon_pe - st.kl,
    )


def elbo(spec, params, x, rng) -> ElboEstimate:
    def one_estimate(noise):
        if spec.n_classes > 0:
            return _class_marginal_elbo(spec, params, x, noise)
        return elbo_and_grads(spec, params, x, noise, want_grads=False, exact_kl=True)[0]

    noise = draw_noise(spec, rng, x.shape[0])
    ests = []
    for _ in range(spec.mc_samples - 1):
        extra = draw_noise(spec, rng, x.shape[0])
        ests.append(one_estimate(extra))
    ests.append(one_estimate(noise))
    est = ests[-1]
    if len(ests) == 1:
        return est
    recon = float(np.mean([e.expected_reconstruction for e in ests]))
    kl = float(np.mean([e.kl for e in ests]))
    per = np.mean([e.per_example for e in ests], axis=0)
    return ElboEstimate(recon, kl, per)


def _classifier_forward(spec, params, h):
    logits = nn.linear_forward(params.classifier, h)
    return logits, nn.softmax(logits), nn.log_softmax(logits)


def labeled_objective_and_grads(spec, params, x, y, noise, want_grads=True):
    """Labeled M2 objective: recon given (pi, y) - KL + log q(y|x)."""
    y = np.asarray(y)
    if np.any(y < 0) or np.any(y >= spec.n_classes):
        raise ValueError("label out of range")
    enc_trace, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, x)
    t = nn.linear_forward(params.enc_out, h)
    st = _latent_forward(spec, t, noise)
    onehot = _one_hot(y, spec.n_classes)
    z_in = np.concatenate([st.z, onehot], axis=1)
    dec_trace, hd, logits = _decoder_forward(spec, params, z_in)
    recon = nn.bernoulli_log_likelihood(logits, x)
    cls_logits, q, logq = _classifier_forward(spec, params, h)
    logq_y = logq[np.arange(len(y)), y]
    values = recon - st.kl + logq_y
    if not want_grads:
        return values, None
    grads = zeros_like_params(params)
    d_logits = nn.bernoulli_log_likelihood_grad_logits(logits, x)
    dz_in = _decoder_backward(spec, params, dec_trace, hd, d_logits, grads)
    dz = dz_in[:, : spec.latent_dim]
    dt = _latent_backward(spec, st, noise, dz)
    d_cls = onehot - q
    g_cls, dh_cls = nn.linear_backward(params.classifier, h, d_cls)
    grads.classifier.W += g_cls.W
    grads.classifier.b += g_cls.b
    _encoder_backward(spec, params, enc_trace, h, dt, grads, dh_extra=dh_cls)
    return values, grads


def unlabeled_objective_and_grads(spec, params, x, noise, want_grads=True):
    """Unlabeled M2 objective: class-enumerated reconstruction + entropy - KL.

    One set of latent samples is shared across the enumerated classes.
    """
    n, c = x.shape[0], spec.n_classes
    enc_trace, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, x)
    t = nn.linear_forward(params.enc_out, h)
    st = _latent_forward(spec, t, noise)
    cls_logits, q, logq = _classifier_forward(spec, params, h)
    entropy = -(q * logq).sum(axis=1)

    recon = np.empty((n, c))
    per_class = []
    for j in range(c):
        onehot = _one_hot(np.full(n, j), c)
        z_in = np.concatenate([st.z, onehot], axis=1)
        dec_trace, hd, logits = _decoder_forward(spec, params, z_in)
        recon[:, j] = nn.bernoulli_log_likelihood(logits, x)
        per_class.append((dec_trace, hd, logits))
    recon_bar = (q * recon).sum(axis=1)
    values = recon_bar + entropy - st.kl
    if not want_grads:
        return values, None

    grads = zeros_like_params(params)
    dz = np.zeros_like(st.z)
    for j in range(c):
        dec_trace, hd, logits = per_class[j]
        d_logits = q[:, j : j + 1] * nn.bernoulli_log_likelihood_grad_logits(logits, x)
        dz_in = _decoder_backward(spec, params, dec_trace, hd, d_logits, grads)
        dz += dz_in[:, : spec.latent_dim]
    dt = _latent_backward(spec, st, noise, dz)
    xent = (q * logq).sum(axis=1, keepdims=True)
    d_cls = q * ((recon - recon_bar[:, None]) - (logq - xent))
    g_cls, dh_cls = nn.linear_backward(params.classifier, h, d_cls)
    grads.classifier.W += g_cls.W
    grads.classifier.b += g_cls.b
    _encoder_backward(spec, params, enc_trace, h, dt, grads, dh_extra=dh_cls)
    return values, grads


def classify(spec, params, x) -> np.ndarray:
    """Argmax class probabilities; ties resolve to the lower class index."""
    if params.classifier is None:
        raise ValueError("model has no classifier head")
    _, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, x)
    _, q, _ = _classifier_forward(spec, params, h)
    return np.argmax(q, axis=1)


def class_probabilities(spec, params, x) -> np.ndarray:
    _, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, x)
    _, q, _ = _classifier_forward(spec, params, h)
    return q


# ---------------------------------------------------------------------------
# Marginal likelihood and prior sampling
# ---------------------------------------------------------------------------

def _latent_log_densities(spec, st, noise):
    """(log q(latent), log p(latent)) per example, in fraction space for sb."""
    if spec.variant == GAUSS_VAE:
        z = st.z
        mu, sigma = st.post["mu"], st.post["sigma"]
        logq = dist.gaussian_log_pdf(z, mu, sigma)
        logp = dist.gaussian_log_pdf(z, np.zeros_like(z), np.ones_like(z))
        return logq, logp
    v = st.post["v"]
    logp = dist.beta_log_pdf(v, 1.0, spec.alpha0).sum(axis=1)
    if spec.fraction_param == "kumaraswamy":
        logq = dist.kumaraswamy_log_pdf(v, st.post["a"], st.post["b"]).sum(axis=1)
    elif spec.fraction_param == "gamma":
        logq = dist.beta_log_pdf(v, st.post["a_x"], st.post["a_y"]).sum(axis=1)
    else:
        logq = dist.logistic_normal_log_pdf(v, st.post["mu"], st.post["s"]).sum(axis=1)
    return logq, logp


def marginal_log_likelihood_is(spec, params, x, rng, n_samples: int = 100, y=None):
    """Importance-sampled log p(x) per example: log-mean of p(x|z)p(z)/q(z)."""
    if n_samples < 1:
        raise ValueError("need at least one importance sample")
    enc_trace, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, x)
    t = nn.linear_forward(params.enc_out, h)
    log_w = np.empty((n_samples, x.shape[0]))
    for s in range(n_samples):
        noise = draw_noise(spec, rng, x.shape[0])
        st = _latent_forward(spec, t, noise)
        z_in = st.z
        if spec.n_classes > 0:
            if y is None:
                raise ValueError("semi-supervised marginal likelihood needs labels")
            z_in = np.concatenate([st.z, _one_hot(np.asarray(y), spec.n_classes)], axis=1)
        _, _, logits = _decoder_forward(spec, params, z_in)
        ll = nn.bernoulli_log_likelihood(logits, x)
        logq, logp = _latent_log_densities(spec, st, noise)
        log_w[s] = ll + logp - logq
    if np.any(np.all(np.isinf(log_w) & (log_w < 0), axis=0)):
        raise FloatingPointError("all importance weights vanished for some example")
    return logsumexp(log_w, axis=0) - np.log(n_samples)


def sample_from_prior(spec, params, rng, n: int, active_dims: int = None):
    """Decode prior latent draws; returns Bernoulli means in [0,1]."""
    k = spec.latent_dim
    if spec.variant == GAUSS_VAE:
        z = draw_standard_normal(rng, (n, k))
    else:
        u = draw_uniform(rng, (n, k - 1))
        v = dist.beta_one_beta_inverse_cdf(u, spec.alpha0)
        vfull = np.concatenate([v, np.ones((n, 1))], axis=1)
        if active_dims is not None:
            if not 1 <= active_dims <= k:
                raise ValueError("active_dims out of range")
            # force the stick to be fully consumed by the leading dimensions
            vfull[:, active_dims - 1] = 1.0
            vfull[:, active_dims:] = 1.0
        z = compose_sticks(vfull)
    z_in = z
    if spec.n_classes > 0:
        y = rng.integers(0, spec.n_classes, size=n)
        z_in = np.concatenate([z, _one_hot(y, spec.n_classes)], axis=1)
    _, _, logits = _decoder_forward(spec, params, z_in)
    return dist.sigmoid(logits), z


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------

_HEADER_FIELDS = (
    "variant",
    "input_dim",
    "latent_dim",
    "hidden",
    "fraction_param",
    "alpha0",
    "n_classes",
    "mc_samples",
    "kl_terms",
)


def save_model(path, spec: ModelSpec, params: ModelParams) -> None:
    header = io.StringIO()
    header.write("sbvae-checkpoint 1\n")
    for name in _HEADER_FIELDS:
        value = getattr(spec, name)
        if name == "hidden":
            value = ",".join(str(w) for w in value)
        header.write(f"{name}={value}\n")
    header.write("\n")
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("ascii"))
        fh.write(nn.serialize_layers(params.layers()))


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    split = blob.index(b"\n\n")
    lines = blob[:split].decode("ascii").splitlines()
    if lines[0] != "sbvae-checkpoint 1":
        raise ValueError("not a model checkpoint")
    fields = dict(line.split("=", 1) for line in lines[1:])
    spec = ModelSpec(
        variant=fields["variant"],
        input_dim=int(fields["input_dim"]),
        latent_dim=int(fields["latent_dim"]),
        hidden=tuple(int(w) for w in fields["hidden"].split(",")),
        fraction_param=fields["fraction_param"],
        alpha0=float(fields["alpha0"]),
        n_classes=int(fields["n_classes"]),
        mc_samples=int(fields["mc_samples"]),
        kl_terms=int(fields["kl_terms"]),
    )
    layers = nn.parse_layer_checkpoint(blob[split + 2 :])
    n_enc = len(spec.hidden)
    n_dec = len(spec.hidden)
    enc_hidden = layers[:n_enc]
    enc_out = layers[n_enc]
    dec_hidden = layers[n_enc + 1 : n_enc + 1 + n_dec]
    dec_out = layers[n_enc + 1 + n_dec]
    classifier = layers[n_enc + n_dec + 2] if spec.n_classes > 0 else None
    params = ModelParams(enc_hidden, enc_out, dec_hidden, dec_out, classifier)
    return spec, params
