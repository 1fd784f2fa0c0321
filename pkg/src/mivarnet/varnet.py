"""Unrolled k-space cascade with per-cascade data-consistency weights.

Each cascade updates multi-coil k-space as::

    k <- k - eta_t(k) * mask * (k - k_hat) + R_t(k)

``eta_t`` comes from a small CNN acting on the k-space log-magnitude and
``R_t`` is an image-domain encoder-decoder wrapped in coil expansion and
Fourier transforms. The two training modes share the architecture; in
``varnet_mi`` mode the training inputs pass through random rigid motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kspace as ks
from .config import MODES, ExperimentConfig
from .errors import DivergenceError, ParameterError
from .motion import MotionTrajectory, corrupt_kspace, sample_trajectory
from .nn import tensor as tt
from .nn.layers import Conv2d, Module, avgpool2, upsample_nearest2
from .nn.optim import Adam
from .nn.ssim import ssim_loss
from .phantom import forward_acquire, gen_coil_maps, gen_phantom

# softplus(ETA_BIAS) == 1: an untrained estimator applies a unit DC step
ETA_BIAS = math.log(math.e - 1.0)


class MidcpNet(Module):
    """Maps multi-coil k-space to one positive data-consistency weight."""

    def __init__(self, width: int, rng):
        self.conv1 = Conv2d(1, width, 3, rng)
        self.conv2 = Conv2d(width, width, 3, rng)
        self.conv3 = Conv2d(width, 1, 3, zero_init=True, bias_init=ETA_BIAS)

    def __call__(self, k) -> tt.Tensor:
        feat = tt.sum(tt.log1p(tt.cabs(k)), axis=0, keepdims=True)
        h = tt.leaky_relu(self.conv1(feat))
        h = tt.leaky_relu(self.conv2(h))
        h = tt.leaky_relu(self.conv3(h))
        return tt.softplus(tt.mean(h))


class RecNet(Module):
    """Two-scale encoder-decoder on a 2-channel (real, imaginary) image."""

    def __init__(self, width: int, rng):
        self.enc1a = Conv2d(2, width, 3, rng)
        self.enc1b = Conv2d(width, width, 3, rng)
        self.enc2a = Conv2d(width, 2 * width, 3, rng)
        self.enc2b = Conv2d(2 * width, 2 * width, 3, rng)
        self.dec1a = Conv2d(3 * width, width, 3, rng)
        self.dec1b = Conv2d(width, width, 3, rng)
        self.out = Conv2d(width, 2, 1, zero_init=True)

    def __call__(self, x) -> tt.Tensor:
        act = tt.leaky_relu
        skip = act(self.enc1b(act(self.enc1a(x))))
        low = avgpool2(skip)
        low = act(self.enc2b(act(self.enc2a(low))))
        up = upsample_nearest2(low)
        h = act(self.dec1b(act(self.dec1a(tt.concat([up, skip], axis=0)))))
        return self.out(h)


class ReconModel(Module):
    def __init__(self, config: ExperimentConfig, mode: str | None = None):
        config = config.validate()
        mode = mode or config.mode
        if mode not in MODES:
            raise ParameterError(f"unknown mode {mode!r}")
        self.mode = mode
        self.config = config.with_overrides(mode=mode)
        rng = np.random.default_rng(config.seed)
        self.midcp = [MidcpNet(config.midcp_channels, rng) for _ in range(config.cascades)]
        self.rec = [RecNet(config.channels, rng) for _ in range(config.cascades)]
        self.step = 0

    @property
    def cascades(self) -> int:
        return len(self.rec)

    def state_dict(self) -> dict:
        return {name: p.value.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict):
        params = dict(self.named_parameters())
        if set(params) != set(state):
            raise ParameterError("checkpoint parameters do not match the model layout")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ParameterError(f"{name}: shape {value.shape} != {p.shape}")
            p.value = value.copy()


@dataclass
class ReconResult:
    image: np.ndarray
    final_kspace: np.ndarray
    features: np.ndarray


@dataclass
class TrainingExample:
    k_input: np.ndarray
    target: np.ndarray
    motion_label: bool
    maps: np.ndarray
    mask: ks.SamplingMask
    trajectory: MotionTrajectory | None = None


def midcp_forward(k, net: MidcpNet) -> tt.Tensor:
    return net(tt.as_tensor(k))


def dc_residual(k_t, k_hat, mask: ks.SamplingMask, eta) -> tt.Tensor:
    """``eta * mask * (k_t - k_hat)``; the cascade subtracts it."""
    return tt.mul(eta, tt.mul(tt.sub(k_t, k_hat), mask.expand(tt.as_tensor(k_t).shape[-2])))


def rec_block(k_t, maps: np.ndarray, net: RecNet) -> tt.Tensor:
    """k-space increment: ifft, coil-combine, refine the image, expand, fft."""
    image = tt.sense_combine(tt.ifft2c(k_t), maps)
    refined = tt.from_channels(net(tt.to_channels(image)))
    return tt.fft2c(tt.sense_expand(refined, maps))


def _cascade_graph(k_hat: np.ndarray, mask: ks.SamplingMask, maps: np.ndarray, model: ReconModel):
    k_hat_t = tt.Tensor(k_hat)
    k = k_hat_t
    etas = []
    for midcp, rec in zip(model.midcp, model.rec):
        eta = midcp_forward(k, midcp)
        etas.append(eta)
        k = k - dc_residual(k, k_hat_t, mask, eta) + rec_block(k, maps, rec)
    image = tt.rss(tt.ifft2c(k))
    return image, k, etas


def cascade_forward(k_hat: np.ndarray, mask: ks.SamplingMask, maps: np.ndarray, model: ReconModel) -> ReconResult:
    image, k, etas = _cascade_graph(k_hat, mask, maps, model)
    features = np.array([float(e.value) for e in etas])
    return ReconResult(image.value.copy(), k.value.copy(), features)


def reconstruct(k_hat: np.ndarray, mask: ks.SamplingMask, model: ReconModel) -> ReconResult:
    """Reconstruct masked k-space, estimating coil maps from its center."""
    k_hat = ks.apply_mask(np.asarray(k_hat, dtype=np.complex128), mask)
    maps = ks.estimate_sens_maps(k_hat, model.config.center_fraction)
    return cascade_forward(k_hat, mask, maps, model)


def make_training_example(
    image: np.ndarray,
    maps: np.ndarray,
    mask: ks.SamplingMask,
    mode: str,
    rng,
    config: ExperimentConfig | None = None,
    trajectory: MotionTrajectory | None = None,
) -> TrainingExample:
    """Build ``(k_input, target, label)`` plus coil maps estimated from ``k_input``.

    In ``varnet_mi`` mode a trajectory is drawn from ``rng`` unless
    ``trajectory`` is supplied. The target is always motion free.
    """
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}")
    config = config or ExperimentConfig()
    clean = forward_acquire(image, maps)
    traj = None
    if mode == "varnet_mi":
        traj = trajectory
        if traj is None:
            m = config.motion
            traj = sample_trajectory(rng, image.shape[-1], m.max_events, m.max_trans_px, m.max_rot_deg)
        corrupted = corrupt_kspace(image, maps, traj) if traj.label else clean
        k_input = ks.apply_mask(corrupted, mask)
        label = traj.label
    else:
        k_input = ks.apply_mask(clean, mask)
        label = False
    # maps come from the acquired data, exactly as reconstruct() will see it
    est_maps = ks.estimate_sens_maps(k_input, config.center_fraction)
    target = ks.rss_combine(ks.sense_expand(image, maps))
    return TrainingExample(k_input, target, label, est_maps, mask, traj)


class PhantomStream:
    """Indexable stream of ``(image, maps)`` pairs from derived seeds."""

    def __init__(self, seed: int, config: ExperimentConfig):
        self.seed = seed
        self.config = config

    def item_seed(self, i: int) -> int:
        return self.seed ^ i

    def __getitem__(self, i: int):
        s = self.item_seed(i)
        c = self.config
        image = gen_phantom(s, c.image_size, c.image_size, c.n_ellipses)
        maps = gen_coil_maps(s, c.coils, c.image_size, c.image_size)
        return image, maps


def train(model: ReconModel, dataset, steps: int | None = None, lr: float | None = None, seed: int | None = None, log=None):
    """Supervised SSIM training, one example per step.

    ``dataset[i]`` must return ``(image, maps)``; sequences shorter than
    ``steps`` are cycled. Returns ``(model, losses)``.
    """
    cfg = model.config
    steps = cfg.steps if steps is None else steps
    lr = cfg.lr if lr is None else lr
    seed = cfg.seed if seed is None else seed
    if steps < 1:
        raise ParameterError("steps must be >= 1")
    rng = np.random.default_rng([seed, 1])
    n_items = len(dataset) if hasattr(dataset, "__len__") else None
    opt = Adam(model.parameters(), lr=lr)
    losses = []
    for step in range(steps):
        image, maps = dataset[step % n_items if n_items else step]
        mask = ks.make_equispaced_mask(cfg.image_size, cfg.accel, cfg.center_fraction, seed=rng.integers(2**32))
        ex = make_training_example(image, maps, mask, model.mode, rng, cfg)
        out, _, _ = _cascade_graph(ex.k_input, mask, ex.maps, model)
        loss = ssim_loss(out, ex.target)
        value = float(loss.value)
        if not np.isfinite(value):
            raise DivergenceError(f"non-finite loss at step {step}")
        loss.backward()
        opt.step()
        model.step += 1
        losses.append(value)
        if log is not None:
            log(step, value)
    for name, p in model.named_parameters():
        if not np.all(np.isfinite(p.value)):
            raise DivergenceError(f"parameter {name} became non-finite")
    return model, losses
