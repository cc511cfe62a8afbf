"""Dense conditional GAN on small Ising images.

Both networks own a conditioning strategy; its embedding is concatenated to
the noise vector (generator) or the flattened image (discriminator).

All training randomness is counter-based: step ``s`` draws from
``default_rng([seed, STEP_STREAM, s])`` and epoch ``e`` shuffles with
``default_rng([seed, EPOCH_STREAM, e])``. The generator "state" is therefore
just ``(seed, step)``, which makes checkpoint resume exact.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .conditioning import KINDS, T_MAX, Conditioning, check_labels, make_strategy
from .imageio import DatasetManifest
from .ising import T_MIN
from .nn import Adam, Module, mlp

log = logging.getLogger(__name__)

G_INIT_STREAM, D_INIT_STREAM, STEP_STREAM, EPOCH_STREAM = 101, 202, 303, 404
LOSSES = ("hinge", "bce")


@dataclass
class TrainConfig:
    n: int = 32
    noise_dim: int = 32
    embedding_dim: int = 64
    g_hidden: int = 256
    d_hidden: int = 256
    strategy: str = "binary-bits"
    num_classes: int = 64
    scalar_hidden: int = 64
    branch_widths: tuple = (4, 32, 92)
    polarity: str = "01"
    steps: int = 2000
    epochs: int = 0  # > 0 overrides steps with epochs * (dataset size // batch_size)
    batch_size: int = 64
    lr: float = 2e-4
    betas: tuple = (0.0, 0.99)
    d_steps: int = 1
    loss: str = "hinge"
    fake_labels: str = "dataset"  # "dataset": draw from the training labels; "uniform": over their range
    mismatch: bool = True  # real images with a wrong label also count as fakes for D
    straight_through: bool = True  # D sees thresholded fakes; gradients bypass the threshold
    seed: int = 0
    dataset: str = ""

    def __post_init__(self):
        self.branch_widths = tuple(int(w) for w in self.branch_widths)
        self.betas = tuple(float(b) for b in self.betas)
        for name in ("n", "noise_dim", "embedding_dim", "g_hidden", "d_hidden", "batch_size", "d_steps", "num_classes"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.steps < 0 or self.epochs < 0:
            raise ValueError("steps and epochs must be nonnegative")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ValueError("betas must be two values in [0, 1)")
        if self.strategy not in KINDS:
            raise ValueError(f"strategy must be one of {KINDS}")
        if self.polarity not in ("01", "pm1"):
            raise ValueError("polarity must be '01' or 'pm1'")
        if self.fake_labels not in ("dataset", "uniform"):
            raise ValueError("fake_labels must be 'dataset' or 'uniform'")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["branch_widths"] = list(self.branch_widths)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)

    def total_steps(self, dataset_size: int) -> int:
        if self.epochs:
            return self.epochs * max(dataset_size // self.batch_size, 1)
        return self.steps


def _strategy(cfg: TrainConfig, rng) -> Conditioning:
    return make_strategy(cfg.strategy, cfg.embedding_dim, rng, num_classes=cfg.num_classes,
                         hidden=cfg.scalar_hidden, branch_widths=cfg.branch_widths, polarity=cfg.polarity)


class Generator(Module):
    def __init__(self, cfg: TrainConfig, rng=None):
        super().__init__()
        self.n, self.noise_dim = cfg.n, cfg.noise_dim
        self.embed = self._add("embed", _strategy(cfg, rng))
        self.net = self._add("net", mlp([cfg.noise_dim + cfg.embedding_dim, cfg.g_hidden, cfg.g_hidden, cfg.n * cfg.n],
                                        "leaky_relu", rng, final_activation="tanh"))
        self.d_embedding = None

    def forward(self, z, labels=None, embedding=None):
        """Images in [-1, 1] of shape (batch, n, n); ``embedding`` overrides the label path."""
        z = np.asarray(z, dtype=self.dtype)
        if z.ndim != 2 or z.shape[1] != self.noise_dim:
            raise ValueError(f"noise must have shape (batch, {self.noise_dim})")
        e = self.embed.forward(labels) if embedding is None else np.asarray(embedding, dtype=self.dtype)
        self._embedded = embedding is None
        out = self.net.forward(np.concatenate([z, e], axis=1))
        return out.reshape(-1, self.n, self.n)

    def backward(self, d_img):
        dx = self.net.backward(np.asarray(d_img).reshape(len(d_img), -1))
        self.d_embedding = dx[:, self.noise_dim:]
        if self._embedded:
            self.embed.backward(self.d_embedding)
        return dx[:, :self.noise_dim]


class Discriminator(Module):
    def __init__(self, cfg: TrainConfig, rng=None):
        super().__init__()
        self.n = cfg.n
        self.embed = self._add("embed", _strategy(cfg, rng))
        self.net = self._add("net", mlp([cfg.n * cfg.n + cfg.embedding_dim, cfg.d_hidden, cfg.d_hidden, 1],
                                        "leaky_relu", rng))
        self.d_embedding = None

    def forward(self, images, labels=None, embedding=None):
        images = np.asarray(images, dtype=self.dtype)
        if images.ndim != 3 or images.shape[1:] != (self.n, self.n):
            raise ValueError(f"images must have shape (batch, {self.n}, {self.n}), got {images.shape}")
        e = self.embed.forward(labels) if embedding is None else np.asarray(embedding, dtype=self.dtype)
        self._embedded = embedding is None
        flat = images.reshape(len(images), -1)
        return self.net.forward(np.concatenate([flat, e], axis=1))[:, 0]

    def backward(self, d_scores):
        dx = self.net.backward(np.asarray(d_scores).reshape(-1, 1))
        self.d_embedding = dx[:, self.n * self.n:]
        if self._embedded:
            self.embed.backward(self.d_embedding)
        return dx[:, :self.n * self.n].reshape(-1, self.n, self.n)


def hinge_losses(real_scores, fake_scores, fake_scores_for_g=None):
    """(d_loss, g_loss); g_loss uses ``fake_scores_for_g`` if given, else ``fake_scores``."""
    real_scores, fake_scores = np.asarray(real_scores), np.asarray(fake_scores)
    if real_scores.size == 0 or fake_scores.size == 0:
        raise ValueError("score batches must be nonempty")
    g_scores = fake_scores if fake_scores_for_g is None else np.asarray(fake_scores_for_g)
    if g_scores.size == 0:
        raise ValueError("score batches must be nonempty")
    d_loss = np.mean(np.maximum(0, 1 - real_scores)) + np.mean(np.maximum(0, 1 + fake_scores))
    return float(d_loss), float(-np.mean(g_scores))


def _softplus(x):
    return np.logaddexp(0, x)


def _sigmoid(x):
    return 0.5 * (1 + np.tanh(0.5 * x))


def d_real_term(kind, scores):
    """Real-batch part of the discriminator loss and its gradient w.r.t. the scores."""
    if kind == "hinge":
        loss = np.mean(np.maximum(0, 1 - scores))
        grad = -(1 - scores > 0).astype(scores.dtype) / len(scores)
    else:
        loss = np.mean(_softplus(-scores))
        grad = -_sigmoid(-scores) / len(scores)
    return float(loss), grad


def d_fake_term(kind, scores):
    if kind == "hinge":
        loss = np.mean(np.maximum(0, 1 + scores))
        grad = (1 + scores > 0).astype(scores.dtype) / len(scores)
    else:
        loss = np.mean(_softplus(scores))
        grad = _sigmoid(scores) / len(scores)
    return float(loss), grad


def g_loss_and_grad(kind, fake_scores):
    if kind == "hinge":
        return float(-np.mean(fake_scores)), -np.ones_like(fake_scores) / len(fake_scores)
    return float(np.mean(_softplus(-fake_scores))), -_sigmoid(-fake_scores) / len(fake_scores)


class TrainingDiverged(RuntimeError):
    def __init__(self, step, d_loss, g_loss):
        super().__init__(f"non-finite loss at step {step}: d_loss={d_loss}, g_loss={g_loss}")
        self.step, self.d_loss, self.g_loss = step, d_loss, g_loss


@dataclass
class GanState:
    """Everything a checkpoint stores."""

    config: TrainConfig
    generator: Generator
    discriminator: Discriminator
    opt_g: Adam
    opt_d: Adam
    step: int = 0
    label_range: tuple = (T_MIN, float(T_MAX))
    label_pool: np.ndarray | None = None
    loss_log: list = field(default_factory=list)

    @classmethod
    def initialize(cls, cfg: TrainConfig, label_range=None) -> "GanState":
        g = Generator(cfg, np.random.default_rng([cfg.seed, G_INIT_STREAM]))
        d = Discriminator(cfg, np.random.default_rng([cfg.seed, D_INIT_STREAM]))
        opt_g = Adam(cfg.lr, cfg.betas)
        opt_d = Adam(cfg.lr, cfg.betas)
        opt_g.init_state(g.parameters())
        opt_d.init_state(d.parameters())
        lo, hi = label_range or (T_MIN, float(T_MAX))
        return cls(cfg, g, d, opt_g, opt_d, 0, (float(np.float32(lo)), float(np.float32(hi))))

    def rng_state(self) -> dict:
        return {"algorithm": "numpy-pcg64-seedsequence", "seed": self.config.seed, "next_step": self.step}


def _sample_fake_labels(rng, count, state: "GanState"):
    if state.config.fake_labels == "dataset" and state.label_pool is not None:
        return state.label_pool[rng.integers(0, len(state.label_pool), size=count)]
    lo, hi = state.label_range
    labels = rng.uniform(lo, hi, size=count).astype(np.float32)
    return np.clip(labels, np.float32(lo), np.float32(hi))


def _mismatched_labels(rng, labels, pool):
    """For each label, a different value from ``pool`` (uniform over the others)."""
    pos = np.searchsorted(pool, labels)
    shift = rng.integers(1, len(pool), size=len(labels))
    return pool[(pos + shift) % len(pool)]


def _real_images(images_u8) -> np.ndarray:
    return (images_u8.astype(np.float32) / np.float32(127.5) - np.float32(1.0))


def _as_seen_by_d(cfg: TrainConfig, outputs):
    if not cfg.straight_through:
        return outputs
    return np.where(outputs >= 0, 1, -1).astype(outputs.dtype)


def discriminator_loss(state: GanState, images, labels, z, fake_labels, wrong_labels=None) -> float:
    """D loss on one batch; accumulates D gradients (call ``zero_grad`` first).

    With ``wrong_labels`` the fake term is split evenly between generated
    images and real images paired with a wrong label.
    """
    cfg = state.config
    G, D = state.generator, state.discriminator
    fake = _as_seen_by_d(cfg, G.forward(z, fake_labels))
    real_loss, d_real = d_real_term(cfg.loss, D.forward(images, labels))
    D.backward(d_real)
    fake_loss, d_fake = d_fake_term(cfg.loss, D.forward(fake, fake_labels))
    if wrong_labels is None:
        D.backward(d_fake)
        return real_loss + fake_loss
    D.backward(0.5 * d_fake)
    wrong_loss, d_wrong = d_fake_term(cfg.loss, D.forward(images, wrong_labels))
    D.backward(0.5 * d_wrong)
    return real_loss + 0.5 * (fake_loss + wrong_loss)


def generator_loss(state: GanState, z, fake_labels) -> float:
    """G loss; accumulates G gradients and leaves D gradients zeroed."""
    cfg = state.config
    G, D = state.generator, state.discriminator
    fake = _as_seen_by_d(cfg, G.forward(z, fake_labels))
    g_loss, ds = g_loss_and_grad(cfg.loss, D.forward(fake, fake_labels))
    d_img = D.backward(ds)
    D.zero_grad()
    G.backward(d_img)
    return g_loss


def train_step(state: GanState, images, labels, step_rng) -> tuple[float, float]:
    """One round of ``d_steps`` discriminator updates then one generator update."""
    cfg = state.config
    G, D = state.generator, state.discriminator
    B = len(images)
    use_wrong = cfg.mismatch and state.label_pool is not None and len(state.label_pool) > 1
    d_loss = 0.0
    for _ in range(cfg.d_steps):
        z = step_rng.standard_normal((B, cfg.noise_dim), dtype=np.float32)
        fake_labels = _sample_fake_labels(step_rng, B, state)
        wrong = _mismatched_labels(step_rng, labels, state.label_pool) if use_wrong else None
        D.zero_grad()
        d_loss = discriminator_loss(state, images, labels, z, fake_labels, wrong)
        state.opt_d.step(D.parameters(), D.gradients())
    z = step_rng.standard_normal((B, cfg.noise_dim), dtype=np.float32)
    fake_labels = _sample_fake_labels(step_rng, B, state)
    G.zero_grad()
    g_loss = generator_loss(state, z, fake_labels)
    state.opt_g.step(G.parameters(), G.gradients())
    return d_loss, g_loss


def load_training_data(manifest: DatasetManifest, n: int):
    images = manifest.load_images()
    if images.shape[1:] != (n, n):
        raise ValueError(f"dataset images are {images.shape[1:]}, config expects n={n}")
    labels = check_labels(manifest.temperatures)
    return _real_images(images), labels


def train(cfg: TrainConfig, images, labels, state: GanState | None = None, until: int | None = None,
          callback=None) -> GanState:
    """Train (or resume) until ``until`` total steps; appends (step, d_loss, g_loss) to the log.

    ``images`` are real images scaled to [-1, 1], shape (N, n, n); ``labels``
    the matching float32 temperatures.
    """
    labels = check_labels(labels)
    N = len(images)
    if N < cfg.batch_size:
        raise ValueError(f"dataset has {N} images, fewer than batch size {cfg.batch_size}")
    if state is None:
        state = GanState.initialize(cfg, (float(labels.min()), float(labels.max())))
    state.label_pool = np.unique(labels)
    total = cfg.total_steps(N) if until is None else until
    per_epoch = N // cfg.batch_size
    perm_epoch, perm = -1, None
    while state.step < total:
        s = state.step
        epoch, pos = divmod(s, per_epoch)
        if epoch != perm_epoch:
            perm = np.random.default_rng([cfg.seed, EPOCH_STREAM, epoch]).permutation(N)
            perm_epoch = epoch
        idx = perm[pos * cfg.batch_size:(pos + 1) * cfg.batch_size]
        step_rng = np.random.default_rng([cfg.seed, STEP_STREAM, s])
        d_loss, g_loss = train_step(state, images[idx], labels[idx], step_rng)
        if not (math.isfinite(d_loss) and math.isfinite(g_loss)):
            raise TrainingDiverged(s, d_loss, g_loss)
        state.loss_log.append((s, d_loss, g_loss))
        state.step += 1
        if callback is not None:
            callback(state)
        if s % 200 == 0:
            log.info("step %d d_loss %.4f g_loss %.4f", s, d_loss, g_loss)
    return state


def binarize(outputs) -> np.ndarray:
    """Generator outputs -> 0/255 images; ties at exactly 0 go to +1 (255)."""
    return np.where(np.asarray(outputs) >= 0, 255, 0).astype(np.uint8)


def generate_raw(G: Generator, T, count: int, seed: int) -> np.ndarray:
    z = np.random.default_rng([seed]).standard_normal((count, G.noise_dim), dtype=np.float32)
    labels = np.full(count, np.float32(T), dtype=np.float32)
    return G.forward(z, labels)


def generate_conditioned(state_or_g, T, count: int, seed: int) -> np.ndarray:
    """``count`` binary images at label T from noise seeded by ``seed``."""
    G = state_or_g.generator if isinstance(state_or_g, GanState) else state_or_g
    check_labels(T)
    if count < 1:
        raise ValueError("count must be >= 1")
    return binarize(generate_raw(G, T, count, seed))


def write_loss_log(path, loss_log) -> None:
    with open(path, "w") as fh:
        fh.write("step,d_loss,g_loss\n")
        for s, d, g in loss_log:
            fh.write(f"{s},{d!r},{g!r}\n")
