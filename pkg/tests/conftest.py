import numpy as np
import pytest

from isinggan.gan import GanState, TrainConfig


def tiny_config(**kw) -> TrainConfig:
    base = dict(n=8, noise_dim=4, embedding_dim=8, g_hidden=16, d_hidden=16, num_classes=8, scalar_hidden=6,
                branch_widths=(2, 3, 4), batch_size=8, steps=50, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def tiny_state(dtype=np.float32, **kw) -> GanState:
    st = GanState.initialize(tiny_config(**kw))
    if dtype != np.float32:
        st.generator = st.generator.astype(dtype)
        st.discriminator = st.discriminator.astype(dtype)
    return st


@pytest.fixture
def toy_data():
    """64 random +-1 images of side 8 over 4 temperature labels."""
    rng = np.random.default_rng(0)
    images = rng.choice(np.array([-1.0, 1.0], np.float32), size=(64, 8, 8))
    labels = np.repeat(np.array([0.5, 1.5, 2.5, 3.5], np.float32), 16)
    return images, labels
