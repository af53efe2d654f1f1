"""Reference desk-scale configuration.

One fixed synthetic dataset (24 identities x 6 expressions x 10 replicates,
300 vertices) plus training hyperparameters sized so the whole pipeline
runs on a laptop core in minutes. The CLI and the acceptance suite both
draw their defaults from here so results stay comparable.
"""

from .synthetic import SyntheticSpec


def reference_synthetic_spec(seed=1402) -> SyntheticSpec:
    return SyntheticSpec(
        v=300,
        n_id=24,
        n_exp=6,
        samples_per_cell=10,
        k_id=8,
        noise_sigma=0.15,
        cross_strength=0.35,
        seed=seed,
    )


REFERENCE_SAE = dict(
    id_dim=100,
    exp_dim=30,
    hidden_dims=(1024, 512),
    epochs=60,
    batch_size=64,
    lr=7e-4,
    lr_schedule="cosine",
    beta1=0.9,
    beta2=0.999,
    val_fraction=0.15,
    seed=7,
)

REFERENCE_GAN = dict(
    id_dim=100,
    exp_dim=30,
    z_id_dim=20,
    z_noise_dim=5,
    id_mode="one_hot",
    steps=2000,
    batch_size=64,
    lr_g=2e-4,
    lr_d=2e-4,
    beta1=0.5,
    beta2=0.999,
    seed=11,
)
