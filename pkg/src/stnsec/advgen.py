"""Decoy-pattern synthesis: Wasserstein critic/generator with structure
and load regularizers.

The generator maps noise to continuous slot scores shaped like a node's
occupancy tensor; the critic is a real-valued scorer trained with the
gradient-penalty Wasserstein loss

    L_D = E[D(A)] - E[D(X)] + lambda_gp * E[(||grad_xhat D(xhat)||_2 - 1)^2],
    xhat = rho X + (1 - rho) A,   rho ~ U(0, 1),

and the generator minimizes

    L_G = -E[D(A)] + alpha * L_sim + beta * L_occ,

where L_sim = ||A - X||_1 + KL(P_A || P_X) matches support and structure
(P are per-frequency-slot occupancy distributions over the batch, with
additive smoothing so empty slots keep the divergence finite) and L_occ
penalizes per-(time, slot) normalized load differences.  Both regularizers
are evaluated on the continuous scores so they can shape the generator;
the hard plans the network emits come from ``project_adversarial``, a
masked argmax that enforces decoy feasibility exactly (no overlap with the
UE's data slot, no same-node same-slot collision, at most one decoy per
UE, silent row when no slot is free).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import AdversarialPlan, ResourcePlan
from .nn import (
    MlpNet,
    add_grads,
    backward,
    forward,
    input_gradient,
    mixed_second_grads,
    sgd_update,
    zero_grads,
)

__all__ = [
    "GanConfig",
    "PatternBatch",
    "similarity_loss",
    "occupancy_loss",
    "critic_loss",
    "generator_loss",
    "train_stage2",
    "ModeCollapseError",
    "project_adversarial",
    "sample_adversarial_plan",
    "attach_adversarial",
]


@dataclass(frozen=True)
class GanConfig:
    lambda_gp: float = 10.0
    alpha: float = 1.0
    beta: float = 1.0
    n_critic: int = 5
    noise_dim: int = 16
    iterations: int = 400
    batch_size: int = 32
    learning_rate: float = 0.01
    hidden: tuple[int, ...] = (128, 128)
    smoothing: float = 1e-6
    collapse_var: float = 1e-6
    collapse_rounds: int = 100

    def __post_init__(self) -> None:
        if min(self.lambda_gp, self.alpha, self.beta) < 0:
            raise ValueError("lambda_gp, alpha, beta must be >= 0")
        if self.n_critic < 1 or self.iterations < 1:
            raise ValueError("n_critic and iterations must be >= 1")


@dataclass(frozen=True)
class PatternBatch:
    """Real one-hot patterns and generated [0, 1] relaxations, flattened to
    (batch, time * ues * slots) with the tensor shape kept alongside."""

    real: np.ndarray
    fake: np.ndarray
    shape: tuple[int, int, int]  # (time_slots, ue_count, freq_slots)

    def __post_init__(self) -> None:
        if self.real.shape[1] != self.fake.shape[1]:
            raise ValueError("real and fake pattern widths differ")
        if math.prod(self.shape) != self.real.shape[1]:
            raise ValueError("pattern width does not match the declared shape")


def _slot_distribution(patterns: np.ndarray, shape, smoothing: float) -> np.ndarray:
    """Per-frequency-slot occupancy distribution over a batch."""
    mass = patterns.reshape(-1, *shape).sum(axis=(0, 1, 2)) + smoothing
    return mass / mass.sum()


def similarity_loss(a: np.ndarray, x: np.ndarray, shape, smoothing: float = 1e-6):
    """L1 structure distance plus slot-distribution divergence.

    Returns (value, l1_part, kl_part, gradient w.r.t. a).  The L1 part is
    the batch-mean entrywise distance; the KL part compares batch-level
    per-slot occupancy distributions.
    """
    a2 = np.atleast_2d(a)
    x2 = np.atleast_2d(x)
    b = a2.shape[0]
    l1 = float(np.abs(a2 - x2).sum() / b)
    p_a = _slot_distribution(a2, shape, smoothing)
    p_x = _slot_distribution(x2, shape, smoothing)
    kl = float(np.sum(p_a * np.log(p_a / p_x)))
    # d l1 / da
    grad = np.sign(a2 - x2) / b
    # d kl / d mass_f = (log(p_f/q_f) - kl) / total_mass, broadcast per slot
    total = a2.reshape(-1, *shape).sum() + smoothing * shape[2]
    per_slot = (np.log(p_a / p_x) - kl) / total
    grad_kl = np.broadcast_to(per_slot, (b, *shape)).reshape(b, -1)
    grad = grad + grad_kl
    return l1 + kl, l1, kl, grad


def occupancy_loss(a: np.ndarray, x: np.ndarray, shape):
    """Per-(time, slot) squared normalized load difference, batch-mean.

    value = sum_{l,f} ((sum_k a - sum_k x) / K)^2; the K normalizer is the
    node's own UE count.
    """
    a4 = np.atleast_2d(a).reshape(-1, *shape)
    x4 = np.atleast_2d(x).reshape(-1, *shape)
    b, _, k_count, _ = a4.shape
    diff = (a4.sum(axis=2) - x4.sum(axis=2)) / k_count  # (b, L, q)
    value = float((diff**2).sum() / b)
    grad = (2.0 * diff / k_count / b)[:, :, None, :]
    grad = np.broadcast_to(grad, a4.shape).reshape(b, -1)
    return value, grad


def critic_loss(critic: MlpNet, real: np.ndarray, fake: np.ndarray, config: GanConfig, rng):
    """Wasserstein critic loss with gradient penalty, plus its parameter
    gradients; interpolates are resampled per call."""
    b = real.shape[0]
    d_real, tape_r = forward(critic, real)
    d_fake, tape_f = forward(critic, fake)
    wass = float(d_fake.mean() - d_real.mean())

    rho = rng.random((b, 1))
    xhat = rho * real + (1.0 - rho) * fake
    _, grad_x = input_gradient(critic, xhat)
    norms = np.linalg.norm(grad_x, axis=1)
    gp = float(np.mean((norms - 1.0) ** 2))
    loss = wass + config.lambda_gp * gp

    grads = zero_grads(critic)
    g_fake, _ = backward(critic, tape_f, np.full((b, 1), 1.0 / b))
    g_real, _ = backward(critic, tape_r, np.full((b, 1), -1.0 / b))
    grads = add_grads(grads, g_fake)
    grads = add_grads(grads, g_real)
    safe = np.maximum(norms, 1e-12)
    coeff = config.lambda_gp * 2.0 * (norms - 1.0) / (safe * b)
    grads = add_grads(grads, mixed_second_grads(critic, xhat, grad_x, coeff))
    if not all(np.isfinite(dw).all() and np.isfinite(db).all() for dw, db in grads):
        raise FloatingPointError("non-finite critic gradients")
    diag = {"wasserstein": wass, "penalty": gp, "grad_norms": norms}
    return loss, grads, diag


def generator_loss(
    generator: MlpNet, critic: MlpNet, x_ref: np.ndarray, config: GanConfig, shape, rng
):
    """Composite generator loss and its parameter gradients.

    Scores flow through the critic for the Wasserstein term; the structure
    and load regularizers are evaluated on the same continuous scores
    against a reference batch of real patterns.
    """
    b = x_ref.shape[0]
    z = rng.standard_normal((b, config.noise_dim))
    scores, tape_g = forward(generator, z)
    d_fake, _ = forward(critic, scores)
    wass = -float(d_fake.mean())
    _, critic_grad_x = input_gradient(critic, scores)
    d_scores = -critic_grad_x / b

    sim, l1, kl, g_sim = similarity_loss(scores, x_ref, shape, config.smoothing)
    occ, g_occ = occupancy_loss(scores, x_ref, shape)
    loss = wass + config.alpha * sim + config.beta * occ
    d_scores = d_scores + config.alpha * g_sim + config.beta * g_occ

    grads, _ = backward(generator, tape_g, d_scores)
    if not all(np.isfinite(dw).all() and np.isfinite(db).all() for dw, db in grads):
        raise FloatingPointError("non-finite generator gradients")
    parts = {"wasserstein": wass, "similarity": sim, "l1": l1, "kl": kl, "occupancy": occ}
    return loss, grads, parts, scores


class ModeCollapseError(RuntimeError):
    def __init__(self, rounds: int):
        super().__init__(f"generated batches degenerate for {rounds} consecutive rounds")


def train_stage2(corpus: list[np.ndarray], config: GanConfig, rng: np.random.Generator):
    """Adversarial training on a corpus of feasible occupancy tensors.

    ``corpus`` holds (time, ue, slot) binary tensors of one shared shape.
    Runs ``n_critic`` critic steps then one generator step per iteration;
    aborts if the generated batches collapse to near-zero variance for
    ``collapse_rounds`` consecutive rounds.  Returns (generator, critic,
    curve).
    """
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    shape = corpus[0].shape
    if any(t.shape != shape for t in corpus):
        raise ValueError("corpus tensors must share one shape")
    width = math.prod(shape)
    real_mat = np.stack([t.reshape(-1).astype(float) for t in corpus])

    g_rng, c_rng, loop_rng = rng.spawn(3)
    generator = MlpNet.create(
        [config.noise_dim, *config.hidden, width],
        ["tanh"] * len(config.hidden) + ["sigmoid"],
        g_rng,
    )
    critic = MlpNet.create(
        [width, *config.hidden, 1], ["tanh"] * len(config.hidden) + ["linear"], c_rng
    )

    def real_batch():
        idx = loop_rng.integers(0, real_mat.shape[0], size=config.batch_size)
        return real_mat[idx]

    curve = []
    flat_rounds = 0
    for it in range(config.iterations):
        c_diag = {}
        for _ in range(config.n_critic):
            real = real_batch()
            z = loop_rng.standard_normal((config.batch_size, config.noise_dim))
            fake, _ = forward(generator, z)
            c_loss, c_grads, c_diag = critic_loss(critic, real, fake, config, loop_rng)
            sgd_update(critic, c_grads, config.learning_rate)
        g_loss, g_grads, parts, scores = generator_loss(
            generator, critic, real_batch(), config, shape, loop_rng
        )
        sgd_update(generator, g_grads, config.learning_rate)
        if float(scores.var()) < config.collapse_var:
            flat_rounds += 1
            if flat_rounds >= config.collapse_rounds:
                raise ModeCollapseError(flat_rounds)
        else:
            flat_rounds = 0
        curve.append(
            {
                "iteration": it,
                "critic_loss": c_loss,
                "generator_loss": g_loss,
                "wasserstein_gap": -c_diag["wasserstein"],
                "penalty": c_diag["penalty"],
                "occupancy": parts["occupancy"],
                "similarity": parts["similarity"],
            }
        )
    return generator, critic, curve


def project_adversarial(scores: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Masked-argmax projection of continuous slot scores to a hard decoy
    tensor for one node.

    Per (time, ue): the decoy goes to the highest-scoring slot that is not
    the UE's own data slot, not any same-node data slot at that time, and
    not already claimed by an earlier decoy this time slot; if no slot is
    free the row stays silent.
    """
    L, K, q = x.shape
    out = np.zeros_like(x, dtype=np.int8)
    sc = scores.reshape(L, K, q)
    for l in range(L):
        blocked = x[l].sum(axis=0) > 0
        taken = blocked.copy()
        for k in range(K):
            free = ~taken
            if not free.any():
                continue
            masked = np.where(free, sc[l, k], -np.inf)
            slot = int(np.argmax(masked))
            out[l, k, slot] = 1
            taken[slot] = True
    return out


def sample_adversarial_plan(
    generator: MlpNet, plan: ResourcePlan, rng: np.random.Generator, noise_dim: int | None = None
) -> AdversarialPlan:
    """Draw decoy placements for every node of a plan from the generator."""
    if noise_dim is None:
        noise_dim = generator.in_width
    tensors = []
    for z in range(plan.dims.n_nodes):
        x = np.asarray(plan.x[z])
        width = x.size
        if generator.out_width == width:
            zvec = rng.standard_normal(noise_dim)
            scores, _ = forward(generator, zvec)
        else:
            # shape mismatch (different node size): fall back to noise scores
            scores = rng.random(width)
        tensors.append(project_adversarial(scores.reshape(x.shape), x))
    return AdversarialPlan(tuple(tensors))


def attach_adversarial(plan: ResourcePlan, adv: AdversarialPlan) -> ResourcePlan:
    return ResourcePlan(dims=plan.dims, s=plan.s, x=plan.x, a=adv, p=plan.p)
