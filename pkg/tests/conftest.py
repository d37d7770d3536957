import numpy as np
import pytest

from stnsec.channel import LinkKind, LinkModel
from stnsec.environment import EnvConfig, JammerConfig, RewardWeights
from stnsec.grid import GridDims
from stnsec.metrics import LinkSet
from stnsec.numerics import ExpPowerDist, RicianPowerDist


def make_links(noise=0.01, sat_pl=0.0, terr_pl=0.0):
    return LinkSet(
        sat_to_user=LinkModel(LinkKind.SAT_TO_USER, RicianPowerDist(5.0), sat_pl, noise),
        sat_to_eve=LinkModel(LinkKind.SAT_TO_EVE, RicianPowerDist(3.0), sat_pl, noise),
        terr_to_user=LinkModel(LinkKind.TERR_TO_USER, ExpPowerDist(1.0), terr_pl, noise),
        terr_to_eve=LinkModel(LinkKind.TERR_TO_EVE, ExpPowerDist(0.75), terr_pl, noise),
    )


def bs_env_config(n_ues=2, q=4, L=4, budget=5.0, jammer=None, **kw):
    # single-BS grid used by the scheduling-stage toy scenario
    dims = GridDims(0, 1, L, q, (n_ues,))
    return EnvConfig(
        dims=dims,
        links=make_links(),
        budgets=(budget,),
        tau_e=1.0,
        tau_u=1.0,
        eps_e=0.2,
        eps_u=0.1,
        weights=RewardWeights(),
        jammer=jammer or JammerConfig(),
        **kw,
    )


def mixed_env_config(q=8, L=4, sat_ues=1, bs_ues=1, **kw):
    dims = GridDims(1, 1, L, q, (sat_ues, bs_ues))
    return EnvConfig(
        dims=dims,
        links=make_links(),
        budgets=(20.0, 5.0),
        tau_e=1.0,
        tau_u=1.0,
        eps_e=0.2,
        eps_u=0.1,
        **kw,
    )
