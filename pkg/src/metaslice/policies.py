"""Admission policies sharing one interface: decide(state) -> 0 or 1.

Policies are side-effect-free on the environment. The function-sharing
technique is an environment flag, not a policy property, so "greedy with
sharing" and "greedy without sharing" are the same policy object run on
differently configured simulators.
"""

from __future__ import annotations

import numpy as np

from .simulation import SystemState


class GreedyPolicy:
    """Accept whenever the available resources cover the request."""

    name = "greedy"

    def decide(self, state: SystemState) -> int:
        return int(np.all(state.available >= state.footprint - 1e-9))


class AlwaysAcceptPolicy:
    name = "always_accept"

    def decide(self, state: SystemState) -> int:
        return 1


class AlwaysRejectPolicy:
    name = "always_reject"

    def decide(self, state: SystemState) -> int:
        return 0


class ValueNetPolicy:
    """Greedy with respect to a trained action-value network.

    Ties go to reject, the conservative choice that preserves resources.
    """

    name = "imsac"

    def __init__(self, net, encoder):
        self.net = net
        self.encoder = encoder

    def decide(self, state: SystemState) -> int:
        q = self.net.q_values(self.encoder(state))
        return int(q[1] > q[0])


BASELINES = {
    "greedy": GreedyPolicy,
    "always_accept": AlwaysAcceptPolicy,
    "always_reject": AlwaysRejectPolicy,
}


def make_baseline(name: str):
    try:
        return BASELINES[name]()
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; expected one of "
                         f"{sorted(BASELINES)} or 'imsac'") from None
