import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stackelberg.game import FollowerSpec, LeaderSpec, ParametrizedGame
from stackelberg.numerics import Polytope

settings.register_profile("ci", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def scalar_follower(P=2.0, Q=0.0, r=0.0, S=1.0, lo=None, hi=None):
    G, h = [], []
    if hi is not None:
        G.append([1.0]); h.append(hi)
    if lo is not None:
        G.append([-1.0]); h.append(-lo)
    return FollowerSpec(
        P=[[P]], Q=[[Q]], r=[r], S=[[S]], A=np.zeros((0, 1)), b=[], G=np.array(G).reshape(-1, 1), h=h
    )


def box_leader(m, lo=-10.0, hi=10.0, P_L=None, q_L=None):
    P_L = np.eye(m) if P_L is None else P_L
    q_L = np.zeros(m) if q_L is None else q_L
    return LeaderSpec(P_L, q_L, Polytope.box(np.full(m, lo), np.full(m, hi)))


def random_game(seed, N=3, m_F=3, m_L=2, box=5.0, coupling=0.2, leader_box=5.0):
    """Strongly monotone game with box-constrained followers (no equalities)."""
    rng = np.random.default_rng(seed)
    fs = []
    for _ in range(N):
        B = rng.normal(size=(m_F, m_F))
        P = B @ B.T / m_F + (1.0 + N * coupling * m_F) * np.eye(m_F)
        Q = coupling * rng.normal(size=(m_F, m_F))
        S = rng.normal(size=(m_F, m_L))
        G = np.vstack([np.eye(m_F), -np.eye(m_F)])
        h = np.full(2 * m_F, box)
        fs.append(FollowerSpec(P=P, Q=Q, r=rng.normal(size=m_F), S=S, A=np.zeros((0, m_F)), b=[], G=G, h=h))
    R = rng.normal(size=(m_F, m_F))
    leader = LeaderSpec(R @ R.T / m_F + np.eye(m_F), rng.normal(size=m_F), Polytope.box(np.zeros(m_L), np.full(m_L, leader_box)))
    return ParametrizedGame(leader, tuple(fs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
