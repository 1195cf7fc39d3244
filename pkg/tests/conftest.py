import math

import numpy as np
import pytest

from heatflux.model import make_model

# Two-level reference model: E = [0, 1], beta_S = 2, beta_B = 1, C_12 = 1, tau = 1.
# Values below were computed once with mpmath at 30 digits from the closed form
# P = Pi + exp(-lam tau) (I - Pi), lam = 2 cosh(1/2), and frozen here.
TWO_LEVEL = {
    "lam": 2.25525193041276157045245032281,
    "pi": (0.731058578630004879251159241821867, 0.268941421369995120748840758178133),
    "P": ((0.759256313784578560323844306153411, 0.654409187555626434933553556832787),
          (0.240743686215421439676155693846564, 0.345590812444373565066446443167164)),
    "p_S": (0.880797077977882444059729141302444, 0.119202922022117555940270858697617),
    "mass_plus": 0.212046335360167420658174603309,
    "mass_minus": 0.0780074873547506403981112317746,
    "mass_zero": 0.709946177285081938943714164916,
    "mean_heat": 0.134038848005416780260063371535,
    "gamma": 1.1276259652063807852262251614,
    "coherence_modulus": 0.0971403178943001533901276102191,  # 0.3 * exp(-cosh(1/2))
}


@pytest.fixture
def two_level():
    return make_model([0.0, 1.0], 2.0, 1.0, [[0.0, 1.0], [1.0, 0.0]])


def two_level_closed_form(gap, beta_B, coupling, tau):
    """Independent closed-form propagator of a two-level model."""
    up = coupling * math.exp(-beta_B * gap / 2)
    down = coupling * math.exp(beta_B * gap / 2)
    lam = up + down
    pi = np.array([down, up]) / lam
    Pi = np.column_stack([pi, pi])
    return Pi + math.exp(-lam * tau) * (np.eye(2) - Pi)


def random_density(dim, rng):
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = G @ G.conj().T
    rho = rho / np.trace(rho).real
    return (rho + rho.conj().T) / 2


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
