"""Closed-form convergence guarantees for gradient descent with compressed iterates."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

# relative tolerance for the algebraic cross-checks below
_CROSSCHECK_RTOL = 1e-9


class TranscriptionError(AssertionError):
    """Two algebraically equivalent formulas disagreed."""


def _validate(L: float, mu: float, gamma: float, omega: float) -> None:
    if not (mu > 0 and L >= mu):
        raise ValueError(f"need L >= mu > 0, got L={L}, mu={mu}")
    if not gamma > 0:
        raise ValueError(f"step size must be positive, got {gamma}")
    if not omega >= 0:
        raise ValueError(f"omega must be nonnegative, got {omega}")


@dataclass(frozen=True)
class TheoryConstants:
    L: float
    mu: float
    gamma: float
    omega: float
    x_star_sq_norm: float

    @classmethod
    def build(cls, L, mu, gamma, omega, x_star_sq_norm) -> "TheoryConstants":
        _validate(L, mu, gamma, omega)
        if x_star_sq_norm < 0:
            raise ValueError("||x*||^2 must be nonnegative")
        return cls(float(L), float(mu), float(gamma), float(omega), float(x_star_sq_norm))

    @property
    def alpha(self) -> float:
        return 2.0 * self.omega / self.mu

    @property
    def beta(self) -> float:
        return 2.0 * self.omega * self.x_star_sq_norm

    @property
    def _curv(self) -> float:
        return self.L**2 + 1.0 / self.gamma**2

    @property
    def A(self) -> float:
        return self.L + self._curv * self.alpha

    @property
    def B(self) -> float:
        return 2.0 * self._curv * self.beta

    @property
    def D(self) -> float:
        return 2.0 * self.gamma**2 * self.B + self.gamma * (self.L - self.mu) * self.beta

    @property
    def contraction(self) -> float:
        return 1.0 - self.gamma * self.mu

    @property
    def neighbourhood(self) -> float:
        """Asymptotic floor D / (gamma mu) of the expected squared distance."""
        return self.D / (self.gamma * self.mu)

    @property
    def neighbourhood_closed_form(self) -> float:
        """(2 omega / mu)(4 gamma L^2 + 4/gamma + L - mu) ||x*||^2."""
        g, L, mu = self.gamma, self.L, self.mu
        return (2.0 * self.omega / mu) * (4.0 * g * L**2 + 4.0 / g + L - mu) * self.x_star_sq_norm

    def to_dict(self) -> dict:
        out = asdict(self)
        for name in ("alpha", "beta", "A", "B", "D", "contraction", "neighbourhood"):
            out[name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class AdmissibilityReport:
    """Verdict of the step-size/compression condition.

    ``lhs``/``rhs`` are the primary form 4 omega/mu <= rhs.  The rate also
    follows from the weaker 2 gamma A + alpha (L - mu) <= 1, reported as
    ``proof_form_value``; it is equivalent to alpha <= rhs, i.e. a threshold
    twice as large as the primary one.
    """

    lhs: float
    rhs: float
    step_ok: bool
    admissible: bool
    proof_form_value: float
    proof_form_admissible: bool
    omega_max: float
    omega_max_proof_form: float

    def to_dict(self) -> dict:
        return asdict(self)


def check_admissible(L: float, mu: float, gamma: float, omega: float) -> AdmissibilityReport:
    _validate(L, mu, gamma, omega)
    denom = 2.0 * gamma * L**2 + 2.0 / gamma + L - mu
    rhs = (1.0 - 2.0 * gamma * L) / denom
    lhs = 4.0 * omega / mu
    step_ok = gamma <= 1.0 / (2.0 * L)
    admissible = step_ok and lhs <= rhs

    alpha = 2.0 * omega / mu
    A = L + (L**2 + 1.0 / gamma**2) * alpha
    proof_value = 2.0 * gamma * A + alpha * (L - mu)
    proof_ok = step_ok and proof_value <= 1.0
    # the proof form must rearrange exactly to alpha <= rhs
    rearranged = alpha * denom + 2.0 * gamma * L
    scale = max(1.0, abs(proof_value))
    if abs(rearranged - proof_value) > _CROSSCHECK_RTOL * scale:
        raise TranscriptionError(f"proof-form value {proof_value!r} != rearranged {rearranged!r}")

    omega_max = max(mu * rhs / 4.0, 0.0) if step_ok else 0.0
    omega_max_proof = max(mu * rhs / 2.0, 0.0) if step_ok else 0.0
    return AdmissibilityReport(lhs, rhs, step_ok, admissible, proof_value, proof_ok, omega_max, omega_max_proof)


def bound_at(k, constants: TheoryConstants, r0: float) -> float:
    """Upper bound on E||x_k - x*||^2 after k steps from squared distance r0.

    The value is computed for any configuration; whether it is guaranteed is
    reported separately by :func:`check_admissible`.
    """
    c = constants
    return c.contraction**k * r0 + c.neighbourhood_closed_form


def bound_curve(ks, constants: TheoryConstants, r0: float):
    import numpy as np

    ks = np.asarray(ks, dtype=float)
    return constants.contraction**ks * r0 + constants.neighbourhood_closed_form


def corollary_neighbourhood(omega: float, kappa: float, x_star_sq_norm: float) -> float:
    """Additive term 2 omega (18 kappa - 1) ||x*||^2 for gamma = 1/(4L)."""
    return 2.0 * omega * (18.0 * kappa - 1.0) * x_star_sq_norm


@dataclass(frozen=True)
class CorollaryRegime:
    gamma: float
    kappa: float
    omega_max_claimed: float
    omega_max_derived: float
    omega_max_proof_form: float
    claimed_is_admissible: bool

    @property
    def discrepancy(self) -> bool:
        return not self.claimed_is_admissible

    def to_dict(self) -> dict:
        out = asdict(self)
        out["discrepancy"] = self.discrepancy
        return out


# the claimed 1/(73 kappa) and the derived 1/(76 kappa - 8) coincide here
COROLLARY_CROSSOVER_KAPPA = 8.0 / 3.0


def corollary_regime(L: float, mu: float) -> CorollaryRegime:
    if not (mu > 0 and L >= mu):
        raise ValueError(f"need L >= mu > 0, got L={L}, mu={mu}")
    kappa = L / mu
    gamma = 1.0 / (4.0 * L)
    claimed = 1.0 / (73.0 * kappa)
    derived = 1.0 / (76.0 * kappa - 8.0)
    report = check_admissible(L, mu, gamma, derived)
    if not math.isclose(report.omega_max, derived, rel_tol=1e-9):
        raise TranscriptionError(f"threshold {report.omega_max!r} != 1/(76 kappa - 8) = {derived!r}")
    ok = check_admissible(L, mu, gamma, claimed).admissible or math.isclose(claimed, derived, rel_tol=1e-12)
    return CorollaryRegime(gamma, kappa, claimed, derived, report.omega_max_proof_form, ok)
