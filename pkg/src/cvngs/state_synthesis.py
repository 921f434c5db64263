"""End-to-end engineered-photon-subtraction (EPS) pipelines and closed forms.

Gain convention: every stage gain g_A here is the reported-gain symbol, a
variance-domain multiplier of the X_C quadrature variance (dB = 10 log10 g_A).
The physical quadrature scaling applied in phase space is sqrt(g_A); the
amplifier's noise n_A multiplies the P_C variance by (1 + n_A)/g_A.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError, DomainError, ZeroWeightError
from .gaussian_core import (CovMatrix, SigmaMatrix, cov_from_sigma,
                            loss_channel_sigma, sigma_from_cov)
from .phase_space import (MultiPoly, PolyGaussian, amplify_wigner,
                          apply_linear_map, gaussian_wigner, normalize,
                          project_XC, subtract_photon)

SQRT2 = math.sqrt(2.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise DomainError(f"cannot express non-positive gain {x} in dB")
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class EpsStage:
    """One amplifier + n-photon-subtraction stage."""

    g_A: float                 # variance-domain gain (linear)
    n: int = 2                 # subtracted photons
    n_A: float = 0.0           # amplifier noise (P_C variance excess)

    def __post_init__(self):
        if not self.g_A > 0:
            raise DomainError(f"stage gain must be positive, got {self.g_A}")
        if self.n < 0:
            raise DomainError(f"subtracted photon count must be >= 0, got {self.n}")
        if self.n_A < 0:
            raise DomainError(f"amplifier noise must be >= 0, got {self.n_A}")

    @classmethod
    def from_db(cls, g_db: float, n: int = 2, n_A: float = 0.0) -> "EpsStage":
        return cls(db_to_linear(g_db), n, n_A)

    @property
    def g_db(self) -> float:
        return linear_to_db(self.g_A)

    @property
    def quad_gain(self) -> float:
        return math.sqrt(self.g_A)

    @property
    def quad_noise(self) -> float:
        # P_C variance multiplier (1+n_A)/g_A <=> quadrature multiplier (1+m)/sqrt(g_A)
        return math.sqrt(1.0 + self.n_A) - 1.0


@dataclass(frozen=True)
class MeasurementSpec:
    """Homodyne projection: direction theta (0 = X_C), outcome zeta, error eps,
    efficiency mu."""

    theta: float = 0.0
    zeta: float = 0.0
    eps: float = 0.1
    mu: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise DomainError(f"measurement error must be positive, got {self.eps}")
        if not 0.0 < self.mu <= 1.0:
            raise DomainError(f"homodyne efficiency must lie in (0, 1], got {self.mu}")


@dataclass(frozen=True)
class PipelineSpec:
    """Full conditioning chain: transmission loss, EPS stages, dark counts,
    homodyne projection."""

    stages: tuple[EpsStage, ...] = ()
    measurement: MeasurementSpec = field(default_factory=MeasurementSpec)
    eta: float = 1.0
    dark_count: float = 1.0    # herald fidelity nu

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"transmission efficiency must lie in [0, 1], got {self.eta}")
        if not 0.0 < self.dark_count <= 1.0:
            raise DomainError(f"herald fidelity must lie in (0, 1], got {self.dark_count}")


def _rotation_on_C(theta: float) -> np.ndarray:
    """Phase-space rotation bringing the measured quadrature X_theta onto X_C."""
    c, s = math.cos(theta), math.sin(theta)
    T = np.eye(4)
    T[2:, 2:] = np.array([[c, s], [-s, c]])
    return T


def _run_stages(W: PolyGaussian, stages: tuple[EpsStage, ...],
                drop_last_photon: bool = False) -> PolyGaussian:
    for k, stage in enumerate(stages):
        W = amplify_wigner(W, stage.quad_gain, stage.quad_noise)
        n_sub = stage.n
        if drop_last_photon and k == len(stages) - 1 and n_sub > 0:
            n_sub -= 1
        for _ in range(n_sub):
            W = subtract_photon(W)
            if W.total_mass() <= 0:
                raise ZeroWeightError(
                    f"zero-weight branch: subtraction in stage {k} annihilated the state")
    return W


def eps_pipeline(V: CovMatrix, spec: PipelineSpec) -> PolyGaussian:
    """Run the full EPS chain on the two-mode Gaussian state V.

    Order: transmission loss -> per stage (amplify, subtract^n) -> dark-count
    mixing -> homodyne window projection -> normalize.  Returns the
    2-variable mechanical Wigner function.
    """
    if spec.eta < 1.0:
        V = cov_from_sigma(loss_channel_sigma(sigma_from_cov(V), spec.eta))
    W = gaussian_wigner(V)

    heralded = _run_stages(W, spec.stages)
    if spec.dark_count < 1.0 and spec.stages and spec.stages[-1].n > 0:
        unheralded = _run_stages(W, spec.stages, drop_last_photon=True)
        joint = dark_count_mix(heralded, unheralded, spec.dark_count)
    else:
        joint = heralded

    m = spec.measurement
    if m.theta != 0.0:
        # rotate the measured quadrature X_theta onto X_C just before projecting
        joint = apply_linear_map(joint, _rotation_on_C(m.theta))
    return project_XC(joint, m.eps, m.zeta, m.mu)


def dark_count_mix(W_heralded: PolyGaussian, W_unheralded: PolyGaussian,
                   nu: float) -> PolyGaussian:
    """Convex mixture nu * heralded + (1-nu) * unheralded of normalized branches.

    Both branches must share the same Gaussian kernel (they do whenever they
    differ only in subtraction count)."""
    if not 0.0 <= nu <= 1.0:
        raise DomainError(f"herald fidelity must lie in [0, 1], got {nu}")
    if W_heralded.nvars != W_unheralded.nvars:
        raise ContractError("dark-count branches live on different variable sets")
    if (not np.allclose(W_heralded.cov, W_unheralded.cov, rtol=1e-12, atol=1e-14)
            or not np.allclose(W_heralded.mean, W_unheralded.mean, atol=1e-12)):
        raise ContractError("dark-count branches must share the same Gaussian kernel")
    if nu == 1.0:
        return normalize(W_heralded)
    if nu == 0.0:
        return normalize(W_unheralded)
    zh = W_heralded.total_mass()
    zu = W_unheralded.total_mass()
    if zh <= 0 or zu <= 0:
        raise ZeroWeightError("cannot mix zero-weight branches")
    mixed = (W_heralded.poly.scale(nu * W_heralded.norm / zh)
             + W_unheralded.poly.scale((1.0 - nu) * W_unheralded.norm / zu))
    return PolyGaussian(W_heralded.cov, W_heralded.mean, mixed, 1.0)


# ---------------------------------------------------------------------------
# gain solving

def solve_gain(sigma: SigmaMatrix, xi: float) -> float:
    """Amplifier gain g_A = s33 - xi * s13^2 / s11 realizing the target xi."""
    if abs(sigma.s13) < 1e-12:
        raise DomainError("no X correlation (s13 = 0): xi is undefined")
    g = sigma.s33 - xi * sigma.s13 ** 2 / sigma.s11
    if g <= 0:
        raise DomainError(
            f"solved gain is not positive (g={g:.4e}) for xi={xi}; "
            f"s33={sigma.s33:.4f}, s13={sigma.s13:.4f}, s11={sigma.s11:.4f}")
    return float(g)


def xi_from_gain(sigma: SigmaMatrix, g_A: float) -> float:
    if abs(sigma.s13) < 1e-12:
        raise DomainError("no X correlation (s13 = 0): xi is undefined")
    return float((sigma.s33 - g_A) / (sigma.s13 ** 2 / sigma.s11))


# ---------------------------------------------------------------------------
# analytic wave-function route (pure gamma=0 states)

def _poly1(coeffs: dict[int, float]) -> dict[int, float]:
    return {k: v for k, v in coeffs.items() if v != 0.0}


def phi_poly_coeffs(n: int, xi: float) -> dict[int, float]:
    """Coefficients (power -> coeff) of phi_{n,xi}(y) in y = X_M / sqrt(2/s11),
    valid for all real xi (polynomial form; no sqrt(xi) branch issues)."""
    out = {}
    for k in range(n // 2 + 1):
        c = ((-1.0) ** k * math.factorial(n) * 2.0 ** (n - 2 * k)
             / (math.factorial(k) * math.factorial(n - 2 * k)))
        out[n - 2 * k] = out.get(n - 2 * k, 0.0) + c * xi ** k
    return _poly1(out)


@dataclass(frozen=True)
class WavefunctionXM:
    """Real mechanical wave function poly(X) * exp(-s11 (X - d)^2 / 2), normalized."""

    coeffs: dict = field(repr=False)   # power of (X - d) -> coefficient
    s11: float = 1.0
    displacement: float = 0.0

    def _raw(self, x):
        y = np.asarray(x, dtype=float) - self.displacement
        p = np.zeros_like(y)
        for k, c in self.coeffs.items():
            p = p + c * y ** k
        return p * np.exp(-self.s11 * y * y / 2.0)

    def norm_constant(self) -> float:
        # integral of raw^2: sum over monomial pairs of even Gaussian moments
        tot = 0.0
        for k1, c1 in self.coeffs.items():
            for k2, c2 in self.coeffs.items():
                m = k1 + k2
                if m % 2 == 0:
                    tot += c1 * c2 * _even_gaussian_moment(m, self.s11)
        return math.sqrt(tot)

    def __call__(self, x):
        return self._raw(x) / self.norm_constant()

    def mean_phonons(self) -> float:
        """<m' m> of the normalized state (X^2 + P^2 - 1)/2 expectation."""
        z = self.norm_constant() ** 2
        s = self.s11
        d = self.displacement
        # work with psi(y + d): <X^2> and <psi'' > via polynomial algebra in y
        x2 = 0.0
        kin = 0.0
        for k1, c1 in self.coeffs.items():
            for k2, c2 in self.coeffs.items():
                # <X^2> term: (y + d)^2 weight
                for p, w in ((2, 1.0), (1, 2.0 * d), (0, d * d)):
                    m = k1 + k2 + p
                    if m % 2 == 0:
                        x2 += w * c1 * c2 * _even_gaussian_moment(m, s)
                # <psi (-d2/dx2) psi> = integral of (psi')^2 with psi' in y
                # psi' = (c k y^{k-1} - s y c y^k) e^{-s y^2/2}
                for (ka, wa) in _diff_terms(k1, c1, s):
                    for (kb, wb) in _diff_terms(k2, c2, s):
                        m = ka + kb
                        if m % 2 == 0:
                            kin += wa * wb * _even_gaussian_moment(m, s)
        return 0.5 * ((x2 + kin) / z - 1.0)


def _diff_terms(k: int, c: float, s: float) -> list[tuple[int, float]]:
    out = []
    if k >= 1:
        out.append((k - 1, c * k))
    out.append((k + 1, -c * s))
    return out


def _even_gaussian_moment(m: int, s: float) -> float:
    """integral x^m exp(-s x^2) dx for even m."""
    k = m // 2
    return math.gamma(k + 0.5) / s ** (k + 0.5)


def wavefunction_XM(sigma: SigmaMatrix, g_A: float, n: int,
                    zeta: float = 0.0) -> WavefunctionXM:
    """Closed-form mechanical wave function after an n-photon EPS with outcome
    X_C = zeta (pure-state route; exact for gamma = 0 covariances).

    Built by applying the annihilation operator (X_C + d/dX_C)/sqrt(2) n times
    to the amplified joint wave function and evaluating at X_C = zeta.  The
    zeta != 0 outcome displaces X_M by d = -zeta s13 / (sqrt(g_A) s11).
    """
    if abs(sigma.s13) < 1e-12:
        raise DomainError("no X correlation (s13 = 0)")
    if n < 0:
        raise DomainError(f"photon number must be >= 0, got {n}")
    s11 = sigma.s11
    s33a = sigma.s33 / g_A            # post-amplifier (variance-gain) sigma elements
    s13a = sigma.s13 / math.sqrt(g_A)

    # 2-variable polynomial in (X, Y=X_C) applied to exp(-(s11 X^2 + s33a Y^2
    # + 2 s13a X Y)/2); trailing substitution Y = zeta.
    terms = {(0, 0): 1.0}

    def dY(ts):
        out = {}
        for (i, j), c in ts.items():
            if j > 0:
                out[(i, j - 1)] = out.get((i, j - 1), 0.0) + c * j
            # chain rule on the Gaussian: -(s33a Y + s13a X)
            out[(i, j + 1)] = out.get((i, j + 1), 0.0) - c * s33a
            out[(i + 1, j)] = out.get((i + 1, j), 0.0) - c * s13a
        return out

    for _ in range(n):
        new = dY(terms)
        for (i, j), c in terms.items():
            new[(i, j + 1)] = new.get((i, j + 1), 0.0) + c
        terms = {k: v / SQRT2 for k, v in new.items() if v != 0.0}

    # substitute Y = zeta; collect a polynomial in X
    poly_x: dict[int, float] = {}
    for (i, j), c in terms.items():
        poly_x[i] = poly_x.get(i, 0.0) + c * zeta ** j
    # Gaussian part: exp(-(s11 X^2 + 2 s13a zeta X)/2) = exp(-s11 (X-d)^2/2) * const
    d = -s13a * zeta / s11
    # re-center the polynomial on y = X - d
    re: dict[int, float] = {}
    for k, c in poly_x.items():
        for j in range(k + 1):
            re[j] = re.get(j, 0.0) + c * math.comb(k, j) * d ** (k - j)
    re = _poly1(re)
    if not re:
        raise ZeroWeightError("wave function vanished (subtraction from vacuum)")
    return WavefunctionXM(re, s11, d)


def conversion_rate_gamma(n: int, xi: float) -> float:
    """Remote photon-phonon conversion rate Gamma = <m' m>/n at s11 = 1.

    Symmetric about xi = 1/2 where it attains its maximum Gamma = 1.
    """
    if n < 1:
        raise DomainError(f"photon number must be >= 1, got {n}")
    coeffs = phi_poly_coeffs(n, xi)
    # phi is expressed in y = X/sqrt(2/s11) = X/sqrt(2) at s11=1: rescale powers
    scaled = {k: c / SQRT2 ** k for k, c in coeffs.items()}
    psi = WavefunctionXM(scaled, 1.0, 0.0)
    return psi.mean_phonons() / n


# ---------------------------------------------------------------------------
# four-component cat cascade

def four_cat_conditions(xi1: float) -> float:
    """Second-stage target satisfying the C4-symmetry condition 5 xi1 + xi2 = 3."""
    return 3.0 - 5.0 * xi1


def four_cat_gains(sigma: SigmaMatrix, xi1: float) -> tuple[float, float]:
    """(g_A1, g_A2) for the cascaded 2-photon EPS pair; g_A2 solves
    xi2 = (s33 - g_A2 g_A1) / (s13^2 / s11)."""
    xi2 = four_cat_conditions(xi1)
    g1 = solve_gain(sigma, xi1)
    g2 = (sigma.s33 - xi2 * sigma.s13 ** 2 / sigma.s11) / g1
    if g2 <= 0:
        raise DomainError(f"second-stage gain not positive (g2={g2:.4e}) for xi1={xi1}")
    return g1, g2


def four_cat_pipeline(V: CovMatrix, xi1: float,
                      measurement: MeasurementSpec | None = None) -> dict:
    """Two cascaded 2-photon EPS stages tuned to the four-component-cat condition.

    Returns the mechanical state, the stage gains, and fidelities against the
    ideal four-component cat of amplitude 1.6: `fidelity` is evaluated in the
    state's natural squeezing frame (X_M in units of sqrt(1/s11), the frame in
    which the C4 condition is derived); `fidelity_lab` uses lab coordinates.
    """
    from .metrics_targets import TargetState, fidelity

    measurement = measurement or MeasurementSpec(eps=0.01)
    sigma = sigma_from_cov(V)
    g1, g2 = four_cat_gains(sigma, xi1)
    spec = PipelineSpec(stages=(EpsStage(g1, 2), EpsStage(g2, 2)),
                        measurement=measurement)
    W = eps_pipeline(V, spec)

    target = TargetState.four_cat(1.6)
    f_lab = fidelity(W, target)
    # squeezing-frame fidelity: undo the mechanical squeeze X -> X sqrt(s11)
    lam = math.sqrt(sigma.s11)
    T = np.diag([lam, 1.0 / lam])
    W_frame = apply_linear_map(W, T)
    f_frame = fidelity(W_frame, target)
    return {"state": W, "g_A1": g1, "g_A2": g2, "xi2": four_cat_conditions(xi1),
            "fidelity": f_frame, "fidelity_lab": f_lab}


def four_cat_wavefunction(sigma: SigmaMatrix, xi1: float) -> WavefunctionXM:
    """Closed-form quartic wave function of the cascaded 2+2 EPS (gamma = 0)."""
    xi2 = four_cat_conditions(xi1)
    s11 = sigma.s11
    s2 = 1.0 / s11
    # quartic in y = X/s with s = sqrt(1/s11)
    coeffs = {4: 1.0 / s2 ** 2, 2: -(5.0 * xi1 + xi2) / s2,
              0: 2.0 * xi1 ** 2 + xi1 * xi2}
    return WavefunctionXM(_poly1(coeffs), s11, 0.0)


# ---------------------------------------------------------------------------
# imperfection closed form and OPA gain

def imperfect_wigner_closed_form(sigma: SigmaMatrix, eps: float,
                                 mu: float) -> PolyGaussian:
    """Measured mechanical Wigner function of the 2-photon EPS in closed form.

    sigma is the post-amplifier (and post-transmission-loss) joint sigma
    matrix; eps and mu are the homodyne window error and efficiency.  The
    six coefficients are fixed against the exact pipeline (the d coefficient
    reads s24/s44, and the window error enters through its variance 2 eps^2).
    """
    if eps <= 0:
        raise DomainError(f"measurement error must be positive, got {eps}")
    if not 0.0 < mu <= 1.0:
        raise DomainError(f"homodyne efficiency must lie in (0, 1], got {mu}")
    s11, s22, s33, s44 = sigma.s11, sigma.s22, sigma.s33, sigma.s44
    s13, s24 = sigma.s13, sigma.s24
    e2 = 2.0 * eps * eps
    den = mu + s33 - mu * s33 + e2 * s33
    if abs(den) < 1e-14:
        raise DomainError(f"degenerate measurement denominator ({den:.3e})")
    if abs(s44) < 1e-14:
        raise DomainError("sigma44 vanishes")
    a = s11 + (1.0 - mu + e2) * s13 ** 2 / (mu * (-1.0 + s33) - (1.0 + e2) * s33)
    b = s22 - s24 ** 2 / s44
    c = (1.0 + e2) * s13 / den
    d = s24 / s44
    e = (1.0 + e2) * (-1.0 + s33) / den
    f = (s44 - 1.0) / s44
    lam = e * e + f * f + 6.0 * e * f

    if a <= 0 or b <= 0:
        raise DomainError(f"Gaussian envelope not normalizable (a={a:.3e}, b={b:.3e})")

    # polynomial [(2F+ - 2e - 2f)^2 - 4(e-f)F- - lam] over (X_M, P_M)
    x2 = MultiPoly(2, {(2, 0): 1.0})
    p2 = MultiPoly(2, {(0, 2): 1.0})
    Fp = x2.scale(c * c) + p2.scale(d * d)
    Fm = x2.scale(c * c) + p2.scale(-d * d)
    core = Fp.scale(2.0) + MultiPoly.constant(2, -2.0 * e - 2.0 * f)
    quartic = core * core + Fm.scale(-4.0 * (e - f)) + MultiPoly.constant(2, -lam)

    cov = np.diag([1.0 / (2.0 * a), 1.0 / (2.0 * b)])
    return normalize(PolyGaussian(cov, np.zeros(2), quartic, 1.0))


def opa_gain(pump_ratio: float) -> float:
    """OPA amplitude-quadrature gain g_A = (1+x)^2/(1-x)^2 for x = chi2 L / kappa_A."""
    if not 0.0 <= pump_ratio < 1.0:
        raise DomainError(
            f"pump ratio must lie in [0, 1) (instability threshold), got {pump_ratio}")
    return (1.0 + pump_ratio) ** 2 / (1.0 - pump_ratio) ** 2
