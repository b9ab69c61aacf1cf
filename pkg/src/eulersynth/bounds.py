"""Guaranteed error balls for explicit Euler steps.

The radius ``delta(t)`` bounds the distance between the exact solution
started anywhere in a ball of radius ``mu`` and the Euler approximation
started at the ball's center. It depends on three per-mode constants:
the Lipschitz constant ``L``, ``C = L * sup ||f||`` over the domain, and the
one-sided Lipschitz (OSL) constant ``lam``.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSystem, UnsupportedRegime, ValidationError

CERTIFIED = "certified-by-user"
SAMPLED = "sampled-estimate"
PROVENANCES = (CERTIFIED, SAMPLED)

#: |lam| below this is treated as exactly zero when choosing the formula
LAMBDA_SNAP = 1e-12
DEFAULT_MARGIN = 0.05


@dataclass(frozen=True)
class ErrorConstants:
    """Per-mode constants of the error bound."""

    lipschitz: float
    growth: float
    osl: float
    disturbance_gain: float = 0.0
    provenance: str = CERTIFIED
    mode: int | None = None

    def __post_init__(self):
        for name in ("lipschitz", "growth", "osl", "disturbance_gain"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.lipschitz < 0 or self.growth < 0 or self.disturbance_gain < 0:
            raise ValidationError("lipschitz, growth and disturbance_gain must be >= 0")
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")

    # short aliases matching the usual notation
    @property
    def L(self):
        return self.lipschitz

    @property
    def C(self):
        return self.growth

    @property
    def lam(self):
        return self.osl

    @property
    def gamma(self):
        return self.disturbance_gain


@dataclass(frozen=True)
class DisturbanceSpec:
    """Scalar size ``|W|`` of the disturbance set."""

    magnitude: float = 0.0

    def __post_init__(self):
        if not (self.magnitude >= 0 and math.isfinite(self.magnitude)):
            raise ValidationError(f"disturbance magnitude must be finite and >= 0, got {self.magnitude}")


@dataclass(frozen=True)
class ContractionCertificate:
    mode: int | None
    e0: float
    G: float
    alpha: float
    max_step: float
    satisfied_H: bool


@dataclass(frozen=True)
class BallRadiusSchedule:
    mode: int | None
    mu0: float
    horizon: float
    constants: ErrorConstants

    def __call__(self, t):
        if np.ndim(t):
            return np.array([delta(self.constants, self.mu0, float(s)) for s in np.ravel(t)]).reshape(np.shape(t))
        return delta(self.constants, self.mu0, float(t))


def _sqrt_clamped(radicand: float, what: str) -> float:
    if radicand < 0:
        warnings.warn(f"negative radicand {radicand:.3e} in {what}; clamped to 0", RuntimeWarning, stacklevel=3)
        return 0.0
    return math.sqrt(radicand)


def _exp_tail3(x: float) -> float:
    """``exp(x) - 1 - x - x**2 / 2`` without cancellation near zero."""
    if abs(x) > 0.5:
        return math.expm1(x) - x - 0.5 * x * x
    term = x * x * x / 6.0
    total = term
    n = 3
    while abs(term) > 1e-18 * abs(total):
        n += 1
        term *= x / n
        total += term
    return total


def delta(constants: ErrorConstants, mu: float, t: float, snap: float = LAMBDA_SNAP) -> float:
    """Radius of the error ball after time ``t`` for an initial radius ``mu``.

    The three closed forms (``lam < 0``, ``lam = 0``, ``lam > 0``) are
    evaluated with their polynomial-minus-exponential brackets regrouped as
    ``exp`` series tails, which is algebraically identical.
    """
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if mu < 0:
        raise ValidationError(f"mu must be >= 0, got {mu}")
    lam, C = constants.osl, constants.growth
    # both terms under the root are >= 0, so combine their roots to avoid underflow
    if abs(lam) < snap:
        # -t^2 - 2t + 2(e^t - 1)
        growth, bracket = t, 2 * _exp_tail3(t)
    elif lam < 0:
        # t^2 + 2t/lam + 2/lam^2 (1 - e^{lam t}), times 1/lam^2
        x = lam * t
        growth, bracket = x, -2 / lam**4 * _exp_tail3(x)
    else:
        # -t^2 - 2t/(3 lam) + 2/(9 lam^2) (e^{3 lam t} - 1), times 1/(3 lam^2)
        y = 3 * lam * t
        growth, bracket = y, 2 / (27 * lam**4) * _exp_tail3(y)
    return math.hypot(mu * math.exp(growth / 2), C * _sqrt_clamped(bracket, "delta"))


def delta_schedule(constants: ErrorConstants, mu0: float, horizon: float) -> BallRadiusSchedule:
    return BallRadiusSchedule(constants.mode, mu0, horizon, constants)


def delta_disturbed(constants: ErrorConstants, eps: float, w: DisturbanceSpec, t: float) -> float:
    """Error radius with a bounded disturbance of size ``|W|`` (requires ``lam < 0``)."""
    lam, C, g = constants.osl, constants.growth, constants.disturbance_gain
    if not lam < 0:
        raise UnsupportedRegime(f"disturbed bound needs a negative OSL constant, got {lam}")
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    W = w.magnitude
    x = lam * t
    a = -lam
    # each term of the radicand is >= 0 for lam < 0; 2 tail3 and x^2/2 + tail3
    # are -lam^2 t^2 - 2 lam t + 2 e^{lam t} - 2 and -lam t + e^{lam t} - 1
    tail3 = _exp_tail3(x)
    terms = (
        C / a**2 * _sqrt_clamped(-2 * tail3, "delta_disturbed"),
        _sqrt_clamped(C * g * W / a**3 * (0.5 * x * x + tail3), "delta_disturbed"),
        g * (W / 2) / a * _sqrt_clamped(-math.expm1(x), "delta_disturbed"),
        eps * math.exp(x / 2),
    )
    return math.hypot(*terms)


def contraction_certificate(constants: ErrorConstants, e0: float) -> ContractionCertificate:
    """Largest Euler step for which an error ball of radius ``e0`` does not grow."""
    lam, C = constants.osl, constants.growth
    if not e0 > 0:
        raise ValidationError(f"e0 must be positive, got {e0}")
    if not lam < 0:
        raise UnsupportedRegime(f"contraction needs a negative OSL constant, got {lam} (mode {constants.mode})")
    if C == 0:
        raise DegenerateSystem(f"growth constant C is zero for mode {constants.mode}; G is undefined")
    a = abs(lam)
    G = math.sqrt(3) * e0 * a / C
    q = a * G / 4
    # 1 + q - sqrt(1 + q^2), rationalised so no digits cancel for any q
    alpha = 2 * q / (1 + q + math.hypot(1.0, q))
    ok = q < 1
    return ContractionCertificate(constants.mode, e0, G, alpha, G * (1 - alpha), ok)


def subsample_count(cert: ContractionCertificate, tau: float) -> int:
    """Smallest ``n`` with ``tau / n <= max_step``."""
    if not cert.satisfied_H:
        raise ValidationError(f"certificate for mode {cert.mode} does not satisfy the contraction hypothesis")
    if not tau > 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    n = max(1, math.ceil(tau / cert.max_step))
    while tau / n > cert.max_step:
        n += 1
    return n


@dataclass(frozen=True)
class HypothesisReport:
    certificates: tuple
    substeps: tuple
    offending: tuple
    reasons: dict

    @property
    def ok(self) -> bool:
        return not self.offending


def check_hypothesis(constants: list, e0: float, tau: float) -> HypothesisReport:
    """Evaluate the contraction hypothesis for every mode at radius ``e0``.

    The step condition ``tau <= G (1 - alpha)`` is met by sub-sampling, so a
    mode only fails when ``lam >= 0``, ``C = 0`` or ``|lam| G / 4 >= 1``.
    """
    certs, subs, bad, reasons = [], [], [], {}
    for u, c in enumerate(constants):
        try:
            cert = contraction_certificate(c, e0)
        except (UnsupportedRegime, DegenerateSystem) as exc:
            certs.append(None)
            subs.append(None)
            bad.append(u)
            reasons[u] = str(exc)
            continue
        certs.append(cert)
        if cert.satisfied_H:
            subs.append(subsample_count(cert, tau))
        else:
            subs.append(None)
            bad.append(u)
            reasons[u] = f"|lambda| G / 4 = {abs(c.osl) * cert.G / 4:.4g} >= 1"
    return HypothesisReport(tuple(certs), tuple(subs), tuple(bad), reasons)


def _pair_quotients(F1, F2, Y1, Y2):
    dy = Y1 - Y2
    n2 = np.einsum("ij,ij->i", dy, dy)
    keep = n2 > 0
    df = F1[keep] - F2[keep]
    dy, n2 = dy[keep], n2[keep]
    lip = np.sqrt(np.einsum("ij,ij->i", df, df) / n2)
    osl = np.einsum("ij,ij->i", df, dy) / n2
    return lip, osl


def estimate_constants(system, u: int, sample_count: int = 2000, margin: float = DEFAULT_MARGIN,
                       seed: int = 0) -> ErrorConstants:
    """Sampled estimates of the bound constants of mode ``u``.

    Difference quotients are taken over random pairs, nearby pairs and box
    vertices. Every estimate is moved by ``margin`` towards the conservative
    side. The result is not a certificate.
    """
    u = system.check_mode(u)
    if sample_count < 2:
        raise ValidationError("sample_count must be >= 2")
    if margin < 0:
        raise ValidationError("margin must be >= 0")
    f = system.modes[u]
    box = system.domain
    rng = np.random.default_rng(seed)
    width = box.hi - box.lo
    pts = np.vstack([box.vertices(), box.lo + width * rng.random((sample_count, box.dim))])
    F = f(pts)
    sup_f = float(np.max(np.linalg.norm(F, axis=1)))

    idx = rng.integers(0, len(pts), size=(2, 4 * sample_count))
    lip_far, osl_far = _pair_quotients(F[idx[0]], F[idx[1]], pts[idx[0]], pts[idx[1]])
    # close pairs capture local (Jacobian) behaviour
    base = pts[rng.integers(0, len(pts), size=2 * sample_count)]
    near = np.clip(base + 1e-4 * width * rng.standard_normal(base.shape), box.lo, box.hi)
    lip_near, osl_near = _pair_quotients(f(base), f(near), base, near)
    L = float(np.max(np.concatenate([lip_far, lip_near])))
    lam = float(np.max(np.concatenate([osl_far, osl_near])))

    gamma = 0.0
    d = f.disturbance_dim
    if d:
        W1 = rng.standard_normal((sample_count, d))
        W2 = rng.standard_normal((sample_count, d))
        Ys = pts[rng.integers(0, len(pts), size=sample_count)]
        dF = f(Ys, W1) - f(Ys, W2)
        dW = np.linalg.norm(W1 - W2, axis=1)
        gamma = float(np.max(np.linalg.norm(dF, axis=1) / dW))

    L *= 1 + margin
    sup_f *= 1 + margin
    return ErrorConstants(
        lipschitz=L,
        growth=L * sup_f,
        osl=lam + margin * abs(lam),
        disturbance_gain=gamma * (1 + margin),
        provenance=SAMPLED,
        mode=u,
    )


def affine_constants(system, u: int) -> ErrorConstants:
    """Exact constants of an affine mode ``f(y) = A y + b (+ D w)`` over the box.

    ``L`` is the spectral norm of ``A``, ``lam`` the largest eigenvalue of its
    symmetric part, and ``sup ||f||`` is attained at a box vertex since the
    norm of an affine map is convex.
    """
    from .dynamics import AffineField

    u = system.check_mode(u)
    f = system.modes[u]
    if not isinstance(f, AffineField):
        raise ValidationError(f"mode {u} is not affine; use estimate_constants")
    A = f.A
    L = float(np.linalg.norm(A, 2))
    lam = float(np.max(np.linalg.eigvalsh((A + A.T) / 2)))
    sup_f = float(np.max(np.linalg.norm(f(system.domain.vertices()), axis=1)))
    gamma = 0.0 if f.D is None else float(np.linalg.norm(f.D, 2))
    return ErrorConstants(L, L * sup_f, lam, gamma, CERTIFIED, u)


def system_constants(system, method: str = "auto", sample_count: int = 2000,
                     margin: float = DEFAULT_MARGIN, seed: int = 0) -> list:
    """Constants for every mode.

    ``method`` is ``"affine"`` (closed form), ``"estimate"`` (sampling) or
    ``"auto"`` (closed form when every mode is affine).
    """
    from .dynamics import AffineField

    if method == "auto":
        method = "affine" if all(isinstance(f, AffineField) for f in system.modes) else "estimate"
    if method == "affine":
        return [affine_constants(system, u) for u in range(system.n_modes)]
    if method == "estimate":
        return [estimate_constants(system, u, sample_count, margin, seed) for u in range(system.n_modes)]
    raise ValidationError(f"unknown constants method {method!r}")


FIELDS = ("mode", "L", "C", "lambda", "gamma", "provenance")


def format_constants(constants: list) -> str:
    """Text block with one ``mode, L, C, lambda, gamma, provenance`` line per mode."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for u, c in enumerate(constants):
        mode = u if c.mode is None else c.mode
        w.writerow([mode, repr(c.lipschitz), repr(c.growth), repr(c.osl), repr(c.disturbance_gain), c.provenance])
    return buf.getvalue()


def parse_constants(text: str) -> list:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(s.strip() for s in r)]
    if rows and rows[0][0].strip() == "mode":
        rows = rows[1:]
    out = []
    for r in rows:
        if len(r) != len(FIELDS):
            raise ValidationError(f"constants line needs {len(FIELDS)} fields: {r}")
        mode, L, C, lam, gamma, prov = (s.strip() for s in r)
        out.append(ErrorConstants(float(L), float(C), float(lam), float(gamma), prov, int(mode)))
    out.sort(key=lambda c: c.mode)
    if [c.mode for c in out] != list(range(len(out))):
        raise ValidationError("constants must list modes 0..m-1 exactly once")
    return out
