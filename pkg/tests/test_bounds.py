import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from eulersynth.bounds import (
    CERTIFIED,
    SAMPLED,
    DisturbanceSpec,
    ErrorConstants,
    affine_constants,
    check_hypothesis,
    contraction_certificate,
    delta,
    delta_disturbed,
    delta_schedule,
    estimate_constants,
    format_constants,
    parse_constants,
    subsample_count,
    system_constants,
)
from eulersynth.dynamics import AffineField, Box, CallableField, SwitchedSystem
from eulersynth.errors import DegenerateSystem, UnsupportedRegime, ValidationError

mp = pytest.importorskip("mpmath")
mp.mp.dps = 50


def delta_mp(L, C, lam, mu, t):
    """Closed forms evaluated in 50-digit arithmetic."""
    C, lam, mu, t = (mp.mpf(v) for v in (C, lam, mu, t))
    if lam < 0:
        r = mu**2 * mp.e ** (lam * t) + C**2 / lam**2 * (t**2 + 2 * t / lam + 2 / lam**2 * (1 - mp.e ** (lam * t)))
    elif lam == 0:
        r = mu**2 * mp.e**t + C**2 * (-t**2 - 2 * t + 2 * (mp.e**t - 1))
    else:
        r = mu**2 * mp.e ** (3 * lam * t) + C**2 / (3 * lam**2) * (
            -t**2 - 2 * t / (3 * lam) + 2 / (9 * lam**2) * (mp.e ** (3 * lam * t) - 1))
    return mp.sqrt(r)


def delta_disturbed_mp(C, lam, gamma, eps, W, t):
    C, lam, g, eps, W, t = (mp.mpf(v) for v in (C, lam, gamma, eps, W, t))
    e = mp.e ** (lam * t)
    r = C**2 / (-lam**4) * (-lam**2 * t**2 - 2 * lam * t + 2 * e - 2) + 1 / lam**2 * (
        C * g * W / (-lam) * (-lam * t + e - 1) + lam * (g**2 * (W / 2) ** 2 / (-lam) * (e - 1) + lam * eps**2 * e))
    return mp.sqrt(r)


finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(
    C=st.floats(0.0, 50.0, **finite),
    lam=st.one_of(st.floats(-20.0, -1e-3, **finite), st.floats(1e-3, 5.0, **finite), st.just(0.0)),
    mu=st.floats(0.0, 2.0, **finite),
    t=st.one_of(st.just(0.0), st.floats(1e-9, 1.0)),
)
def test_delta_matches_high_precision(C, lam, mu, t):
    c = ErrorConstants(1.0, C, lam)
    ref = float(delta_mp(1.0, C, lam, mu, t))
    assert delta(c, mu, t) == pytest.approx(ref, rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(C=st.floats(0.0, 50.0, **finite), lam=st.floats(-20.0, 5.0, **finite), mu=st.floats(0.0, 2.0, **finite))
def test_delta_at_zero_time(C, lam, mu):
    assert delta(ErrorConstants(1.0, C, lam), mu, 0.0) == pytest.approx(mu, rel=1e-15, abs=0)


@settings(max_examples=100, deadline=None)
@given(C=st.floats(0.1, 10.0), lam=st.floats(-5.0, 5.0), mu=st.floats(0.0, 1.0),
       t1=st.floats(0.0, 1.0), t2=st.floats(0.0, 1.0))
def test_delta_zero_mu_is_monotone(C, lam, mu, t1, t2):
    # with mu = 0 the radius only grows; it also grows with mu
    c = ErrorConstants(1.0, C, lam)
    lo, hi = sorted((t1, t2))
    assert delta(c, 0.0, lo) <= delta(c, 0.0, hi) * (1 + 1e-12)
    assert delta(c, mu, hi) >= delta(c, 0.0, hi)


def test_lambda_snap_selects_zero_branch():
    a = delta(ErrorConstants(1.0, 2.0, 0.0), 0.1, 0.3)
    assert delta(ErrorConstants(1.0, 2.0, 1e-13), 0.1, 0.3) == a
    assert delta(ErrorConstants(1.0, 2.0, -1e-13), 0.1, 0.3) == a


def test_negative_branch_blows_up_near_zero():
    # the lam < 0 form tends to C^2 t^3 / (3 |lam|), not to the lam = 0 form
    C, t = 2.0, 0.3
    for lam in (-1e-4, -1e-6, -1e-8):
        d = delta(ErrorConstants(1.0, C, lam), 0.0, t)
        assert d == pytest.approx(math.sqrt(C**2 * t**3 / (3 * abs(lam))), rel=1e-3)


def test_delta_rejects_negative_inputs():
    c = ErrorConstants(1.0, 1.0, -1.0)
    with pytest.raises(ValidationError):
        delta(c, 0.1, -1.0)
    with pytest.raises(ValidationError):
        delta(c, -0.1, 1.0)


def test_schedule_vectorises():
    c = ErrorConstants(1.0, 2.0, -1.0)
    s = delta_schedule(c, 0.1, 1.0)
    ts = np.linspace(0, 1, 5)
    np.testing.assert_array_equal(s(ts), [delta(c, 0.1, t) for t in ts])


@settings(max_examples=200, deadline=None)
@given(C=st.floats(0.0, 20.0), lam=st.floats(-10.0, -1e-3), g=st.floats(0.0, 5.0), eps=st.floats(0.0, 1.0),
       W=st.floats(0.0, 2.0), t=st.one_of(st.just(0.0), st.floats(1e-9, 1.0)))
def test_delta_disturbed_matches_high_precision(C, lam, g, eps, W, t):
    c = ErrorConstants(1.0, C, lam, g)
    ref = float(delta_disturbed_mp(C, lam, g, eps, W, t))
    assert delta_disturbed(c, eps, DisturbanceSpec(W), t) == pytest.approx(ref, rel=1e-11, abs=1e-300)


def test_delta_disturbed_needs_contraction():
    with pytest.raises(UnsupportedRegime):
        delta_disturbed(ErrorConstants(1.0, 1.0, 0.5), 0.1, DisturbanceSpec(0.1), 0.1)
    with pytest.raises(ValidationError):
        DisturbanceSpec(-1.0)


def test_delta_disturbed_grows_with_w():
    c = ErrorConstants(1.0, 2.0, -1.0, 1.0)
    vals = [delta_disturbed(c, 0.1, DisturbanceSpec(w), 0.2) for w in (0.0, 0.5, 1.0)]
    assert vals[0] < vals[1] < vals[2]


@settings(max_examples=200, deadline=None)
@given(C=st.floats(0.01, 100.0), lam=st.floats(-50.0, -1e-3), e0=st.floats(1e-4, 1.0))
def test_certificate_formulas(C, lam, e0):
    cert = contraction_certificate(ErrorConstants(1.0, C, lam), e0)
    G = math.sqrt(3) * e0 * abs(lam) / C
    q = abs(lam) * G / 4
    assert cert.G == pytest.approx(G, rel=1e-14)
    a = cert.alpha
    # alpha is the small root of a^2 - 2(1+q) a + 2q = 0
    assert abs(a * a - 2 * (1 + q) * a + 2 * q) <= 1e-12 * max(1.0, q) ** 2
    assert 0 <= a < 1
    assert cert.satisfied_H == (q < 1)
    assert cert.max_step == pytest.approx(G * (1 - a), rel=1e-14)


def test_certificate_regimes():
    with pytest.raises(UnsupportedRegime):
        contraction_certificate(ErrorConstants(1.0, 1.0, 0.0), 0.1)
    with pytest.raises(DegenerateSystem):
        contraction_certificate(ErrorConstants(1.0, 0.0, -1.0), 0.1)
    cert = contraction_certificate(ErrorConstants(1.0, 0.01, -10.0), 1.0)
    assert not cert.satisfied_H
    with pytest.raises(ValidationError):
        subsample_count(cert, 0.1)


@settings(max_examples=100, deadline=None)
@given(C=st.floats(0.1, 100.0), lam=st.floats(-5.0, -1e-2), e0=st.floats(1e-3, 0.5), tau=st.floats(1e-3, 1.0))
def test_subsample_count_is_minimal(C, lam, e0, tau):
    cert = contraction_certificate(ErrorConstants(1.0, C, lam), e0)
    assume(cert.satisfied_H)
    n = subsample_count(cert, tau)
    assert tau / n <= cert.max_step
    assert n == 1 or tau / (n - 1) > cert.max_step


def test_check_hypothesis_reports_offenders():
    good = ErrorConstants(1.0, 1.0, -1.0, mode=0)
    bad = ErrorConstants(1.0, 1.0, 0.5, mode=1)
    rep = check_hypothesis([good, bad], 0.1, 0.1)
    assert not rep.ok
    assert rep.offending == (1,)
    assert rep.substeps[0] >= 1 and rep.substeps[1] is None


def affine_system(A, b, box=Box.cube(-1.0, 1.0, 2)):
    return SwitchedSystem("aff", box, (AffineField(A, b),), 0.1)


def test_affine_constants_closed_form():
    A = np.array([[-2.0, 1.0], [0.0, -1.0]])
    s = affine_system(A, [0.5, 0.0])
    c = affine_constants(s, 0)
    assert c.provenance == CERTIFIED
    assert c.L == pytest.approx(np.linalg.norm(A, 2))
    assert c.lam == pytest.approx(np.max(np.linalg.eigvalsh((A + A.T) / 2)))
    verts = s.domain.vertices()
    sup = max(np.linalg.norm(A @ v + [0.5, 0.0]) for v in verts)
    assert c.C == pytest.approx(c.L * sup)


def test_estimate_is_near_eigenvalue_oracle():
    A = np.array([[-2.0, 1.0], [-0.3, -1.0]])
    s = affine_system(A, [0.1, -0.2])
    exact = affine_constants(s, 0)
    est = estimate_constants(s, 0, sample_count=3000, margin=0.05, seed=1)
    assert est.provenance == SAMPLED
    # the margin pushes every estimate to the conservative side of the oracle
    assert est.lam >= exact.lam
    assert est.lam == pytest.approx(exact.lam + 0.05 * abs(exact.lam), rel=1e-3)
    assert est.L >= exact.L
    assert est.L == pytest.approx(1.05 * exact.L, rel=1e-3)


def test_estimate_without_margin_is_below_truth():
    A = np.array([[-1.0, 3.0], [0.0, -2.0]])
    s = affine_system(A, [0.0, 0.0])
    exact = affine_constants(s, 0)
    est = estimate_constants(s, 0, margin=0.0)
    assert est.L <= exact.L * (1 + 1e-12)
    assert est.lam <= exact.lam + 1e-12


def test_estimate_disturbance_gain():
    D = np.array([[2.0], [0.0]])
    f = CallableField(lambda y, w: -y + w @ D.T, {"name": "dist"}, disturbance_dim=1)
    s = SwitchedSystem("d", Box.cube(-1, 1, 2), (f,), 0.1)
    est = estimate_constants(s, 0, margin=0.0)
    assert est.gamma == pytest.approx(2.0, rel=1e-9)


def test_system_constants_auto_picks_closed_form():
    s = affine_system(-np.eye(2), [0.0, 0.0])
    assert system_constants(s)[0].provenance == CERTIFIED
    assert system_constants(s, "estimate")[0].provenance == SAMPLED
    with pytest.raises(ValidationError):
        system_constants(s, "guess")


def test_constants_text_round_trip():
    cs = [ErrorConstants(1.5, 2.25, -0.1, 0.0, CERTIFIED, 0), ErrorConstants(0.1, 1e-17, -3.0, 2.0, SAMPLED, 1)]
    back = parse_constants(format_constants(cs))
    assert back == cs


def test_parse_constants_rejects_gaps():
    with pytest.raises(ValidationError):
        parse_constants("mode,L,C,lambda,gamma,provenance\n1,1,1,-1,0,x\n")
