//! Shared helper for integration tests: a dense-quadrature evaluation
//! of the trial-state energy that bypasses the closed-form route.

use fluxtube::fields::FieldProfile;
use fluxtube::specfun::bessel::bessel_k_logderiv;
use fluxtube::specfun::quad::integrate_piecewise_rel;
use fluxtube::variational::VariationalAnsatz;

/// ⟨ψ|H↑|ψ⟩ / ⟨ψ|ψ⟩ for the two-branch trial state, by adaptive
/// quadrature of the quadratic form
///   ∫ [f′² + ((ℓ/r − eA_φ)² − ½·g·eB)·f²] r dr  /  ∫ f² r dr.
/// The derivative is taken from the analytic branch formulas (interior
/// log-derivative ℓ/r − eA_φ − α, exterior μ·K′_ν/K_ν), not from the
/// energy identities under test. The exterior is integrated in log
/// radius so tails spanning many decades keep their resolution.
pub fn form_energy_quadrature(ansatz: &VariationalAnsatz, p: &FieldProfile, g: f64) -> f64 {
    let r_edge = ansatz.r_support;
    let ell = ansatz.ell as f64;
    let rel_tol = 1e-11;

    let num_in = |r: f64| {
        let f = ansatz.eval(p, r);
        let fp = f * (ell / r - p.ea(r) - ansatz.alpha);
        let d = ell / r - p.ea(r);
        (fp * fp + (d * d - 0.5 * g * p.eb(r)) * f * f) * r
    };
    let den_in = |r: f64| {
        let f = ansatz.eval(p, r);
        f * f * r
    };
    let pts = p.breakpoints();
    let n_in = integrate_piecewise_rel(&num_in, &pts, rel_tol).unwrap().value;
    let m_in = integrate_piecewise_rel(&den_in, &pts, rel_tol).unwrap().value;

    // Exterior in s = ln r, one initial segment per decade so the
    // adaptive pass always has a cell near the K_ν(μr) knee at r ~ 1/μ.
    let s0 = r_edge.ln();
    let s1 = (r_edge + 60.0 / ansatz.mu).ln();
    let nseg = ((s1 - s0) / std::f64::consts::LN_10).ceil().max(1.0) as usize;
    let s_pts: Vec<f64> = (0..=nseg)
        .map(|k| s0 + (s1 - s0) * k as f64 / nseg as f64)
        .collect();
    let num_out = |s: f64| {
        let r = s.exp();
        let f = ansatz.eval(p, r);
        if f == 0.0 {
            return 0.0;
        }
        // bessel_k_logderiv returns x·K′/K, so f′/f = L(μr)/r.
        let fp = f * bessel_k_logderiv(ansatz.order, ansatz.mu * r).unwrap() / r;
        let d = (ell - ansatz.v) / r;
        (fp * fp + d * d * f * f) * r * r
    };
    let den_out = |s: f64| {
        let r = s.exp();
        let f = ansatz.eval(p, r);
        f * f * r * r
    };
    let n_out = integrate_piecewise_rel(&num_out, &s_pts, rel_tol).unwrap().value;
    let m_out = integrate_piecewise_rel(&den_out, &s_pts, rel_tol).unwrap().value;

    (n_in + n_out) / (m_in + m_out)
}
