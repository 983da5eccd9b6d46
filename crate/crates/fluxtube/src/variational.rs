//! Constructive bound-state certificates for the spin-up Pauli operator
//!
//!   H↑ = (−i∇ − eA)² − ½ g eB(r),   units 2m = ħ = c = 1,
//!
//! of a charge in a compact-support flux tube with g > 2. In the angular
//! momentum channel ℓ the trial state is
//!
//!   ψ_ℓ(r) = a·r^ℓ e^{−eφ(r) − αr}        (r ≤ R)
//!          = b·K_ν(μr),  ν = |ℓ − v|      (r > R),
//!
//! where φ(r) = ∫₀^r A_φ and v is the dimensionless flux. Continuity of ψ
//! and ψ′ at the support radius R forces the decay rate μ to satisfy
//!
//!   μR·K′_ν(μR)/K_ν(μR) = ℓ − v − αR,
//!
//! which has a unique root whenever the right side is below −ν, because the
//! log-derivative decreases strictly from −ν to −∞. The rate α is chosen
//! against the field-average bound that makes the energy expectation value
//! manifestly negative; the exact ⟨ψ|H↑|ψ⟩ is then evaluated and reported
//! together with the selected parameters, so any third party can re-check
//! the matching equation and re-integrate the energy from the certificate
//! alone.
//!
//! Deep channels can sit extremely close to threshold: the matching root
//! μR shrinks below 1e−100 and the exterior tail carries almost all of the
//! probability mass. All tail quantities are therefore carried in log form
//! (norms, coefficients, the exterior integral), and the reported `a`, `b`
//! may denormalize even though the certificate itself stays accurate.

use crate::error::{FluxtubeError, Result};
use crate::fields::FieldProfile;
use crate::specfun::{bessel_k_logderiv, integrate_piecewise_rel, ln_bessel_k};
use std::f64::consts::{LN_2, PI};

/// Angular-momentum sector: integer ℓ ≥ 0 plus the exterior Bessel order.
#[derive(Debug, Clone, Copy)]
pub struct Channel {
    pub ell: i64,
    /// ν = |ℓ − v|; order of the exterior Macdonald function.
    pub order: f64,
}

impl Channel {
    pub fn new(ell: i64, v: f64) -> Result<Self> {
        if ell < 0 {
            return Err(FluxtubeError::Domain(format!(
                "channel index must be nonnegative (interior regularity), got ell = {ell}"
            )));
        }
        if !v.is_finite() {
            return Err(FluxtubeError::Domain(format!("flux must be finite, got v = {v}")));
        }
        Ok(Channel { ell, order: (ell as f64 - v).abs() })
    }
}

/// Matched, normalized trial state for one channel.
///
/// `a` and `b` are the interior/exterior amplitudes in linear scale; for
/// near-threshold channels `b` can denormalize, so [`eval`](Self::eval) and
/// the stored log-domain fields are authoritative.
#[derive(Debug, Clone, Copy)]
pub struct VariationalAnsatz {
    pub ell: i64,
    pub order: f64,
    pub v: f64,
    pub alpha: f64,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
    pub r_support: f64,
    /// ln of the interior profile at R without the amplitude:
    /// ℓ·ln R − eφ(R) − αR.
    ln_edge: f64,
    /// ln K_ν(μR).
    ln_k_edge: f64,
    /// ln a, kept separately so exterior evaluation never forms b·K
    /// directly (both factors can be out of f64 range with a finite
    /// product).
    ln_a: f64,
}

impl VariationalAnsatz {
    /// ψ_ℓ(r) up to the e^{iℓθ} phase. Exterior values are assembled in
    /// log space, so the far tail underflows gracefully to 0.
    pub fn eval(&self, p: &FieldProfile, r: f64) -> f64 {
        assert!(r >= 0.0, "radius must be nonnegative");
        if r <= self.r_support {
            if r == 0.0 {
                return if self.ell == 0 { self.a } else { 0.0 };
            }
            self.a * r.powi(self.ell as i32) * (-p.ephi(r) - self.alpha * r).exp()
        } else {
            match ln_bessel_k(self.order, self.mu * r) {
                Ok(ln_k) => (self.ln_a + self.ln_edge + ln_k - self.ln_k_edge).exp(),
                Err(_) => f64::NAN,
            }
        }
    }

    /// Relative mismatch of the two branches at R (0 up to rounding; the
    /// construction solves for it exactly in log space).
    pub fn continuity_residual(&self) -> f64 {
        let inside = self.ln_a + self.ln_edge;
        let outside = self.ln_b() + self.ln_k_edge;
        (inside - outside).abs()
    }

    fn ln_b(&self) -> f64 {
        self.ln_a + self.ln_edge - self.ln_k_edge
    }
}

/// Certificate: the trial state plus its exact energy expectation value.
/// `bound_proven` asserts the energy numerator is negative by a margin of
/// 1e−12 relative to the magnitudes assembled into it, so the sign survives
/// the accumulated quadrature and rounding error. Dividing by the (huge, but
/// positive) norm afterwards cannot change the sign, so even energies far
/// below the f64 relative scale of the inputs are proven negative.
#[derive(Debug, Clone, Copy)]
pub struct VariationalCertificate {
    pub ansatz: VariationalAnsatz,
    pub e_var: f64,
    pub bound_proven: bool,
}

/// Outcome of probing a channel outside the guaranteed range ℓ ≤ v.
#[derive(Debug, Clone)]
pub enum ProbeOutcome {
    Certified(VariationalCertificate),
    NotProven { reason: String },
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// The smallest μR the root solver will bracket down to. Channels whose
/// matching root lies below decay so slowly that the rate itself is not
/// representable in f64; they are reported as `MuUnderflow`.
const X_FLOOR: f64 = 1e-280;

/// ln ∫_{x₀}^∞ [K_ν(u)/K_ν(x₀)]² u du, the exterior tail integral per unit
/// squared boundary value, in the dimensionless variable u = μr.
///
/// The Lommel-type antiderivative ∫_x^∞ K_ν² u du =
/// (x²/2)[K_ν′² − (1 + ν²/x²)K_ν²] reduces it to the log-derivative:
/// with δ(x) = x·K_{ν−1}(x)/K_ν(x) = −L_ν(x) − ν > 0,
///
///   J(x₀) = [δ(2ν + δ) − x₀²] / 2.
///
/// Both δ (ratio of K's at one point) and the final subtraction are
/// evaluated in log space: near threshold δ can drop to x₀^{2ν} far below
/// the f64 floor while J itself still controls the norm.
fn ln_tail_ratio(nu: f64, x0: f64) -> Result<f64> {
    let ln_delta = x0.ln() + ln_bessel_k((nu - 1.0).abs(), x0)? - ln_bessel_k(nu, x0)?;
    let ln_first = if nu == 0.0 {
        2.0 * ln_delta - LN_2
    } else {
        // δ may underflow as e^{ln δ}; 2ν then absorbs it exactly.
        ln_delta + (2.0 * nu + ln_delta.exp()).ln() - LN_2
    };
    let ln_second = 2.0 * x0.ln() - LN_2;
    if ln_second >= ln_first {
        // Mathematically impossible (the integral is positive); reaching it
        // means the x₀² subtraction lost every digit, e.g. at huge x₀.
        return Err(FluxtubeError::NonConvergence(format!(
            "exterior tail integral cancels at nu={nu}, x0={x0}"
        )));
    }
    Ok(ln_first + (-(ln_second - ln_first).exp()).ln_1p())
}

/// Solves the matching condition L_ν(μR) = ℓ − v − αR for the exterior
/// decay rate μ > 0.
///
/// L_ν decreases strictly from −ν (at 0⁺) to −∞, so a root exists iff the
/// target is below −ν; the search runs over ln(μR) (the bracket can span
/// hundreds of decades near threshold) with a secant step safeguarded by
/// geometric bisection.
pub fn solve_matching_mu(ch: &Channel, v: f64, alpha: f64, r_support: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(FluxtubeError::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(r_support > 0.0) || !r_support.is_finite() {
        return Err(FluxtubeError::Domain(format!(
            "support radius must be positive, got {r_support}"
        )));
    }
    let nu = ch.order;
    let target = ch.ell as f64 - v - alpha * r_support;
    if target >= -nu {
        return Err(FluxtubeError::NoRoot { ell: ch.ell, target, minus_nu: -nu });
    }

    let shifted = |x: f64| -> Result<f64> { Ok(bessel_k_logderiv(nu, x)? - target) };

    // Upper end: L(x) ~ −x − 1/2, so a few doublings past |target| suffice.
    let mut x_hi = (-target).max(1.0);
    let mut f_hi = shifted(x_hi)?;
    let mut grow = 0;
    while f_hi >= 0.0 {
        x_hi *= 2.0;
        f_hi = shifted(x_hi)?;
        grow += 1;
        if grow > 300 {
            return Err(FluxtubeError::NonConvergence(format!(
                "matching bracket failed to close from above at x = {x_hi}"
            )));
        }
    }
    // Lower end: shrink until L is back above the target; if even the f64
    // floor is past the root, the decay rate is not representable.
    let mut x_lo = x_hi;
    let mut f_lo;
    loop {
        x_lo *= 1e-2;
        if x_lo < X_FLOOR {
            let l_at_floor = bessel_k_logderiv(nu, X_FLOOR)?;
            if l_at_floor - target > 0.0 {
                x_lo = X_FLOOR;
                f_lo = l_at_floor - target;
                break;
            }
            return Err(FluxtubeError::MuUnderflow {
                ell: ch.ell,
                x_floor: X_FLOOR,
                l_at_floor,
                target,
            });
        }
        f_lo = shifted(x_lo)?;
        if f_lo > 0.0 {
            break;
        }
    }

    // Secant in ξ = ln x with bisection fallback; L is smooth and gently
    // sloped in ξ, so the combination converges fast and never escapes the
    // bracket.
    let tol = 1e-13 * target.abs().max(1.0);
    let (mut xi_lo, mut xi_hi) = (x_lo.ln(), x_hi.ln());
    let (mut xi_a, mut f_a) = (xi_lo, f_lo);
    let (mut xi_b, mut f_b) = (xi_hi, f_hi);
    let mut best = (xi_hi, f_hi.abs());
    for _ in 0..200 {
        let mut xi = if f_b != f_a {
            xi_b - f_b * (xi_b - xi_a) / (f_b - f_a)
        } else {
            f64::NAN
        };
        if !(xi > xi_lo && xi < xi_hi) {
            xi = 0.5 * (xi_lo + xi_hi);
        }
        let f = shifted(xi.exp())?;
        if f.abs() < best.1 {
            best = (xi, f.abs());
        }
        if f.abs() < tol {
            return Ok(xi.exp() / r_support);
        }
        if f > 0.0 {
            xi_lo = xi;
        } else {
            xi_hi = xi;
        }
        (xi_a, f_a) = (xi_b, f_b);
        (xi_b, f_b) = (xi, f);
        if xi_hi - xi_lo < 1e-15 * xi_hi.abs().max(1.0) {
            break;
        }
    }
    // The bracket collapsed to rounding width; with the gentle slope of L
    // in ln x this still pins the residual well below the requirement.
    if best.1 < 1e-10 * target.abs().max(1.0) {
        return Ok(best.0.exp() / r_support);
    }
    Err(FluxtubeError::NonConvergence(format!(
        "matching residual {} not reduced below {tol} in channel ell={}",
        best.1, ch.ell
    )))
}

/// Right-hand side of the rate-selection bound,
///
///   (g−2)·∫₀^R eB·r^{2ℓ+1} w dr / [2(2ℓ+1)·∫₀^R r^{2ℓ} w dr],
///   w = e^{−2eφ(r) − 2αr}:
///
/// any 0 < α below this field average makes the channel energy negative.
/// Continuous in α and positive at α = 0 whenever g > 2 and v > 0.
pub fn alpha_bound_rhs(ch: &Channel, p: &FieldProfile, g: f64, alpha: f64) -> Result<f64> {
    if g == 2.0 || p.flux_v() == 0.0 {
        return Ok(0.0);
    }
    let ell = ch.ell as i32;
    let w = |r: f64| (-2.0 * p.ephi(r) - 2.0 * alpha * r).exp();
    let pts = p.breakpoints();
    let num = integrate_piecewise_rel(
        &|r: f64| p.eb(r) * r.powi(2 * ell + 1) * w(r),
        &pts,
        1e-12,
    )?
    .value;
    let den = integrate_piecewise_rel(&|r: f64| r.powi(2 * ell) * w(r), &pts, 1e-12)?.value;
    Ok((g - 2.0) * num / (2.0 * (2 * ell + 1) as f64 * den))
}

/// Picks the exponential rate: damped fixed point α ← rhs(α)/2 starting
/// from rhs(0)/2, verified a posteriori to sit strictly below the bound
/// with relative margin ≥ 1/2; falls back to halving from rhs(0)/2 if the
/// iteration fails to settle. Any α in the admissible interval would do —
/// this rule is just deterministic and keeps μ comfortably positive.
pub fn choose_alpha(ch: &Channel, p: &FieldProfile, g: f64) -> Result<f64> {
    if g <= 2.0 {
        return Err(FluxtubeError::NoAlpha(format!(
            "g = {g} <= 2: the spin term cannot outweigh the kinetic cost"
        )));
    }
    if p.flux_v() <= 0.0 {
        return Err(FluxtubeError::NoAlpha(format!(
            "flux v = {} is not positive: nothing to bind against",
            p.flux_v()
        )));
    }
    let margin_ok = |alpha: f64, rhs: f64| alpha < rhs && (rhs - alpha) / rhs >= 0.5 * (1.0 - 1e-9);
    let rhs0 = alpha_bound_rhs(ch, p, g, 0.0)?;
    if !(rhs0 > 0.0) {
        return Err(FluxtubeError::NoAlpha(format!(
            "selection bound vanishes at alpha = 0 (rhs = {rhs0})"
        )));
    }
    let mut alpha = 0.5 * rhs0;
    for _ in 0..60 {
        let next = 0.5 * alpha_bound_rhs(ch, p, g, alpha)?;
        let settled = (next - alpha).abs() <= 1e-14 * next.abs();
        alpha = next;
        if settled {
            let rhs = alpha_bound_rhs(ch, p, g, alpha)?;
            if margin_ok(alpha, rhs) {
                return Ok(alpha);
            }
            break;
        }
    }
    let mut alpha = 0.5 * rhs0;
    for _ in 0..200 {
        let rhs = alpha_bound_rhs(ch, p, g, alpha)?;
        if margin_ok(alpha, rhs) {
            return Ok(alpha);
        }
        alpha *= 0.5;
    }
    Err(FluxtubeError::NoAlpha(format!(
        "no rate with the required margin found down to alpha = {alpha}"
    )))
}

/// Interior norm integral ∫₀^R r^{2ℓ+1} e^{−2eφ − 2αr} dr.
fn interior_norm(p: &FieldProfile, ell: i64, alpha: f64) -> Result<f64> {
    let w = |r: f64| r.powi(2 * ell as i32 + 1) * (-2.0 * p.ephi(r) - 2.0 * alpha * r).exp();
    Ok(integrate_piecewise_rel(&w, &p.breakpoints(), 1e-12)?.value)
}

/// Log-domain norm data shared by `normalize` and the energy evaluation.
struct NormParts {
    ln_edge: f64,
    ln_k_edge: f64,
    /// ln ∫_{x₀}^∞ [K(u)/K(x₀)]² u du = ln(μ² · exterior tail integral).
    ln_j: f64,
    /// ln(N_in + e^{2 ln_edge}·tail) — the squared norm per unit a², /2π.
    ln_mass: f64,
}

fn norm_parts(ch: &Channel, alpha: f64, mu: f64, p: &FieldProfile) -> Result<NormParts> {
    let r = p.r_support();
    let x0 = mu * r;
    let n_in = interior_norm(p, ch.ell, alpha)?;
    let ln_edge = ch.ell as f64 * r.ln() - p.ephi(r) - alpha * r;
    let ln_j = ln_tail_ratio(ch.order, x0)?;
    let ln_tail = ln_j - 2.0 * mu.ln();
    let ln_mass = log_add_exp(n_in.ln(), 2.0 * ln_edge + ln_tail);
    Ok(NormParts { ln_edge, ln_k_edge: ln_bessel_k(ch.order, x0)?, ln_j, ln_mass })
}

/// Builds the matched trial state with unit L² norm,
/// 2π∫₀^∞ |ψ_ℓ|² r dr = 1. Expects μ from [`solve_matching_mu`], which
/// also makes ψ′ continuous at R.
pub fn normalize(ch: &Channel, alpha: f64, mu: f64, p: &FieldProfile) -> Result<VariationalAnsatz> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(FluxtubeError::Domain(format!("mu must be positive and finite, got {mu}")));
    }
    let parts = norm_parts(ch, alpha, mu, p)?;
    let ln_a = -0.5 * ((2.0 * PI).ln() + parts.ln_mass);
    Ok(VariationalAnsatz {
        ell: ch.ell,
        order: ch.order,
        v: p.flux_v(),
        alpha,
        mu,
        a: ln_a.exp(),
        b: (ln_a + parts.ln_edge - parts.ln_k_edge).exp(),
        r_support: p.r_support(),
        ln_edge: parts.ln_edge,
        ln_k_edge: parts.ln_k_edge,
        ln_a,
    })
}

/// Exact energy expectation value ⟨ψ_ℓ|H↑|ψ_ℓ⟩ of the normalized ansatz:
///
///   E = 2π a² ∫₀^R [(2ℓ+1)α/r − 2α·eA_φ − α² − ½(g−2)eB] f² r dr
///       − 2π b² μ² ∫_R^∞ K_ν(μr)² r dr,     f = r^ℓ e^{−eφ−αr}.
///
/// The exterior piece follows from K solving the free modified equation
/// (H↑ K_ν(μr) = −μ²·K_ν(μr) outside the support), so it is exactly
/// −μ²·(exterior mass); it is folded in through the log-domain tail
/// integral rather than a literal b²-weighted quadrature.
pub fn variational_energy(ansatz: &VariationalAnsatz, p: &FieldProfile, g: f64) -> Result<f64> {
    Ok(energy_with_margin(ansatz, p, g)?.0)
}

/// Energy plus a sign certificate: `true` when the numerator clears the
/// worst-case roundoff of its own assembly, 1e−12·(|interior| +
/// exterior), so negativity is certain even for energies hundreds of
/// orders below 1 (their smallness comes from the norm, not from digit
/// cancellation).
fn energy_with_margin(
    ansatz: &VariationalAnsatz,
    p: &FieldProfile,
    g: f64,
) -> Result<(f64, bool)> {
    let ch = Channel { ell: ansatz.ell, order: ansatz.order };
    let parts = norm_parts(&ch, ansatz.alpha, ansatz.mu, p)?;
    let alpha = ansatz.alpha;
    let ell = ansatz.ell as i32;
    let lead = alpha * (2 * ell + 1) as f64;
    let inner = |r: f64| {
        let w = (-2.0 * p.ephi(r) - 2.0 * alpha * r).exp();
        let well = 2.0 * alpha * p.ea(r) + alpha * alpha + 0.5 * (g - 2.0) * p.eb(r);
        (lead - well * r) * r.powi(2 * ell) * w
    };
    let i_in = integrate_piecewise_rel(&inner, &p.breakpoints(), 1e-13)?.value;
    let j_term = (2.0 * parts.ln_edge + parts.ln_j).exp();
    let num = i_in - j_term;
    let certain = num < -1e-12 * (i_in.abs() + j_term);
    Ok((scaled_by_mass(num, parts.ln_mass), certain))
}

/// The dropped-terms upper bound on the same expectation value: discarding
/// the (negative) −2αeA_φ − α² interior terms and the (negative) exterior
/// contribution leaves
///
///   E ≤ 2π a² ∫₀^R [(2ℓ+1)α − ½(g−2)eB·r] r^{2ℓ} e^{−2eφ−2αr} dr,
///
/// which is strictly negative exactly when α clears the selection bound.
pub fn variational_energy_upper(
    ansatz: &VariationalAnsatz,
    p: &FieldProfile,
    g: f64,
) -> Result<f64> {
    let ch = Channel { ell: ansatz.ell, order: ansatz.order };
    let parts = norm_parts(&ch, ansatz.alpha, ansatz.mu, p)?;
    let alpha = ansatz.alpha;
    let ell = ansatz.ell as i32;
    let lead = alpha * (2 * ell + 1) as f64;
    let inner = |r: f64| {
        (lead - 0.5 * (g - 2.0) * p.eb(r) * r) * r.powi(2 * ell)
            * (-2.0 * p.ephi(r) - 2.0 * alpha * r).exp()
    };
    let i_ub = integrate_piecewise_rel(&inner, &p.breakpoints(), 1e-13)?.value;
    Ok(scaled_by_mass(i_ub, parts.ln_mass))
}

/// num / e^{ln_mass} without materializing the mass (it overflows f64 when
/// the exterior tail dominates by hundreds of orders of magnitude).
fn scaled_by_mass(num: f64, ln_mass: f64) -> f64 {
    if ln_mass < 700.0 {
        num / ln_mass.exp()
    } else {
        num.signum() * (num.abs().ln() - ln_mass).exp()
    }
}

/// Full certification pipeline for one channel: select α, solve for μ,
/// normalize, integrate the energy.
pub fn certify_channel(ch: &Channel, p: &FieldProfile, g: f64) -> Result<VariationalCertificate> {
    let alpha = choose_alpha(ch, p, g)?;
    let mu = solve_matching_mu(ch, p.flux_v(), alpha, p.r_support())?;
    let ansatz = normalize(ch, alpha, mu, p)?;
    let (e_var, bound_proven) = energy_with_margin(&ansatz, p, g)?;
    Ok(VariationalCertificate { ansatz, e_var, bound_proven })
}

/// Certificates for every guaranteed channel ℓ = 0, …, ⌊v⌋. Failures are
/// kept per-channel so one bad channel cannot silence the others.
pub fn certify_all(p: &FieldProfile, g: f64) -> Vec<(Channel, Result<VariationalCertificate>)> {
    let v_floor = p.total_flux_v().floor.max(0);
    (0..=v_floor)
        .map(|ell| {
            let ch = Channel::new(ell, p.flux_v()).expect("ell >= 0 by construction");
            let cert = certify_channel(&ch, p, g);
            (ch, cert)
        })
        .collect()
}

/// Tries the pipeline in a channel beyond the guaranteed range (ℓ > v).
/// A matching root exists only while ℓ − v < αR/2-ish headroom; even then
/// negativity of the energy is not implied, so the outcome is reported as
/// data rather than asserted.
pub fn extra_channel_probe(p: &FieldProfile, g: f64, ell: i64) -> Result<ProbeOutcome> {
    let v = p.flux_v();
    if (ell as f64) <= v {
        return Err(FluxtubeError::Domain(format!(
            "probe is for channels above the flux: ell = {ell}, v = {v}"
        )));
    }
    let ch = Channel::new(ell, v)?;
    let alpha = match choose_alpha(&ch, p, g) {
        Ok(a) => a,
        Err(e @ FluxtubeError::NoAlpha(_)) => return Err(e),
        Err(e) => return Err(e),
    };
    let mu = match solve_matching_mu(&ch, v, alpha, p.r_support()) {
        Ok(mu) => mu,
        Err(FluxtubeError::NoRoot { target, minus_nu, .. }) => {
            return Ok(ProbeOutcome::NotProven {
                reason: format!(
                    "no matching root: ell - v - alpha*R = {target} >= -nu = {minus_nu}"
                ),
            })
        }
        Err(e) => return Err(e),
    };
    let ansatz = normalize(&ch, alpha, mu, p)?;
    let (e_var, bound_proven) = energy_with_margin(&ansatz, p, g)?;
    if e_var < 0.0 {
        Ok(ProbeOutcome::Certified(VariationalCertificate { ansatz, e_var, bound_proven }))
    } else {
        Ok(ProbeOutcome::NotProven {
            reason: format!("trial energy {e_var} is nonnegative"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{integrate_rel, integrate_to_infinity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk(eb0: f64, r: f64) -> FieldProfile {
        FieldProfile::uniform_disk(r, eb0, 1.0).unwrap()
    }

    #[test]
    fn matching_half_integer_is_exact() {
        // Order 1/2: L(x) = -x - 1/2, so mu*R - alpha*R cancels exactly.
        let ch = Channel::new(0, 0.5).unwrap();
        let mu = solve_matching_mu(&ch, 0.5, 0.3, 1.0).unwrap();
        assert!((mu - 0.3).abs() < 1e-13, "mu = {mu}");
        // And with R != 1: L(mu*R) = -mu*R - 1/2 = -0.5 - alpha*R.
        let mu = solve_matching_mu(&ch, 0.5, 0.125, 4.0).unwrap();
        assert!((mu - 0.125).abs() < 1e-13);
    }

    #[test]
    fn matching_order_three_halves_rational_root() {
        // nu = 3/2: delta = x²/(x+1), so the target -2.4 gives
        // x² = 0.9(x+1) with the rational root x = 3/2.
        let ch = Channel::new(1, 2.5).unwrap();
        let mu = solve_matching_mu(&ch, 2.5, 0.9, 1.0).unwrap();
        assert!((mu - 1.5).abs() < 1e-13, "mu = {mu}");
        // alpha = 0.02 variant: x = (0.02 + sqrt(0.0804))/2.
        let mu = solve_matching_mu(&ch, 2.5, 0.02, 1.0).unwrap();
        assert!((mu - 0.15177446878757825).abs() < 1e-13);
    }

    #[test]
    fn matching_reports_no_root() {
        let ch = Channel::new(1, 0.5).unwrap();
        match solve_matching_mu(&ch, 0.5, 0.2, 1.0) {
            Err(FluxtubeError::NoRoot { ell, target, minus_nu }) => {
                assert_eq!(ell, 1);
                assert!((target - 0.3).abs() < 1e-15);
                assert!((minus_nu + 0.5).abs() < 1e-15);
            }
            other => panic!("expected NoRoot, got {other:?}"),
        }
    }

    #[test]
    fn matching_agrees_with_dense_scan() {
        // nu = 2, target -2.5; root pinned by mpmath findroot to 16 digits
        // (mpmath 1.3.0) and re-located here by a brute scan.
        let ch = Channel::new(0, 2.0).unwrap();
        let mu = solve_matching_mu(&ch, 2.0, 0.5, 1.0).unwrap();
        assert!((mu - 1.1998630780125526).abs() < 1e-12, "mu = {mu}");
        let target = -2.5;
        let mut bracket = None;
        let mut prev = bessel_k_logderiv(2.0, 1.0).unwrap() - target;
        let mut x = 1.0;
        while x < 1.4 {
            let next = bessel_k_logderiv(2.0, x + 1e-6).unwrap() - target;
            if prev > 0.0 && next <= 0.0 {
                bracket = Some(x);
                break;
            }
            prev = next;
            x += 1e-6;
        }
        let scan = bracket.expect("scan must find the sign change");
        assert!((mu - scan).abs() < 2e-6);
    }

    #[test]
    fn matching_residual_on_random_valid_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
        for _ in 0..40 {
            let v: f64 = rng.gen_range(0.2..5.0);
            let ell = rng.gen_range(0..=v.floor() as i64);
            let alpha: f64 = rng.gen_range(0.01..2.0);
            let r: f64 = rng.gen_range(0.3..3.0);
            let ch = Channel::new(ell, v).unwrap();
            let mu = solve_matching_mu(&ch, v, alpha, r).unwrap();
            let target = ell as f64 - v - alpha * r;
            let resid = (bessel_k_logderiv(ch.order, mu * r).unwrap() - target).abs();
            assert!(resid < 1e-12, "residual {resid} at ell={ell}, v={v}, alpha={alpha}, r={r}");
        }
    }

    #[test]
    fn matching_order_zero_near_threshold() {
        // ell = v: nu = 0 and L_0(x) ≈ -1/ln(2e^{-gamma}/x), so the root
        // sits at x ≈ 2e^{-gamma}e^{-1/(alpha R)} — here around e^{-100}.
        let ch = Channel::new(1, 1.0).unwrap();
        let mu = solve_matching_mu(&ch, 1.0, 0.01, 1.0).unwrap();
        let predicted = 2.0 * (-0.5772156649015329_f64).exp() * (-100.0_f64).exp();
        assert!(mu > 0.0 && (mu.ln() - predicted.ln()).abs() < 0.05, "mu = {mu:e}");
        let resid = (bessel_k_logderiv(0.0, mu).unwrap() + 0.01).abs();
        assert!(resid < 1e-12);
    }

    #[test]
    fn matching_underflow_is_reported() {
        // alpha*R = 1e-4 in an integer-flux channel puts the root near
        // e^{-10000}, far below any positive f64.
        let ch = Channel::new(1, 1.0).unwrap();
        match solve_matching_mu(&ch, 1.0, 1e-4, 1.0) {
            Err(FluxtubeError::MuUnderflow { ell, x_floor, l_at_floor, target }) => {
                assert_eq!(ell, 1);
                assert_eq!(x_floor, 1e-280);
                // L is decreasing, so sitting at/below the target already
                // at the smallest representable bracket point means the
                // root lies beyond f64.
                assert!(l_at_floor <= target);
            }
            other => panic!("expected MuUnderflow, got {other:?}"),
        }
    }

    #[test]
    fn tail_ratio_matches_references() {
        // Closed half-integer form: J = x0/2 exactly.
        for &x0 in &[0.3, 1.0, 2.6, 7.0] {
            let j = ln_tail_ratio(0.5, x0).unwrap().exp();
            assert!((j - 0.5 * x0).abs() < 1e-13 * x0);
        }
        // mpmath 1.3.0 references for the ratio integral.
        for &(nu, x0, want) in &[
            (0.3, 0.84, 0.43457551823428232),
            (2.5, 1.6, 0.53256212638452021),
            (0.0, 0.001, 0.010134790822239275),
        ] {
            let j = ln_tail_ratio(nu, x0).unwrap().exp();
            assert!((j - want).abs() < 1e-12 * want, "J({nu}, {x0}) = {j}, want {want}");
        }
        // Deep-tail log value, far below linear f64 range (mpmath 1.3.0).
        let lnj = ln_tail_ratio(0.9, 1e-200).unwrap();
        assert!((lnj - -827.40417532596277).abs() < 1e-9 * 827.0);
    }

    #[test]
    fn tail_ratio_agrees_with_direct_quadrature() {
        // Independent route: integrate [K(u)/K(x0)]² u du numerically.
        for &(nu, x0) in &[(0.0, 0.4), (0.7, 1.3), (1.5, 1.5), (3.0, 0.9)] {
            let ln_k0 = ln_bessel_k(nu, x0).unwrap();
            let f = |u: f64| (2.0 * (ln_bessel_k(nu, u).unwrap() - ln_k0)).exp() * u;
            let q = integrate_to_infinity(&f, x0, 1e-12).unwrap().value;
            let j = ln_tail_ratio(nu, x0).unwrap().exp();
            assert!((j - q).abs() < 1e-10 * q, "J({nu}, {x0}): {j} vs quadrature {q}");
        }
    }

    #[test]
    fn alpha_rhs_matches_frozen_value() {
        // Disk eB0=5, R=1, ell=1, alpha=0.9, g=2.1 (mpmath 1.3.0).
        let p = disk(5.0, 1.0);
        let ch = Channel::new(1, p.flux_v()).unwrap();
        let rhs = alpha_bound_rhs(&ch, &p, 2.1, 0.9).unwrap();
        assert!((rhs - 0.044152288093357709).abs() < 1e-11 * 0.044);
        // alpha=0.02 companion used by the energy anchors below.
        let rhs = alpha_bound_rhs(&ch, &p, 2.1, 0.02).unwrap();
        assert!((rhs - 0.051023529100582301).abs() < 1e-11 * 0.051);
    }

    #[test]
    fn alpha_rhs_dual_quadrature_oracle() {
        // Adaptive result vs a 2e5-point midpoint rule, plus the closed
        // form for the numerator on the uniform disk at alpha = 0.
        let p = disk(4.0, 1.0);
        let ch = Channel::new(0, p.flux_v()).unwrap();
        let rhs = alpha_bound_rhs(&ch, &p, 2.1, 0.0).unwrap();
        let n = 200_000;
        let h = 1.0 / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let r = (i as f64 + 0.5) * h;
            let w = (-2.0 * p.ephi(r)).exp();
            num += p.eb(r) * r * w * h;
            den += w * h;
        }
        let oracle = 0.1 * num / (2.0 * den);
        assert!((rhs - oracle).abs() < 1e-9, "{rhs} vs {oracle}");
        // Numerator alone: ∫ 4r e^{-2r²} dr = 1 - e^{-2}.
        assert!((num - (1.0 - (-2.0_f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn alpha_rhs_vanishes_without_coupling() {
        let p = disk(4.0, 1.0);
        let ch = Channel::new(0, p.flux_v()).unwrap();
        assert_eq!(alpha_bound_rhs(&ch, &p, 2.0, 0.1).unwrap(), 0.0);
        let empty = disk(0.0, 1.0);
        let ch0 = Channel::new(0, 0.0).unwrap();
        assert_eq!(alpha_bound_rhs(&ch0, &empty, 2.1, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn choose_alpha_is_self_consistent() {
        let profiles = [
            disk(4.0, 1.0),
            FieldProfile::annulus(0.5, 1.0, 8.0, 1.0).unwrap(),
            FieldProfile::truncated_parabola(1.0, 6.0, 1.0).unwrap(),
            FieldProfile::tabulated(&[(0.0, 3.0), (0.4, 5.0), (1.0, 0.5)], 1.0).unwrap(),
        ];
        for p in &profiles {
            let fv = p.total_flux_v();
            for ell in 0..=fv.floor {
                let ch = Channel::new(ell, fv.v).unwrap();
                let alpha = choose_alpha(&ch, p, 2.1).unwrap();
                let rhs = alpha_bound_rhs(&ch, p, 2.1, alpha).unwrap();
                assert!(alpha > 0.0 && alpha < rhs, "{}: ell={ell}", p.family_name());
                assert!((rhs - alpha) / rhs >= 0.5 - 1e-6);
            }
        }
    }

    #[test]
    fn choose_alpha_rejects_degenerate_setups() {
        let p = disk(4.0, 1.0);
        let ch = Channel::new(0, 2.0).unwrap();
        assert!(matches!(choose_alpha(&ch, &p, 2.0), Err(FluxtubeError::NoAlpha(_))));
        let empty = disk(0.0, 1.0);
        let ch0 = Channel::new(0, 0.0).unwrap();
        assert!(matches!(choose_alpha(&ch0, &empty, 2.5), Err(FluxtubeError::NoAlpha(_))));
    }

    /// Shared fixture: disk eB0=5, R=1 (v=2.5), channel ell=1, with a
    /// prescribed alpha; mu then comes out as a quadratic surd.
    fn anchored_ansatz(alpha: f64) -> (FieldProfile, VariationalAnsatz) {
        let p = disk(5.0, 1.0);
        let ch = Channel::new(1, p.flux_v()).unwrap();
        let mu = solve_matching_mu(&ch, p.flux_v(), alpha, 1.0).unwrap();
        let ansatz = normalize(&ch, alpha, mu, &p).unwrap();
        (p, ansatz)
    }

    #[test]
    fn energy_matches_frozen_anchor_values() {
        // Fully pinned evaluations (mpmath 1.3.0): interior integrals by
        // high-precision quadrature, exterior in closed form via mu = 3/2
        // and x0 = (0.02 + sqrt(0.0804))/2 respectively.
        let (p, ansatz) = anchored_ansatz(0.9);
        let e = variational_energy(&ansatz, &p, 2.1).unwrap();
        assert!((e - 0.63189165254358361).abs() < 1e-10, "e = {e}");
        let ub = variational_energy_upper(&ansatz, &p, 2.1).unwrap();
        assert!((ub - 3.9842643795004686).abs() < 1e-9, "ub = {ub}");

        let (p, ansatz) = anchored_ansatz(0.02);
        let e = variational_energy(&ansatz, &p, 2.1).unwrap();
        assert!((e - -0.11505341327314834).abs() < 1e-11, "e = {e}");
        let ub = variational_energy_upper(&ansatz, &p, 2.1).unwrap();
        assert!((ub - -0.070597280499809872).abs() < 1e-11, "ub = {ub}");
        assert!(e < ub);
    }

    #[test]
    fn normalized_state_has_unit_norm() {
        // Independent dense-grid norm: midpoint inside, geometric-stretch
        // midpoint outside until the tail is exhausted.
        for &(eb0, g) in &[(4.0, 2.1), (5.0, 2.3)] {
            let p = disk(eb0, 1.0);
            let ch = Channel::new(0, p.flux_v()).unwrap();
            let cert = certify_channel(&ch, &p, g).unwrap();
            let ansatz = &cert.ansatz;
            let n = 40_000;
            let h = 1.0 / n as f64;
            let mut norm = 0.0;
            for i in 0..n {
                let r = (i as f64 + 0.5) * h;
                norm += ansatz.eval(&p, r).powi(2) * r * h;
            }
            let mut r = 1.0;
            let step = 1e-4;
            while r < 1.0 + 60.0 / ansatz.mu.max(1.0) {
                let hh = step * r.max(1.0);
                let mid = ansatz.eval(&p, r + 0.5 * hh);
                norm += mid * mid * (r + 0.5 * hh) * hh;
                r += hh;
            }
            norm *= 2.0 * PI;
            assert!((norm - 1.0).abs() < 1e-8, "norm = {norm} for eb0={eb0}");
        }
    }

    #[test]
    fn state_is_continuous_and_smooth_at_the_edge() {
        let (p, ansatz) = anchored_ansatz(0.02);
        assert!(ansatz.continuity_residual() < 1e-10);
        let r = ansatz.r_support;
        assert!((ansatz.eval(&p, r) - ansatz.eval(&p, r + 1e-14)).abs() < 1e-10 * ansatz.a);
        // One-sided derivatives via 4-point offsets on each side.
        let h = 1e-5;
        let d_in = (ansatz.eval(&p, r - 2.0 * h) - 4.0 * ansatz.eval(&p, r - h)
            + 3.0 * ansatz.eval(&p, r))
            / (2.0 * h);
        let d_out = (-3.0 * ansatz.eval(&p, r) + 4.0 * ansatz.eval(&p, r + h)
            - ansatz.eval(&p, r + 2.0 * h))
            / (2.0 * h);
        assert!(
            (d_in - d_out).abs() < 1e-6 * d_in.abs().max(1.0),
            "one-sided derivatives {d_in} vs {d_out}"
        );
    }

    #[test]
    fn certify_all_proves_every_guaranteed_channel() {
        // v = 2: channels 0..2; v = 2.5: channels 0..2; v = 0.3: channel 0.
        for &(eb0, expect) in &[(4.0, 3), (5.0, 3), (0.6, 1)] {
            let p = disk(eb0, 1.0);
            let certs = certify_all(&p, 2.1);
            assert_eq!(certs.len(), expect);
            for (ch, cert) in &certs {
                let cert = cert.as_ref().unwrap_or_else(|e| {
                    panic!("channel {} must certify, got {e}", ch.ell)
                });
                assert!(cert.e_var < 0.0, "ell={}, e_var={}", ch.ell, cert.e_var);
                assert!(cert.ansatz.mu > 0.0);
                // The eb0 = 4 top channel has nu = 0 and e_var ~ -1e-40;
                // the sign is still certain because the numerator stays
                // negative relative to the magnitudes assembled into it.
                assert!(cert.bound_proven, "ell={}, e_var={}", ch.ell, cert.e_var);
            }
        }
    }

    #[test]
    fn exact_energy_stays_below_upper_bound() {
        let profiles = [
            disk(5.0, 1.0),
            FieldProfile::annulus(0.4, 1.2, 6.0, 1.0).unwrap(),
            FieldProfile::truncated_parabola(0.8, 9.0, 1.0).unwrap(),
        ];
        for p in &profiles {
            for (ch, cert) in certify_all(p, 2.4) {
                let cert = cert.unwrap();
                let ub = variational_energy_upper(&cert.ansatz, p, 2.4).unwrap();
                assert!(ub < 0.0, "{} ell={}", p.family_name(), ch.ell);
                assert!(
                    cert.e_var <= ub + 1e-12 * ub.abs(),
                    "{} ell={}: {} vs {ub}",
                    p.family_name(),
                    ch.ell,
                    cert.e_var
                );
            }
        }
    }

    #[test]
    fn theorem_holds_on_random_profiles() {
        // 50 seeded draws across families, g in [2.1, 4], v = k + frac
        // with frac in [0.3, 0.7] (fractional parts near 0 or 1 drive the
        // weakest channel exponentially close to threshold, where the
        // certificate energy can fall below f64 resolution; the theorem
        // suite probes those regimes separately at fixed parameters).
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
        for case in 0..50 {
            let k = rng.gen_range(0..=4) as f64;
            let v = k + rng.gen_range(0.3..0.7);
            let g = rng.gen_range(2.1..4.0);
            let r_support = rng.gen_range(0.5..2.0);
            let p = match case % 3 {
                0 => FieldProfile::uniform_disk(r_support, 1.0, 1.0),
                1 => FieldProfile::annulus(0.4 * r_support, r_support, 1.0, 1.0),
                _ => FieldProfile::truncated_parabola(r_support, 1.0, 1.0),
            }
            .unwrap()
            .scaled_to_flux(v)
            .unwrap();
            let certs = certify_all(&p, g);
            assert_eq!(certs.len(), v.floor() as usize + 1);
            for (ch, cert) in certs {
                let cert = cert.unwrap_or_else(|e| {
                    panic!("case {case} (v={v}, g={g}, {}): ell={} failed: {e}",
                        p.family_name(), ch.ell)
                });
                assert!(
                    cert.bound_proven,
                    "case {case} (v={v}, g={g}): ell={} energy {} not strictly negative",
                    ch.ell, cert.e_var
                );
            }
        }
    }

    #[test]
    fn energies_approach_zero_from_below_as_g_drops_to_2() {
        let p = disk(5.0, 1.0);
        let mut last = [f64::NEG_INFINITY; 3];
        let mut first = true;
        for &g in &[2.1, 2.01, 2.001, 2.0001] {
            for (ch, cert) in certify_all(&p, g) {
                let cert = cert.unwrap();
                assert!(cert.e_var < 0.0, "g={g}, ell={}", ch.ell);
                if !first {
                    assert!(
                        cert.e_var.abs() < last[ch.ell as usize].abs(),
                        "|e_var| must shrink with g: g={g}, ell={}",
                        ch.ell
                    );
                }
                last[ch.ell as usize] = cert.e_var;
            }
            first = false;
        }
    }

    #[test]
    fn probe_beyond_flux_reports_rather_than_asserts() {
        // Weak coupling: the root condition 2(ell-v) < alpha*R fails.
        let p = disk(4.0, 1.0);
        match extra_channel_probe(&p, 2.1, 3).unwrap() {
            ProbeOutcome::NotProven { reason } => {
                assert!(reason.contains("no matching root"), "{reason}");
            }
            ProbeOutcome::Certified(c) => panic!("unexpected certificate: {}", c.e_var),
        }
        // Strong coupling may or may not certify; both outcomes are legal,
        // but the pipeline must complete and any certificate must be
        // negative.
        match extra_channel_probe(&p, 4.0, 3).unwrap() {
            ProbeOutcome::Certified(c) => assert!(c.e_var < 0.0),
            ProbeOutcome::NotProven { .. } => {}
        }
        assert!(extra_channel_probe(&p, 2.1, 1).is_err());
    }

    #[test]
    fn interior_norm_matches_reference() {
        // ∫₀¹ r³ e^{-2.5r² - 1.8r} dr (mpmath 1.3.0).
        let p = disk(5.0, 1.0);
        let n = interior_norm(&p, 1, 0.9).unwrap();
        assert!((n - 0.017565743992452173).abs() < 1e-13);
        // Against integrate_rel on the same integrand as a route check.
        let f = |r: f64| r.powi(3) * (-2.5 * r * r - 1.8 * r).exp();
        let q = integrate_rel(&f, 0.0, 1.0, 1e-13).unwrap().value;
        assert!((n - q).abs() < 1e-13);
    }
}
