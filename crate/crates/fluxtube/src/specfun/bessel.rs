//! Modified Bessel functions K_ν and I_ν of nonnegative real order, their
//! log-scaled variants, and the logarithmic derivative x·K′_ν(x)/K_ν(x).
//!
//! Two independent regimes are used for K: a Temme power series for x ≤ 2
//! and a Steed continued fraction for x > 2, joined by upward recurrence in
//! the order. The regimes overlap around x = 2 and the tests require them to
//! agree there. I_ν comes from its ascending series and shares no code with
//! the K path, so the Wronskian test is a genuine cross-check.

use crate::error::{FluxtubeError, Result};
use std::f64::consts::PI;

const SERIES_MAX_ITER: usize = 1000;
const CF2_MAX_ITER: usize = 40_000;
const I_SERIES_MAX_ITER: usize = 8000;
/// Largest order supported by the upward recurrence before accuracy and
/// cost concerns kick in; channel orders |ℓ−v| stay far below this.
const MAX_ORDER: f64 = 64.0;
/// ln of the rescaling chunk used to keep recurrence iterates in range.
const RESCALE: f64 = 1e280;

/// K_ν(x) and K_{ν+1}(x) represented as `k * exp(ln_scale)`, finite even
/// where the functions themselves leave the f64 range.
#[derive(Debug, Clone, Copy)]
pub struct KScaled {
    pub knu: f64,
    pub knup1: f64,
    pub ln_scale: f64,
}

/// Taylor coefficients of 1/Γ(z) = Σ_{k≥1} c_k z^k (Abramowitz & Stegun 6.1.34).
const INV_GAMMA_TAYLOR: [f64; 26] = [
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
];

/// Temme's auxiliary gamma combinations for |μ| ≤ 1/2:
/// returns (Γ₁, Γ₂, 1/Γ(1+μ), 1/Γ(1−μ)) with
/// Γ₁ = [1/Γ(1−μ) − 1/Γ(1+μ)]/(2μ) and Γ₂ = [1/Γ(1−μ) + 1/Γ(1+μ)]/2,
/// both evaluated from even/odd splits of the 1/Γ Taylor series so the
/// μ→0 limit is exact instead of a 0/0 quotient.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    debug_assert!(mu.abs() <= 0.5 + 1e-12);
    let m2 = mu * mu;
    let mut gampl = 0.0; // 1/Γ(1+μ) = Σ c_k μ^{k-1}
    let mut gammi = 0.0; // 1/Γ(1−μ) = Σ c_k (−μ)^{k-1}
    for k in (0..INV_GAMMA_TAYLOR.len()).rev() {
        gampl = gampl * mu + INV_GAMMA_TAYLOR[k];
        gammi = gammi * (-mu) + INV_GAMMA_TAYLOR[k];
    }
    let mut gam1 = 0.0; // −(c₂ + c₄μ² + c₆μ⁴ + …)
    for k in (1..INV_GAMMA_TAYLOR.len()).step_by(2).rev() {
        gam1 = gam1 * m2 + INV_GAMMA_TAYLOR[k];
    }
    gam1 = -gam1;
    let mut gam2 = 0.0; // c₁ + c₃μ² + c₅μ⁴ + …
    for k in (0..INV_GAMMA_TAYLOR.len()).step_by(2).rev() {
        gam2 = gam2 * m2 + INV_GAMMA_TAYLOR[k];
    }
    (gam1, gam2, gampl, gammi)
}

/// ln Γ(1+ν) for ν ≥ −1/2, via the product recurrence down to the
/// fractional part and the Taylor table there.
fn ln_gamma_one_plus(nu: f64) -> f64 {
    let n = (nu + 0.5).floor();
    let frac = nu - n;
    let (_, _, gampl, _) = temme_gamma(frac);
    let mut ln = -gampl.ln();
    let mut t = nu;
    for _ in 0..(n as i64) {
        ln += t.ln();
        t -= 1.0;
    }
    ln
}

/// Temme series for (K_μ(x), K_{μ+1}(x), ln_scale), valid for |μ| ≤ 1/2 and
/// 0 < x ≤ 2. The scale is 0 except when K_{μ+1} alone would overflow at
/// very small x, in which case both values are folded onto a common scale.
fn kv_temme(mu: f64, x: f64) -> Result<(f64, f64, f64)> {
    let (gam1, gam2, gampl, gammi) = temme_gamma(mu);
    let d = (2.0 / x).ln();
    let e = mu * d;
    let fact = if mu == 0.0 { 1.0 } else { (PI * mu) / (PI * mu).sin() };
    let fact2 = if e.abs() < 1e-15 { 1.0 + e * e / 6.0 } else { e.sinh() / e };
    let ee = e.exp();
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let d2 = 0.25 * x * x;
    let mut sum1 = p;
    let mut converged = false;
    for i in 1..=SERIES_MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= d2 / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * f64::EPSILON {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(FluxtubeError::NonConvergence(format!(
            "K series stalled at mu={mu}, x={x}"
        )));
    }
    let xi = 2.0 / x;
    if sum1 > f64::MAX / xi {
        let ln_scale = sum1.ln() + xi.ln();
        Ok(((sum.ln() - ln_scale).exp(), 1.0, ln_scale))
    } else {
        Ok((sum, sum1 * xi, 0.0))
    }
}

/// Steed continued fraction for (e^x K_μ(x), e^x K_{μ+1}(x)), valid for
/// |μ| ≤ 1/2 and x > 2; the returned ln_scale is −x.
fn kv_cf2(mu: f64, x: f64) -> Result<(f64, f64, f64)> {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    let mut converged = false;
    for i in 2..=CF2_MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(FluxtubeError::NonConvergence(format!(
            "K continued fraction stalled at mu={mu}, x={x}"
        )));
    }
    let h = a1 * h;
    let kmu = (PI / (2.0 * x)).sqrt() / s;
    let kmup1 = kmu * (mu + x + 0.5 - h) / x;
    Ok((kmu, kmup1, -x))
}

fn check_k_args(nu: f64, x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(FluxtubeError::Domain(format!("K_nu requires x > 0, got {x}")));
    }
    if x < 1e-300 {
        return Err(FluxtubeError::Domain(format!(
            "K_nu argument {x:e} below the f64-safe floor 1e-300"
        )));
    }
    let nu = nu.abs(); // K_{−ν} = K_ν
    if nu > MAX_ORDER {
        return Err(FluxtubeError::Domain(format!(
            "order {nu} above supported range (<= {MAX_ORDER})"
        )));
    }
    Ok(nu)
}

/// (K_ν(x), K_{ν+1}(x)) on a shared logarithmic scale; never overflows for
/// x ≥ 1e−300 and ν ≤ 64.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<KScaled> {
    let nu = check_k_args(nu, x)?;
    let n = (nu + 0.5).floor() as i64;
    let mu = nu - n as f64;
    let (kmu, kmup1, mut ln_scale) = if x <= 2.0 { kv_temme(mu, x)? } else { kv_cf2(mu, x)? };
    let mut klo = kmu; // K_{μ+j}
    let mut khi = kmup1; // K_{μ+j+1}
    for j in 1..=n {
        let fac = 2.0 * (mu + j as f64) / x;
        let lim = f64::MAX / 16.0 / fac.max(1.0);
        if khi > lim {
            let sc = khi;
            khi = 1.0;
            klo /= sc;
            ln_scale += sc.ln();
        }
        let knew = klo + fac * khi;
        klo = khi;
        khi = knew;
    }
    Ok(KScaled { knu: klo, knup1: khi, ln_scale })
}

/// K_ν(x). Underflow to subnormal/zero is graceful; overflow is an error
/// (use [`ln_bessel_k`] or [`bessel_k_scaled`] in that range).
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let s = bessel_k_scaled(nu, x)?;
    if s.ln_scale == 0.0 {
        return Ok(s.knu);
    }
    let ln_val = s.knu.ln() + s.ln_scale;
    if ln_val > 709.0 {
        return Err(FluxtubeError::Overflow(format!(
            "K_{nu}({x}) = exp({ln_val:.3}) exceeds f64 range"
        )));
    }
    if s.ln_scale.abs() < 700.0 {
        Ok(s.knu * s.ln_scale.exp())
    } else {
        Ok(ln_val.exp())
    }
}

/// ln K_ν(x), finite over the whole supported domain.
pub fn ln_bessel_k(nu: f64, x: f64) -> Result<f64> {
    let s = bessel_k_scaled(nu, x)?;
    Ok(s.knu.ln() + s.ln_scale)
}

/// L_ν(x) = x·K′_ν(x)/K_ν(x), computed from the scaled pair through
/// K′_ν = (ν/x)K_ν − K_{ν+1} so the common scale cancels; maps (0,∞) onto
/// (−∞, −ν), strictly decreasing. Clamped to the analytic bound L ≤ −ν,
/// which rounding can otherwise cross at tiny x.
pub fn bessel_k_logderiv(nu: f64, x: f64) -> Result<f64> {
    let nu = nu.abs();
    let s = bessel_k_scaled(nu, x)?;
    Ok((nu - x * (s.knup1 / s.knu)).min(-nu))
}

/// ln I_ν(x) from the ascending series (all terms positive), with periodic
/// rescaling so x up to ~700 stays representable.
pub fn ln_bessel_i(nu: f64, x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(FluxtubeError::Domain(format!("I_nu requires x > 0, got {x}")));
    }
    if !(0.0..=MAX_ORDER).contains(&nu) {
        return Err(FluxtubeError::Domain(format!(
            "I_nu order {nu} outside supported range [0, {MAX_ORDER}]"
        )));
    }
    let q = 0.25 * x * x;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut ln_off = 0.0_f64;
    let mut converged = false;
    for k in 0..I_SERIES_MAX_ITER {
        let fk = (k + 1) as f64;
        term *= q / (fk * (nu + fk));
        sum += term;
        if term < sum * f64::EPSILON {
            converged = true;
            break;
        }
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            ln_off += RESCALE.ln();
        }
    }
    if !converged {
        return Err(FluxtubeError::NonConvergence(format!(
            "I series stalled at nu={nu}, x={x}"
        )));
    }
    Ok(nu * (0.5 * x).ln() - ln_gamma_one_plus(nu) + sum.ln() + ln_off)
}

/// I_ν(x); overflow is an error (use [`ln_bessel_i`] in that range).
pub fn bessel_i(nu: f64, x: f64) -> Result<f64> {
    let ln_val = ln_bessel_i(nu, x)?;
    if ln_val > 709.0 {
        return Err(FluxtubeError::Overflow(format!(
            "I_{nu}({x}) = exp({ln_val:.3}) exceeds f64 range"
        )));
    }
    Ok(ln_val.exp())
}
