//! Radially symmetric, compact-support, sign-definite magnetic field
//! profiles and their gauge data.
//!
//! All physics downstream only ever sees the charge-folded combinations
//! e·B(r), e·A_φ(r) and e·φ(r), where A_φ is the symmetric-gauge vector
//! potential, φ(r) = ∫₀^r A_φ, and the dimensionless flux is
//! v = e∫₀^R B(r) r dr = e·Φ/(2π). Units are 2m = ħ = c = 1, so energies
//! are 1/length². The sign condition e·B(r) ≥ 0 is enforced at
//! construction; profiles with B of the "wrong" sign for the given charge
//! are rejected rather than silently flipped.

use crate::error::{FluxtubeError, Result};

/// A validated field profile. Immutable; all getters are pure.
#[derive(Debug, Clone)]
pub struct FieldProfile {
    family: Family,
    r_support: f64,
    charge: f64,
    b0: f64,
    v: f64,
    ephi_support: f64,
}

#[derive(Debug, Clone)]
enum Family {
    UniformDisk,
    Annulus { r_inner: f64 },
    TruncatedParabola,
    Tabulated { segments: Vec<Segment> },
}

/// One piecewise-linear segment of a tabulated e·B profile with its
/// cumulative integrals at the left edge; the in-segment integrals are
/// closed forms, so tabulated profiles carry no quadrature noise.
#[derive(Debug, Clone)]
struct Segment {
    r0: f64,
    r1: f64,
    eb0: f64,
    slope: f64,
    m0: f64,
    ephi0: f64,
}

impl Segment {
    /// m(r) = ∫₀^r eB s ds for r within this segment.
    fn m(&self, r: f64) -> f64 {
        let d2 = r * r - self.r0 * self.r0;
        let d3 = r * r * r - self.r0 * self.r0 * self.r0;
        self.m0 + 0.5 * self.eb0 * d2 + self.slope * (d3 / 3.0 - 0.5 * self.r0 * d2)
    }

    /// e·φ(r) = ∫₀^r m(s)/s ds for r within this segment.
    fn ephi(&self, r: f64) -> f64 {
        let c_log = self.m0 - 0.5 * self.eb0 * self.r0 * self.r0
            + self.slope * self.r0 * self.r0 * self.r0 / 6.0;
        let c1 = 0.5 * (self.eb0 - self.slope * self.r0);
        let c2 = self.slope / 3.0;
        let d2 = r * r - self.r0 * self.r0;
        let d3 = r * r * r - self.r0 * self.r0 * self.r0;
        let log_part = if self.r0 == 0.0 { 0.0 } else { c_log * (r / self.r0).ln() };
        self.ephi0 + log_part + 0.5 * c1 * d2 + c2 * d3 / 3.0
    }

    fn eb(&self, r: f64) -> f64 {
        self.eb0 + self.slope * (r - self.r0)
    }
}

/// Integer/fractional split of the dimensionless flux, v = ⌊v⌋ + ε.
#[derive(Debug, Clone, Copy)]
pub struct FluxV {
    pub v: f64,
    pub floor: i64,
    pub frac: f64,
}

/// View of the gauge quantities in their un-folded (physical) form.
pub struct GaugeData<'a> {
    profile: &'a FieldProfile,
}

impl GaugeData<'_> {
    /// Symmetric-gauge vector potential A_φ(r).
    pub fn a_phi(&self, r: f64) -> f64 {
        self.profile.vector_potential(r)
    }

    /// φ(r) = ∫₀^r A_φ(r′) dr′.
    pub fn phi(&self, r: f64) -> f64 {
        self.profile.flux_function(r)
    }

    pub fn v(&self) -> f64 {
        self.profile.v
    }

    /// Total flux Φ = 2π v / e.
    pub fn total_flux(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.profile.v / self.profile.charge
    }
}

fn check_common(r_support: f64, b0: f64, charge: f64) -> Result<()> {
    if !(r_support > 0.0) || !r_support.is_finite() {
        return Err(FluxtubeError::InvalidProfile(format!(
            "support radius must be positive and finite, got {r_support}"
        )));
    }
    if charge == 0.0 || !charge.is_finite() {
        return Err(FluxtubeError::InvalidProfile(format!(
            "charge must be nonzero and finite, got {charge}"
        )));
    }
    if !b0.is_finite() {
        return Err(FluxtubeError::InvalidProfile(format!("field amplitude must be finite, got {b0}")));
    }
    if charge * b0 < 0.0 {
        return Err(FluxtubeError::InvalidProfile(format!(
            "e·B must be nonnegative: charge {charge} and amplitude {b0} have opposite signs"
        )));
    }
    Ok(())
}

impl FieldProfile {
    /// B = B₀ on the disk r ≤ r_support.
    pub fn uniform_disk(r_support: f64, b0: f64, charge: f64) -> Result<Self> {
        check_common(r_support, b0, charge)?;
        let eb0 = charge * b0;
        Ok(FieldProfile {
            family: Family::UniformDisk,
            r_support,
            charge,
            b0,
            v: 0.5 * eb0 * r_support * r_support,
            ephi_support: 0.25 * eb0 * r_support * r_support,
        })
    }

    /// B = B₀ on the ring r_inner ≤ r ≤ r_support, zero inside the hole.
    pub fn annulus(r_inner: f64, r_support: f64, b0: f64, charge: f64) -> Result<Self> {
        check_common(r_support, b0, charge)?;
        if !(0.0..r_support).contains(&r_inner) {
            return Err(FluxtubeError::InvalidProfile(format!(
                "annulus needs 0 <= r_inner < r_support, got r_inner={r_inner}, r_support={r_support}"
            )));
        }
        let eb0 = charge * b0;
        let (ri2, rs2) = (r_inner * r_inner, r_support * r_support);
        let ephi_support = if r_inner == 0.0 {
            0.25 * eb0 * rs2
        } else {
            eb0 * (0.25 * (rs2 - ri2) - 0.5 * ri2 * (r_support / r_inner).ln())
        };
        Ok(FieldProfile {
            family: Family::Annulus { r_inner },
            r_support,
            charge,
            b0,
            v: 0.5 * eb0 * (rs2 - ri2),
            ephi_support,
        })
    }

    /// B = B₀(1 − r²/r_support²) on r ≤ r_support: a smooth bump vanishing
    /// at the support edge.
    pub fn truncated_parabola(r_support: f64, b0: f64, charge: f64) -> Result<Self> {
        check_common(r_support, b0, charge)?;
        let eb0 = charge * b0;
        let rs2 = r_support * r_support;
        Ok(FieldProfile {
            family: Family::TruncatedParabola,
            r_support,
            charge,
            b0,
            v: 0.25 * eb0 * rs2,
            ephi_support: eb0 * (0.25 * rs2 - rs2 / 16.0),
        })
    }

    /// Piecewise-linear B through `samples` = [(r, B)], which must start at
    /// r = 0, be strictly ascending in r, and satisfy e·B ≥ 0 throughout.
    /// The support radius is the last sample's r.
    pub fn tabulated(samples: &[(f64, f64)], charge: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(FluxtubeError::InvalidProfile(format!(
                "tabulated profile needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if samples[0].0 != 0.0 {
            return Err(FluxtubeError::InvalidProfile(format!(
                "tabulated profile must start at r = 0, got r = {}",
                samples[0].0
            )));
        }
        let mut b_max: f64 = 0.0;
        for (i, &(r, b)) in samples.iter().enumerate() {
            if !r.is_finite() || !b.is_finite() {
                return Err(FluxtubeError::InvalidProfile(format!(
                    "non-finite sample ({r}, {b}) at index {i}"
                )));
            }
            if i > 0 && r <= samples[i - 1].0 {
                return Err(FluxtubeError::InvalidProfile(format!(
                    "sample radii must be strictly ascending, got {} after {}",
                    r,
                    samples[i - 1].0
                )));
            }
            if charge * b < 0.0 {
                return Err(FluxtubeError::InvalidProfile(format!(
                    "e·B must be nonnegative everywhere, violated at r = {r}"
                )));
            }
            b_max = b_max.max(b.abs());
        }
        if charge == 0.0 || !charge.is_finite() {
            return Err(FluxtubeError::InvalidProfile(format!(
                "charge must be nonzero and finite, got {charge}"
            )));
        }
        let mut segments = Vec::with_capacity(samples.len() - 1);
        let mut m0 = 0.0;
        let mut ephi0 = 0.0;
        for w in samples.windows(2) {
            let (r0, b_lo) = w[0];
            let (r1, b_hi) = w[1];
            let eb_lo = charge * b_lo;
            let eb_hi = charge * b_hi;
            let seg = Segment {
                r0,
                r1,
                eb0: eb_lo,
                slope: (eb_hi - eb_lo) / (r1 - r0),
                m0,
                ephi0,
            };
            m0 = seg.m(r1);
            ephi0 = seg.ephi(r1);
            segments.push(seg);
        }
        let r_support = samples[samples.len() - 1].0;
        Ok(FieldProfile {
            family: Family::Tabulated { segments },
            r_support,
            charge,
            b0: b_max,
            v: m0,
            ephi_support: ephi0,
        })
    }

    /// Same shape rescaled so that the total dimensionless flux equals
    /// `v_target` (> 0); requires the current flux to be positive.
    pub fn scaled_to_flux(&self, v_target: f64) -> Result<Self> {
        if !(self.v > 0.0) {
            return Err(FluxtubeError::InvalidProfile(format!(
                "cannot rescale a profile with flux v = {} to a target flux",
                self.v
            )));
        }
        if !(v_target > 0.0) || !v_target.is_finite() {
            return Err(FluxtubeError::InvalidProfile(format!(
                "target flux must be positive and finite, got {v_target}"
            )));
        }
        let factor = v_target / self.v;
        let mut scaled = self.clone();
        scaled.b0 *= factor;
        scaled.v *= factor;
        scaled.ephi_support *= factor;
        if let Family::Tabulated { segments } = &mut scaled.family {
            for s in segments {
                s.eb0 *= factor;
                s.slope *= factor;
                s.m0 *= factor;
                s.ephi0 *= factor;
            }
        }
        Ok(scaled)
    }

    /// The covariant rescaling r → λr, B → B/λ², under which v (and every
    /// eigenvalue multiplied by λ²) is invariant.
    pub fn spatially_scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(FluxtubeError::InvalidProfile(format!(
                "scale factor must be positive and finite, got {lambda}"
            )));
        }
        let l2 = lambda * lambda;
        match &self.family {
            Family::UniformDisk => {
                Self::uniform_disk(self.r_support * lambda, self.b0 / l2, self.charge)
            }
            Family::Annulus { r_inner } => Self::annulus(
                r_inner * lambda,
                self.r_support * lambda,
                self.b0 / l2,
                self.charge,
            ),
            Family::TruncatedParabola => {
                Self::truncated_parabola(self.r_support * lambda, self.b0 / l2, self.charge)
            }
            Family::Tabulated { segments } => {
                let mut samples: Vec<(f64, f64)> =
                    segments.iter().map(|s| (s.r0 * lambda, s.eb0 / self.charge / l2)).collect();
                let last = &segments[segments.len() - 1];
                samples.push((last.r1 * lambda, last.eb(last.r1) / self.charge / l2));
                Self::tabulated(&samples, self.charge)
            }
        }
    }

    pub fn r_support(&self) -> f64 {
        self.r_support
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    /// Field amplitude in physical units (max |B| for tabulated profiles).
    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::UniformDisk => "uniform-disk",
            Family::Annulus { .. } => "annulus",
            Family::TruncatedParabola => "truncated-parabola",
            Family::Tabulated { .. } => "tabulated",
        }
    }

    pub fn gauge(&self) -> GaugeData<'_> {
        GaugeData { profile: self }
    }

    /// e·B(r); zero beyond the support radius.
    pub fn eb(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "radius must be nonnegative");
        if r > self.r_support {
            return 0.0;
        }
        let eb0 = self.charge * self.b0;
        match &self.family {
            Family::UniformDisk => eb0,
            Family::Annulus { r_inner } => {
                if r >= *r_inner {
                    eb0
                } else {
                    0.0
                }
            }
            Family::TruncatedParabola => {
                eb0 * (1.0 - (r / self.r_support) * (r / self.r_support))
            }
            Family::Tabulated { segments } => segments[self.segment_index(segments, r)].eb(r),
        }
    }

    /// Maximum of e·B over the support (exact per family).
    pub fn eb_max(&self) -> f64 {
        match &self.family {
            Family::Tabulated { segments } => segments
                .iter()
                .flat_map(|s| [s.eb(s.r0), s.eb(s.r1)])
                .fold(0.0, f64::max),
            _ => self.charge * self.b0,
        }
    }

    /// m(r) = ∫₀^r e·B(s) s ds; equals v for r ≥ r_support.
    fn flux_integral(&self, r: f64) -> f64 {
        if r >= self.r_support {
            return self.v;
        }
        let eb0 = self.charge * self.b0;
        match &self.family {
            Family::UniformDisk => 0.5 * eb0 * r * r,
            Family::Annulus { r_inner } => {
                if r <= *r_inner {
                    0.0
                } else {
                    0.5 * eb0 * (r * r - r_inner * r_inner)
                }
            }
            Family::TruncatedParabola => {
                let rs2 = self.r_support * self.r_support;
                eb0 * (0.5 * r * r - 0.25 * r * r * r * r / rs2)
            }
            Family::Tabulated { segments } => segments[self.segment_index(segments, r)].m(r),
        }
    }

    fn segment_index(&self, segments: &[Segment], r: f64) -> usize {
        segments.partition_point(|s| s.r1 < r).min(segments.len() - 1)
    }

    /// e·A_φ(r) = m(r)/r, with the regular limit 0 at the origin.
    pub fn ea(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "radius must be nonnegative");
        if r == 0.0 {
            return 0.0;
        }
        self.flux_integral(r) / r
    }

    /// e·φ(r) = ∫₀^r e·A_φ; grows like v·ln(r/R) beyond the support.
    pub fn ephi(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "radius must be nonnegative");
        if r >= self.r_support {
            return self.ephi_support + self.v * (r / self.r_support).ln();
        }
        let eb0 = self.charge * self.b0;
        match &self.family {
            Family::UniformDisk => 0.25 * eb0 * r * r,
            Family::Annulus { r_inner } => {
                if r <= *r_inner || *r_inner == 0.0 {
                    let ri = *r_inner;
                    if r <= ri {
                        0.0
                    } else {
                        0.25 * eb0 * r * r
                    }
                } else {
                    eb0 * (0.25 * (r * r - r_inner * r_inner)
                        - 0.5 * r_inner * r_inner * (r / r_inner).ln())
                }
            }
            Family::TruncatedParabola => {
                let rs2 = self.r_support * self.r_support;
                eb0 * (0.25 * r * r - r * r * r * r / (16.0 * rs2))
            }
            Family::Tabulated { segments } => segments[self.segment_index(segments, r)].ephi(r),
        }
    }

    /// A_φ(r) in physical units; v/(e·r) beyond the support.
    pub fn vector_potential(&self, r: f64) -> f64 {
        self.ea(r) / self.charge
    }

    /// φ(r) = ∫₀^r A_φ in physical units.
    pub fn flux_function(&self, r: f64) -> f64 {
        self.ephi(r) / self.charge
    }

    /// Dimensionless total flux with its integer/fractional split.
    pub fn total_flux_v(&self) -> FluxV {
        let v = self.v;
        let floor = v.floor() as i64;
        FluxV { v, floor, frac: v - floor as f64 }
    }

    pub fn flux_v(&self) -> f64 {
        self.v
    }

    /// Radii where B or its derivative jumps; integrands should be split
    /// here. Always starts at 0 and ends at the support radius.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            Family::UniformDisk | Family::TruncatedParabola => vec![0.0, self.r_support],
            Family::Annulus { r_inner } => {
                if *r_inner > 0.0 {
                    vec![0.0, *r_inner, self.r_support]
                } else {
                    vec![0.0, self.r_support]
                }
            }
            Family::Tabulated { segments } => {
                let mut pts: Vec<f64> = segments.iter().map(|s| s.r0).collect();
                pts.push(self.r_support);
                pts
            }
        }
    }
}
