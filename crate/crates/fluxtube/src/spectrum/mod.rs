//! Independent radial eigensolver for the per-channel Pauli operator.
//!
//! Fixing the angular momentum ℓ reduces the planar spin-up Hamiltonian
//! to a radial Sturm–Liouville problem on (0, ∞),
//!
//! ```text
//! (H_ℓ f)(r) = −f″ − f′/r + [ (ℓ/r − eA_φ(r))² − (g/2)·eB(r) ] f
//! ```
//!
//! with the norm ∫ f² r dr. This module discretizes H_ℓ with piecewise
//! linear finite elements assembled directly in the r dr measure and
//! counts bound states through matrix inertia. Nothing here consumes the
//! variational construction — an energy scale may be passed in to size
//! the mesh, but the counts and eigenvalues come from the discretized
//! operator alone, so agreement between the two routes is evidence, not
//! tautology.
//!
//! Two properties make the Galerkin route trustworthy as a referee:
//!
//! * every discrete eigenvalue lies at or above its continuum
//!   counterpart (Rayleigh–Ritz restricted to a subspace), so up to the
//!   rounding of element quadrature a negative discrete eigenvalue
//!   certifies a negative true eigenvalue and the reported count never
//!   exceeds the true count;
//! * the inertia count is exact for the assembled pencil at any shift,
//!   so bound states within a rounding-dominated distance of zero are a
//!   resolution question for the mesh, not for the eigenvalue algorithm.
//!
//! Near-threshold states with |λ| many orders below 1/R² need a box that
//! contains their K_ν(√|λ| r) tail; `grid_for_energy_scale` picks a
//! geometric mesh for those. The box radius is capped at ~1e61 (in units
//! of the support radius for supports of order one) to keep the mass
//! matrix inside f64 range; binding energies shallower than ~1e-117
//! cannot be counted and should be treated as unresolved.

use crate::error::{FluxtubeError, Result};
use crate::fields::FieldProfile;
use crate::variational::Channel;

pub mod sturm;

/// Node layout for the radial mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    /// Equally spaced nodes on [0, r_max].
    Uniform { n: usize, r_max: f64 },
    /// One cell [0, r_min] followed by geometrically spaced nodes up to
    /// r_max. Resolves tails that extend many orders of magnitude beyond
    /// the flux support at a node count proportional to the number of
    /// decades covered.
    LogRadial {
        r_min: f64,
        r_max: f64,
        points_per_decade: usize,
    },
}

impl GridSpec {
    pub fn r_max(&self) -> f64 {
        match *self {
            GridSpec::Uniform { r_max, .. } => r_max,
            GridSpec::LogRadial { r_max, .. } => r_max,
        }
    }

    /// Same box, twice the resolution.
    pub fn refined(&self) -> GridSpec {
        match *self {
            GridSpec::Uniform { n, r_max } => GridSpec::Uniform { n: n * 2, r_max },
            GridSpec::LogRadial {
                r_min,
                r_max,
                points_per_decade,
            } => GridSpec::LogRadial {
                r_min,
                r_max,
                points_per_decade: points_per_decade * 2,
            },
        }
    }

    /// Node count this spec will request, before breakpoint insertion.
    fn node_estimate(&self) -> usize {
        match *self {
            GridSpec::Uniform { n, .. } => n,
            GridSpec::LogRadial {
                r_min,
                r_max,
                points_per_decade,
            } => ((r_max / r_min).log10().max(0.0) * points_per_decade as f64).ceil() as usize,
        }
    }

    /// Same resolution, box enlarged by half again.
    pub fn extended(&self) -> GridSpec {
        match *self {
            GridSpec::Uniform { n, r_max } => GridSpec::Uniform {
                n: n.saturating_mul(3) / 2,
                r_max: 1.5 * r_max,
            },
            GridSpec::LogRadial {
                r_min,
                r_max,
                points_per_decade,
            } => GridSpec::LogRadial {
                r_min,
                r_max: 1.5 * r_max,
                points_per_decade,
            },
        }
    }
}

/// Ascending node set, first node at r = 0, last at r_max, with every
/// profile breakpoint in between forced onto a node so the element
/// quadrature only ever integrates smooth coefficients.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn build(spec: &GridSpec, profile: &FieldProfile) -> Result<RadialGrid> {
        let r_support = profile.r_support();
        let mut nodes = match *spec {
            GridSpec::Uniform { n, r_max } => {
                if !(16..=2_000_000).contains(&n) {
                    return Err(FluxtubeError::Domain(format!(
                        "uniform grid needs 16 ..= 2e6 cells, got {n}"
                    )));
                }
                if !(r_max >= r_support) || !r_max.is_finite() {
                    return Err(FluxtubeError::Domain(format!(
                        "grid must cover the flux support: r_max = {r_max}, support = {r_support}"
                    )));
                }
                (0..=n).map(|i| r_max * i as f64 / n as f64).collect::<Vec<f64>>()
            }
            GridSpec::LogRadial {
                r_min,
                r_max,
                points_per_decade,
            } => {
                if !(r_min > 0.0) || !(r_max > r_min) || !r_max.is_finite() {
                    return Err(FluxtubeError::Domain(format!(
                        "geometric grid needs 0 < r_min < r_max, got [{r_min}, {r_max}]"
                    )));
                }
                if !(r_max >= r_support) {
                    return Err(FluxtubeError::Domain(format!(
                        "grid must cover the flux support: r_max = {r_max}, support = {r_support}"
                    )));
                }
                if points_per_decade < 8 {
                    return Err(FluxtubeError::Domain(format!(
                        "geometric grid needs at least 8 points per decade, got {points_per_decade}"
                    )));
                }
                let decades = (r_max / r_min).log10();
                let m = ((decades * points_per_decade as f64).ceil() as usize).max(1);
                if m > 2_000_000 {
                    return Err(FluxtubeError::Domain(format!(
                        "geometric grid would need {m} nodes"
                    )));
                }
                let step = (r_max.ln() - r_min.ln()) / m as f64;
                let mut v = Vec::with_capacity(m + 2);
                v.push(0.0);
                for k in 0..m {
                    v.push((r_min.ln() + step * k as f64).exp());
                }
                v.push(r_max);
                v
            }
        };
        let r_max = *nodes.last().unwrap();
        for bp in profile.breakpoints() {
            if bp > 0.0 && bp < r_max {
                nodes.push(bp);
            }
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Merge locally: geometric meshes span dozens of decades, so any
        // absolute snap distance would wipe out the small-radius nodes.
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()));
        Ok(RadialGrid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Assembled stiffness/mass pair for one angular channel: symmetric
/// tridiagonal A (kinetic + potential) and B (metric), with f(r_max) = 0
/// imposed and the r = 0 value kept as a degree of freedom only for
/// ℓ = 0, where the true eigenfunction is finite at the axis.
#[derive(Debug, Clone)]
pub struct RadialPencil {
    pub ell: i64,
    pub nodes: Vec<f64>,
    pub diag_a: Vec<f64>,
    pub off_a: Vec<f64>,
    pub diag_b: Vec<f64>,
    pub off_b: Vec<f64>,
}

const GL4_X: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
const GL4_W: [f64; 4] = [
    0.3478548451374538,
    0.6521451548625461,
    0.6521451548625461,
    0.3478548451374538,
];

pub fn build_radial_operator(
    ch: &Channel,
    profile: &FieldProfile,
    g: f64,
    grid: &RadialGrid,
) -> RadialPencil {
    let nodes = grid.nodes();
    let n_nodes = nodes.len();
    let first = if ch.ell == 0 { 0 } else { 1 };
    let last = n_nodes - 1;
    let n_dof = last - first;
    let ell_f = ch.ell as f64;
    let pot = |r: f64| {
        let d = ell_f / r - profile.ea(r);
        d * d - 0.5 * g * profile.eb(r)
    };

    let mut diag_a = vec![0.0; n_dof];
    let mut off_a = vec![0.0; n_dof.saturating_sub(1)];
    let mut diag_b = vec![0.0; n_dof];
    let mut off_b = vec![0.0; n_dof.saturating_sub(1)];

    for e in 0..n_nodes - 1 {
        let ra = nodes[e];
        let rb = nodes[e + 1];
        let h = rb - ra;
        let rbar = 0.5 * (ra + rb);
        let k = rbar / h;
        let m00 = h * (ra / 3.0 + h / 12.0);
        let m01 = h * (ra / 6.0 + h / 12.0);
        let m11 = h * (ra / 3.0 + h / 4.0);

        let lo = (e >= first && e < last).then(|| e - first);
        let hi = (e + 1 >= first && e + 1 < last).then(|| e + 1 - first);

        // Potential blocks by 4-point Gauss–Legendre. Basis functions
        // pinned by the boundary conditions are skipped outright, so the
        // ℓ²/r² factor is never integrated against the hat at r = 0.
        let (mut v00, mut v01, mut v11) = (0.0, 0.0, 0.0);
        for q in 0..4 {
            let r = rbar + 0.5 * h * GL4_X[q];
            let w = 0.5 * h * GL4_W[q] * r * pot(r);
            let p1 = (r - ra) / h;
            let p0 = 1.0 - p1;
            if lo.is_some() {
                v00 += w * p0 * p0;
            }
            if lo.is_some() && hi.is_some() {
                v01 += w * p0 * p1;
            }
            if hi.is_some() {
                v11 += w * p1 * p1;
            }
        }

        if let Some(i) = lo {
            diag_a[i] += k + v00;
            diag_b[i] += m00;
        }
        if let Some(j) = hi {
            diag_a[j] += k + v11;
            diag_b[j] += m11;
        }
        if let (Some(i), Some(_)) = (lo, hi) {
            off_a[i] += -k + v01;
            off_b[i] += m01;
        }
    }

    RadialPencil {
        ell: ch.ell,
        nodes: nodes.to_vec(),
        diag_a,
        off_a,
        diag_b,
        off_b,
    }
}

impl RadialPencil {
    pub fn n_dof(&self) -> usize {
        self.diag_a.len()
    }

    /// Number of discrete eigenvalues below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        sturm::count_below(&self.diag_a, &self.off_a, &self.diag_b, &self.off_b, sigma)
    }

    /// k-th smallest discrete eigenvalue; `lo` must sit below the whole
    /// spectrum (see [`spectral_floor`]).
    pub fn eigenvalue(&self, k: usize, lo: f64) -> Result<f64> {
        if k == 0 || k > self.n_dof() {
            return Err(FluxtubeError::Domain(format!(
                "eigenvalue index {k} outside 1 ..= {}",
                self.n_dof()
            )));
        }
        let r_max = *self.nodes.last().unwrap();
        let mut hi = 1.0 / (r_max * r_max);
        let mut grow = 0;
        while self.count_below(hi) < k {
            hi *= 8.0;
            grow += 1;
            if grow > 400 {
                return Err(FluxtubeError::NonConvergence(format!(
                    "no upper bracket found for eigenvalue #{k}"
                )));
            }
        }
        sturm::kth_eigenvalue(
            &self.diag_a,
            &self.off_a,
            &self.diag_b,
            &self.off_b,
            k,
            lo,
            hi,
            1e-13,
        )
    }
}

/// Strict lower bound on every eigenvalue of the channel operator: the
/// kinetic part is nonnegative and the potential is bounded below by
/// −(g/2)·max eB, so anything below that (minus a 1/R² safety margin)
/// brackets the spectrum from below.
pub fn spectral_floor(profile: &FieldProfile, g: f64) -> f64 {
    let r = profile.r_support();
    -0.5 * g.max(0.0) * profile.eb_max() - 1.0 / (r * r)
}

/// Default mesh: uniform with h = R/200 out to 30 support radii, enough
/// for any state whose decay length is a modest multiple of the support.
pub fn default_grid(profile: &FieldProfile) -> GridSpec {
    let r = profile.r_support();
    GridSpec::Uniform {
        n: 6000,
        r_max: 30.0 * r,
    }
}

/// Threshold below which an eigenvalue counts as negative rather than as
/// discretization noise around zero.
pub fn default_negative_tol(profile: &FieldProfile) -> f64 {
    let r = profile.r_support();
    1e-9 / (r * r)
}

/// Mesh sized for a state of binding-energy magnitude `energy`: the box
/// extends 14 decay lengths past the support (tail mass e^{-28}), and
/// switches from uniform to geometric spacing once that box exceeds
/// 600 support radii. `energy` may come from a variational bound — an
/// underestimate of the binding only enlarges the box, never truncates
/// the state. The spacing here suffices for stable counts; callers that
/// need eigenvalue accuracy beyond ~1e-3 relative should refine from
/// this base (see [`settled_ground_level`]).
pub fn grid_for_energy_scale(profile: &FieldProfile, energy: f64) -> GridSpec {
    let r = profile.r_support();
    let kappa = energy.abs().sqrt().max(2e-59 / r);
    let r_need = r + 14.0 / kappa;
    if r_need <= 30.0 * r {
        default_grid(profile)
    } else if r_need <= 600.0 * r {
        GridSpec::Uniform {
            n: (r_need / (0.005 * r)).ceil() as usize,
            r_max: r_need,
        }
    } else {
        GridSpec::LogRadial {
            r_min: 1e-3 * r,
            r_max: r_need,
            points_per_decade: 400,
        }
    }
}

/// Ground level driven to convergence by mesh doubling.
#[derive(Debug, Clone)]
pub struct SettledLevel {
    /// Ground level on the finest mesh reached.
    pub lambda: f64,
    /// |λ(2h) − λ(h)| / |λ(h)| at that mesh.
    pub doubling_shift_rel: f64,
    /// The coarser of the final mesh pair.
    pub spec: GridSpec,
    /// False when the refinement budget ran out before both requests
    /// were met.
    pub satisfied: bool,
}

/// Refines from `base` until the ground level (a) moves by at most
/// `rel_tol` relative under one further doubling and (b) sits at or
/// below `upper_bound` when one is supplied. A variational energy is a
/// strict upper bound on the true level, while Galerkin levels converge
/// to it strictly from above — so (b) always holds eventually and
/// reaching it is a nontrivial consistency check between the two
/// routes, not a tautology. States whose variational gap is thinner
/// than ~1e-5 relative may exhaust the budget; `satisfied` reports
/// honestly whether both requests were met.
pub fn settled_ground_level(
    ch: &Channel,
    profile: &FieldProfile,
    g: f64,
    upper_bound: Option<f64>,
    rel_tol: f64,
    base: GridSpec,
    max_refine: usize,
) -> Result<SettledLevel> {
    let lo = spectral_floor(profile, g);
    let level_on = |spec: &GridSpec| -> Result<f64> {
        let mesh = RadialGrid::build(spec, profile)?;
        build_radial_operator(ch, profile, g, &mesh).eigenvalue(1, lo)
    };
    let mut spec = base;
    let mut coarse = level_on(&spec)?;
    for round in 0..=max_refine {
        let fine_spec = spec.refined();
        if fine_spec.node_estimate() > 1_900_000 {
            return Ok(SettledLevel {
                lambda: coarse,
                doubling_shift_rel: f64::INFINITY,
                spec,
                satisfied: false,
            });
        }
        let fine = level_on(&fine_spec)?;
        let shift = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
        let ordered = upper_bound.is_none_or(|ub| fine <= ub);
        if (shift <= rel_tol && ordered) || round == max_refine {
            return Ok(SettledLevel {
                lambda: fine,
                doubling_shift_rel: shift,
                spec,
                satisfied: shift <= rel_tol && ordered,
            });
        }
        spec = fine_spec;
        coarse = fine;
    }
    unreachable!("refinement loop returns on its final round");
}

/// Eigenvalue count and lowest levels for one channel.
#[derive(Debug, Clone)]
pub struct ChannelSpectrum {
    pub ell: i64,
    /// Lowest eigenvalues of the refined mesh (up to three, always at
    /// least the ground level).
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues below −tol on the refined mesh.
    pub negative_count: usize,
    /// Node count of the refined mesh that produced the values above.
    pub grid_nodes: usize,
    pub r_max: f64,
    /// Whether the count survived doubling the resolution and enlarging
    /// the box by half; a false value means the mesh has not converged
    /// and the count should not be trusted.
    pub stable: bool,
}

/// Counts eigenvalues below −tol, then repeats on a refined and on an
/// enlarged mesh to flag unconverged counts.
pub fn count_negative(
    ch: &Channel,
    profile: &FieldProfile,
    g: f64,
    tol: f64,
    grid: Option<GridSpec>,
) -> Result<ChannelSpectrum> {
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(FluxtubeError::Domain(format!(
            "negative-count tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    let base = grid.unwrap_or_else(|| default_grid(profile));
    let lo = spectral_floor(profile, g);
    let count_on = |spec: &GridSpec| -> Result<(usize, RadialPencil)> {
        let mesh = RadialGrid::build(spec, profile)?;
        let pen = build_radial_operator(ch, profile, g, &mesh);
        let c = pen.count_below(-tol);
        Ok((c, pen))
    };
    let (c_base, _) = count_on(&base)?;
    let (c_fine, pen_fine) = count_on(&base.refined())?;
    let (c_wide, _) = count_on(&base.extended())?;
    let stable = c_base == c_fine && c_fine == c_wide;
    let negative_count = c_fine;
    let n_levels = negative_count.clamp(1, 3).min(pen_fine.n_dof());
    let mut eigenvalues = Vec::with_capacity(n_levels);
    for k in 1..=n_levels {
        eigenvalues.push(pen_fine.eigenvalue(k, lo)?);
    }
    Ok(ChannelSpectrum {
        ell: ch.ell,
        eigenvalues,
        negative_count,
        grid_nodes: pen_fine.nodes.len(),
        r_max: base.r_max(),
        stable,
    })
}

/// Ground level of one channel on one mesh.
pub fn lowest_eigenvalue(
    ch: &Channel,
    profile: &FieldProfile,
    g: f64,
    spec: &GridSpec,
) -> Result<f64> {
    let mesh = RadialGrid::build(spec, profile)?;
    let pen = build_radial_operator(ch, profile, g, &mesh);
    pen.eigenvalue(1, spectral_floor(profile, g))
}

/// One checked zero mode at g = 2.
#[derive(Debug, Clone)]
pub struct ZeroModeEntry {
    pub ell: i64,
    /// ‖H_ℓ f‖ / ‖f‖ for the sampled analytic mode f = r^ℓ e^{−eφ},
    /// both norms in the r dr measure of the stencil grid.
    pub residual: f64,
    /// Ground level of the discretized channel; nonnegative up to
    /// element-quadrature rounding when g = 2.
    pub lambda_min: f64,
}

#[derive(Debug, Clone)]
pub struct ZeroModeReport {
    pub v: f64,
    pub entries: Vec<ZeroModeEntry>,
}

/// At g = 2 the channel operators factorize and f_ℓ = r^ℓ e^{−eφ(r)}
/// solves H_ℓ f = 0 exactly; it is square-integrable for ℓ < v − 1,
/// giving one threshold mode per ℓ = 0 … ⌈v⌉ − 2. This check samples
/// each mode on a fine uniform grid, applies the second-order stencil
///
/// ```text
/// (H f)_i = −(f_{i+1} − 2f_i + f_{i−1})/h² − (f_{i+1} − f_{i−1})/(2 r_i h) + V_i f_i
/// ```
///
/// and reports the relative residual, plus the finite-element ground
/// level as an independent "no negative energy" statement. At nodes
/// where eB jumps, V is taken as the mean of its one-sided limits — the
/// value for which the stencil stays consistent at a point where f″ has
/// two one-sided values. Field discontinuities are assumed to land on
/// grid nodes, which holds when their radii are small rational multiples
/// of the support radius.
pub fn zero_mode_check_g2(profile: &FieldProfile) -> Result<ZeroModeReport> {
    let v = profile.flux_v();
    let top = (v.ceil() as i64) - 2;
    let mut entries = Vec::new();
    for ell in 0..=top {
        let residual = zero_mode_residual(profile, ell)?;
        let ch = Channel::new(ell, v)?;
        let lambda_min = lowest_eigenvalue(&ch, profile, 2.0, &default_grid(profile))?;
        entries.push(ZeroModeEntry {
            ell,
            residual,
            lambda_min,
        });
    }
    Ok(ZeroModeReport { v, entries })
}

fn zero_mode_residual(profile: &FieldProfile, ell: i64) -> Result<f64> {
    let r_sup = profile.r_support();
    let per_support = 20_000usize;
    let h = r_sup / per_support as f64;
    let n = 30 * per_support;
    let ell_f = ell as f64;
    let f: Vec<f64> = (0..=n)
        .map(|i| {
            let r = i as f64 * h;
            if r == 0.0 {
                if ell == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (ell_f * r.ln() - profile.ephi(r)).exp()
            }
        })
        .collect();
    let eps = 1e-6 * h;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..n {
        let r = i as f64 * h;
        let lap = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h)
            + (f[i + 1] - f[i - 1]) / (2.0 * r * h);
        let d = ell_f / r - profile.ea(r);
        let eb = 0.5 * (profile.eb((r - eps).max(0.0)) + profile.eb(r + eps));
        let t = -lap + (d * d - eb) * f[i];
        num += t * t * r;
        den += f[i] * f[i] * r;
    }
    if den == 0.0 {
        return Err(FluxtubeError::Domain(format!(
            "zero mode for ell = {ell} vanished on the residual grid"
        )));
    }
    Ok((num / den).sqrt())
}

/// Spectral consistency under r → λr, B → B/λ²: the flux is unchanged
/// and every energy must map to E/λ².
#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub scale: f64,
    /// max over channels of |λ₁ − scale²·λ₁(scaled)| / |λ₁|.
    pub max_rel_dev: f64,
    pub counts_match: bool,
}

pub fn scaling_check(profile: &FieldProfile, g: f64, scale: f64) -> Result<ScalingReport> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(FluxtubeError::Domain(format!(
            "scale factor must be positive and finite, got {scale}"
        )));
    }
    let scaled = profile.spatially_scaled(scale)?;
    let v = profile.flux_v();
    let floor = (v.floor() as i64).max(0);
    let tol = default_negative_tol(profile);
    let tol_s = default_negative_tol(&scaled);
    let lo = spectral_floor(profile, g);
    let lo_s = spectral_floor(&scaled, g);
    let mut max_rel_dev = 0.0_f64;
    let mut counts_match = true;
    for ell in 0..=floor {
        let ch = Channel::new(ell, v)?;
        let mesh = RadialGrid::build(&default_grid(profile), profile)?;
        let pen = build_radial_operator(&ch, profile, g, &mesh);
        let mesh_s = RadialGrid::build(&default_grid(&scaled), &scaled)?;
        let pen_s = build_radial_operator(&ch, &scaled, g, &mesh_s);
        let l1 = pen.eigenvalue(1, lo)?;
        let l2 = pen_s.eigenvalue(1, lo_s)?;
        let dev = (l1 - scale * scale * l2).abs() / l1.abs().max(tol);
        max_rel_dev = max_rel_dev.max(dev);
        if pen.count_below(-tol) != pen_s.count_below(-tol_s) {
            counts_match = false;
        }
    }
    Ok(ScalingReport {
        scale,
        max_rel_dev,
        counts_match,
    })
}
