//! Executes a validated [`RunConfig`]: dispatches sweep points to a
//! worker pool, assembles rows in a scheduling-independent order, and
//! reduces per-row outcomes to the process exit status.

use crate::config::{Mode, RunConfig, SweepPoint};
use crate::fields::FieldProfile;
use crate::report::{fmt_f64, Report, Row};
use crate::spectrum::{
    count_negative, default_negative_tol, grid_for_energy_scale, settled_ground_level, GridSpec,
};
use crate::variational::{certify_all, extra_channel_probe, Channel, ProbeOutcome,
    VariationalCertificate};
use rayon::prelude::*;

/// Worst row outcome of a run, in exit-code order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunStatus {
    /// Every check passed (exit 0).
    Success,
    /// A theorem-level expectation failed: a guaranteed channel without a
    /// proven bound or a negative count below 1 (exit 1).
    TheoremFailure,
    /// A computation could not complete and its row records why (exit 3).
    NumericalFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::TheoremFailure => 1,
            RunStatus::NumericalFailure => 3,
        }
    }

    fn worst(self, other: RunStatus) -> RunStatus {
        self.max(other)
    }
}

pub struct RunOutcome {
    pub report: Report,
    pub status: RunStatus,
}

fn grid_desc(spec: &Option<GridSpec>) -> String {
    match spec {
        None => "adaptive".into(),
        Some(GridSpec::Uniform { n, r_max }) => {
            format!("uniform n={n} r_max={}", fmt_f64(*r_max))
        }
        Some(GridSpec::LogRadial { r_min, r_max, points_per_decade }) => format!(
            "log r_min={} r_max={} points_per_decade={points_per_decade}",
            fmt_f64(*r_min),
            fmt_f64(*r_max)
        ),
    }
}

fn meta_for(config: &RunConfig) -> Vec<(String, String)> {
    let p = &config.profile;
    vec![
        ("version".into(), crate::VERSION.into()),
        ("mode".into(), config.mode.name().into()),
        ("family".into(), p.family_name().into()),
        ("r_support".into(), fmt_f64(p.r_support())),
        ("charge".into(), fmt_f64(p.charge())),
        ("base_b0".into(), fmt_f64(p.b0())),
        ("base_flux_v".into(), fmt_f64(p.flux_v())),
        ("points".into(), config.points.len().to_string()),
        ("probe_extra".into(), config.probe_extra.to_string()),
        (
            "negative_tol".into(),
            match config.negative_tol {
                Some(t) => fmt_f64(t),
                None => "adaptive".into(),
            },
        ),
        ("stability_rel".into(), fmt_f64(config.stability_rel)),
        ("refine_budget".into(), config.refine_budget.to_string()),
        ("grid".into(), grid_desc(&config.grid_override)),
    ]
}

/// Template with the per-point echo columns filled and everything else
/// empty.
fn blank_row(config: &RunConfig, profile: &FieldProfile, g: f64, ell: i64) -> Row {
    let flux = profile.total_flux_v();
    Row {
        mode: config.mode.name().into(),
        family: profile.family_name().into(),
        r_support: profile.r_support(),
        b0: profile.b0(),
        charge: profile.charge(),
        g,
        v: flux.v,
        v_floor: flux.floor,
        v_frac: flux.frac,
        ell,
        nu: None,
        alpha: None,
        mu: None,
        coeff_a: None,
        coeff_b: None,
        e_var: None,
        bound_proven: None,
        lambda_min: None,
        negative_count: None,
        spectrum_stable: None,
        residual: None,
        status: "ok".into(),
    }
}

fn fill_certificate(row: &mut Row, cert: &VariationalCertificate) {
    row.nu = Some(cert.ansatz.order);
    row.alpha = Some(cert.ansatz.alpha);
    row.mu = Some(cert.ansatz.mu);
    row.coeff_a = Some(cert.ansatz.a);
    row.coeff_b = Some(cert.ansatz.b);
    row.e_var = Some(cert.e_var);
    row.bound_proven = Some(cert.bound_proven);
}

/// Negative-count tolerance for one channel: an explicit override wins;
/// otherwise tighten the scale-aware default down to a tenth of the
/// variational energy so near-threshold states are not cut off.
fn channel_tol(config: &RunConfig, profile: &FieldProfile, e_var: Option<f64>) -> f64 {
    if let Some(t) = config.negative_tol {
        return t;
    }
    let base = default_negative_tol(profile);
    match e_var {
        Some(e) => base.min(0.1 * e.abs()),
        None => base,
    }
}

fn oracle_columns(
    row: &mut Row,
    config: &RunConfig,
    profile: &FieldProfile,
    ch: &Channel,
    g: f64,
    cert: Option<&VariationalCertificate>,
) -> RunStatus {
    let base = match (&config.grid_override, cert) {
        (Some(spec), _) => *spec,
        (None, Some(c)) => grid_for_energy_scale(profile, c.e_var),
        (None, None) => grid_for_energy_scale(profile, 0.0),
    };
    let tol = channel_tol(config, profile, cert.map(|c| c.e_var));
    let spectrum = match count_negative(ch, profile, g, tol, Some(base)) {
        Ok(s) => s,
        Err(e) => {
            row.status = format!("error: {e}");
            return RunStatus::NumericalFailure;
        }
    };
    row.negative_count = Some(spectrum.negative_count as u32);
    let settled = match settled_ground_level(
        ch,
        profile,
        g,
        cert.map(|c| c.e_var),
        config.stability_rel,
        base,
        config.refine_budget,
    ) {
        Ok(s) => s,
        Err(e) => {
            row.status = format!("error: {e}");
            return RunStatus::NumericalFailure;
        }
    };
    row.lambda_min = Some(settled.lambda);
    row.spectrum_stable = Some(spectrum.stable && settled.satisfied);
    if spectrum.negative_count < 1 {
        row.status = "failed: no negative level resolved (expected >= 1)".into();
        return RunStatus::TheoremFailure;
    }
    RunStatus::Success
}

fn run_point(config: &RunConfig, point: SweepPoint) -> (Vec<Row>, RunStatus) {
    let profile = match config.profile_at(point.b0) {
        Ok(p) => p,
        Err(e) => {
            let mut row = blank_row(config, &config.profile, point.g, 0);
            row.b0 = point.b0;
            row.status = format!("error: {e}");
            return (vec![row], RunStatus::NumericalFailure);
        }
    };
    let g = point.g;
    let mut rows = Vec::new();
    let mut status = RunStatus::Success;

    match config.mode {
        Mode::Certify | Mode::Sweep | Mode::Verify => {
            for (ch, outcome) in certify_all(&profile, g) {
                let mut row = blank_row(config, &profile, g, ch.ell);
                let cert = match outcome {
                    Ok(c) => {
                        fill_certificate(&mut row, &c);
                        if c.bound_proven {
                            Some(c)
                        } else {
                            row.status = "failed: energy margin not met".into();
                            status = status.worst(RunStatus::TheoremFailure);
                            Some(c)
                        }
                    }
                    Err(e) => {
                        row.status = format!("error: {e}");
                        status = status.worst(RunStatus::NumericalFailure);
                        None
                    }
                };
                if config.mode != Mode::Certify {
                    let s = oracle_columns(
                        &mut row,
                        config,
                        &profile,
                        &ch,
                        g,
                        cert.as_ref(),
                    );
                    status = status.worst(s);
                }
                rows.push(row);
            }
            let v_floor = profile.total_flux_v().floor.max(0);
            for ell in v_floor + 1..=v_floor + config.probe_extra as i64 {
                let mut row = blank_row(config, &profile, g, ell);
                match extra_channel_probe(&profile, g, ell) {
                    Ok(ProbeOutcome::Certified(c)) => {
                        fill_certificate(&mut row, &c);
                        row.status = "probe".into();
                    }
                    Ok(ProbeOutcome::NotProven { reason }) => {
                        row.status = format!("unproven: {reason}");
                    }
                    Err(e) => {
                        row.status = format!("unproven: {e}");
                    }
                }
                rows.push(row);
            }
        }
        Mode::ZeroModes => match crate::spectrum::zero_mode_check_g2(&profile) {
            Ok(rep) => {
                let r2 = profile.r_support() * profile.r_support();
                let residual_bound = 1e-5 * rep.v / r2;
                let level_floor = -1e-9 / r2;
                for entry in rep.entries {
                    let mut row = blank_row(config, &profile, g, entry.ell);
                    row.residual = Some(entry.residual);
                    row.lambda_min = Some(entry.lambda_min);
                    if entry.residual >= residual_bound {
                        row.status = format!(
                            "failed: zero-mode residual {} above {}",
                            fmt_f64(entry.residual),
                            fmt_f64(residual_bound)
                        );
                        status = status.worst(RunStatus::TheoremFailure);
                    } else if entry.lambda_min < level_floor {
                        row.status = format!(
                            "failed: negative level {} at g = 2",
                            fmt_f64(entry.lambda_min)
                        );
                        status = status.worst(RunStatus::TheoremFailure);
                    }
                    rows.push(row);
                }
            }
            Err(e) => {
                let mut row = blank_row(config, &profile, g, 0);
                row.status = format!("error: {e}");
                status = RunStatus::NumericalFailure;
                rows.push(row);
            }
        },
    }
    (rows, status)
}

/// Runs every sweep point and assembles the report. Points execute on
/// the current rayon pool; rows are reordered afterwards (ascending ℓ,
/// then sweep position), so scheduling cannot leak into the output.
pub fn run(config: &RunConfig) -> RunOutcome {
    let results: Vec<(Vec<Row>, RunStatus)> = config
        .points
        .par_iter()
        .map(|&point| run_point(config, point))
        .collect();

    let mut status = RunStatus::Success;
    let mut rows = Vec::new();
    for (idx, (point_rows, point_status)) in results.into_iter().enumerate() {
        status = status.worst(point_status);
        for row in point_rows {
            rows.push((row.ell, idx, rows.len(), row));
        }
    }
    rows.sort_by_key(|&(ell, idx, seq, _)| (ell, idx, seq));
    RunOutcome {
        report: Report {
            meta: meta_for(config),
            rows: rows.into_iter().map(|(_, _, _, r)| r).collect(),
        },
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::OutputFormat;
    use std::path::PathBuf;

    fn config_for(mode: Mode, profile: FieldProfile, points: Vec<SweepPoint>) -> RunConfig {
        RunConfig {
            mode,
            profile,
            points,
            probe_extra: 0,
            negative_tol: None,
            stability_rel: 1e-4,
            refine_budget: 5,
            grid_override: None,
            out_dir: PathBuf::from("unused"),
            format: OutputFormat::Both,
        }
    }

    #[test]
    fn certify_disk_produces_proven_rows() {
        let p = FieldProfile::uniform_disk(1.0, 4.0, 1.0).unwrap();
        let config = config_for(
            Mode::Certify,
            p,
            vec![SweepPoint { b0: 4.0, g: 2.1 }],
        );
        let out = run(&config);
        assert_eq!(out.status, RunStatus::Success);
        assert_eq!(out.report.rows.len(), 3);
        for (i, row) in out.report.rows.iter().enumerate() {
            assert_eq!(row.ell, i as i64);
            assert_eq!(row.bound_proven, Some(true), "ell = {i}");
            assert!(row.e_var.unwrap() < 0.0);
            assert_eq!(row.status, "ok");
            assert!(row.lambda_min.is_none(), "certify mode must not run the eigensolver");
        }
    }

    #[test]
    fn verify_fills_oracle_columns_and_orders_them_below_e_var() {
        let p = FieldProfile::uniform_disk(1.0, 4.0, 1.0).unwrap();
        let config = config_for(
            Mode::Verify,
            p,
            vec![SweepPoint { b0: 4.0, g: 2.1 }],
        );
        let out = run(&config);
        assert_eq!(out.status, RunStatus::Success);
        for row in &out.report.rows {
            assert!(row.negative_count.unwrap() >= 1);
            assert_eq!(row.spectrum_stable, Some(true));
            assert!(row.lambda_min.unwrap() <= row.e_var.unwrap());
        }
    }

    #[test]
    fn probe_rows_are_flagged_not_asserted() {
        let p = FieldProfile::uniform_disk(1.0, 4.0, 1.0).unwrap();
        let mut config = config_for(
            Mode::Certify,
            p,
            vec![SweepPoint { b0: 4.0, g: 2.1 }],
        );
        config.probe_extra = 2;
        let out = run(&config);
        assert_eq!(out.status, RunStatus::Success, "probes must not affect the exit status");
        assert_eq!(out.report.rows.len(), 5);
        for row in &out.report.rows[3..] {
            assert!(
                row.status == "probe" || row.status.starts_with("unproven:"),
                "unexpected probe status {:?}",
                row.status
            );
        }
    }

    #[test]
    fn sweep_rows_sort_by_channel_then_point() {
        let p = FieldProfile::uniform_disk(1.0, 5.0, 1.0).unwrap();
        let config = config_for(
            Mode::Sweep,
            p,
            vec![
                SweepPoint { b0: 5.0, g: 2.3 },
                SweepPoint { b0: 5.0, g: 2.7 },
            ],
        );
        let out = run(&config);
        assert_eq!(out.status, RunStatus::Success);
        let key: Vec<(i64, String)> = out
            .report
            .rows
            .iter()
            .map(|r| (r.ell, fmt_f64(r.g)))
            .collect();
        let mut sorted = key.clone();
        sorted.sort();
        assert_eq!(key, sorted);
        // g-monotonicity of the ground level within each channel
        for ell in 0..=2_i64 {
            let levels: Vec<f64> = out
                .report
                .rows
                .iter()
                .filter(|r| r.ell == ell)
                .map(|r| r.lambda_min.unwrap())
                .collect();
            assert_eq!(levels.len(), 2);
            assert!(
                levels[1] <= levels[0],
                "ell = {ell}: λ_min must not rise with g: {levels:?}"
            );
        }
    }

    #[test]
    fn zero_mode_run_reports_per_mode_rows() {
        let p = FieldProfile::uniform_disk(1.0, 7.0, 1.0).unwrap();
        let config = config_for(
            Mode::ZeroModes,
            p,
            vec![SweepPoint { b0: 7.0, g: 2.0 }],
        );
        let out = run(&config);
        assert_eq!(out.status, RunStatus::Success);
        assert_eq!(
            out.report.rows.iter().map(|r| r.ell).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        for row in &out.report.rows {
            assert!(row.residual.unwrap() < 1e-5 * 3.5);
            assert!(row.e_var.is_none());
        }
    }

    #[test]
    fn unresolvable_channel_yields_numerical_failure_status() {
        // v = 1 at the physical electron g: the ℓ = 1 matching root
        // lies below the f64 floor, an honest per-row error.
        let p = FieldProfile::uniform_disk(1.0, 2.0, 1.0).unwrap();
        let config = config_for(
            Mode::Certify,
            p,
            vec![SweepPoint { b0: 2.0, g: 2.0023 }],
        );
        let out = run(&config);
        assert_eq!(out.status, RunStatus::NumericalFailure);
        assert_eq!(out.report.rows.len(), 2);
        assert_eq!(out.report.rows[0].status, "ok");
        assert!(out.report.rows[1].status.starts_with("error:"));
    }
}
