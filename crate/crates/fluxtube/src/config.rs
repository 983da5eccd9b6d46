//! Run configuration: a TOML file with `[run]`, `[profile]` and optional
//! `[tolerances]`, `[grid]`, `[output]` sections, validated into a form
//! the runner can execute without further checks.

use crate::error::{FluxtubeError, Result};
use crate::fields::FieldProfile;
use crate::spectrum::GridSpec;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Certify,
    Verify,
    Sweep,
    ZeroModes,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "certify" => Ok(Mode::Certify),
            "verify" => Ok(Mode::Verify),
            "sweep" => Ok(Mode::Sweep),
            "zero-modes" => Ok(Mode::ZeroModes),
            other => Err(FluxtubeError::Config(format!(
                "unknown mode {other:?}; expected certify, verify, sweep or zero-modes"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Certify => "certify",
            Mode::Verify => "verify",
            Mode::Sweep => "sweep",
            Mode::ZeroModes => "zero-modes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Full,
    Both,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<OutputFormat> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "full" => Ok(OutputFormat::Full),
            "both" => Ok(OutputFormat::Both),
            other => Err(FluxtubeError::Config(format!(
                "unknown output format {other:?}; expected csv, full or both"
            ))),
        }
    }
}

/// Raw deserialization targets; field-level validation happens in
/// [`RunConfig::validate`] so messages can name the offending key.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    run: RawRun,
    profile: RawProfile,
    #[serde(default)]
    tolerances: RawTolerances,
    #[serde(default)]
    grid: Option<RawGrid>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mode: String,
    g: Option<f64>,
    /// [lo, hi, count] inclusive sweep over g.
    g_range: Option<(f64, f64, usize)>,
    /// [lo, hi, count] inclusive sweep over the profile amplitude.
    b0_range: Option<(f64, f64, usize)>,
    /// Channels beyond ℓ = ⌊v⌋ to probe in certify mode (reported, never
    /// asserted).
    probe_extra: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    family: String,
    r_support: f64,
    b0: Option<f64>,
    flux_v: Option<f64>,
    r_inner: Option<f64>,
    file: Option<PathBuf>,
    charge: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    negative: Option<f64>,
    stability_rel: Option<f64>,
    refine_budget: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    kind: String,
    n: Option<usize>,
    r_max: Option<f64>,
    r_min: Option<f64>,
    points_per_decade: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    format: Option<String>,
}

/// Validated run plan.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub profile: FieldProfile,
    /// (b0, g) pairs to run, already expanded from ranges; ordering is
    /// the report ordering. Single-point modes hold exactly one entry.
    pub points: Vec<SweepPoint>,
    pub probe_extra: u32,
    pub negative_tol: Option<f64>,
    pub stability_rel: f64,
    pub refine_budget: usize,
    pub grid_override: Option<GridSpec>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub b0: f64,
    pub g: f64,
}

fn linspace(lo: f64, hi: f64, count: usize, what: &str) -> Result<Vec<f64>> {
    if count == 0 || count > 100_000 {
        return Err(FluxtubeError::Config(format!(
            "run.{what}: count must be in 1..=100000, got {count}"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(FluxtubeError::Config(format!(
            "run.{what}: bounds must be finite with lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

fn load_tabulated_samples(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        FluxtubeError::Config(format!("profile.file: cannot read {}: {e}", path.display()))
    })?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (r, eb) = match (cols.next(), cols.next(), cols.next()) {
            (Some(r), Some(eb), None) => (r, eb),
            _ => {
                return Err(FluxtubeError::Config(format!(
                    "profile.file line {}: expected `r, eb`",
                    idx + 1
                )))
            }
        };
        let parse = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| {
                FluxtubeError::Config(format!(
                    "profile.file line {}: bad {what} value {s:?}",
                    idx + 1
                ))
            })
        };
        samples.push((parse(r, "radius")?, parse(eb, "field")?));
    }
    Ok(samples)
}

fn build_profile(raw: &RawProfile, b0: f64, config_dir: &Path) -> Result<FieldProfile> {
    let charge = raw.charge.unwrap_or(1.0);
    match raw.family.as_str() {
        "uniform-disk" => FieldProfile::uniform_disk(raw.r_support, b0, charge),
        "annulus" => {
            let r_inner = raw.r_inner.ok_or_else(|| {
                FluxtubeError::Config("profile.r_inner is required for family = annulus".into())
            })?;
            FieldProfile::annulus(r_inner, raw.r_support, b0, charge)
        }
        "truncated-parabola" => FieldProfile::truncated_parabola(raw.r_support, b0, charge),
        "tabulated" => {
            let rel = raw.file.as_ref().ok_or_else(|| {
                FluxtubeError::Config("profile.file is required for family = tabulated".into())
            })?;
            let path = if rel.is_absolute() { rel.clone() } else { config_dir.join(rel) };
            let samples = load_tabulated_samples(&path)?;
            FieldProfile::tabulated(&samples, charge)
        }
        other => Err(FluxtubeError::Config(format!(
            "profile.family {other:?}: expected uniform-disk, annulus, truncated-parabola or tabulated"
        ))),
    }
}

impl RunConfig {
    /// Parses and validates a config file. `config_path` also anchors
    /// relative `profile.file` references.
    pub fn load(config_path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(config_path).map_err(|e| {
            FluxtubeError::Config(format!("cannot read {}: {e}", config_path.display()))
        })?;
        let raw: RawConfig = toml::from_str(&text)
            .map_err(|e| FluxtubeError::Config(format!("{}: {e}", config_path.display())))?;
        let config_dir = config_path.parent().unwrap_or(Path::new("."));
        Self::validate(raw, config_dir)
    }

    fn validate(raw: RawConfig, config_dir: &Path) -> Result<RunConfig> {
        let mode = Mode::parse(&raw.run.mode)?;

        if raw.run.g.is_some() && raw.run.g_range.is_some() {
            return Err(FluxtubeError::Config(
                "run.g and run.g_range are mutually exclusive".into(),
            ));
        }
        if mode != Mode::Sweep && (raw.run.g_range.is_some() || raw.run.b0_range.is_some()) {
            return Err(FluxtubeError::Config(format!(
                "run.g_range / run.b0_range require mode = sweep, not {}",
                mode.name()
            )));
        }
        if raw.run.probe_extra.is_some() && mode != Mode::Certify {
            return Err(FluxtubeError::Config(
                "run.probe_extra applies to certify mode only".into(),
            ));
        }

        if raw.profile.b0.is_some() == raw.profile.flux_v.is_some() {
            return Err(FluxtubeError::Config(
                "exactly one of profile.b0 and profile.flux_v must be set".into(),
            ));
        }
        if raw.profile.family.as_str() == "tabulated" && raw.profile.b0.is_none() {
            return Err(FluxtubeError::Config(
                "tabulated profiles take their amplitude from the samples; set profile.b0 = 1.0 \
                 to use them as-is or rescale via profile.flux_v"
                    .into(),
            ));
        }

        // Resolve the base amplitude; flux_v rescales a unit-amplitude
        // profile so every family states flux the same way.
        let base_b0 = match (raw.profile.b0, raw.profile.flux_v) {
            (Some(b0), None) => b0,
            (None, Some(v)) => {
                if !(v > 0.0) {
                    return Err(FluxtubeError::Config(format!(
                        "profile.flux_v must be positive, got {v}"
                    )));
                }
                let unit = build_profile(&raw.profile, 1.0, config_dir)?;
                unit.scaled_to_flux(v)?.b0()
            }
            _ => unreachable!("exclusivity checked above"),
        };
        let profile = build_profile(&raw.profile, base_b0, config_dir)?;

        let gs: Vec<f64> = match (raw.run.g, raw.run.g_range) {
            (Some(g), None) => vec![g],
            (None, Some((lo, hi, count))) => linspace(lo, hi, count, "g_range")?,
            (None, None) => {
                return Err(FluxtubeError::Config("run.g or run.g_range is required".into()))
            }
            _ => unreachable!("exclusivity checked above"),
        };
        for &g in &gs {
            match mode {
                Mode::ZeroModes if g != 2.0 => {
                    return Err(FluxtubeError::Config(format!(
                        "zero-modes mode requires g = 2 exactly, got {g}"
                    )))
                }
                Mode::ZeroModes => {}
                _ if g <= 2.0 => {
                    return Err(FluxtubeError::Config(format!(
                        "mode {} requires g > 2, got {g}",
                        mode.name()
                    )))
                }
                _ => {}
            }
        }

        let b0s: Vec<f64> = match raw.run.b0_range {
            Some((lo, hi, count)) => {
                if raw.profile.flux_v.is_some() {
                    return Err(FluxtubeError::Config(
                        "run.b0_range cannot be combined with profile.flux_v".into(),
                    ));
                }
                linspace(lo, hi, count, "b0_range")?
            }
            None => vec![base_b0],
        };
        for &b0 in &b0s {
            build_profile(&raw.profile, b0, config_dir)?;
        }

        let mut points = Vec::with_capacity(b0s.len() * gs.len());
        for &b0 in &b0s {
            for &g in &gs {
                points.push(SweepPoint { b0, g });
            }
        }

        if let Some(tol) = raw.tolerances.negative {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(FluxtubeError::Config(format!(
                    "tolerances.negative must be positive and finite, got {tol}"
                )));
            }
        }
        let stability_rel = raw.tolerances.stability_rel.unwrap_or(1e-4);
        if !(stability_rel > 0.0 && stability_rel < 1.0) {
            return Err(FluxtubeError::Config(format!(
                "tolerances.stability_rel must lie in (0, 1), got {stability_rel}"
            )));
        }
        let refine_budget = raw.tolerances.refine_budget.unwrap_or(5);
        if refine_budget > 8 {
            return Err(FluxtubeError::Config(format!(
                "tolerances.refine_budget above 8 would exceed the node cap, got {refine_budget}"
            )));
        }

        let grid_override = match raw.grid {
            None => None,
            Some(gr) => Some(match gr.kind.as_str() {
                "uniform" => {
                    let n = gr.n.ok_or_else(|| {
                        FluxtubeError::Config("grid.n is required for kind = uniform".into())
                    })?;
                    let r_max = gr.r_max.ok_or_else(|| {
                        FluxtubeError::Config("grid.r_max is required for kind = uniform".into())
                    })?;
                    if gr.r_min.is_some() || gr.points_per_decade.is_some() {
                        return Err(FluxtubeError::Config(
                            "grid.r_min / grid.points_per_decade do not apply to kind = uniform"
                                .into(),
                        ));
                    }
                    GridSpec::Uniform { n, r_max }
                }
                "log" => {
                    let r_min = gr.r_min.ok_or_else(|| {
                        FluxtubeError::Config("grid.r_min is required for kind = log".into())
                    })?;
                    let r_max = gr.r_max.ok_or_else(|| {
                        FluxtubeError::Config("grid.r_max is required for kind = log".into())
                    })?;
                    let points_per_decade = gr.points_per_decade.ok_or_else(|| {
                        FluxtubeError::Config(
                            "grid.points_per_decade is required for kind = log".into(),
                        )
                    })?;
                    if gr.n.is_some() {
                        return Err(FluxtubeError::Config(
                            "grid.n does not apply to kind = log".into(),
                        ));
                    }
                    GridSpec::LogRadial { r_min, r_max, points_per_decade }
                }
                other => {
                    return Err(FluxtubeError::Config(format!(
                        "grid.kind {other:?}: expected uniform or log"
                    )))
                }
            }),
        };

        let format = match raw.output.format.as_deref() {
            None => OutputFormat::Both,
            Some(s) => OutputFormat::parse(s)?,
        };

        Ok(RunConfig {
            mode,
            profile,
            points,
            probe_extra: raw.run.probe_extra.unwrap_or(0),
            negative_tol: raw.tolerances.negative,
            stability_rel,
            refine_budget,
            grid_override,
            out_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("fluxtube_out")),
            format,
        })
    }

    /// Profile rebuilt at a sweep amplitude; `b0` equal to the base
    /// amplitude returns the validated profile unchanged. Amplitude is a
    /// pure multiplicative scale on eB in every family, so rescaling the
    /// flux by the amplitude ratio reproduces the target profile.
    pub fn profile_at(&self, b0: f64) -> Result<FieldProfile> {
        if b0 == self.profile.b0() {
            return Ok(self.profile.clone());
        }
        let target_v = self.profile.flux_v() * b0 / self.profile.b0();
        self.profile.scaled_to_flux(target_v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn parse(text: &str) -> Result<RunConfig> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| FluxtubeError::Config(format!("inline: {e}")))?;
        RunConfig::validate(raw, Path::new("."))
    }

    const BASE: &str = r#"
        [run]
        mode = "certify"
        g = 2.1
        [profile]
        family = "uniform-disk"
        r_support = 1.0
        b0 = 4.0
    "#;

    #[test]
    fn minimal_certify_config_parses() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.mode, Mode::Certify);
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.points[0].g, 2.1);
        assert_eq!(c.profile.flux_v(), 2.0);
        assert_eq!(c.format, OutputFormat::Both);
        assert_eq!(c.out_dir, PathBuf::from("fluxtube_out"));
    }

    #[test]
    fn flux_v_replaces_amplitude() {
        let c = parse(
            r#"
            [run]
            mode = "certify"
            g = 2.1
            [profile]
            family = "truncated-parabola"
            r_support = 2.0
            flux_v = 2.5
        "#,
        )
        .unwrap();
        assert!((c.profile.flux_v() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn malformed_toml_reports_config_error() {
        let err = parse("[run]\nmode = \"certify\"\ng = 2.c\n").unwrap_err();
        assert!(matches!(err, FluxtubeError::Config(_)), "{err}");
    }

    #[test]
    fn mode_preconditions_on_g() {
        let at_two = BASE.replace("g = 2.1", "g = 2.0");
        let err = parse(&at_two).unwrap_err();
        assert!(matches!(err, FluxtubeError::Config(_)), "{err}");

        let zm_ok = r#"
            [run]
            mode = "zero-modes"
            g = 2.0
            [profile]
            family = "uniform-disk"
            r_support = 1.0
            b0 = 7.0
        "#;
        assert_eq!(parse(zm_ok).unwrap().mode, Mode::ZeroModes);

        let zm_bad = zm_ok.replace("g = 2.0", "g = 2.1");
        assert!(parse(&zm_bad).is_err());
    }

    #[test]
    fn sweep_points_expand_in_document_order() {
        let c = parse(
            r#"
            [run]
            mode = "sweep"
            g_range = [2.1, 2.5, 3]
            b0_range = [1.0, 2.0, 2]
            [profile]
            family = "uniform-disk"
            r_support = 1.0
            b0 = 1.0
        "#,
        )
        .unwrap();
        let pts: Vec<(f64, f64)> = c.points.iter().map(|p| (p.b0, p.g)).collect();
        assert_eq!(
            pts,
            vec![
                (1.0, 2.1),
                (1.0, 2.3),
                (1.0, 2.5),
                (2.0, 2.1),
                (2.0, 2.3),
                (2.0, 2.5)
            ]
        );
    }

    #[test]
    fn ranges_rejected_outside_sweep_mode() {
        let bad = format!("{}\n", BASE).replace("g = 2.1", "g_range = [2.1, 2.5, 3]");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{BASE}\nnonsense = 1\n");
        assert!(parse(&bad).is_err());
        let bad2 = BASE.replace("b0 = 4.0", "b0 = 4.0\ntypo_key = 2");
        assert!(parse(&bad2).is_err());
    }

    #[test]
    fn annulus_requires_inner_radius() {
        let bad = BASE.replace("family = \"uniform-disk\"", "family = \"annulus\"");
        let err = parse(&bad).unwrap_err();
        assert!(err.to_string().contains("r_inner"), "{err}");
    }

    #[test]
    fn tabulated_profile_loads_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# r, eb").unwrap();
        writeln!(f, "0.0, 3.0").unwrap();
        writeln!(f, "0.5, 2.0").unwrap();
        writeln!(f, "1.0, 0.0").unwrap();
        drop(f);

        let text = r#"
            [run]
            mode = "certify"
            g = 2.1
            [profile]
            family = "tabulated"
            r_support = 1.0
            b0 = 1.0
            file = "field.csv"
        "#;
        let raw: RawConfig = toml::from_str(text).unwrap();
        let c = RunConfig::validate(raw, dir.path()).unwrap();
        assert!(c.profile.flux_v() > 0.0);
    }

    #[test]
    fn grid_override_field_mismatch_is_caught() {
        let bad = format!(
            "{BASE}\n[grid]\nkind = \"uniform\"\nn = 4000\nr_max = 30.0\npoints_per_decade = 100\n"
        );
        assert!(parse(&bad).is_err());
    }
}
