//! Report assembly and serialization: one row per (sweep point,
//! channel), emitted as CSV and as a structured full dump. Both formats
//! are deterministic — identical runs produce identical bytes — so
//! reports can be diffed and the dump round-trips through its parser.

use crate::error::{FluxtubeError, Result};

/// Everything a single channel run can produce. Fields that a mode does
/// not compute stay `None` and serialize as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub mode: String,
    pub family: String,
    pub r_support: f64,
    pub b0: f64,
    pub charge: f64,
    pub g: f64,
    pub v: f64,
    pub v_floor: i64,
    pub v_frac: f64,
    pub ell: i64,
    pub nu: Option<f64>,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub coeff_a: Option<f64>,
    pub coeff_b: Option<f64>,
    pub e_var: Option<f64>,
    pub bound_proven: Option<bool>,
    pub lambda_min: Option<f64>,
    pub negative_count: Option<u32>,
    pub spectrum_stable: Option<bool>,
    pub residual: Option<f64>,
    /// "ok", "probe", "unproven: …" or "error: …".
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Echoed configuration and resolved defaults, in emission order.
    pub meta: Vec<(String, String)>,
    pub rows: Vec<Row>,
}

pub const CSV_HEADER: &str = "mode,family,r_support,b0,charge,g,v,v_floor,v_frac,ell,nu,alpha,\
                              mu,coeff_a,coeff_b,e_var,bound_proven,lambda_min,negative_count,\
                              spectrum_stable,residual,status";

/// 15 significant digits; enough to reproduce any f64 the pipeline
/// compares against at its tolerances, short enough to stay readable.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.14e}")
}

fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl Row {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mode,
            self.family,
            fmt_f64(self.r_support),
            fmt_f64(self.b0),
            fmt_f64(self.charge),
            fmt_f64(self.g),
            fmt_f64(self.v),
            self.v_floor,
            fmt_f64(self.v_frac),
            self.ell,
            fmt_opt_f64(self.nu),
            fmt_opt_f64(self.alpha),
            fmt_opt_f64(self.mu),
            fmt_opt_f64(self.coeff_a),
            fmt_opt_f64(self.coeff_b),
            fmt_opt_f64(self.e_var),
            fmt_opt(self.bound_proven),
            fmt_opt_f64(self.lambda_min),
            fmt_opt(self.negative_count),
            fmt_opt(self.spectrum_stable),
            fmt_opt_f64(self.residual),
            self.status,
        )
    }
}

pub fn to_csv(report: &Report) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

fn push_kv(out: &mut String, key: &str, value: &str) {
    out.push_str(key);
    out.push_str(" = ");
    out.push_str(value);
    out.push('\n');
}

/// Structured full dump: a `[meta]` section followed by one `[[row]]`
/// section per row, `key = value` per line, omitting keys a row did not
/// compute.
pub fn to_full(report: &Report) -> String {
    let mut out = String::from("[meta]\n");
    for (k, v) in &report.meta {
        push_kv(&mut out, k, v);
    }
    for row in &report.rows {
        out.push_str("\n[[row]]\n");
        push_kv(&mut out, "mode", &row.mode);
        push_kv(&mut out, "family", &row.family);
        push_kv(&mut out, "r_support", &fmt_f64(row.r_support));
        push_kv(&mut out, "b0", &fmt_f64(row.b0));
        push_kv(&mut out, "charge", &fmt_f64(row.charge));
        push_kv(&mut out, "g", &fmt_f64(row.g));
        push_kv(&mut out, "v", &fmt_f64(row.v));
        push_kv(&mut out, "v_floor", &row.v_floor.to_string());
        push_kv(&mut out, "v_frac", &fmt_f64(row.v_frac));
        push_kv(&mut out, "ell", &row.ell.to_string());
        let mut opt = |key: &str, val: Option<String>| {
            if let Some(v) = val {
                push_kv(&mut out, key, &v);
            }
        };
        opt("nu", row.nu.map(fmt_f64));
        opt("alpha", row.alpha.map(fmt_f64));
        opt("mu", row.mu.map(fmt_f64));
        opt("coeff_a", row.coeff_a.map(fmt_f64));
        opt("coeff_b", row.coeff_b.map(fmt_f64));
        opt("e_var", row.e_var.map(fmt_f64));
        opt("bound_proven", row.bound_proven.map(|b| b.to_string()));
        opt("lambda_min", row.lambda_min.map(fmt_f64));
        opt("negative_count", row.negative_count.map(|c| c.to_string()));
        opt("spectrum_stable", row.spectrum_stable.map(|b| b.to_string()));
        opt("residual", row.residual.map(fmt_f64));
        push_kv(&mut out, "status", &row.status);
    }
    out
}

fn parse_f64(v: &str, key: &str, line_no: usize) -> Result<f64> {
    v.parse::<f64>().map_err(|_| {
        FluxtubeError::Config(format!("dump line {line_no}: bad float for {key}: {v:?}"))
    })
}

/// Parses [`to_full`] output back into a [`Report`]. The runner's
/// determinism contract is tested by re-emitting the parsed report and
/// comparing bytes.
pub fn parse_full(text: &str) -> Result<Report> {
    enum Section {
        None,
        Meta,
        Row,
    }
    let mut meta = Vec::new();
    let mut rows: Vec<Vec<(String, String, usize)>> = Vec::new();
    let mut section = Section::None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "[meta]" => section = Section::Meta,
            "[[row]]" => {
                rows.push(Vec::new());
                section = Section::Row;
            }
            _ => {
                let (k, v) = line.split_once(" = ").ok_or_else(|| {
                    FluxtubeError::Config(format!("dump line {line_no}: expected `key = value`"))
                })?;
                match section {
                    Section::None => {
                        return Err(FluxtubeError::Config(format!(
                            "dump line {line_no}: data before any section header"
                        )))
                    }
                    Section::Meta => meta.push((k.to_string(), v.to_string())),
                    Section::Row => rows
                        .last_mut()
                        .expect("a [[row]] header pushed an entry")
                        .push((k.to_string(), v.to_string(), line_no)),
                }
            }
        }
    }

    let mut parsed_rows = Vec::with_capacity(rows.len());
    for kvs in rows {
        let find = |key: &str| -> Option<(String, usize)> {
            kvs.iter().find(|(k, _, _)| k == key).map(|(_, v, n)| (v.clone(), *n))
        };
        let req = |key: &str| -> Result<(String, usize)> {
            find(key).ok_or_else(|| {
                FluxtubeError::Config(format!("dump row missing required key {key}"))
            })
        };
        let req_f64 = |r: (String, usize), key: &str| parse_f64(&r.0, key, r.1);
        let opt_f64 = |o: Option<(String, usize)>, key: &str| -> Result<Option<f64>> {
            o.map(|r| parse_f64(&r.0, key, r.1)).transpose()
        };
        let opt_bool = |o: Option<(String, usize)>, key: &str| -> Result<Option<bool>> {
            o.map(|(v, n)| {
                v.parse::<bool>().map_err(|_| {
                    FluxtubeError::Config(format!("dump line {n}: bad bool for {key}: {v:?}"))
                })
            })
            .transpose()
        };

        let row = Row {
            mode: req("mode")?.0,
            family: req("family")?.0,
            r_support: req_f64(req("r_support")?, "r_support")?,
            b0: req_f64(req("b0")?, "b0")?,
            charge: req_f64(req("charge")?, "charge")?,
            g: req_f64(req("g")?, "g")?,
            v: req_f64(req("v")?, "v")?,
            v_floor: {
                let (v, n) = req("v_floor")?;
                v.parse::<i64>().map_err(|_| {
                    FluxtubeError::Config(format!("dump line {n}: bad integer for v_floor"))
                })?
            },
            v_frac: req_f64(req("v_frac")?, "v_frac")?,
            ell: {
                let (v, n) = req("ell")?;
                v.parse::<i64>().map_err(|_| {
                    FluxtubeError::Config(format!("dump line {n}: bad integer for ell"))
                })?
            },
            nu: opt_f64(find("nu"), "nu")?,
            alpha: opt_f64(find("alpha"), "alpha")?,
            mu: opt_f64(find("mu"), "mu")?,
            coeff_a: opt_f64(find("coeff_a"), "coeff_a")?,
            coeff_b: opt_f64(find("coeff_b"), "coeff_b")?,
            e_var: opt_f64(find("e_var"), "e_var")?,
            bound_proven: opt_bool(find("bound_proven"), "bound_proven")?,
            lambda_min: opt_f64(find("lambda_min"), "lambda_min")?,
            negative_count: find("negative_count")
                .map(|(v, n)| {
                    v.parse::<u32>().map_err(|_| {
                        FluxtubeError::Config(format!(
                            "dump line {n}: bad integer for negative_count"
                        ))
                    })
                })
                .transpose()?,
            spectrum_stable: opt_bool(find("spectrum_stable"), "spectrum_stable")?,
            residual: opt_f64(find("residual"), "residual")?,
            status: req("status")?.0,
        };
        parsed_rows.push(row);
    }
    Ok(Report { meta, rows: parsed_rows })
}
