//! Config parsing, table serialization and the command runners used by the
//! `kg-hierarchy` binary.
//!
//! Runners write their primary output to `out` and diagnostics to `err`, and
//! return the process exit code.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{self, Hierarchy, RiccatiResidual};
use crate::oracle::{self, ComparisonReport, FdOrder, OracleConfig};
use crate::par::{self, ExecMode};
use crate::potential::{Branch, PotentialParams};
use crate::spectra::{self, EnergyLevel};
use crate::wavefunctions::{self, Normalization, WAVEFUNCTION_FORM};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_ROOT: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Scaled Riccati residual accepted by `verify`.
pub const RICCATI_TOL: f64 = 1e-10;
/// Worst relative analytic/oracle difference accepted by `verify`.
pub const ORACLE_TOL: f64 = 1e-3;
/// Samples used for residual checks and wavefunction output.
pub const CHECK_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Wavefunction,
    Verify,
    Sweep,
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "spectrum" => Ok(Command::Spectrum),
            "wavefunction" => Ok(Command::Wavefunction),
            "verify" => Ok(Command::Verify),
            "sweep" => Ok(Command::Sweep),
            _ => Err(format!("unknown command '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PotentialParams,
    pub command: Command,
    pub n_max: usize,
    pub sweep_key: Option<String>,
    pub sweep_values: Option<Vec<f64>>,
    pub oracle: OracleConfig,
    /// `None` writes to stdout.
    pub output_path: Option<PathBuf>,
    pub format: Format,
    /// Worker threads for sweeps; 0 lets the pool decide.
    pub jobs: usize,
    /// Added to every `mu` before the residual check in `verify`.
    pub perturb_mu: Option<f64>,
}

const PARAM_KEYS: [&str; 6] = ["V0", "S0", "VI", "lambda", "q", "m"];

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| config_err(line, format!("{key}: '{raw}' is not a number")))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str, command: Command) -> Result<RunConfig> {
    let mut values: HashMap<String, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("expected key=value, got '{content}'")))?;
        let key = key.trim();
        let known = PARAM_KEYS.contains(&key)
            || matches!(
                key,
                "branch" | "n_max" | "sweep_key" | "sweep_values" | "oracle.x_max" | "oracle.n_points" | "oracle.fd_order"
            );
        if !known {
            return Err(config_err(line, format!("unknown key '{key}'")));
        }
        if let Some((first, _)) = values.get(key) {
            return Err(config_err(line, format!("duplicate key '{key}' (first set on line {first})")));
        }
        values.insert(key.to_string(), (line, value.trim().to_string()));
    }
    let line_of = |key: &str| values.get(key).map(|(l, _)| *l).unwrap_or(0);
    let number = |key: &str, default: Option<f64>| -> Result<f64> {
        match values.get(key) {
            Some((line, raw)) => parse_f64(*line, key, raw),
            None => default.ok_or_else(|| config_err(0, format!("missing required key '{key}'"))),
        }
    };

    let branch = match values.get("branch") {
        Some((line, raw)) => Branch::from_str(raw).map_err(|e| config_err(*line, e))?,
        None => Branch::Hermitian,
    };
    let params = PotentialParams::new(
        branch,
        number("V0", Some(0.0))?,
        number("S0", Some(0.0))?,
        number("VI", Some(0.0))?,
        number("lambda", None)?,
        number("q", Some(1.0))?,
        number("m", Some(1.0))?,
    )
    .map_err(|e| match e {
        Error::ZeroDeformation => config_err(line_of("q"), "q must be nonzero (the deformation constraint q != 0)"),
        Error::InvalidParameter { name, value, reason } => config_err(line_of(name), format!("{name} = {value}: {reason}")),
        other => other,
    })?;

    let n_max = match values.get("n_max") {
        Some((line, raw)) => raw
            .parse::<usize>()
            .map_err(|_| config_err(*line, format!("n_max: '{raw}' is not a non-negative integer")))?,
        None => 10,
    };

    let mut oracle_cfg = OracleConfig::default();
    if let Some((line, raw)) = values.get("oracle.x_max") {
        oracle_cfg.x_max = Some(parse_f64(*line, "oracle.x_max", raw)?);
    }
    if let Some((line, raw)) = values.get("oracle.n_points") {
        oracle_cfg.n_points = raw
            .parse()
            .map_err(|_| config_err(*line, format!("oracle.n_points: '{raw}' is not an integer")))?;
    }
    if let Some((line, raw)) = values.get("oracle.fd_order") {
        let order: u8 = raw
            .parse()
            .map_err(|_| config_err(*line, format!("oracle.fd_order: '{raw}' is not an integer")))?;
        oracle_cfg.fd_order = FdOrder::try_from(order).map_err(|e| config_err(*line, e))?;
    }
    if params.branch().is_hermitian() {
        oracle_cfg.validate(&params).map_err(|e| config_err(line_of("oracle.n_points").max(line_of("oracle.x_max")), e.to_string()))?;
    }

    let sweep_key = values.get("sweep_key").map(|(_, v)| v.clone());
    let sweep_values = match values.get("sweep_values") {
        Some((line, raw)) => Some(
            raw.split(',')
                .map(|v| parse_f64(*line, "sweep_values", v.trim()))
                .collect::<Result<Vec<f64>>>()?,
        ),
        None => None,
    };
    if command == Command::Sweep {
        let key = sweep_key
            .as_deref()
            .ok_or_else(|| config_err(0, "the sweep command needs sweep_key"))?;
        let line = line_of("sweep_key");
        if !PARAM_KEYS.contains(&key) {
            return Err(config_err(line, format!("sweep_key '{key}' must be one of {}", PARAM_KEYS.join(", "))));
        }
        let vals = sweep_values
            .as_ref()
            .filter(|v| !v.is_empty())
            .ok_or_else(|| config_err(0, "the sweep command needs a nonempty sweep_values list"))?;
        let vline = line_of("sweep_values");
        for &v in vals {
            params.with_field(key, v).map_err(|e| match e {
                Error::ZeroDeformation => config_err(vline, "sweep value q = 0 violates the deformation constraint q != 0"),
                other => config_err(vline, format!("sweep value {v}: {other}")),
            })?;
        }
    } else if sweep_key.is_some() || sweep_values.is_some() {
        return Err(config_err(
            line_of("sweep_key").max(line_of("sweep_values")),
            "sweep_key and sweep_values are only valid with the sweep command",
        ));
    }

    Ok(RunConfig {
        params,
        command,
        n_max,
        sweep_key,
        sweep_values,
        oracle: oracle_cfg,
        output_path: None,
        format: Format::Csv,
        jobs: 0,
        perturb_mu: None,
    })
}

/// Fixed 17-significant-digit float formatting.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One spectrum table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub n: usize,
    pub re_e: f64,
    pub im_e: f64,
    pub re_eps: f64,
    pub im_eps: f64,
    pub re_mu: f64,
    pub im_mu: f64,
    pub residual: f64,
    pub flags: Vec<String>,
}

impl From<&EnergyLevel> for SpectrumRow {
    fn from(l: &EnergyLevel) -> Self {
        Self {
            n: l.n,
            re_e: l.energy.re,
            im_e: l.energy.im,
            re_eps: l.epsilon.re,
            im_eps: l.epsilon.im,
            re_mu: l.mu.re,
            im_mu: l.mu.im,
            residual: l.residual,
            flags: l.flags.into(),
        }
    }
}

pub const SPECTRUM_HEADER: &str = "n,re_E,im_E,re_eps,im_eps,re_mu,im_mu,residual,flags";

impl SpectrumRow {
    pub fn to_csv(&self) -> String {
        let nums = [self.re_e, self.im_e, self.re_eps, self.im_eps, self.re_mu, self.im_mu, self.residual];
        let mut s = self.n.to_string();
        for x in nums {
            s.push(',');
            s.push_str(&fmt_f64(x));
        }
        s.push(',');
        s.push_str(&self.flags.join("|"));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub params: PotentialParams,
    pub n_max: usize,
    pub levels: Vec<SpectrumRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub key: String,
    pub value: f64,
    #[serde(flatten)]
    pub level: SpectrumRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub params: PotentialParams,
    pub key: String,
    pub values: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavefunctionSample {
    pub n: usize,
    pub re_e: f64,
    pub im_e: f64,
    pub x: f64,
    pub re_psi: f64,
    pub im_psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavefunctionReport {
    pub params: PotentialParams,
    pub form: String,
    pub normalization: Normalization,
    pub samples: Vec<WavefunctionSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub n: usize,
    pub re_e: f64,
    pub im_e: f64,
    pub residual: RiccatiResidual,
    pub scaled: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub params: PotentialParams,
    pub riccati_tol: f64,
    pub residuals: Vec<ResidualRow>,
    /// `None` when the oracle does not apply (complex branches).
    pub oracle: Option<ComparisonReport>,
    pub oracle_tol: f64,
    pub pass: bool,
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Error::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

fn report_error(err: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(err, "error: {e}");
    EXIT_ERROR
}

/// Dispatches on `cfg.command`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cfg.command {
        Command::Spectrum => run_spectrum(cfg, out, err),
        Command::Wavefunction => run_wavefunction(cfg, out, err),
        Command::Verify => run_verify(cfg, out, err),
        Command::Sweep => run_sweep(cfg, out, err),
    }
}

pub fn run_spectrum(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let levels = match spectra::spectrum(&cfg.params, cfg.n_max) {
        Ok(l) => l,
        Err(e) => return report_error(err, &e),
    };
    let rows: Vec<SpectrumRow> = levels.iter().map(SpectrumRow::from).collect();
    let written = match cfg.format {
        Format::Csv => write_spectrum_csv(out, &rows),
        Format::Json => write_json(
            out,
            &SpectrumReport {
                params: cfg.params,
                n_max: cfg.n_max,
                levels: rows,
            },
        ),
    };
    if let Err(e) = written {
        return report_error(err, &e);
    }
    if levels.is_empty() {
        let _ = writeln!(err, "error: {}", Error::NoRoot { n: 0 });
        return EXIT_NO_ROOT;
    }
    EXIT_OK
}

fn write_spectrum_csv(out: &mut dyn Write, rows: &[SpectrumRow]) -> Result<()> {
    let mut s = String::from(SPECTRUM_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn run_wavefunction(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match wavefunction_report(cfg) {
        Ok(report) => {
            let written = match cfg.format {
                Format::Json => write_json(out, &report),
                Format::Csv => {
                    let _ = writeln!(err, "form: {}", report.form);
                    let _ = writeln!(err, "normalization: {}", serde_json::to_string(&report.normalization).unwrap_or_default());
                    let mut s = String::from("n,re_E,im_E,x,re_psi,im_psi\n");
                    for w in &report.samples {
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{},{}",
                            w.n,
                            fmt_f64(w.re_e),
                            fmt_f64(w.im_e),
                            fmt_f64(w.x),
                            fmt_f64(w.re_psi),
                            fmt_f64(w.im_psi)
                        );
                    }
                    out.write_all(s.as_bytes()).map_err(Error::from)
                }
            };
            match written {
                Ok(()) if report.samples.is_empty() => {
                    let _ = writeln!(err, "error: {}", Error::NoRoot { n: 0 });
                    EXIT_NO_ROOT
                }
                Ok(()) => EXIT_OK,
                Err(e) => report_error(err, &e),
            }
        }
        Err(e) => report_error(err, &e),
    }
}

fn wavefunction_report(cfg: &RunConfig) -> Result<WavefunctionReport> {
    let p = &cfg.params;
    let levels = spectra::spectrum(p, cfg.n_max)?;
    let h = Hierarchy::new(p)?;
    let grid = hierarchy::check_grid(p, CHECK_POINTS)?;
    let mut samples = Vec::new();
    for l in levels.iter().filter(|l| l.is_normalizable()) {
        let level = h.level(l.energy, l.n)?;
        let psi = wavefunctions::ground_state_from_w(&h.superpotential(&level), &grid)?;
        for (x, v) in psi.iter() {
            samples.push(WavefunctionSample {
                n: l.n,
                re_e: l.energy.re,
                im_e: l.energy.im,
                x,
                re_psi: v.re,
                im_psi: v.im,
            });
        }
    }
    Ok(WavefunctionReport {
        params: *p,
        form: WAVEFUNCTION_FORM.to_string(),
        normalization: wavefunctions::normalization_for(p.branch()),
        samples,
    })
}

fn residual_rows(cfg: &RunConfig, levels: &[EnergyLevel]) -> Result<Vec<ResidualRow>> {
    let p = &cfg.params;
    let h = Hierarchy::new(p)?;
    let grid = hierarchy::check_grid(p, CHECK_POINTS)?;
    levels
        .iter()
        .map(|l| {
            let mut chain = (0..=l.n).map(|j| h.level(l.energy, j)).collect::<Result<Vec<_>>>()?;
            if let (Some(d), Some(last)) = (cfg.perturb_mu, chain.last_mut()) {
                last.mu += d;
            }
            let residual = hierarchy::riccati_residual_with_levels(p, l.energy, &chain, &grid)?;
            let scaled = residual.scaled();
            Ok(ResidualRow {
                n: l.n,
                re_e: l.energy.re,
                im_e: l.energy.im,
                residual,
                scaled,
                pass: scaled < RICCATI_TOL,
            })
        })
        .collect()
}

pub fn verify_report(cfg: &RunConfig) -> Result<VerifyReport> {
    let p = &cfg.params;
    let levels = spectra::spectrum(p, cfg.n_max)?;
    if levels.is_empty() {
        return Err(Error::NoRoot { n: 0 });
    }
    let residuals = residual_rows(cfg, &levels)?;
    let oracle = if p.branch().is_hermitian() {
        Some(oracle::compare(p, &levels, &cfg.oracle)?)
    } else {
        None
    };
    let pass = residuals.iter().all(|r| r.pass) && oracle.as_ref().is_none_or(|o| o.passes(ORACLE_TOL));
    Ok(VerifyReport {
        params: *p,
        riccati_tol: RICCATI_TOL,
        residuals,
        oracle,
        oracle_tol: ORACLE_TOL,
        pass,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "-".into())
}

pub fn run_verify(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let report = match verify_report(cfg) {
        Ok(r) => r,
        Err(e) => return report_error(err, &e),
    };
    let written = match cfg.format {
        Format::Json => write_json(out, &report),
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# riccati residuals (scaled tolerance {})", fmt_f64(RICCATI_TOL));
            let _ = writeln!(s, "n,re_E,im_E,sup,scaled,status");
            for r in &report.residuals {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.n,
                    fmt_f64(r.re_e),
                    fmt_f64(r.im_e),
                    fmt_f64(r.residual.sup),
                    fmt_f64(r.scaled),
                    if r.pass { "ok" } else { "FAIL" }
                );
            }
            match &report.oracle {
                Some(o) => {
                    let _ = writeln!(s, "# oracle comparison (relative tolerance {})", fmt_f64(ORACLE_TOL));
                    let _ = writeln!(s, "n,analytic_E,oracle_E,abs_diff,rel_diff,grid_convergence_est,oracle_nodes");
                    for r in &o.rows {
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{},{},{}",
                            r.n,
                            fmt_f64(r.analytic),
                            fmt_opt(r.oracle),
                            fmt_f64(r.abs_diff),
                            fmt_f64(r.rel_diff),
                            fmt_opt(r.grid_convergence_est),
                            r.oracle_nodes.map(|k| k.to_string()).unwrap_or_else(|| "-".into())
                        );
                    }
                    let _ = writeln!(s, "# oracle: {} non-normalizable roots not compared", o.skipped);
                }
                None => {
                    let _ = writeln!(s, "# oracle comparison skipped ({} branch)", report.params.branch());
                }
            }
            let _ = writeln!(s, "# verdict: {}", if report.pass { "pass" } else { "FAIL" });
            out.write_all(s.as_bytes()).map_err(Error::from)
        }
    };
    if let Err(e) = written {
        return report_error(err, &e);
    }
    if report.pass {
        EXIT_OK
    } else {
        EXIT_TOLERANCE
    }
}

/// Spectra for every sweep value, in input order.
pub fn sweep_rows(cfg: &RunConfig, mode: ExecMode) -> Result<Vec<SweepRow>> {
    let key = cfg
        .sweep_key
        .as_deref()
        .ok_or_else(|| config_err(0, "the sweep command needs sweep_key"))?;
    let values = cfg.sweep_values.as_deref().unwrap_or(&[]);
    let points = values
        .iter()
        .map(|&v| cfg.params.with_field(key, v))
        .collect::<Result<Vec<_>>>()?;
    let spectra = par::map(mode, &points, |p| spectra::spectrum(p, cfg.n_max));
    let mut rows = Vec::new();
    for (&value, levels) in values.iter().zip(spectra) {
        for l in levels? {
            rows.push(SweepRow {
                key: key.to_string(),
                value,
                level: SpectrumRow::from(&l),
            });
        }
    }
    Ok(rows)
}

pub fn run_sweep(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let rows = match par::with_jobs(cfg.jobs, || sweep_rows(cfg, ExecMode::Parallel)) {
        Ok(r) => r,
        Err(e) => return report_error(err, &e),
    };
    let written = match cfg.format {
        Format::Json => write_json(
            out,
            &SweepReport {
                params: cfg.params,
                key: cfg.sweep_key.clone().unwrap_or_default(),
                values: cfg.sweep_values.clone().unwrap_or_default(),
                rows,
            },
        ),
        Format::Csv => {
            let mut s = format!("sweep_key,value,{SPECTRUM_HEADER}\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{}", r.key, fmt_f64(r.value), r.level.to_csv());
            }
            out.write_all(s.as_bytes()).map_err(Error::from)
        }
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(err, &e),
    }
}
