//! Command implementations behind the `pitspec` binary: data ingestion,
//! reports, the autocorrelogram chart and the exit-code mapping.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bootstrap::{parametric_bootstrap_many, stars, BootstrapConfig, CriticalValues};
use crate::error::Error;
use crate::estimation::{fit_ml, FitOptions, FitResult};
use crate::models::{ConditionalModel, ParamVector};
use crate::montecarlo::{run_experiment, ExperimentPlan};
use crate::par::Execution;
use crate::stats::{Norm, StatisticSpec};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Unreadable, empty or malformed input data or arguments.
    Input(String),
    Fit(String),
    Bootstrap(String),
    /// Plan file problems and unknown model identifiers.
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Fit(_) => 3,
            CliError::Bootstrap(_) => 4,
            CliError::Config(_) => 5,
        }
    }

    /// Classifies a library error raised while fitting or bootstrapping.
    fn from_run(e: Error) -> Self {
        match e {
            Error::UnstableBootstrap { .. } => CliError::Bootstrap(e.to_string()),
            Error::Config(m) => CliError::Config(m),
            Error::InvalidArgument(_) | Error::InsufficientSample { .. } | Error::GridTooLarge { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Fit(e.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Fit(m) => write!(f, "fit failure: {m}"),
            CliError::Bootstrap(m) => write!(f, "bootstrap instability: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn parse_model(id: &str, raw_t: bool) -> CliResult<ConditionalModel> {
    ConditionalModel::from_id_with(id, raw_t).map_err(|e| CliError::Config(e.to_string()))
}

/// Parses a returns file: one numeric column, optionally preceded by a date
/// (or any other) column, with an optional header line. The last field of
/// each record is the value.
pub fn parse_series(text: &str) -> CliResult<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("malformed CSV: {e}")))?;
        let Some(field) = rec.iter().rev().find(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if i == 0 => continue,
            _ => {
                return Err(CliError::Input(format!(
                    "line {}: '{field}' is not a finite number",
                    i + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Input("input contains no observations".into()));
    }
    Ok(out)
}

pub fn read_series(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_series(&text)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

#[derive(Debug, Clone, Serialize)]
pub struct StatisticEntry {
    pub name: String,
    pub label: String,
    pub observed: f64,
    pub p_value: f64,
    pub critical_values: CriticalValues,
    pub replicates_used: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub model: String,
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub fit: FitResult,
    pub statistics: Vec<StatisticEntry>,
}

#[derive(Debug, Clone)]
pub struct TestArgs {
    pub data: PathBuf,
    pub model: String,
    pub raw_t: bool,
    pub statistics: Vec<StatisticSpec>,
    pub b: usize,
    pub seed: u64,
    pub execution: Execution,
    /// Output prefix; `<out>.json` and `<out>.txt` are written.
    pub out: PathBuf,
}

pub fn run_test(model: &ConditionalModel, y: &[f64], specs: &[StatisticSpec], b: usize, seed: u64, execution: Execution) -> CliResult<TestReport> {
    let cfg = BootstrapConfig {
        execution,
        fit: FitOptions {
            seed,
            std_errors: true,
            ..FitOptions::default()
        },
        ..BootstrapConfig::new(b, seed)
    };
    let multi = parametric_bootstrap_many(model, y, specs, &cfg).map_err(CliError::from_run)?;
    let statistics = multi
        .reports
        .iter()
        .map(|r| StatisticEntry {
            name: r.observed.spec.to_string(),
            label: r.observed.spec.label(),
            observed: r.observed.value,
            p_value: r.p_value,
            critical_values: r.critical_values,
            replicates_used: r.replicates.len(),
            dropped: r.dropped,
        })
        .collect();
    Ok(TestReport {
        schema_version: SCHEMA_VERSION,
        command: "test",
        model: model.id(),
        n: y.len(),
        b,
        seed,
        fit: multi.fit,
        statistics,
    })
}

/// p-value table with significance stars, one column per statistic.
pub fn format_test_table(r: &TestReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "H0: {}   n = {}   B = {}   seed = {}", r.model, r.n, r.b, r.seed);
    let _ = write!(s, "{:<12}", "");
    for e in &r.statistics {
        let _ = write!(s, "{:>14}", e.label);
    }
    s.push('\n');
    let _ = write!(s, "{:<12}", "statistic");
    for e in &r.statistics {
        let _ = write!(s, "{:>14.4}", e.observed);
    }
    s.push('\n');
    let _ = write!(s, "{:<12}", "p-value");
    for e in &r.statistics {
        let cell = format!("{:.4}{}", e.p_value, stars(e.p_value));
        let _ = write!(s, "{cell:>14}");
    }
    s.push('\n');
    s.push_str("*** p <= 0.01, ** p <= 0.05, * p <= 0.10\n");
    s
}

pub fn cmd_test(args: &TestArgs) -> CliResult<String> {
    let y = read_series(&args.data)?;
    let model = parse_model(&args.model, args.raw_t)?;
    let specs = if args.statistics.is_empty() {
        StatisticSpec::default_set()
    } else {
        args.statistics.clone()
    };
    let report = run_test(&model, &y, &specs, args.b, args.seed, args.execution)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&with_extension(&args.out, "json"), &(json + "\n"))?;
    let table = format_test_table(&report);
    write_file(&with_extension(&args.out, "txt"), &table)?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocorrelogramBar {
    pub lag: usize,
    pub statistic: String,
    pub value: f64,
    pub cv10: f64,
    pub cv05: f64,
    pub cv01: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocorrelogramData {
    pub model: String,
    pub norm: Norm,
    pub bars: Vec<AutocorrelogramBar>,
}

/// Lag 0 is the marginal statistic, lags `1..=k` the lag-`j` statistics.
pub fn autocorrelogram(
    model: &ConditionalModel,
    y: &[f64],
    k: usize,
    norm: Norm,
    b: usize,
    seed: u64,
    execution: Execution,
) -> CliResult<AutocorrelogramData> {
    if k == 0 {
        return Err(CliError::Input("k must be at least 1".into()));
    }
    let specs: Vec<StatisticSpec> = std::iter::once(StatisticSpec::Marginal(norm))
        .chain((1..=k).map(|j| StatisticSpec::Lag(norm, j)))
        .collect();
    let cfg = BootstrapConfig {
        execution,
        fit: FitOptions {
            seed,
            ..FitOptions::default()
        },
        ..BootstrapConfig::new(b, seed)
    };
    let multi = parametric_bootstrap_many(model, y, &specs, &cfg).map_err(CliError::from_run)?;
    let bars = multi
        .reports
        .iter()
        .enumerate()
        .map(|(lag, r)| AutocorrelogramBar {
            lag,
            statistic: r.observed.spec.label(),
            value: r.observed.value,
            cv10: r.critical_values.p10,
            cv05: r.critical_values.p05,
            cv01: r.critical_values.p01,
            p_value: r.p_value,
        })
        .collect();
    Ok(AutocorrelogramData {
        model: model.id(),
        norm,
        bars,
    })
}

pub fn autocorrelogram_csv(data: &AutocorrelogramData) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for b in &data.bars {
        w.serialize(b).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG bar chart. Critical values are drawn as glyphs:
/// 10% `X`, 5% `V`, 1% `I`.
pub fn autocorrelogram_svg(data: &AutocorrelogramData) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let ymax = data
        .bars
        .iter()
        .flat_map(|b| [b.value, b.cv10, b.cv05, b.cv01])
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-12)
        * 1.1;
    let y_of = |v: f64| TOP + plot_h * (1.0 - v / ymax);
    let slot = plot_w / data.bars.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" style="fill:#ffffff"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{} generalized autocorrelogram ({})</text>"#,
        W / 2.0,
        data.norm,
        xml_escape(&data.model)
    );
    // Axes
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" style="stroke:#000000"/>"#,
        TOP + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" style="stroke:#000000"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    for i in 0..=4 {
        let v = ymax * i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            v
        );
    }
    for (i, b) in data.bars.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let bw = slot * 0.5;
        let top = y_of(b.value.max(0.0));
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" style="fill:#4a78b0"/>"#,
            cx - bw / 2.0,
            top,
            bw,
            TOP + plot_h - top
        );
        for (glyph, cv) in [("X", b.cv10), ("V", b.cv05), ("I", b.cv01)] {
            if cv.is_finite() {
                let _ = writeln!(
                    s,
                    r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" style="fill:#c0392b;font-weight:bold">{glyph}</text>"#,
                    y_of(cv) + 4.0
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 16.0,
            b.lag
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">lag</text>"#,
        LEFT + plot_w / 2.0,
        H - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">10% - X, 5% - V, 1% - I</text>"#,
        W - RIGHT,
        TOP - 6.0
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone)]
pub struct AutocorrelogramArgs {
    pub data: PathBuf,
    pub model: String,
    pub raw_t: bool,
    pub k: usize,
    pub norm: Norm,
    pub b: usize,
    pub seed: u64,
    pub execution: Execution,
    /// SVG path; the CSV is written next to it with a `.csv` extension.
    pub out: PathBuf,
}

pub fn cmd_autocorrelogram(args: &AutocorrelogramArgs) -> CliResult<AutocorrelogramData> {
    let y = read_series(&args.data)?;
    let model = parse_model(&args.model, args.raw_t)?;
    let data = autocorrelogram(&model, &y, args.k, args.norm, args.b, args.seed, args.execution)?;
    write_file(&with_extension(&args.out, "svg"), &autocorrelogram_svg(&data))?;
    write_file(&with_extension(&args.out, "csv"), &autocorrelogram_csv(&data))?;
    Ok(data)
}

pub fn parse_params(model: &ConditionalModel, text: &str) -> CliResult<ParamVector> {
    let v = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("parameter '{s}' is not a number")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    let p = ParamVector::from_slice(model.mean, &v).map_err(|e| CliError::Input(e.to_string()))?;
    p.validate().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(p)
}

pub fn cmd_simulate(model: &str, raw_t: bool, params: &str, n: usize, seed: u64, burnin: usize, out: &Path) -> CliResult<()> {
    let model = parse_model(model, raw_t)?;
    let params = parse_params(&model, params)?;
    let y = model
        .simulate(&params, n, seed, burnin)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let mut s = String::from("y\n");
    for v in y {
        let _ = writeln!(s, "{v}");
    }
    write_file(out, &s)
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub model: String,
    pub n: usize,
    pub parameter_names: Vec<&'static str>,
    pub fit: FitResult,
}

pub fn estimate(model: &ConditionalModel, y: &[f64], seed: u64) -> CliResult<EstimateReport> {
    let opts = FitOptions {
        seed,
        std_errors: true,
        ..FitOptions::default()
    };
    let fit = fit_ml(model, y, None, &opts).map_err(CliError::from_run)?;
    if !fit.converged {
        return Err(CliError::Fit("optimizer did not converge".into()));
    }
    Ok(EstimateReport {
        schema_version: SCHEMA_VERSION,
        command: "estimate",
        model: model.id(),
        n: y.len(),
        parameter_names: model.param_layout().iter().map(|p| p.name).collect(),
        fit,
    })
}

/// Estimates with standard errors in brackets, columns in the order
/// mean const, AR, variance const, GARCH, ARCH.
pub fn format_estimate_table(r: &EstimateReport) -> String {
    let p = &r.fit.params;
    let se = r.fit.std_errors.clone();
    let ar = p.ar1.is_some();
    // Flat layout indices of each column.
    let (i_c, i_ar, i_w, i_a, i_b) = if ar { (0, 1, 2, 3, 4) } else { (0, usize::MAX, 1, 2, 3) };
    let est = [
        Some(p.mean_const),
        p.ar1,
        Some(p.omega),
        Some(p.beta),
        Some(p.alpha),
    ];
    let idx = [i_c, i_ar, i_w, i_b, i_a];
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<18}{:>14}{:>14}{:>16}{:>14}{:>14}",
        "", "Mean const", "AR", "Variance const", "GARCH", "ARCH"
    );
    let _ = write!(s, "{:<18}", r.model);
    for (k, v) in est.iter().enumerate() {
        let w = if k == 2 { 16 } else { 14 };
        match v {
            Some(v) => {
                let _ = write!(s, "{:>w$}", format_sig(*v));
            }
            None => {
                let _ = write!(s, "{:>w$}", "---");
            }
        }
    }
    s.push('\n');
    let _ = write!(s, "{:<18}", "");
    for (k, &i) in idx.iter().enumerate() {
        let w = if k == 2 { 16 } else { 14 };
        let cell = match (&se, i) {
            (Some(se), i) if i != usize::MAX => format!("({})", format_sig(se[i])),
            _ => String::new(),
        };
        let _ = write!(s, "{cell:>w$}");
    }
    s.push('\n');
    let _ = writeln!(s, "log-likelihood {:.4}   n = {}", r.fit.loglik_at_opt, r.n);
    s
}

/// Four decimals, or two significant digits for small magnitudes.
fn format_sig(v: f64) -> String {
    if v == 0.0 || v.abs() >= 1e-3 {
        format!("{v:.4}")
    } else {
        let digits = (-v.abs().log10()).ceil() as usize + 1;
        format!("{v:.digits$}")
    }
}

pub fn cmd_estimate(data: &Path, model: &str, raw_t: bool, seed: u64, out: &Path) -> CliResult<String> {
    let y = read_series(data)?;
    let model = parse_model(model, raw_t)?;
    let report = estimate(&model, &y, seed)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(out, &(json + "\n"))?;
    Ok(format_estimate_table(&report))
}

pub fn cmd_mc(plan_path: &Path, out: &Path, execution: Execution) -> CliResult<usize> {
    let text = fs::read_to_string(plan_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", plan_path.display())))?;
    let plan = ExperimentPlan::from_config_str(&text).map_err(CliError::from_run)?;
    let table = run_experiment(&plan, execution).map_err(CliError::from_run)?;
    let mut buf = Vec::new();
    table
        .write_csv(&mut buf)
        .map_err(|e| CliError::Input(e.to_string()))?;
    write_file(out, &String::from_utf8(buf).expect("csv is utf-8"))?;
    Ok(table.rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_with_header_and_dates() {
        let text = "date,ret\n1926-01,0.01\n1926-02,-0.02\n1926-03,0.005\n";
        assert_eq!(parse_series(text).unwrap(), vec![0.01, -0.02, 0.005]);
        assert_eq!(parse_series("0.1\n0.2\n\n0.3\n").unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(parse_series("y\n1e-3\n").unwrap(), vec![1e-3]);
    }

    #[test]
    fn bad_series() {
        assert_eq!(parse_series("").unwrap_err().exit_code(), 2);
        assert_eq!(parse_series("y\n").unwrap_err().exit_code(), 2);
        assert_eq!(parse_series("0.1\nabc\n").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn library_errors_map_to_exit_codes() {
        let code = |e| CliError::from_run(e).exit_code();
        assert_eq!(code(Error::UnstableBootstrap { failed: 30, total: 99 }), 4);
        assert_eq!(code(Error::FitFailed("x".into())), 3);
        assert_eq!(code(Error::DegenerateSample("x".into())), 3);
        assert_eq!(code(Error::InvalidArgument("x".into())), 2);
        assert_eq!(code(Error::Config("x".into())), 5);
    }

    #[test]
    fn unknown_model_is_config_error() {
        assert_eq!(parse_model("egarch", false).unwrap_err().exit_code(), 5);
    }

    #[test]
    fn params_parse_by_layout() {
        let m = ConditionalModel::ar1_garch11_normal();
        let p = parse_params(&m, "0.01, 0.2, 0.1, 0.1, 0.8").unwrap();
        assert_eq!(p.ar1, Some(0.2));
        assert!(parse_params(&m, "0.01,0.1,0.1,0.8").is_err());
        let g = ConditionalModel::garch11_normal();
        assert!(parse_params(&g, "0,0.1,0.5,0.6").is_err());
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.8433), "0.8433");
        assert_eq!(format_sig(0.00003), "0.000030");
        assert_eq!(format_sig(0.0001), "0.00010");
        assert_eq!(format_sig(-0.0123), "-0.0123");
    }

    #[test]
    fn svg_has_markers_and_no_timestamp() {
        let data = AutocorrelogramData {
            model: "garch11-n".into(),
            norm: Norm::CvM,
            bars: (0..=2)
                .map(|lag| AutocorrelogramBar {
                    lag,
                    statistic: format!("D2n,{lag}^CvM"),
                    value: 0.1 * lag as f64,
                    cv10: 0.1,
                    cv05: 0.15,
                    cv01: 0.2,
                    p_value: 0.5,
                })
                .collect(),
        };
        let svg = autocorrelogram_svg(&data);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(">X<").count(), 3);
        assert_eq!(svg.matches(">V<").count(), 3);
        assert_eq!(svg.matches(">I<").count(), 3);
        assert!(svg.contains("10% - X, 5% - V, 1% - I"));
        assert_eq!(svg, autocorrelogram_svg(&data));
        let csv = autocorrelogram_csv(&data);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("lag,statistic,value,cv10,cv05,cv01,p_value\n"));
    }
}
