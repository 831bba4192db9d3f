//! Subcommand implementations. Each writes its artifacts into an output
//! directory and returns the JSON report it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use twinbeam_core::analysis::{self, BudgetData};
use twinbeam_core::detector::thin_joint;
use twinbeam_core::markers::{
    diff_analytic, diff_variance_analytic, epsilon_analytic, multimode_diff, sigma2_closed_form,
    threshold_n,
};
use twinbeam_core::{
    EfficiencyPair, Error as CoreError, ShotSeries, SimulationConfig, SourceKind, SourceSpec,
    Truncation,
};

use crate::config::{AnalyticConfig, AnalyzeConfig, FitConfig, NoiseBudgetConfig, SweepConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{self, sci, Table};
use crate::parallel::sample_series_par;

/// Output format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Tsv,
    Csv,
}

/// Collects tables and writes them either as files or inline in the report.
struct Artifacts<'a> {
    out: &'a Path,
    format: Format,
    tables: BTreeMap<String, Table>,
    files: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    fn new(out: &'a Path, format: Format) -> CliResult<Self> {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        Ok(Artifacts {
            out,
            format,
            tables: BTreeMap::new(),
            files: Vec::new(),
        })
    }

    fn table(&mut self, name: &str, table: Table) -> CliResult<()> {
        let sep = match self.format {
            Format::Json => {
                self.tables.insert(name.to_owned(), table);
                return Ok(());
            }
            Format::Tsv => '\t',
            Format::Csv => ',',
        };
        let ext = if sep == '\t' { "tsv" } else { "csv" };
        let path = self.out.join(format!("{name}.{ext}"));
        table.write(&path, sep)?;
        self.files.push(path);
        Ok(())
    }

    /// Write `<out>/<command>.json` and return its content.
    fn finish(mut self, command: &str, config: Value, results: Value) -> CliResult<Value> {
        let path = self.out.join(format!("{command}.json"));
        let mut report = json!({
            "command": command,
            "config": config,
            "results": results,
        });
        if !self.tables.is_empty() {
            report["tables"] = serde_json::to_value(&self.tables).expect("tables serialize");
        }
        self.files.push(path.clone());
        report["files"] = json!(self.files);
        formats::write_json(&path, &report)?;
        Ok(report)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Marker values that are undefined (e.g. vacuum input) are reported as
/// `null` with the reason instead of failing the run.
fn marker(r: twinbeam_core::Result<f64>) -> CliResult<Value> {
    match r {
        Ok(v) => Ok(json!(v)),
        Err(CoreError::UndefinedMarker(why)) => Ok(json!({ "undefined": why })),
        Err(e) => Err(e.into()),
    }
}

fn source_spec(kind: SourceKind, n: f64, mu: u32, tau: f64) -> CliResult<SourceSpec> {
    Ok(SourceSpec::new(kind, n)?.with_modes(mu)?.with_tau(tau)?)
}

pub fn cmd_analytic(cfg: &AnalyticConfig, out: &Path, format: Format) -> CliResult<Value> {
    cfg.validate()?;
    cfg.eff.validate()?;
    let mut art = Artifacts::new(out, format)?;
    let mut per_source = BTreeMap::new();
    for &kind in &cfg.sources {
        let spec = source_spec(kind, cfg.n_mean, cfg.mu, cfg.tau)?;
        let pd = if cfg.mu == 1 {
            diff_analytic(&spec, cfg.eff, cfg.d_range, cfg.tail_tol)?
        } else {
            let mu = cfg.mu as f64;
            let single = source_spec(kind, cfg.n_mean / mu, 1, cfg.tau)?;
            let one = diff_analytic(&single, cfg.eff, None, cfg.tail_tol / mu)?;
            let all = multimode_diff(&one, cfg.mu, cfg.tail_tol)?;
            match cfg.d_range {
                Some((lo, hi)) => all.restricted(lo, hi),
                None => all,
            }
        };
        let name = kind.name();
        art.table(&format!("pd_{name}"), formats::diff_table(&pd))?;
        if cfg.joint {
            let joint = thin_joint(&spec.single_mode_joint(Truncation::Auto(cfg.tail_tol))?, cfg.eff)?;
            art.table(&format!("joint_{name}"), formats::joint_table(&joint))?;
        }
        let variance = diff_variance_analytic(&spec, cfg.eff)?;
        per_source.insert(
            name,
            json!({
                "epsilon": marker(epsilon_analytic(&spec, cfg.eff))?,
                "variance": to_value(&variance),
                "pd_support": pd.support(),
                "pd_tail_mass": pd.tail_mass(),
                "pd_variance": pd.variance(),
            }),
        );
    }
    let results = json!({
        "sources": per_source,
        "threshold_n": to_value(&threshold_n(cfg.eff)?),
    });
    art.finish("analytic", to_value(cfg), results)
}

pub fn cmd_sweep(cfg: &SweepConfig, out: &Path, format: Format) -> CliResult<Value> {
    cfg.validate()?;
    cfg.eff.validate()?;
    let mut art = Artifacts::new(out, format)?;
    let mu = cfg.mu as f64;
    let names: Vec<String> = cfg.sources.iter().map(|k| k.name().to_owned()).collect();

    let mut cols = vec!["N".to_owned()];
    cols.extend(names.iter().map(|n| format!("sigma2_{n}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut by_n = Table::new(&col_refs);
    let ns = cfg.n_values.values();
    let twb_minus_coh: Vec<f64> = ns
        .iter()
        .map(|&n| {
            sigma2_closed_form(SourceKind::TwinBeam, cfg.eff, n, mu)
                - sigma2_closed_form(SourceKind::CoherentPair, cfg.eff, n, mu)
        })
        .collect();
    for &n in &ns {
        let mut row = vec![sci(n)];
        row.extend(cfg.sources.iter().map(|&k| sci(sigma2_closed_form(k, cfg.eff, n, mu))));
        by_n.push(row);
    }
    art.table("sigma2_vs_n", by_n)?;

    // first grid interval where the twin-beam variance overtakes shot noise
    let crossing = ns
        .windows(2)
        .zip(twb_minus_coh.windows(2))
        .find(|(_, d)| d[0] < 0.0 && d[1] >= 0.0)
        .map(|(n, _)| [n[0], n[1]]);

    if let Some(grid) = &cfg.eta_values {
        let mut cols = vec!["eta".to_owned()];
        cols.extend(names.iter().map(|n| format!("sigma2_over_n_{n}")));
        let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut by_eta = Table::new(&col_refs);
        for eta in grid.values() {
            let eff = EfficiencyPair::balanced(eta)?;
            let mut row = vec![sci(eta)];
            row.extend(
                cfg.sources
                    .iter()
                    .map(|&k| sci(sigma2_closed_form(k, eff, cfg.n_ref, mu) / cfg.n_ref)),
            );
            by_eta.push(row);
        }
        art.table("sigma2_over_n_vs_eta", by_eta)?;
    }

    let results = json!({
        "threshold_n": to_value(&threshold_n(cfg.eff)?),
        "twin_beam_crossing_bracket": crossing,
    });
    art.finish("sweep", to_value(cfg), results)
}

/// Simulate and write `<out>/shots.csv` with its sidecar.
pub fn cmd_simulate(cfg: &SimulationConfig, out: &Path) -> CliResult<(PathBuf, ShotSeries)> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let series = sample_series_par(cfg)?;
    let path = out.join("shots.csv");
    formats::write_shots(&path, &series, Some(*cfg))?;
    Ok((path, series))
}

fn histogram_table(series: &ShotSeries) -> Table {
    let k = series.len() as f64;
    let mut t = Table::new(&["d", "p"]);
    for (d, c) in analysis::diff_histogram(series) {
        t.push(vec![d.to_string(), sci(c as f64 / k)]);
    }
    t
}

pub fn cmd_analyze(cfg: &AnalyzeConfig, out: &Path, format: Format) -> CliResult<Value> {
    cfg.validate()?;
    let input = cfg.input.as_deref().expect("validated");
    let (series, sidecar) = formats::read_shots(input)?;
    let mut art = Artifacts::new(out, format)?;

    let mut gammas = Vec::new();
    for &lag in &cfg.lags {
        gammas.push(json!({ "lag": lag, "value": marker(analysis::gamma(&series, lag))? }));
    }
    let se = |stat: fn(&ShotSeries) -> twinbeam_core::Result<f64>| -> Value {
        match analysis::batch_standard_error(&series, cfg.batches, stat) {
            Ok(v) => json!(v),
            Err(_) => Value::Null,
        }
    };
    let c1 = series.channel_counts(1);
    let c2 = series.channel_counts(2);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    art.table("pd_measured", histogram_table(&series))?;
    let mut results = json!({
        "shots": series.len(),
        "unit": series.unit,
        "truncations": series.truncations,
        "mean_m1": mean(&c1),
        "mean_m2": mean(&c2),
        "gamma": gammas,
        "epsilon_raw": marker(analysis::gamma(&series, 0))?,
        "epsilon": marker(analysis::epsilon_measured(&series))?,
        "epsilon_se": se(analysis::epsilon_measured),
        "sigma2_d": analysis::measured_diff_variance(&series)?,
        "sigma2_d_se": se(analysis::measured_diff_variance),
    });
    if cfg.fit {
        results["fits"] = fits(&series, &[1, 2], cfg.integer_mu)?;
    }
    let config = json!({ "analysis": cfg, "sidecar": sidecar });
    art.finish("analyze", config, results)
}

fn fits(series: &ShotSeries, channels: &[u8], integer_mu: bool) -> CliResult<Value> {
    let mut out = BTreeMap::new();
    for &ch in channels {
        let values = if ch == 1 { &series.ch1 } else { &series.ch2 };
        let fit = analysis::fit_multithermal(values, integer_mu)?;
        out.insert(format!("channel{ch}"), to_value(&fit));
    }
    Ok(to_value(&out))
}

pub fn cmd_fit(cfg: &FitConfig, out: &Path, format: Format) -> CliResult<Value> {
    cfg.validate()?;
    let input = cfg.input.as_deref().expect("validated");
    let (series, sidecar) = formats::read_shots(input)?;
    let art = Artifacts::new(out, format)?;
    let results = json!({
        "shots": series.len(),
        "unit": series.unit,
        "fits": fits(&series, &cfg.channels, cfg.integer_mu)?,
    });
    let config = json!({ "fit": cfg, "sidecar": sidecar });
    art.finish("fit", config, results)
}

pub fn cmd_noise_budget(cfg: &NoiseBudgetConfig, out: &Path, format: Format) -> CliResult<Value> {
    cfg.validate()?;
    let data = BudgetData {
        kind: cfg.kind,
        sigma2_measured: cfg.sigma2_measured,
        m1: cfg.m1,
        m2: cfg.m2,
        mu: cfg.mu,
    };
    let surface = analysis::noise_surface(&data, &cfg.eta1.values(), &cfg.eta2.values(), cfg.eta_nominal)?;
    let mut art = Artifacts::new(out, format)?;
    let mut t = Table::new(&["eta1", "eta2", "x", "sigma2_corrected", "shot_noise", "at_floor"]);
    for p in &surface.points {
        t.push(vec![
            sci(p.eta1),
            sci(p.eta2),
            sci(p.x),
            sci(p.sigma2_corrected),
            sci(p.shot_noise),
            u8::from(p.at_floor).to_string(),
        ]);
    }
    art.table("surface", t)?;

    let xs = surface.points.iter().map(|p| p.x);
    let x_min = xs.clone().fold(f64::INFINITY, f64::min);
    let x_max = xs.fold(0.0, f64::max);
    // on the balanced diagonal a thermal budget sits exactly on the plane;
    // allow for rounding there
    let plane = surface.shot_noise_plane;
    let below = surface
        .points
        .iter()
        .filter(|p| p.sigma2_corrected < plane * (1.0 - 1e-12))
        .count();
    let balanced = match cfg.eta_nominal {
        Some(eta) => Some(to_value(&analysis::solve_pump_x(&data, EfficiencyPair::balanced(eta)?)?)),
        None => None,
    };
    let results = json!({
        "shot_noise_plane": surface.shot_noise_plane,
        "grid_points": surface.points.len(),
        "x_min": x_min,
        "x_max": x_max,
        "x_at_nominal": balanced,
        "reference_x": cfg.reference_x,
        "points_below_plane": below,
        "all_above_plane": below == 0,
        "imbalance": surface.imbalance.as_ref().map(|iv| json!({ "lo": iv.lo, "hi": iv.hi })),
    });
    art.finish("noise-budget", to_value(cfg), results)
}
