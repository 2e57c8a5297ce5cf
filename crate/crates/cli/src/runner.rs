use crate::config::{Monitor, RunConfig};
use crate::registry::Registry;
use homlab_core::cell::{cache_key, effective_tensor, load_or_solve, CacheOutcome, CellOptions, CorrectorSet};
use homlab_core::error::{Error, Result};
use homlab_core::monitors::{
    caccioppoli_ratio, envelope_stability, excess_scan, holder_envelope, lipschitz_envelope, rate_sweep_with, reverse_holder_sweep, solve_at,
    wmp_monitor, ExcessParams, RateOptions,
};
use homlab_core::scenario::Problem;
use homlab_core::twoscale::{smoothing_lemma_ratios, KERNEL_ID};
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Reported without a pass criterion.
    Info,
    /// The monitor aborted with a solver or hypothesis error.
    Error,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::Error => "ERROR",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub monitor: Monitor,
    pub status: Status,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!("{:<20} {:<5} {}", self.monitor.name(), self.status.label(), self.summary)
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub scenario: String,
    pub outcomes: Vec<Outcome>,
    /// Cache outcome and wall time of the corrector stage, when one ran.
    pub cell_stage: Option<(CacheOutcome, Duration)>,
}

impl RunSummary {
    /// 0 when every monitor passed or only reported, 3 on any aborted monitor, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.outcomes.iter().any(|o| o.status == Status::Error) {
            3
        } else if self.outcomes.iter().any(|o| o.status == Status::Fail) {
            1
        } else {
            0
        }
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::ConfigInvalid(_) => 2,
        _ => 3,
    }
}

#[derive(Serialize)]
struct Provenance {
    version: &'static str,
    kernel_id: &'static str,
    corrector_cache_key: String,
    cell_tolerance: f64,
}

#[derive(Serialize)]
struct Payload<'a> {
    scenario: &'a str,
    monitor: &'static str,
    config: RunConfig,
    provenance: &'a Provenance,
    status: Status,
    summary: &'a str,
    report: Value,
}

/// What a monitor hands back before it is written out.
struct Measured {
    status: Status,
    summary: String,
    report: Value,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn cells<T: Display>(values: &[T]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct Context<'a> {
    cfg: &'a RunConfig,
    problem: &'a Problem,
    cache_dir: Option<PathBuf>,
    chi: Option<CorrectorSet>,
    cell_stage: Option<(CacheOutcome, Duration)>,
}

impl Context<'_> {
    fn correctors(&mut self) -> Result<&CorrectorSet> {
        if self.chi.is_none() {
            let t = Instant::now();
            let (chi, outcome) = load_or_solve(&self.problem.field, CellOptions::default(), false, self.cache_dir.as_deref())?;
            self.cell_stage = Some((outcome, t.elapsed()));
            self.chi = Some(chi);
        }
        Ok(self.chi.as_ref().expect("just set"))
    }

    fn measure(&mut self, monitor: Monitor) -> Result<Measured> {
        let cfg = self.cfg;
        let problem = self.problem;
        let kappa = cfg.kappa;
        match monitor {
            Monitor::Cell => {
                let chi = self.correctors()?.clone();
                let abar = effective_tensor(&problem.field, &chi)?;
                let residual = chi.weak_residual(&problem.field)?;
                let mean = chi.max_mean();
                let ok = residual <= 1e-9 && mean <= 1e-10;
                let entries = abar.tensor.entries().to_vec();
                Ok(Measured {
                    status: if ok { Status::Pass } else { Status::Fail },
                    summary: format!("weak residual {residual:.2e}, max |mean| {mean:.2e}, Abar = {entries:?}"),
                    report: json!({
                        "effective_tensor": abar.tensor,
                        "weak_residual": residual,
                        "max_mean": mean,
                        "resolution": chi.resolution,
                        "iterations": chi.iterations,
                    }),
                    header: vec!["index", "abar"],
                    rows: entries.iter().enumerate().map(|(k, v)| cells(&[k.to_string(), v.to_string()])).collect(),
                })
            }
            Monitor::Rates => {
                let chi = self.correctors()?.clone();
                let opts = RateOptions { kappa, budget: cfg.budget, indicator_fraction: cfg.indicator_fraction, remainder: true };
                let rep = rate_sweep_with(problem, &chi, &cfg.eps, opts)?;
                let err = rep.fit("err_hm1").expect("always fitted");
                let w = rep.fit("w_hm").and_then(|f| f.fit.as_ref()).map(|f| f.slope);
                let (status, summary) = match (&err.fit, &err.skipped) {
                    (Some(f), _) => {
                        let ok = (0.8..=1.1).contains(&f.slope);
                        (if ok { Status::Pass } else { Status::Fail }, format!("error slope {:.3} (+- {:.3}), w slope {}", f.slope, f.stderr, w.map(|s| format!("{s:.3}")).unwrap_or_default()))
                    }
                    (None, Some(reason)) if reason == "degenerate zero errors" => (Status::Pass, reason.clone()),
                    (None, reason) => (Status::Fail, format!("no fit: {}", reason.clone().unwrap_or_default())),
                };
                let rows = rep
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.eps.to_string(),
                            r.h.to_string(),
                            r.dofs.to_string(),
                            r.err_hm1.to_string(),
                            r.err_l2.to_string(),
                            opt(r.w_hm),
                            r.indicator.to_string(),
                            r.flagged.to_string(),
                        ]
                    })
                    .collect();
                Ok(Measured {
                    status,
                    summary,
                    report: serde_json::to_value(&rep)?,
                    header: vec!["eps", "h", "dofs", "err_hm1", "err_l2", "w_hm", "indicator", "flagged"],
                    rows,
                })
            }
            Monitor::Excess => {
                let params = ExcessParams { lambda: cfg.lambda, p: cfg.p, q: cfg.q, sigma: cfg.sigma, full_scale: cfg.full_scale };
                let mut reports = Vec::new();
                let mut rows = Vec::new();
                for &eps in &cfg.eps {
                    let sol = solve_at(problem, eps, kappa, cfg.budget)?;
                    let rep = excess_scan(&sol.field, &problem.rhs, &problem.data.g, eps, params)?;
                    for r in &rep.rows {
                        rows.push(cells(&[eps, r.r, r.phi_lambda, r.phi, r.h_excess, r.h_top]));
                    }
                    reports.push(rep);
                }
                let doubling = reports.iter().map(|r| r.doubling_constant).fold(0.0, f64::max);
                let contraction = reports.iter().map(|r| r.best_contraction).fold(0.0, f64::max);
                Ok(Measured {
                    status: Status::Info,
                    summary: format!("doubling constant {doubling:.3}, worst best-contraction {contraction:.3}"),
                    report: serde_json::to_value(&reports)?,
                    header: vec!["eps", "r", "phi_lambda", "phi", "h_excess", "h_top"],
                    rows,
                })
            }
            Monitor::HolderEnvelope | Monitor::LipschitzEnvelope => {
                let radii = cfg.radii(&problem.domain);
                let mut reports = Vec::new();
                for &eps in &cfg.eps {
                    let rep = if monitor == Monitor::HolderEnvelope {
                        holder_envelope(problem, cfg.lambda, &radii, eps, kappa, cfg.p)?
                    } else {
                        lipschitz_envelope(problem, &radii, eps, kappa, cfg.q, cfg.sigma, cfg.full_scale)?
                    };
                    reports.push(rep);
                }
                let (variation, stable) = envelope_stability(&reports);
                let coarsest = reports.iter().max_by(|a, b| a.eps.total_cmp(&b.eps)).expect("eps list is non-empty");
                let mut summary = format!("constants {:?}, variation {variation:.3}", reports.iter().map(|r| r.constant).collect::<Vec<_>>());
                let mut ok = stable || reports.len() < 2;
                if cfg.full_scale {
                    let limit = 3.0 * coarsest.constant;
                    let worst = reports.iter().filter_map(|r| r.full_scale.map(|f| f.linf_over_bracket)).fold(0.0, f64::max);
                    ok &= worst.is_finite() && worst <= limit;
                    summary.push_str(&format!(", full-scale Linf/bracket {worst:.3} (limit {limit:.3})"));
                }
                let status = if reports.len() < 2 && !cfg.full_scale {
                    Status::Info
                } else if ok {
                    Status::Pass
                } else {
                    Status::Fail
                };
                let mut rows = Vec::new();
                for rep in &reports {
                    for r in &rep.rows {
                        rows.push(vec![rep.eps.to_string(), r.r.to_string(), r.average.to_string(), r.normalized.to_string(), r.below_eps.to_string()]);
                    }
                }
                Ok(Measured {
                    status,
                    summary,
                    report: json!({ "reports": reports, "variation": variation }),
                    header: vec!["eps", "r", "average", "normalized", "below_eps"],
                    rows,
                })
            }
            Monitor::ReverseHolder => {
                let center = cfg.center_point();
                let r = cfg.ball_radius(&problem.domain);
                let sweep = reverse_holder_sweep(problem, center, r, cfg.p, &cfg.eps, kappa)?;
                let ok = sweep.variation.is_finite() && sweep.variation <= 2.0;
                let rows = sweep
                    .eps
                    .iter()
                    .zip(&sweep.rows)
                    .map(|(e, row)| vec![e.to_string(), row.numerator.to_string(), row.denominator.to_string(), row.ratio.to_string(), row.reason.clone().unwrap_or_default()])
                    .collect();
                Ok(Measured {
                    status: if ok { Status::Pass } else { Status::Fail },
                    summary: format!("ratios {:?}, variation {:.3}", sweep.rows.iter().map(|r| r.ratio).collect::<Vec<_>>(), sweep.variation),
                    report: serde_json::to_value(&sweep)?,
                    header: vec!["eps", "numerator", "denominator", "ratio", "reason"],
                    rows,
                })
            }
            Monitor::Wmp => {
                let rep = wmp_monitor(problem, cfg.p, &cfg.eps, kappa)?;
                let ok = rep.variation <= 2.0;
                let rows = rep.rows.iter().map(|r| cells(&[r.eps, r.h, r.norm, r.bracket, r.ratio])).collect();
                Ok(Measured {
                    status: if ok { Status::Pass } else { Status::Fail },
                    summary: format!("ratios {:?}, variation {:.3}", rep.rows.iter().map(|r| r.ratio).collect::<Vec<_>>(), rep.variation),
                    report: serde_json::to_value(&rep)?,
                    header: vec!["eps", "h", "norm", "bracket", "ratio"],
                    rows,
                })
            }
            Monitor::Caccioppoli => {
                let center = cfg.center_point();
                let r = cfg.ball_radius(&problem.domain);
                let mut eps_sorted = cfg.eps.clone();
                eps_sorted.sort_by(|a, b| b.total_cmp(a));
                let mut table = Vec::new();
                for &eps in &eps_sorted {
                    let sol = solve_at(problem, eps, kappa, cfg.budget)?;
                    table.push((eps, caccioppoli_ratio(&sol.field, &problem.rhs, &problem.data.g, center, r, 2.0 * r)?));
                }
                let m = problem.m() as usize;
                let mut constants = Vec::new();
                let mut ok = true;
                for j in 0..=m {
                    let series: Vec<f64> = table.iter().map(|(_, rows)| rows[j].ratio).filter(|v| v.is_finite()).collect();
                    let max = series.iter().cloned().fold(0.0, f64::max);
                    if let Some(first) = series.first() {
                        ok &= max <= 2.0 * first;
                    }
                    constants.push(max);
                }
                let mut rows = Vec::new();
                for (eps, rs) in &table {
                    for (j, row) in rs.iter().enumerate() {
                        rows.push(vec![eps.to_string(), j.to_string(), row.numerator.to_string(), row.denominator.to_string(), row.ratio.to_string()]);
                    }
                }
                Ok(Measured {
                    status: if ok { Status::Pass } else { Status::Fail },
                    summary: format!("recorded constants per j {constants:?}"),
                    report: json!({ "rows": table, "constants": constants }),
                    header: vec!["eps", "j", "lhs", "rhs", "ratio"],
                    rows,
                })
            }
            Monitor::Smoothing => {
                let rep = smoothing_lemma_ratios(problem.d(), &cfg.eps, cfg.samples, cfg.seed, kappa)?;
                let worst = rep.variation.iter().map(|(_, v)| *v).fold(0.0, f64::max);
                let rows = rep.rows.iter().map(|r| vec![format!("{:?}", r.lemma), r.sample.to_string(), r.eps.to_string(), r.ratio.to_string()]).collect();
                Ok(Measured {
                    status: if worst <= 2.0 { Status::Pass } else { Status::Fail },
                    summary: format!("worst variation {worst:.3}"),
                    report: serde_json::to_value(&rep)?,
                    header: vec!["lemma", "sample", "eps", "ratio"],
                    rows,
                })
            }
        }
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Timestamp used in report file names.
pub fn timestamp() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ").to_string()
}

/// Validates `cfg`, runs its monitors in order and writes one JSON and one CSV report per monitor.
/// Only configuration problems and I/O failures are returned as errors.
pub fn run(cfg: &RunConfig, registry: &Registry, out: &Path) -> Result<RunSummary> {
    let entry = registry.find(&cfg.scenario).ok_or_else(|| Error::ConfigInvalid(format!("unknown scenario {:?}", cfg.scenario)))?;
    cfg.validate(&entry.scenario)?;
    if let Some(w) = cfg.workers {
        // Fails only when a pool already exists, in which case that pool is used.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let scenario = cfg.resolve(&entry.scenario);
    let problem = scenario.problem().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    std::fs::create_dir_all(out)?;
    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION"),
        kernel_id: KERNEL_ID,
        corrector_cache_key: cache_key(&problem.field, CellOptions::default(), false),
        cell_tolerance: CellOptions::default().tol,
    };
    let stamp = timestamp();
    let mut ctx = Context { cfg, problem: &problem, cache_dir: cfg.cache.then(|| out.join("cache")), chi: None, cell_stage: None };
    let mut outcomes = Vec::new();
    for &monitor in &cfg.monitors {
        let outcome = match ctx.measure(monitor) {
            Ok(m) => {
                let stem = out.join(format!("{}-{}-{stamp}", problem.id, monitor.name()));
                let payload = Payload {
                    scenario: &problem.id,
                    monitor: monitor.name(),
                    config: cfg.reported(),
                    provenance: &provenance,
                    status: m.status,
                    summary: &m.summary,
                    report: m.report,
                };
                let json_path = stem.with_extension("json");
                let csv_path = stem.with_extension("csv");
                std::fs::write(&json_path, serde_json::to_string_pretty(&payload)? + "\n")?;
                write_csv(&csv_path, &m.header, &m.rows)?;
                Outcome { monitor, status: m.status, summary: m.summary, files: vec![csv_path, json_path] }
            }
            Err(e) => Outcome { monitor, status: Status::Error, summary: e.to_string(), files: vec![] },
        };
        println!("{}", outcome.line());
        outcomes.push(outcome);
    }
    if let Some((outcome, t)) = ctx.cell_stage {
        println!("cell stage: {outcome:?} in {:.1} ms", t.as_secs_f64() * 1e3);
    }
    Ok(RunSummary { scenario: problem.id.clone(), outcomes, cell_stage: ctx.cell_stage })
}
