//! Monte Carlo drivers for the synthetic PSD-estimation experiments.
//!
//! Every trial draws its generating model from a child seed of the
//! experiment seed and the graph is drawn once per experiment, so a report is
//! a pure function of its configuration. Trials run in parallel and are
//! aggregated in trial order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphgen::{generate_graph, GraphFamily, GraphSpec};
use crate::nonparametric::{
    design_fir_bandpass, design_ideal_bandpass, design_windows, filterbank_estimate_ensemble, periodogram,
    predict_filterbank_moments_normal, predict_periodogram_moments_normal, predict_window_moments,
    windowed_avg_periodogram_ensemble, FilterBank, WindowBank, WindowStrategy,
};
use crate::parametric::{arma_fit_ls, arma_fit_ratio, arma_psd, ma_fit_freq, ma_fit_symmetric_psd, ma_psd, ArmaModel, ArmaVariant, DescentConfig, EPS_POLE};
use crate::process::{filter_psd, generate_from_psd, generate_stationary, NoiseKind};
use crate::rng::{self, tags};
use crate::spectral::{GraphFilter, GraphShift, SpectralBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Periodogram NMSE against the number of realizations.
    Tc1Periodogram,
    /// Local and random windows against the number of windows.
    Tc1Windows,
    /// Ideal and FIR filter banks against the generating filter length.
    Tc1Filterbank,
    /// MA fits against the generating filter length.
    Tc2Ma,
    /// ARMA least-squares fits against the number of realizations.
    Tc2Arma,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Tc1Periodogram => "tc1_periodogram",
            Scenario::Tc1Windows => "tc1_windows",
            Scenario::Tc1Filterbank => "tc1_filterbank",
            Scenario::Tc2Ma => "tc2_ma",
            Scenario::Tc2Arma => "tc2_arma",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown scenario '{s}'")))
    }

    /// What the report's axis column holds.
    pub fn axis_name(self) -> &'static str {
        match self {
            Scenario::Tc1Periodogram | Scenario::Tc2Arma => "realizations",
            Scenario::Tc1Windows => "windows",
            Scenario::Tc1Filterbank | Scenario::Tc2Ma => "filter_taps",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub graph: GraphSpec,
    /// Generating filter length, or the ARMA order for `tc2_arma`.
    pub taps: usize,
    /// Swept values; see [`Scenario::axis_name`].
    pub axis: Vec<usize>,
    /// Realizations per estimate when the axis is not the realization count.
    #[serde(default = "one")]
    pub realizations: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "gaussian")]
    pub noise: NoiseKind,
    /// Ideal bandpass widths for `tc1_filterbank`.
    #[serde(default)]
    pub bandwidths: Vec<usize>,
    /// FIR lengths for `tc1_filterbank`.
    #[serde(default)]
    pub fir_taps: Vec<usize>,
    /// Extra taps assumed by the MA fits (model mismatch).
    #[serde(default)]
    pub fit_order_offset: usize,
    /// Restarts of the nonconvex fits.
    #[serde(default = "restarts")]
    pub restarts: usize,
    /// Adds the direct-ratio ARMA fit to `tc2_arma` reports.
    #[serde(default)]
    pub ratio_fit: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn gaussian() -> NoiseKind {
    NoiseKind::Gaussian
}

fn restarts() -> usize {
    DescentConfig::default().restarts
}

impl ExperimentConfig {
    /// Desk-scale defaults mirroring the synthetic test cases.
    pub fn preset(scenario: Scenario) -> Self {
        let er = |p| GraphSpec::new(100, GraphFamily::ErdosRenyi { p });
        let base = |graph, taps, axis: Vec<usize>| ExperimentConfig {
            scenario,
            graph,
            taps,
            axis,
            realizations: 1,
            trials: 100,
            seed: 1,
            noise: NoiseKind::Gaussian,
            bandwidths: Vec::new(),
            fir_taps: Vec::new(),
            fit_order_offset: 0,
            restarts: restarts(),
            ratio_fit: false,
            output: None,
        };
        match scenario {
            Scenario::Tc1Periodogram => base(er(0.05), 4, vec![1, 10, 100, 1000]),
            Scenario::Tc1Windows => base(GraphSpec::sbm(10, 10, 0.9, 0.1).laplacian(), 2, vec![1, 2, 5, 10, 20]),
            Scenario::Tc1Filterbank => ExperimentConfig {
                bandwidths: vec![3, 7],
                fir_taps: vec![5, 10],
                ..base(er(0.05), 0, vec![2, 3, 4, 5, 6])
            },
            Scenario::Tc2Ma => ExperimentConfig { realizations: 100, trials: 20, ..base(er(0.2).laplacian(), 0, vec![2, 3, 4]) },
            Scenario::Tc2Arma => base(er(0.2).laplacian(), 2, vec![1, 2]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.trials == 0 {
            return bad("trial count must be at least 1");
        }
        if self.axis.is_empty() || self.axis.contains(&0) {
            return bad("axis values must be positive");
        }
        if self.realizations == 0 {
            return bad("realization count must be at least 1");
        }
        let n = self.graph.n;
        match self.scenario {
            Scenario::Tc1Periodogram | Scenario::Tc1Windows | Scenario::Tc2Arma if self.taps == 0 || self.taps > n => {
                bad("generator taps must lie in 1..=N")
            }
            Scenario::Tc1Windows if self.axis.iter().any(|&m| m > n) => bad("window counts must not exceed N"),
            Scenario::Tc1Filterbank if self.bandwidths.iter().chain(&self.fir_taps).any(|&b| b == 0 || b > n) => {
                bad("bandwidths and FIR lengths must lie in 1..=N")
            }
            Scenario::Tc1Filterbank | Scenario::Tc2Ma if self.axis.iter().any(|&l| l + self.fit_order_offset > n) => {
                bad("filter lengths must not exceed N")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmseRow {
    pub series: String,
    pub axis: usize,
    pub empirical_nmse: f64,
    pub theoretical_nmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmseReport {
    pub scenario: Scenario,
    pub axis_name: String,
    pub trials: usize,
    pub rows: Vec<NmseRow>,
}

impl NmseReport {
    pub fn get(&self, series: &str, axis: usize) -> Option<&NmseRow> {
        self.rows.iter().find(|r| r.series == series && r.axis == axis)
    }

    /// `series,axis,empirical_nmse,theoretical_nmse`, one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,axis,empirical_nmse,theoretical_nmse\n");
        for r in &self.rows {
            let theory = r.theoretical_nmse.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.series, r.axis, r.empirical_nmse, theory).unwrap();
        }
        out
    }

    /// Writes the CSV to `path` and the configuration plus report to the
    /// JSON sidecar.
    pub fn write(&self, path: &Path, cfg: &ExperimentConfig) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        let meta = serde_json::json!({ "config": cfg, "report": self });
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

/// `‖p̂ − p‖² / ‖p‖²`.
pub fn nmse(estimate: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    (estimate - truth).norm_squared() / truth.norm_squared()
}

/// Filter with taps `c_l / ρ^l`, `c_l ~ N(0, 1)` and `ρ` the spectral radius.
pub fn random_filter(basis: &SpectralBasis, taps: usize, seed: u64) -> Result<GraphFilter> {
    let mut g = rng::rng(rng::derive_seed(seed, tags::FILTER, 0));
    let rho = basis.max_abs_eig().max(f64::MIN_POSITIVE);
    let coeffs: Vec<f64> = (0..taps).map(|l| g.sample::<f64, _>(StandardNormal) / rho.powi(l as i32)).collect();
    GraphFilter::from_real(&coeffs)
}

/// ARMA model with `a, b ~ U[0, 1]` on the raw shift, redrawn until
/// `|1 − A(λ_k)| ≥ ε_pole` at every frequency.
pub fn random_arma(basis: &SpectralBasis, order: usize, seed: u64) -> Result<ArmaModel> {
    let mut g = rng::rng(rng::derive_seed(seed, tags::FILTER, 1));
    for _ in 0..1000 {
        let a: Vec<f64> = (0..order).map(|_| g.random::<f64>()).collect();
        let b: Vec<f64> = (0..order).map(|_| g.random::<f64>()).collect();
        let model = ArmaModel { a, b };
        match arma_psd(basis, &model) {
            Ok(_) => return Ok(model),
            Err(Error::PoleOnGrid { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NumericalFailure(format!("no ARMA draw cleared the pole margin {EPS_POLE}")))
}

struct Setup {
    shift: GraphShift,
    basis: SpectralBasis,
}

type TrialRows = Vec<(String, usize, f64, Option<f64>)>;

/// Runs an experiment and, when `cfg.output` is set, writes its report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<NmseReport> {
    cfg.validate()?;
    let shift = generate_graph(&cfg.graph, cfg.seed)?;
    let basis = SpectralBasis::from_shift(&shift)?;
    let setup = Setup { shift, basis };
    let per_trial: Vec<TrialRows> = match cfg.scenario {
        Scenario::Tc1Periodogram => run_trials(cfg, |seed| periodogram_trial(cfg, &setup, seed))?,
        Scenario::Tc1Windows => {
            let local = local_banks(cfg, &setup)?;
            run_trials(cfg, |seed| windows_trial(cfg, &setup, &local, seed))?
        }
        Scenario::Tc1Filterbank => {
            let banks = filter_banks(cfg, &setup)?;
            run_trials(cfg, |seed| filterbank_trial(cfg, &setup, &banks, seed))?
        }
        Scenario::Tc2Ma => run_trials(cfg, |seed| ma_trial(cfg, &setup, seed))?,
        Scenario::Tc2Arma => run_trials(cfg, |seed| arma_trial(cfg, &setup, seed))?,
    };
    let report = aggregate(cfg, per_trial);
    if let Some(path) = &cfg.output {
        report.write(path, cfg)?;
    }
    Ok(report)
}

fn run_trials<F>(cfg: &ExperimentConfig, trial: F) -> Result<Vec<TrialRows>>
where
    F: Fn(u64) -> Result<TrialRows> + Sync,
{
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| trial(rng::derive_seed(cfg.seed, tags::TRIAL, t as u64)))
        .collect()
}

fn aggregate(cfg: &ExperimentConfig, per_trial: Vec<TrialRows>) -> NmseReport {
    let trials = per_trial.len() as f64;
    let template = &per_trial[0];
    let rows = template
        .iter()
        .enumerate()
        .map(|(i, (series, axis, _, theory))| {
            let empirical = per_trial.iter().map(|t| t[i].2).sum::<f64>() / trials;
            let theoretical = theory.map(|_| per_trial.iter().map(|t| t[i].3.unwrap_or(0.0)).sum::<f64>() / trials);
            NmseRow { series: series.clone(), axis: *axis, empirical_nmse: empirical, theoretical_nmse: theoretical }
        })
        .collect();
    NmseReport { scenario: cfg.scenario, axis_name: cfg.scenario.axis_name().into(), trials: per_trial.len(), rows }
}

fn periodogram_trial(cfg: &ExperimentConfig, s: &Setup, seed: u64) -> Result<TrialRows> {
    let filter = random_filter(&s.basis, cfg.taps, seed)?;
    let p = filter_psd(&s.basis, &filter)?;
    let mut rows = Vec::new();
    for (i, &r) in cfg.axis.iter().enumerate() {
        let ens = generate_stationary(&s.shift, &filter, r, cfg.noise, rng::derive_seed(seed, tags::SIGNALS, i as u64))?;
        let est = periodogram(&s.basis, &ens)?;
        let theory = predict_periodogram_moments_normal(&s.basis, &p, r)?.mse / p.norm_squared();
        rows.push(("periodogram".to_string(), r, nmse(&est.p, &p), Some(theory)));
    }
    Ok(rows)
}

/// Community windows when the graph has exactly `m` planted communities,
/// complete-linkage windows otherwise.
fn local_banks(cfg: &ExperimentConfig, s: &Setup) -> Result<Vec<WindowBank>> {
    cfg.axis
        .iter()
        .map(|&m| match cfg.graph.communities() {
            Some(blocks) if blocks.len() == m => WindowBank::from_blocks(cfg.graph.n, blocks),
            _ => design_windows(&s.shift, m, WindowStrategy::Local, cfg.seed),
        })
        .collect()
}

fn windows_trial(cfg: &ExperimentConfig, s: &Setup, local: &[WindowBank], seed: u64) -> Result<TrialRows> {
    let filter = random_filter(&s.basis, cfg.taps, seed)?;
    let p = filter_psd(&s.basis, &filter)?;
    let energy = p.norm_squared();
    let r = cfg.realizations;
    let ens = generate_stationary(&s.shift, &filter, r, cfg.noise, rng::derive_seed(seed, tags::SIGNALS, 0))?;
    let pg = periodogram(&s.basis, &ens)?;
    let pg_theory = predict_periodogram_moments_normal(&s.basis, &p, r)?.mse / energy;
    let mut rows = Vec::new();
    for (i, &m) in cfg.axis.iter().enumerate() {
        let random = design_windows(&s.shift, m, WindowStrategy::Random, rng::derive_seed(seed, tags::WINDOWS, i as u64))?;
        for (name, bank) in [("local", &local[i]), ("random", &random)] {
            let est = windowed_avg_periodogram_ensemble(&s.basis, bank, &ens)?;
            let moments = predict_window_moments(&s.basis, bank, &p)?;
            let theory = (moments.bias.norm_squared() + moments.trace / r as f64) / energy;
            rows.push((name.to_string(), m, nmse(&est.p, &p), Some(theory)));
        }
        rows.push(("periodogram".to_string(), m, nmse(&pg.p, &p), Some(pg_theory)));
    }
    Ok(rows)
}

fn filter_banks(cfg: &ExperimentConfig, s: &Setup) -> Result<Vec<(String, FilterBank)>> {
    let mut banks = Vec::new();
    for &b in &cfg.bandwidths {
        banks.push((format!("ideal_b{b}"), design_ideal_bandpass(&s.basis, b)?));
    }
    for &l in &cfg.fir_taps {
        banks.push((format!("fir_l{l}"), design_fir_bandpass(&s.basis, l)?));
    }
    Ok(banks)
}

fn filterbank_trial(cfg: &ExperimentConfig, s: &Setup, banks: &[(String, FilterBank)], seed: u64) -> Result<TrialRows> {
    let r = cfg.realizations;
    let mut rows = Vec::new();
    for (i, &taps) in cfg.axis.iter().enumerate() {
        let trial_seed = rng::derive_seed(seed, tags::FILTER, i as u64);
        let filter = random_filter(&s.basis, taps, trial_seed)?;
        let p = filter_psd(&s.basis, &filter)?;
        let energy = p.norm_squared();
        let ens = generate_stationary(&s.shift, &filter, r, cfg.noise, rng::derive_seed(trial_seed, tags::SIGNALS, 0))?;
        let pg = periodogram(&s.basis, &ens)?;
        let pg_theory = predict_periodogram_moments_normal(&s.basis, &p, r)?.mse / energy;
        rows.push(("periodogram".to_string(), taps, nmse(&pg.p, &p), Some(pg_theory)));
        for (name, bank) in banks {
            let est = filterbank_estimate_ensemble(&s.basis, bank, &ens)?;
            let m = predict_filterbank_moments_normal(&s.basis, bank, &p)?;
            let theory = (m.bias.norm_squared() + m.variance.sum() / r as f64) / energy;
            rows.push((name.clone(), taps, nmse(&est.p, &p), Some(theory)));
        }
    }
    Ok(rows)
}

fn ma_trial(cfg: &ExperimentConfig, s: &Setup, seed: u64) -> Result<TrialRows> {
    let r = cfg.realizations;
    let mut rows = Vec::new();
    for (i, &taps) in cfg.axis.iter().enumerate() {
        let trial_seed = rng::derive_seed(seed, tags::FILTER, i as u64);
        let filter = random_filter(&s.basis, taps, trial_seed)?;
        let p = filter_psd(&s.basis, &filter)?;
        let ens = generate_stationary(&s.shift, &filter, r, cfg.noise, rng::derive_seed(trial_seed, tags::SIGNALS, 0))?;
        let p_hat = periodogram(&s.basis, &ens)?.p;
        let order = taps + cfg.fit_order_offset;
        let descent = DescentConfig { restarts: cfg.restarts, seed: rng::derive_seed(trial_seed, tags::RESTARTS, 0), ..DescentConfig::default() };
        let freq = ma_psd(&s.basis, &ma_fit_freq(&s.basis, &p_hat, order, &descent)?.model)?.p;
        let symmetric = ma_fit_symmetric_psd(&s.basis, &p_hat, order)?.psd.p;
        let theory = predict_periodogram_moments_normal(&s.basis, &p, r)?.mse / p.norm_squared();
        rows.push(("periodogram".to_string(), taps, nmse(&p_hat, &p), Some(theory)));
        rows.push(("ma_freq".to_string(), taps, nmse(&freq, &p), None));
        rows.push(("ma_symmetric".to_string(), taps, nmse(&symmetric, &p), None));
    }
    Ok(rows)
}

fn arma_trial(cfg: &ExperimentConfig, s: &Setup, seed: u64) -> Result<TrialRows> {
    let model = random_arma(&s.basis, cfg.taps, seed)?;
    let p = arma_psd(&s.basis, &model)?.p;
    let mut rows = Vec::new();
    for (i, &r) in cfg.axis.iter().enumerate() {
        let ens = generate_from_psd(&s.basis, &p, r, cfg.noise, rng::derive_seed(seed, tags::SIGNALS, i as u64))?;
        let p_hat = periodogram(&s.basis, &ens)?.p;
        let theory = predict_periodogram_moments_normal(&s.basis, &p, r)?.mse / p.norm_squared();
        rows.push(("periodogram".to_string(), r, nmse(&p_hat, &p), Some(theory)));
        for variant in [ArmaVariant::Relaxed, ArmaVariant::Nonneg] {
            let fit = arma_fit_ls(&s.basis, &p_hat, cfg.taps, cfg.taps, variant)?;
            rows.push((format!("arma_{}", variant.name()), r, nmse(&fit.psd.p, &p), None));
        }
        if cfg.ratio_fit {
            let descent =
                DescentConfig { restarts: cfg.restarts, seed: rng::derive_seed(seed, tags::RESTARTS, i as u64), ..DescentConfig::default() };
            let fit = arma_fit_ratio(&s.basis, &p_hat, cfg.taps, cfg.taps, &descent)?;
            rows.push(("arma_ratio".to_string(), r, nmse(&arma_psd(&s.basis, &fit.model)?.p, &p), None));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(scenario);
        cfg.trials = 4;
        cfg
    }

    #[test]
    fn reports_are_deterministic() {
        let mut cfg = small(Scenario::Tc1Periodogram);
        cfg.graph = GraphSpec::new(20, GraphFamily::ErdosRenyi { p: 0.3 });
        cfg.axis = vec![1, 5];
        let a = run_experiment(&cfg).unwrap().to_csv();
        let b = run_experiment(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("series,axis,empirical_nmse,theoretical_nmse\n"));
        let report = run_experiment(&cfg).unwrap();
        assert!((report.get("periodogram", 5).unwrap().theoretical_nmse.unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn every_scenario_runs_at_small_scale() {
        for scenario in [Scenario::Tc1Windows, Scenario::Tc1Filterbank, Scenario::Tc2Ma, Scenario::Tc2Arma] {
            let mut cfg = small(scenario);
            cfg.trials = 2;
            match scenario {
                Scenario::Tc1Windows => {
                    cfg.graph = GraphSpec::sbm(3, 6, 0.9, 0.1).laplacian();
                    cfg.axis = vec![1, 3];
                }
                Scenario::Tc1Filterbank => {
                    cfg.graph = GraphSpec::new(20, GraphFamily::ErdosRenyi { p: 0.3 });
                    cfg.axis = vec![2];
                    cfg.fir_taps = vec![3];
                }
                _ => {
                    cfg.graph = GraphSpec::new(20, GraphFamily::ErdosRenyi { p: 0.3 }).laplacian();
                    cfg.restarts = 3;
                }
            }
            let report = run_experiment(&cfg).unwrap();
            assert!(report.rows.iter().all(|r| r.empirical_nmse >= 0.0 && r.empirical_nmse.is_finite()), "{scenario:?}");
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small(Scenario::Tc1Periodogram);
        cfg.trials = 0;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small(Scenario::Tc1Windows);
        cfg.axis = vec![101];
        assert!(run_experiment(&cfg).is_err());
        assert!(Scenario::parse("tc9").is_err());
        assert_eq!(Scenario::parse("tc2_arma").unwrap(), Scenario::Tc2Arma);
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = ExperimentConfig::preset(Scenario::Tc1Filterbank);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
