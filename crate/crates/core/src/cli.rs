//! Command-line front end; the `graphspec` binary is a thin wrapper over
//! [`run`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::json;

use crate::denoise::{broadcast_noise, lowpass_denoise, wiener_denoise};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentConfig, Scenario};
use crate::graphgen::{generate_graph, GraphFamily, GraphSpec};
use crate::io;
use crate::nonparametric::{
    design_fir_bandpass, design_ideal_bandpass, design_windows, filterbank_estimate_ensemble, periodogram,
    windowed_avg_periodogram_ensemble, WindowStrategy,
};
use crate::parametric::{
    ar_fit, arma_fit_ls, arma_fit_ratio, arma_psd, ar_psd, ma_fit_freq, ma_fit_nonneg, ma_fit_symmetric,
    ma_fit_symmetric_psd, ma_psd, ArmaVariant, DescentConfig, ParametricModel,
};
use crate::process::{
    default_exponent_triples, generate_from_psd, generate_stationary, locality_support_check, sample_covariance,
    shift_invariance_residual, stationarity_metric, CovarianceMatrix, NoiseKind, PsdEstimate, PsdMethod,
    SignalEnsemble,
};
use crate::spectral::{GraphFilter, GraphShift, ShiftKind, SpectralBasis};

/// Exit code for invalid input.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "graphspec", version, about = "Spectral estimation for stationary graph processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random graph and write it as an edge list.
    GenGraph(GenGraphArgs),
    /// Filter white noise on a graph and write the realizations.
    GenProcess(GenProcessArgs),
    /// Nonparametric PSD estimate from signals.
    Estimate(EstimateArgs),
    /// Parametric MA, AR or ARMA fit.
    Fit(FitArgs),
    /// Monte Carlo NMSE experiment.
    Experiment(ExperimentArgs),
    /// Wiener or low-pass denoising with a known PSD.
    Denoise(DenoiseArgs),
    /// Stationarity metric, shift-invariance residuals and locality check.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Family {
    Er,
    Sbm,
    SmallWorld,
    Cycle,
    Path,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ShiftArg {
    Adjacency,
    Laplacian,
}

impl From<ShiftArg> for ShiftKind {
    fn from(s: ShiftArg) -> Self {
        match s {
            ShiftArg::Adjacency => ShiftKind::Adjacency,
            ShiftArg::Laplacian => ShiftKind::Laplacian,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NoiseArg {
    Gaussian,
    Uniform,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => NoiseKind::Gaussian,
            NoiseArg::Uniform => NoiseKind::Uniform,
        }
    }
}

#[derive(Debug, Args)]
pub struct GraphInput {
    /// Edge-list (`src,dst,weight`) or dense-matrix CSV.
    #[arg(long)]
    pub graph: PathBuf,
    /// How an edge list becomes a shift.
    #[arg(long, value_enum, default_value = "adjacency")]
    pub shift: ShiftArg,
    /// Vertex count for edge lists with isolated trailing vertices.
    #[arg(long)]
    pub nodes: Option<usize>,
}

impl GraphInput {
    fn load(&self) -> Result<(GraphShift, SpectralBasis)> {
        let shift = io::read_graph(&self.graph, self.shift.into(), self.nodes)?;
        let basis = SpectralBasis::from_shift(&shift)?;
        Ok((shift, basis))
    }
}

#[derive(Debug, Args)]
pub struct GenGraphArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long)]
    pub n: usize,
    /// Edge probability (ER, within-community for SBM).
    #[arg(long)]
    pub p: Option<f64>,
    /// Between-community probability (SBM) or rewiring probability (small world).
    #[arg(long)]
    pub q: Option<f64>,
    /// Number of equal communities (SBM).
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Ring degree before rewiring (small world).
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long, value_enum, default_value = "adjacency")]
    pub shift: ShiftArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenProcessArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    /// Generating filter taps `h_0,h_1,...`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "psd")]
    pub taps: Option<Vec<f64>>,
    /// Target PSD JSON instead of filter taps.
    #[arg(long)]
    pub psd: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub realizations: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EstimateMethod {
    Periodogram,
    Windowed,
    Filterbank,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum)]
    pub method: EstimateMethod,
    #[command(flatten)]
    pub graph: GraphInput,
    #[arg(long)]
    pub signals: PathBuf,
    /// Window design `local:M` or `random:M`.
    #[arg(long, default_value = "local:10")]
    pub windows: String,
    /// Filter bank `ideal:B` or `fir:L`.
    #[arg(long, default_value = "ideal:3")]
    pub fb: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Ma,
    Ar,
    Arma,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    /// Frequency-domain fit (MA, AR) or direct ratio fit (ARMA).
    Freq,
    /// Polynomial relaxation (MA) or lifted LS (ARMA).
    Symmetric,
    /// Nonnegative-coefficient restriction.
    Nonneg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// `L` for MA, `M` for AR, `L,M` for ARMA.
    #[arg(long)]
    pub order: String,
    #[arg(long, value_enum, default_value = "freq")]
    pub variant: VariantArg,
    #[command(flatten)]
    pub graph: GraphInput,
    #[arg(long, conflicts_with = "signals", required_unless_present = "signals")]
    pub psd: Option<PathBuf>,
    #[arg(long)]
    pub signals: Option<PathBuf>,
    #[arg(long, default_value_t = DescentConfig::default().restarts)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Preset scenario.
    #[arg(long, required_unless_present = "config")]
    pub scenario: Option<String>,
    /// Full configuration JSON; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub axis: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Report CSV; metadata goes to the `.json` sidecar.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DenoiseMethod {
    Wiener,
    Lowpass,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    #[arg(long)]
    pub psd: PathBuf,
    #[arg(long)]
    pub signals: PathBuf,
    /// Noise power `ω²`, the same at every frequency (Wiener only).
    #[arg(long, conflicts_with = "noise_power_file")]
    pub noise_power: Option<f64>,
    /// Per-frequency noise power, one value per line after a header.
    #[arg(long)]
    pub noise_power_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "wiener")]
    pub method: DenoiseMethod,
    /// Active-frequency threshold for the low-pass filter.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    #[arg(long, conflicts_with = "covariance", required_unless_present = "covariance")]
    pub signals: Option<PathBuf>,
    /// Dense covariance CSV.
    #[arg(long)]
    pub covariance: Option<PathBuf>,
    /// Filter length for the locality check.
    #[arg(long)]
    pub taps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `name:count`.
fn parse_design(s: &str) -> Result<(&str, usize)> {
    let bad = || Error::InvalidArgument(format!("expected NAME:COUNT, found '{s}'"));
    let (name, count) = s.split_once(':').ok_or_else(bad)?;
    Ok((name, count.parse().map_err(|_| bad())?))
}

fn parse_order(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad order '{s}'"))))
        .collect()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::GenProcess(a) => gen_process(a),
        Command::Estimate(a) => estimate(a),
        Command::Fit(a) => fit(a),
        Command::Experiment(a) => experiment(a),
        Command::Denoise(a) => denoise(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

/// Caps the global worker pool at `GRAPHSPEC_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GRAPHSPEC_THREADS") {
        let n: usize = v.parse().map_err(|_| Error::InvalidArgument(format!("GRAPHSPEC_THREADS='{v}' is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn gen_graph(a: GenGraphArgs) -> Result<()> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")));
    let family = match a.family {
        Family::Er => GraphFamily::ErdosRenyi { p: need(a.p, "p")? },
        Family::Sbm => {
            let blocks = a.blocks.ok_or_else(|| Error::InvalidArgument("--blocks is required".into()))?;
            if blocks == 0 || !a.n.is_multiple_of(blocks) {
                return Err(Error::InvalidArgument(format!("{} nodes do not split into {blocks} equal blocks", a.n)));
            }
            GraphFamily::StochasticBlock { sizes: vec![a.n / blocks; blocks], p: need(a.p, "p")?, q: need(a.q, "q")? }
        }
        Family::SmallWorld => GraphFamily::SmallWorld {
            degree: a.degree.ok_or_else(|| Error::InvalidArgument("--degree is required".into()))?,
            q: need(a.q, "q")?,
        },
        Family::Cycle => GraphFamily::DirectedCycle,
        Family::Path => GraphFamily::Path,
    };
    let spec = GraphSpec { n: a.n, family, shift: a.shift.into() };
    let shift = generate_graph(&spec, a.seed)?;
    io::write_edge_list(&a.out, &shift)
}

fn gen_process(a: GenProcessArgs) -> Result<()> {
    let (shift, basis) = a.graph.load()?;
    let noise = a.noise.into();
    let ens = match (&a.taps, &a.psd) {
        (Some(taps), None) => generate_stationary(&shift, &GraphFilter::from_real(taps)?, a.realizations, noise, a.seed)?,
        (None, Some(path)) => generate_from_psd(&basis, &io::read_psd(path)?.p, a.realizations, noise, a.seed)?,
        _ => return Err(Error::InvalidArgument("give exactly one of --taps and --psd".into())),
    };
    io::write_signals(&a.out, &ens)
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let (shift, basis) = a.graph.load()?;
    let ens = io::read_signals(&a.signals)?;
    let (psd, meta) = match a.method {
        EstimateMethod::Periodogram => (periodogram(&basis, &ens)?, json!({ "realizations": ens.r() })),
        EstimateMethod::Windowed => {
            let (name, m) = parse_design(&a.windows)?;
            let strategy = match name {
                "local" => WindowStrategy::Local,
                "random" => WindowStrategy::Random,
                _ => return Err(Error::InvalidArgument(format!("unknown window strategy '{name}'"))),
            };
            let bank = design_windows(&shift, m, strategy, a.seed)?;
            let mut psd = windowed_avg_periodogram_ensemble(&basis, &bank, &ens)?;
            psd.method = PsdMethod::WindowedAverage { windows: m, strategy: strategy.name().into() };
            (psd, json!({ "realizations": ens.r(), "windows": bank.labels }))
        }
        EstimateMethod::Filterbank => {
            let (name, k) = parse_design(&a.fb)?;
            let bank = match name {
                "ideal" => design_ideal_bandpass(&basis, k)?,
                "fir" => design_fir_bandpass(&basis, k)?,
                _ => return Err(Error::InvalidArgument(format!("unknown filter bank '{name}'"))),
            };
            (filterbank_estimate_ensemble(&basis, &bank, &ens)?, json!({ "realizations": ens.r() }))
        }
    };
    io::write_psd(&a.out, &psd, meta)
}

fn fit_input(a: &FitArgs, basis: &SpectralBasis) -> Result<(DVector<f64>, Option<SignalEnsemble>)> {
    match (&a.psd, &a.signals) {
        (Some(path), None) => Ok((io::read_psd(path)?.p, None)),
        (None, Some(path)) => {
            let ens = io::read_signals(path)?;
            Ok((periodogram(basis, &ens)?.p, Some(ens)))
        }
        _ => Err(Error::InvalidArgument("give exactly one of --psd and --signals".into())),
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let (_, basis) = a.graph.load()?;
    let (p_hat, ens) = fit_input(&a, &basis)?;
    let order = parse_order(&a.order)?;
    let descent = DescentConfig { restarts: a.restarts, seed: a.seed, ..DescentConfig::default() };
    let single = |what: &str| match order.as_slice() {
        [k] => Ok(*k),
        _ => Err(Error::InvalidArgument(format!("{what} takes a single order"))),
    };
    let out = match (a.model, a.variant) {
        (ModelArg::Ma, VariantArg::Freq) => {
            let f = ma_fit_freq(&basis, &p_hat, single("ma")?, &descent)?;
            let psd = ma_psd(&basis, &f.model)?;
            json!({ "model": ParametricModel::Ma(f.model), "objective": f.objective, "diagnostics": f.summary, "psd": psd.p.as_slice() })
        }
        (ModelArg::Ma, VariantArg::Symmetric) => {
            let l = single("ma")?;
            let f = match &ens {
                Some(ens) => ma_fit_symmetric(&basis, &sample_covariance(ens), l)?,
                None => ma_fit_symmetric_psd(&basis, &p_hat, l)?,
            };
            json!({
                "gamma": f.gamma, "objective": f.residual * f.residual, "psd": f.psd.p.as_slice(),
                "diagnostics": { "rank_deficient": f.rank_deficient, "warnings": f.warnings },
            })
        }
        (ModelArg::Ma, VariantArg::Nonneg) => {
            let f = ma_fit_nonneg(&basis, &p_hat, single("ma")?)?;
            let psd = ma_psd(&basis, &f.model)?;
            json!({ "model": ParametricModel::Ma(f.model), "objective": f.residual * f.residual, "diagnostics": { "kkt": f.kkt }, "psd": psd.p.as_slice() })
        }
        (ModelArg::Ar, _) => {
            let f = ar_fit(&basis, &p_hat, single("ar")?, &descent)?;
            let psd = ar_psd(&basis, &f.model)?;
            json!({ "model": ParametricModel::Ar(f.model), "objective": f.objective, "diagnostics": f.summary, "psd": psd.p.as_slice() })
        }
        (ModelArg::Arma, variant) => {
            let [l, m] = order.as_slice() else {
                return Err(Error::InvalidArgument("arma takes --order L,M".into()));
            };
            match variant {
                VariantArg::Freq => {
                    let f = arma_fit_ratio(&basis, &p_hat, *m, *l, &descent)?;
                    let psd = arma_psd(&basis, &f.model)?;
                    json!({ "model": ParametricModel::Arma(f.model), "objective": f.objective, "diagnostics": f.summary, "psd": psd.p.as_slice() })
                }
                VariantArg::Symmetric | VariantArg::Nonneg => {
                    let v = if matches!(variant, VariantArg::Nonneg) { ArmaVariant::Nonneg } else { ArmaVariant::Relaxed };
                    let f = arma_fit_ls(&basis, &p_hat, *m, *l, v)?;
                    json!({
                        "model": f.model.clone().map(ParametricModel::Arma), "lifted": f.lifted, "objective": f.objective,
                        "psd": f.psd.p.as_slice(),
                        "diagnostics": {
                            "variant": v.name(), "pole_violations": f.pole_violations,
                            "rank_deficient": f.rank_deficient, "warnings": f.warnings,
                        },
                    })
                }
            }
        }
    };
    io::write_json(&a.out, &out)
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = match (&a.config, &a.scenario) {
        (Some(path), _) => serde_json::from_reader(std::fs::File::open(path)?)?,
        (None, Some(name)) => ExperimentConfig::preset(Scenario::parse(name)?),
        (None, None) => return Err(Error::InvalidArgument("give --scenario or --config".into())),
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(axis) = a.axis {
        cfg.axis = axis;
    }
    if let Some(n) = a.noise {
        cfg.noise = n.into();
    }
    cfg.output = Some(a.out);
    run_experiment(&cfg).map(|_| ())
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let (_, basis) = a.graph.load()?;
    let p = io::read_psd(&a.psd)?.p;
    let ens = io::read_signals(&a.signals)?;
    let noise_power = match (a.method, a.noise_power, &a.noise_power_file) {
        (DenoiseMethod::Lowpass, None, None) => None,
        (_, Some(w), None) => Some(broadcast_noise(basis.n(), w)),
        (_, None, Some(path)) => {
            let m = io::read_real_matrix(path)?;
            Some(DVector::from_iterator(m.len(), m.iter().cloned()))
        }
        _ => return Err(Error::InvalidArgument("wiener needs exactly one of --noise-power and --noise-power-file".into())),
    };
    let mut out = Vec::with_capacity(ens.r());
    for r in 0..ens.r() {
        let y = ens.column(r);
        out.push(match a.method {
            DenoiseMethod::Wiener => wiener_denoise(&basis, &p, noise_power.as_ref().unwrap(), &y)?,
            DenoiseMethod::Lowpass => lowpass_denoise(&basis, &p, &y, a.threshold)?,
        });
    }
    let cleaned = SignalEnsemble::from_complex(nalgebra::DMatrix::from_columns(&out))?;
    io::write_signals(&a.out, &cleaned)
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let (shift, basis) = a.graph.load()?;
    let cov = match (&a.signals, &a.covariance) {
        (Some(path), None) => sample_covariance(&io::read_signals(path)?),
        (None, Some(path)) => CovarianceMatrix::new(io::read_dense_matrix(path)?)?,
        _ => return Err(Error::InvalidArgument("give exactly one of --signals and --covariance".into())),
    };
    let theta = stationarity_metric(&basis, &cov)?;
    let residuals = default_exponent_triples(4)
        .into_iter()
        .map(|(x, y, z)| shift_invariance_residual(&shift, &cov, x, y, z).map(|r| json!({ "a": x, "b": y, "c": z, "residual": r })))
        .collect::<Result<Vec<_>>>()?;
    let locality = a.taps.map(|l| locality_support_check(&shift, &cov, l)).transpose()?;
    let psd: Option<PsdEstimate> = crate::process::psd_from_covariance(&basis, &cov).ok();
    let report = json!({
        "stationarity_metric": theta,
        "shift_invariance": residuals,
        "locality": locality,
        "psd": psd.map(|p| p.p.as_slice().to_vec()),
    });
    io::write_json(&a.out, &report)
}
