//! JSON scenario files and the runs behind the command-line tool.
//!
//! A scenario holds exactly one of four blocks:
//!
//! - `protocol`: measure, evolve through a channel, measure again;
//! - `feedback`: the same with a mid-protocol measurement selecting the
//!   branch map;
//! - `anneal`: master-equation anneals, optionally swept over `J`, `t_f`
//!   and `kappa`;
//! - `fit`: bath coupling fitted to measured counts.
//!
//! Matrices are arrays of rows. An entry is a number or a `[re, im]` pair.
//! Floats in CSV output carry 17 significant digits.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ame::{AnnealSpec, AnnealSpecFile, PropagateOptions, Schedule};
use crate::channels::{Channel, CpMap};
use crate::error::{Error, Result};
use crate::experiment::{
    fit_kappa, read_counts_csv, sample_counts, simulate, state_label, write_counts_csv, ExperimentPoint, FitOptions,
    FitResult, Simulator,
};
use crate::feedback::{
    feedback_efficacy, feedback_forward_pdf, feedback_mgf_identity, mutual_info_observable_pdf, ErrorModel,
    FeedbackProtocolSpec,
};
use crate::fluctuation::{
    crooks_check, efficacy, forward_pdf, gamma_bound, generalized_entropy_identity, jarzynski_check,
    projective_entropy_identity, reverse_quantity, second_law_check, ObservableDistribution, ProtocolSpec, VChoice,
};
use crate::linalg::{boltzmann_weights, eig_hermitian, gibbs_state, DensityMatrix, Hermitian, Operator, C64};
use crate::measurements::{check_microreversible, qubit_ladder_pair, Measurement, ReverseUnitaries};
use crate::tolerance;

pub const SCENARIO_VERSION: u32 = 1;

/// A matrix entry: real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

pub type MatrixRows = Vec<Vec<Entry>>;

pub fn operator_from_rows(rows: &MatrixRows) -> Result<Operator> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::validation("empty matrix"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::validation(format!("matrix rows must have {n} entries, found one with {}", r.len())));
    }
    Ok(Operator::from_fn(n, n, |i, j| match rows[i][j] {
        Entry::Real(x) => C64::new(x, 0.0),
        Entry::Complex([re, im]) => C64::new(re, im),
    }))
}

fn hermitian_from_rows(rows: &MatrixRows) -> Result<Hermitian> {
    Hermitian::new(operator_from_rows(rows)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsSource {
    pub hamiltonian: MatrixRows,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    MaximallyMixed,
    Gibbs(GibbsSource),
    Matrix(MatrixRows),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementSource {
    Computational,
    /// `{sigma+, sigma-}` of the microreversible qubit pair.
    LadderP,
    /// `{sigma_x, sigma_y}/sqrt(2)` of the microreversible qubit pair.
    LadderQ,
    /// Eigenprojectors of a Hermitian matrix.
    Eigenbasis(MatrixRows),
    /// Projectors onto the columns of a unitary.
    Basis(MatrixRows),
    Ops(Vec<MatrixRows>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSource {
    Identity,
    Unitary(MatrixRows),
    Kraus(Vec<MatrixRows>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionSource {
    Probabilities(Vec<f64>),
    Gibbs { gibbs: GibbsSource },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolBlock {
    pub rho: StateSource,
    pub p: MeasurementSource,
    pub channel: ChannelSource,
    pub q: MeasurementSource,
    pub q_dist: DistributionSource,
    /// Final Hamiltonian and inverse temperature for the heat term.
    #[serde(default)]
    pub thermal: Option<GibbsSource>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSource {
    Symmetric(f64),
    /// Rows are recorded labels, columns true outcomes.
    Confusion(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackBlock {
    pub rho: StateSource,
    pub p: MeasurementSource,
    pub pre_channel: ChannelSource,
    pub mid: MeasurementSource,
    /// Kraus operators per label; a branch may be trace decreasing.
    pub branches: Vec<Vec<MatrixRows>>,
    pub finals: Vec<MeasurementSource>,
    pub q_cond: Vec<DistributionSource>,
    #[serde(default)]
    pub errors: Option<ErrorSource>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
}

fn default_lambdas() -> Vec<f64> {
    vec![-1.0, -0.5, 0.5, 1.0]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepBlock {
    #[serde(rename = "J", default)]
    pub j: Vec<f64>,
    #[serde(default)]
    pub t_f_us: Vec<f64>,
    #[serde(default)]
    pub kappa: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealBlock {
    pub spec: AnnealSpecFile,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub record_trajectory: bool,
    /// Draw this many final measurements per sweep point into `counts.csv`.
    #[serde(default)]
    pub shots: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitBlock {
    /// Counts CSV with columns `J, t_f_us, state_label, count`.
    pub data: String,
    pub spec: AnnealSpecFile,
    #[serde(default = "default_kappa_range")]
    pub kappa_range: [f64; 2],
    #[serde(default)]
    pub points_per_decade: Option<usize>,
    #[serde(default)]
    pub ln_tol: Option<f64>,
}

fn default_kappa_range() -> [f64; 2] {
    [1e-4, 1e-2]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default)]
    pub protocol: Option<ProtocolBlock>,
    #[serde(default)]
    pub feedback: Option<FeedbackBlock>,
    #[serde(default)]
    pub anneal: Option<AnnealBlock>,
    #[serde(default)]
    pub fit: Option<FitBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// The block a scenario carries.
pub enum Block<'a> {
    Protocol(&'a ProtocolBlock),
    Feedback(&'a FeedbackBlock),
    Anneal(&'a AnnealBlock),
    Fit(&'a FitBlock),
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let s: ScenarioFile = serde_json::from_str(text)?;
        if s.version != SCENARIO_VERSION {
            return Err(Error::validation(format!("unsupported scenario version {}", s.version)));
        }
        s.block()?;
        Ok(s)
    }

    pub fn block(&self) -> Result<Block<'_>> {
        let mut blocks = Vec::new();
        if let Some(b) = &self.protocol {
            blocks.push(Block::Protocol(b));
        }
        if let Some(b) = &self.feedback {
            blocks.push(Block::Feedback(b));
        }
        if let Some(b) = &self.anneal {
            blocks.push(Block::Anneal(b));
        }
        if let Some(b) = &self.fit {
            blocks.push(Block::Fit(b));
        }
        match blocks.len() {
            1 => Ok(blocks.pop().unwrap()),
            n => Err(Error::validation(format!(
                "a scenario needs exactly one of protocol, feedback, anneal, fit; found {n}"
            ))),
        }
    }
}

/// A parsed scenario and the directory relative paths refer to.
pub struct Scenario {
    pub file: ScenarioFile,
    pub base: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let file = ScenarioFile::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Scenario { file, base })
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_relative() {
            self.base.join(path)
        } else {
            path.to_path_buf()
        }
    }
}

fn build_state(src: &StateSource, dim: Option<usize>) -> Result<DensityMatrix> {
    match src {
        StateSource::MaximallyMixed => match dim {
            Some(d) => Ok(DensityMatrix::maximally_mixed(d)),
            None => Err(Error::validation("maximally_mixed needs the dimension from another field")),
        },
        StateSource::Gibbs(g) => gibbs_state(&hermitian_from_rows(&g.hamiltonian)?, g.beta),
        StateSource::Matrix(m) => DensityMatrix::new(operator_from_rows(m)?),
    }
}

fn build_measurement(src: &MeasurementSource, dim: Option<usize>) -> Result<Measurement> {
    match src {
        MeasurementSource::Computational => match dim {
            Some(d) => Ok(Measurement::computational(d)),
            None => Err(Error::validation("computational needs the dimension from another field")),
        },
        MeasurementSource::LadderP => Ok(qubit_ladder_pair().0),
        MeasurementSource::LadderQ => Ok(qubit_ladder_pair().1),
        MeasurementSource::Eigenbasis(h) => {
            let spectrum = eig_hermitian(&hermitian_from_rows(h)?);
            Measurement::projective_from_basis(spectrum.vectors())
        }
        MeasurementSource::Basis(u) => Measurement::projective_from_basis(&operator_from_rows(u)?),
        MeasurementSource::Ops(ops) => Measurement::new(ops.iter().map(operator_from_rows).collect::<Result<_>>()?, None),
    }
}

fn build_channel(src: &ChannelSource, dim: Option<usize>) -> Result<Channel> {
    match src {
        ChannelSource::Identity => match dim {
            Some(d) => Ok(Channel::identity(d)),
            None => Err(Error::validation("identity channel needs the dimension from another field")),
        },
        ChannelSource::Unitary(u) => Channel::unitary(operator_from_rows(u)?),
        ChannelSource::Kraus(k) => Channel::new(k.iter().map(operator_from_rows).collect::<Result<_>>()?),
    }
}

fn build_distribution(src: &DistributionSource) -> Result<Vec<f64>> {
    match src {
        DistributionSource::Probabilities(p) => Ok(p.clone()),
        DistributionSource::Gibbs { gibbs } => {
            let h = hermitian_from_rows(&gibbs.hamiltonian)?;
            Ok(boltzmann_weights(eig_hermitian(&h).values(), gibbs.beta))
        }
    }
}

fn state_dim(src: &StateSource) -> Option<usize> {
    match src {
        StateSource::MaximallyMixed => None,
        StateSource::Gibbs(g) => Some(g.hamiltonian.len()),
        StateSource::Matrix(m) => Some(m.len()),
    }
}

fn measurement_dim(src: &MeasurementSource) -> Option<usize> {
    match src {
        MeasurementSource::Computational => None,
        MeasurementSource::LadderP | MeasurementSource::LadderQ => Some(2),
        MeasurementSource::Eigenbasis(m) | MeasurementSource::Basis(m) => Some(m.len()),
        MeasurementSource::Ops(ops) => ops.first().map(Vec::len),
    }
}

fn channel_dim(src: &ChannelSource) -> Option<usize> {
    match src {
        ChannelSource::Identity => None,
        ChannelSource::Unitary(m) => Some(m.len()),
        ChannelSource::Kraus(k) => k.first().map(Vec::len),
    }
}

/// One named check of `validate`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Informational checks do not fail validation.
    pub required: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub kind: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.required)
    }

    fn record<T>(&mut self, name: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => {
                self.checks.push(Check { name: name.into(), passed: true, required: true, detail: "ok".into() });
                Some(v)
            }
            Err(e) => {
                self.checks.push(Check { name: name.into(), passed: false, required: true, detail: e.to_string() });
                None
            }
        }
    }

    fn note(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed, required: false, detail });
    }
}

/// Schema and physics checks: every component is built on its own so each
/// violation is reported under its field name.
pub fn validate(s: &Scenario) -> Result<ValidationReport> {
    match s.file.block()? {
        Block::Protocol(b) => Ok(validate_protocol(b)),
        Block::Feedback(b) => Ok(validate_feedback(b)),
        Block::Anneal(b) => {
            let mut rep = ValidationReport { kind: "anneal".into(), checks: Vec::new() };
            if let Some(spec) = rep.record("spec", b.spec.build(Some(&s.base))) {
                for &j in &b.sweep.j {
                    rep.record(&format!("sweep J = {j}"), spec.clone().with_coupling_strength(j));
                }
                for &t in &b.sweep.t_f_us {
                    rep.record(&format!("sweep t_f = {t}"), spec.clone().with_t_f(t));
                }
                for &k in &b.sweep.kappa {
                    rep.record(&format!("sweep kappa = {k}"), spec.clone().with_kappa(k));
                }
            }
            Ok(rep)
        }
        Block::Fit(b) => {
            let mut rep = ValidationReport { kind: "fit".into(), checks: Vec::new() };
            if let Some(spec) = rep.record("spec", b.spec.build(Some(&s.base))) {
                let data = File::open(s.resolve(&b.data)).map_err(Error::from).and_then(|f| read_counts_csv(f, spec.n_qubits()));
                rep.record("data", data);
            }
            let [lo, hi] = b.kappa_range;
            let ok = lo > 0.0 && hi > lo;
            rep.record("kappa_range", if ok { Ok(()) } else { Err(Error::validation(format!("bad range [{lo}, {hi}]"))) });
            Ok(rep)
        }
    }
}

fn validate_protocol(b: &ProtocolBlock) -> ValidationReport {
    let mut rep = ValidationReport { kind: "protocol".into(), checks: Vec::new() };
    let dim = state_dim(&b.rho).or(measurement_dim(&b.p)).or(channel_dim(&b.channel)).or(measurement_dim(&b.q));
    let rho = rep.record("rho", build_state(&b.rho, dim));
    let p = rep.record("p", build_measurement(&b.p, dim));
    let channel = rep.record("channel", build_channel(&b.channel, dim));
    let q = rep.record("q", build_measurement(&b.q, dim));
    let q_dist = rep.record("q_dist", build_distribution(&b.q_dist));
    if let (Some(p), Some(q)) = (&p, &q) {
        if let Ok(m) = check_microreversible(p, q) {
            rep.note("microreversible", m.passed, format!("ensemble residual {:.3e}", m.ensemble_residual));
        }
    }
    if let Some(ch) = &channel {
        let defect = ch.unitality_defect();
        rep.note("unital", defect <= tolerance::get().tp, format!("||E(1) - 1|| = {defect:.3e}"));
    }
    if let (Some(rho), Some(p), Some(ch), Some(q), Some(qd)) = (rho, p, channel, q, q_dist) {
        rep.record("protocol", ProtocolSpec::new(rho, p, ch, q, qd));
    }
    rep
}

fn build_feedback(b: &FeedbackBlock, rep: Option<&mut ValidationReport>) -> Result<FeedbackProtocolSpec> {
    let dim = state_dim(&b.rho).or(measurement_dim(&b.p)).or(channel_dim(&b.pre_channel)).or(measurement_dim(&b.mid));
    let mut scratch = ValidationReport { kind: String::new(), checks: Vec::new() };
    let rep = rep.unwrap_or(&mut scratch);
    let rho = rep.record("rho", build_state(&b.rho, dim));
    let p = rep.record("p", build_measurement(&b.p, dim));
    let pre = rep.record("pre_channel", build_channel(&b.pre_channel, dim));
    let mid = rep.record("mid", build_measurement(&b.mid, dim));
    let branches: Vec<Option<CpMap>> = b
        .branches
        .iter()
        .enumerate()
        .map(|(k, kraus)| {
            let ops = kraus.iter().map(operator_from_rows).collect::<Result<Vec<_>>>();
            rep.record(&format!("branches[{k}]"), ops.and_then(|o| CpMap::from_kraus(o, true)))
        })
        .collect();
    let finals: Vec<Option<Measurement>> =
        b.finals.iter().enumerate().map(|(k, m)| rep.record(&format!("finals[{k}]"), build_measurement(m, dim))).collect();
    let q_cond: Vec<Option<Vec<f64>>> =
        b.q_cond.iter().enumerate().map(|(k, q)| rep.record(&format!("q_cond[{k}]"), build_distribution(q))).collect();
    let errors = match &b.errors {
        None => Some(None),
        Some(ErrorSource::Symmetric(eps)) => {
            let n = mid.as_ref().map_or(0, Measurement::len);
            rep.record("errors", ErrorModel::symmetric(n, *eps)).map(Some)
        }
        Some(ErrorSource::Confusion(rows)) => {
            let r = rows.len();
            let c = rows.first().map_or(0, Vec::len);
            let m = if rows.iter().all(|row| row.len() == c) {
                ErrorModel::new(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
            } else {
                Err(Error::validation("confusion matrix rows differ in length"))
            };
            rep.record("errors", m).map(Some)
        }
    };
    let spec = match (rho, p, pre, mid, errors) {
        (Some(rho), Some(p), Some(pre), Some(mid), Some(errors))
            if branches.iter().all(Option::is_some)
                && finals.iter().all(Option::is_some)
                && q_cond.iter().all(Option::is_some) =>
        {
            FeedbackProtocolSpec::new(
                rho,
                p,
                pre,
                mid,
                branches.into_iter().flatten().collect(),
                finals.into_iter().flatten().collect(),
                q_cond.into_iter().flatten().collect(),
                errors,
            )
        }
        _ => Err(Error::validation("feedback protocol has invalid components")),
    };
    let first_error = rep.checks.iter().find(|c| !c.passed && c.required).map(|c| format!("{}: {}", c.name, c.detail));
    match (spec, first_error) {
        (Ok(s), _) => Ok(s),
        (Err(_), Some(msg)) => Err(Error::validation(msg)),
        (Err(e), None) => Err(e),
    }
}

fn validate_feedback(b: &FeedbackBlock) -> ValidationReport {
    let mut rep = ValidationReport { kind: "feedback".into(), checks: Vec::new() };
    let spec = build_feedback(b, Some(&mut rep));
    if rep.passed() {
        rep.record("feedback", spec);
    }
    rep
}

impl ProtocolBlock {
    pub fn build(&self) -> Result<ProtocolSpec> {
        build_protocol(self)
    }
}

impl FeedbackBlock {
    pub fn build(&self) -> Result<FeedbackProtocolSpec> {
        build_feedback(self, None)
    }
}

fn build_protocol(b: &ProtocolBlock) -> Result<ProtocolSpec> {
    let rep = validate_protocol(b);
    if let Some(c) = rep.checks.iter().find(|c| !c.passed && c.required) {
        return Err(Error::validation(format!("{}: {}", c.name, c.detail)));
    }
    let dim = state_dim(&b.rho).or(measurement_dim(&b.p)).or(channel_dim(&b.channel)).or(measurement_dim(&b.q));
    ProtocolSpec::new(
        build_state(&b.rho, dim)?,
        build_measurement(&b.p, dim)?,
        build_channel(&b.channel, dim)?,
        build_measurement(&b.q, dim)?,
        build_distribution(&b.q_dist)?,
    )
}

/// Settings shared by every run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's output directory.
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads for sweeps and fits, 0 for one per core.
    pub threads: usize,
    /// Schedule CSV replacing the one in anneal and fit specs.
    pub schedule: Option<PathBuf>,
}

/// Files written by a run and its JSON summary.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn out_dir(s: &Scenario, opts: &RunOptions) -> Result<PathBuf> {
    let dir = match (&opts.out, &s.file.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => s.resolve(d),
        (None, None) => PathBuf::from("out"),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_distribution(path: &Path, dist: &ObservableDistribution, weight: &str) -> Result<()> {
    let header = vec!["v".to_string(), weight.to_string()];
    write_csv(path, &header, dist.atoms().iter().map(|a| vec![fmt_f64(a.v), fmt_f64(a.prob)]))
}

pub fn run(s: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let dir = out_dir(s, opts)?;
    match s.file.block()? {
        Block::Protocol(b) => run_protocol(b, &dir),
        Block::Feedback(b) => run_feedback(b, &dir),
        Block::Anneal(b) => run_anneal(s, b, &dir, opts),
        Block::Fit(b) => {
            let spec = anneal_spec(s, &b.spec, opts)?;
            let points = read_counts_csv(File::open(s.resolve(&b.data))?, spec.n_qubits())?;
            let fit = FitSettings {
                range: (b.kappa_range[0], b.kappa_range[1]),
                options: FitOptions {
                    points_per_decade: b.points_per_decade.unwrap_or(FitOptions::default().points_per_decade),
                    ln_tol: b.ln_tol.unwrap_or(FitOptions::default().ln_tol),
                    ..FitOptions::default()
                },
                threads: opts.threads,
            };
            run_fit(&points, spec, &fit, &dir, Some(&s.resolve(&b.data)))
        }
    }
}

fn run_protocol(b: &ProtocolBlock, dir: &Path) -> Result<RunOutput> {
    let spec = build_protocol(b)?;
    let fwd = forward_pdf(&spec, VChoice::LogPQ)?;
    let rev = reverse_quantity(&spec, VChoice::LogPQ)?;
    let tol = tolerance::get();
    let projective = spec.p().is_rank_one_projective(tol.meas) && spec.q().is_rank_one_projective(tol.meas);
    let thermal = match &b.thermal {
        Some(g) => Some((g.beta, hermitian_from_rows(&g.hamiltonian)?)),
        None => None,
    };
    let projective_identity = if projective {
        Some(projective_entropy_identity(&spec, thermal.as_ref().map(|(beta, h)| (*beta, h)))?)
    } else {
        None
    };
    let microreversible = check_microreversible(spec.p(), spec.q())?.passed;
    let unitality_defect = spec.channel().unitality_defect();
    let crooks = if microreversible && unitality_defect <= tol.tp {
        Some(crooks_check(&spec, &ReverseUnitaries::default())?.max_residual)
    } else {
        None
    };
    let summary = json!({
        "kind": "protocol",
        "dim": spec.dim(),
        "mean_v": fwd.mean(),
        "variance_v": fwd.variance(),
        "efficacy": efficacy(&spec)?,
        "jarzynski": jarzynski_check(&spec, VChoice::LogPQ)?,
        "second_law": second_law_check(&spec)?,
        "gamma_bound": gamma_bound(&spec)?,
        "generalized_entropy": generalized_entropy_identity(&spec)?,
        "projective_entropy": projective_identity,
        "unitality_defect": unitality_defect,
        "microreversible": microreversible,
        "crooks_max_residual": crooks,
    });
    let files = vec![dir.join("summary.json"), dir.join("forward_pdf.csv"), dir.join("reverse_quantity.csv")];
    write_json(&files[0], &summary)?;
    write_distribution(&files[1], &fwd, "probability")?;
    write_distribution(&files[2], &rev, "weight")?;
    Ok(RunOutput { files, summary })
}

fn run_feedback(b: &FeedbackBlock, dir: &Path) -> Result<RunOutput> {
    let spec = build_feedback(b, None)?;
    let fwd = feedback_forward_pdf(&spec)?;
    let g = feedback_efficacy(&spec)?;
    let mgf = b
        .lambdas
        .iter()
        .map(|&l| {
            let m = feedback_mgf_identity(&spec, l)?;
            Ok(json!({
                "lambda": l,
                "atom_sum": m.atom_sum,
                "trace_form": m.trace_form,
                "reverse_sum": m.reverse_sum,
                "relative_residual": m.relative_residual(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let info = mutual_info_observable_pdf(&spec)?;
    let summary = json!({
        "kind": "feedback",
        "dim": spec.dim(),
        "labels": spec.labels(),
        "mean_v": fwd.mean(),
        "exponential_average": fwd.mgf(-1.0),
        "efficacy": { "dual_form": g.dual_form, "identity_form": g.identity_form },
        "mgf": mgf,
        "mutual_information": info.mutual_information,
        "information_integral": info.integral,
        "information_formal_integral": info.formal_integral,
    });
    let files = vec![dir.join("summary.json"), dir.join("forward_pdf.csv"), dir.join("information_pdf.csv")];
    write_json(&files[0], &summary)?;
    write_distribution(&files[1], &fwd, "probability")?;
    write_distribution(&files[2], &info.pdf, "probability")?;
    Ok(RunOutput { files, summary })
}

fn anneal_spec(s: &Scenario, file: &AnnealSpecFile, opts: &RunOptions) -> Result<AnnealSpec> {
    let spec = file.build(Some(&s.base))?;
    match &opts.schedule {
        Some(path) => spec.with_schedule(Schedule::from_csv_path(path)?),
        None => Ok(spec),
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker threads: {e}")))
}

/// Columns of `sweep.csv`.
pub fn sweep_header(dim: usize, n_qubits: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "J", "t_f_us", "kappa", "mean_v", "gamma_lhs", "gamma_rhs", "qje_residual", "fm_lhs", "fm_rhs", "fm_residual",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..dim).map(|k| format!("f_{}", state_label(k, n_qubits))));
    h
}

fn run_anneal(s: &Scenario, b: &AnnealBlock, dir: &Path, opts: &RunOptions) -> Result<RunOutput> {
    let base = anneal_spec(s, &b.spec, opts)?;
    let coupling = base.couplings().first().map(|c| c.2);
    let js: Vec<Option<f64>> = if b.sweep.j.is_empty() { vec![None] } else { b.sweep.j.iter().map(|&j| Some(j)).collect() };
    let ts = if b.sweep.t_f_us.is_empty() { vec![base.t_f_us()] } else { b.sweep.t_f_us.clone() };
    let ks = if b.sweep.kappa.is_empty() { vec![base.kappa()] } else { b.sweep.kappa.clone() };
    let mut specs = Vec::new();
    for &j in &js {
        for &t in &ts {
            for &k in &ks {
                let spec = match j {
                    Some(j) => base.clone().with_coupling_strength(j)?,
                    None => base.clone(),
                };
                specs.push((j.or(coupling), spec.with_t_f(t)?.with_kappa(k)?));
            }
        }
    }
    info!("running {} anneals", specs.len());
    let options = if b.record_trajectory { PropagateOptions::default().recording() } else { PropagateOptions::default() };
    let runs = thread_pool(opts.threads)?
        .install(|| specs.par_iter().map(|(_, spec)| simulate(spec, &options)).collect::<Result<Vec<_>>>())?;

    let (d, n) = (base.dim(), base.n_qubits());
    let mut rows = Vec::new();
    let mut transitions = Vec::new();
    let mut points = Vec::new();
    for ((j, spec), run) in specs.iter().zip(&runs) {
        let q = run.qje()?;
        let m = run.first_moment()?;
        let j = j.unwrap_or(0.0);
        let mut row = vec![j, spec.t_f_us(), spec.kappa(), run.mean_v(), q.lhs, q.rhs, q.residual, m.lhs, m.rhs, m.residual];
        row.extend(&run.f);
        rows.push(row.into_iter().map(fmt_f64).collect());
        let st = &run.statistics;
        transitions.push(json!({
            "J": j,
            "t_f_us": spec.t_f_us(),
            "kappa": spec.kappa(),
            "initial_energies": st.initial_energies,
            "final_energies": st.final_energies,
            "p": st.p,
            "q": st.q,
            "delta_f": st.delta_f,
            "matrix": (0..d).map(|b| (0..d).map(|a| st.transitions.get(b, a)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "steps": st.propagator.stats().accepted,
        }));
        points.push((j, spec.t_f_us(), run.f.clone()));
    }
    let mut files = vec![dir.join("sweep.csv"), dir.join("transitions.json")];
    write_csv(&files[0], &sweep_header(d, n), rows)?;
    write_json(&files[1], &Value::Array(transitions))?;

    if b.record_trajectory {
        let path = dir.join("trajectory.csv");
        let mut header = vec!["J".to_string(), "t_f_us".into(), "kappa".into(), "t_us".into()];
        header.extend((0..d).map(|k| format!("p_{k}")));
        header.push("trace_residual".into());
        let mut rows = Vec::new();
        for ((j, spec), run) in specs.iter().zip(&runs) {
            for tp in run.statistics.propagator.trajectory() {
                let mut row = vec![j.unwrap_or(0.0), spec.t_f_us(), spec.kappa(), tp.t_us];
                row.extend(&tp.populations);
                row.push(tp.trace_residual);
                rows.push(row.into_iter().map(fmt_f64).collect());
            }
        }
        write_csv(&path, &header, rows)?;
        files.push(path);
    }

    if let Some(shots) = b.shots {
        let mut rng = StdRng::seed_from_u64(opts.seed);
        let sampled = points
            .iter()
            .map(|(j, t, f)| ExperimentPoint::from_counts(*j, *t, sample_counts(&mut rng, f, shots)?))
            .collect::<Result<Vec<_>>>()?;
        let path = dir.join("counts.csv");
        write_counts_csv(File::create(&path)?, &sampled, n)?;
        files.push(path);
    }

    let summary = json!({
        "kind": "anneal",
        "points": specs.len(),
        "max_qje_residual": runs.iter().map(|r| r.qje().map(|q| q.residual)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max),
    });
    Ok(RunOutput { files, summary })
}

#[derive(Debug, Clone, Copy)]
pub struct FitSettings {
    pub range: (f64, f64),
    pub options: FitOptions,
    pub threads: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings { range: (1e-4, 1e-2), options: FitOptions::default(), threads: 0 }
    }
}

/// Fits `kappa` and writes `fit_report.json` and `msd_curve.csv`.
pub fn run_fit(
    points: &[ExperimentPoint],
    template: AnnealSpec,
    settings: &FitSettings,
    dir: &Path,
    data: Option<&Path>,
) -> Result<RunOutput> {
    fs::create_dir_all(dir)?;
    let options = PropagateOptions::default();
    let ode_tol = options.tol;
    let sim = Simulator::new(template, options, settings.threads)?;
    let fit: FitResult = fit_kappa(points, &sim, settings.range, &settings.options)?;
    let summary = json!({
        "kappa_hat": fit.kappa_hat,
        "msd_hat": fit.msd_hat,
        "boundary": fit.boundary,
        "under_determined": fit.under_determined,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "msd_curve": fit.msd_curve,
        "settings": {
            "kappa_range": [settings.range.0, settings.range.1],
            "points_per_decade": settings.options.points_per_decade,
            "ln_tol": settings.options.ln_tol,
            "ode_tol": ode_tol,
            "conditions": points.len(),
            "anneals": sim.evaluations(),
            "data": data.map(|p| p.display().to_string()),
        },
    });
    let files = vec![dir.join("fit_report.json"), dir.join("msd_curve.csv")];
    write_json(&files[0], &summary)?;
    write_csv(
        &files[1],
        &["kappa".to_string(), "msd".to_string()],
        fit.msd_curve.iter().map(|&(k, m)| vec![fmt_f64(k), fmt_f64(m)]),
    )?;
    Ok(RunOutput { files, summary })
}
