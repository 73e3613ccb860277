//! Subcommand implementations. Artifacts are produced as strings first so
//! `verify` can rebuild and compare them byte for byte.

use crate::output::{chunked_symbols, fmt_f64, Csv};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shiftlab::config;
use shiftlab::ergopt::{
    coboundary_residual, irregularity_test, spectrum_endpoints, IrregularityVerdict, Sense,
};
use shiftlab::error::Error;
use shiftlab::irregular::{
    build_schedule, certified_lower_bound, extract_all_levels, glue_point, verify_divergence,
    Certificate, FractalCoding, RatioThresholds, SamplePlan, ScheduleParams,
};
use shiftlab::orbit::Potential;
use shiftlab::pressure::{katok_estimate, markov_h_plus_int, transfer_pressure, MarkovMeasure};
use shiftlab::suspension::{
    abramov_entropy, flow_irregularity_test, ratio_extremum, RoofFunction,
};
use shiftlab::SymbolicSystem;
use std::path::Path;

pub enum CliError {
    Input(String),
    Certification(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::CountingBoundFailed { .. } | Error::MassBoundFailed { .. } => {
                CliError::Certification(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {dir:?}: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("cannot write {path:?}: {e}")))
}

fn zero_potential(system: &SymbolicSystem) -> Potential {
    Potential::constant(system, 0.0)
}

fn sweep_grid(n_max: usize) -> Vec<usize> {
    (1..=n_max / 4).map(|i| 4 * i).collect()
}

pub fn run_pressure(
    system_path: &Path,
    psi_path: Option<&Path>,
    n_max: usize,
    epsilon: f64,
    out: &Path,
) -> CliResult {
    let system = config::load_system(system_path)?;
    let psi = match psi_path {
        Some(p) => config::load_potential(p, &system)?,
        None => zero_potential(&system),
    };
    ensure_out(out)?;
    let oracle = transfer_pressure(&system, &psi)?;
    let mut csv = Csv::new("n,epsilon,estimate,oracle,abs_err");
    for n in sweep_grid(n_max) {
        let est = shiftlab::pressure::pressure_estimate(&system, &psi, n, epsilon, 1 << 22)?;
        csv.row(&[
            n.to_string(),
            fmt_f64(epsilon),
            fmt_f64(est),
            fmt_f64(oracle),
            fmt_f64((est - oracle).abs()),
        ]);
    }
    csv.write(&out.join("sweep.csv")).map_err(|e| CliError::Input(e.to_string()))?;
    println!("oracle pressure: {}", fmt_f64(oracle));
    Ok(())
}

pub fn run_ergopt(system_path: &Path, phi_path: &Path, n: usize, out: &Path) -> CliResult {
    let system = config::load_system(system_path)?;
    let phi = config::load_potential(phi_path, &system)?;
    ensure_out(out)?;
    let spectrum = spectrum_endpoints(&system, &phi)?;
    let mut csv = Csv::new("sense,value,cycle");
    csv.row(&["max".into(), fmt_f64(spectrum.hi), spectrum.max_cycle.to_string()]);
    csv.row(&["min".into(), fmt_f64(spectrum.lo), spectrum.min_cycle.to_string()]);
    csv.write(&out.join("spectrum.csv")).map_err(|e| CliError::Input(e.to_string()))?;

    let verdict = irregularity_test(&system, &phi)?;
    let residual = coboundary_residual(&system, &phi, n)?;
    #[derive(Serialize)]
    struct Summary {
        verdict: String,
        gap: f64,
        lo: f64,
        hi: f64,
        residual_n: usize,
        residual: f64,
    }
    let (verdict_text, gap) = match verdict {
        IrregularityVerdict::NonTrivial { gap } => ("non-trivial".to_string(), gap),
        IrregularityVerdict::Degenerate => ("degenerate".to_string(), 0.0),
    };
    println!("verdict: {verdict_text} (gap {})", fmt_f64(gap));
    let summary = Summary {
        verdict: verdict_text,
        gap,
        lo: spectrum.lo,
        hi: spectrum.hi,
        residual_n: n,
        residual,
    };
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )
}

pub fn run_katok(
    system_path: &Path,
    measure_path: &Path,
    psi_path: Option<&Path>,
    gamma: f64,
    n_max: usize,
    epsilon: f64,
    out: &Path,
) -> CliResult {
    let system = config::load_system(system_path)?;
    let mu = config::load_measure(measure_path, &system)?;
    let psi = match psi_path {
        Some(p) => config::load_potential(p, &system)?,
        None => zero_potential(&system),
    };
    ensure_out(out)?;
    let oracle = markov_h_plus_int(&system, &mu, &psi)?;
    let mut csv = Csv::new("n,epsilon,estimate,oracle,abs_err");
    for n in sweep_grid(n_max) {
        let est = katok_estimate(&system, &mu, &psi, gamma, epsilon, n, 1 << 22)?;
        csv.row(&[
            n.to_string(),
            fmt_f64(epsilon),
            fmt_f64(est),
            fmt_f64(oracle),
            fmt_f64((est - oracle).abs()),
        ]);
    }
    csv.write(&out.join("katok.csv")).map_err(|e| CliError::Input(e.to_string()))?;
    println!("oracle h + integral: {}", fmt_f64(oracle));
    Ok(())
}

/// Everything `construct` needs, self-contained so `verify` can re-run it.
#[derive(Clone, Serialize, Deserialize)]
pub struct ConstructConfig {
    pub alphabet: usize,
    pub transitions: Vec<u8>,
    pub system_name: Option<String>,
    pub phi: PotentialSpec,
    pub psi: PotentialSpec,
    pub mu1: MeasureSpec,
    pub mu2: MeasureSpec,
    pub gamma: f64,
    pub k_max: usize,
    pub budget: usize,
    pub epsilon: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub seed: u64,
}

#[derive(Clone, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub depth: usize,
    pub values: Vec<(String, f64)>,
}

impl PotentialSpec {
    fn of(p: &Potential) -> Self {
        PotentialSpec {
            depth: p.depth(),
            values: p
                .table_words()
                .iter()
                .zip(p.table_values())
                .map(|(w, &v)| (w.to_string(), v))
                .collect(),
        }
    }

    fn build(&self, system: &SymbolicSystem) -> Result<Potential, Error> {
        Potential::from_pairs(system, self.depth, &self.values)
    }
}

#[derive(Clone, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub p: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
}

impl MeasureSpec {
    fn of(m: &MarkovMeasure, alphabet: usize) -> Self {
        let p = (0..alphabet)
            .map(|i| (0..alphabet).map(|j| m.transition(i as u8, j as u8)).collect())
            .collect();
        MeasureSpec { p, pi: m.stationary().to_vec() }
    }

    fn build(&self, system: &SymbolicSystem) -> Result<MarkovMeasure, Error> {
        MarkovMeasure::new(system, self.p.clone(), Some(self.pi.clone()))
    }
}

#[derive(Serialize, Deserialize)]
struct LevelSummary {
    k: usize,
    word_len: usize,
    count: usize,
    log_m: f64,
}

#[derive(Serialize, Deserialize)]
struct DivergenceSummary {
    degenerate: bool,
    alternation_pass: bool,
    min_consecutive_gap: f64,
    rows_pass: bool,
}

#[derive(Serialize, Deserialize)]
struct CertificateFile {
    config: ConstructConfig,
    schedule: shiftlab::irregular::GluingSchedule,
    levels: Vec<LevelSummary>,
    divergence: DivergenceSummary,
    certificate: Certificate,
}

pub struct ConstructArgs {
    pub system: std::path::PathBuf,
    pub phi: std::path::PathBuf,
    pub psi: Option<std::path::PathBuf>,
    pub mu1: std::path::PathBuf,
    pub mu2: std::path::PathBuf,
    pub gamma: f64,
    pub k_max: usize,
    pub budget: usize,
    pub epsilon: f64,
    pub r: (f64, f64, f64),
    pub seed: u64,
    pub out: std::path::PathBuf,
}

struct Artifacts {
    point_txt: String,
    oscillation_csv: String,
    certificate_json: String,
    certification_ok: bool,
    failure: Option<String>,
}

fn construct_artifacts(cfg: &ConstructConfig) -> Result<Artifacts, Error> {
    let rows: Vec<Vec<u8>> = cfg
        .transitions
        .chunks(cfg.alphabet)
        .map(|c| c.to_vec())
        .collect();
    let mut system = SymbolicSystem::validate(&rows)?;
    if let Some(name) = &cfg.system_name {
        system = system.with_name(name.clone());
    }
    let phi = cfg.phi.build(&system)?;
    let psi = cfg.psi.build(&system)?;
    let mu1 = cfg.mu1.build(&system)?;
    let mu2 = cfg.mu2.build(&system)?;

    let mut params = ScheduleParams::new(cfg.gamma, cfg.k_max, cfg.budget, cfg.seed);
    params.epsilon = cfg.epsilon;
    params.thresholds = RatioThresholds { r1: cfg.r1, r2: cfg.r2, r3: cfg.r3 };
    let schedule = build_schedule(&system, &mu1, &mu2, &phi, &psi, &params)?;
    let levels = extract_all_levels(
        &system,
        &schedule,
        &phi,
        &psi,
        params.enum_budget,
        params.sample_size,
        cfg.seed,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coding = FractalCoding::sample(&schedule, &levels, &mut rng)?;
    let point = glue_point(&system, &schedule, &levels, &coding)?;
    let point_txt = chunked_symbols(&point.to_string(), 80);

    let report = verify_divergence(&system, &schedule, &levels, &phi, &coding)?;
    let mut osc = Csv::new("k,t_k,a_k,target,budget,pass");
    for row in &report.rows {
        osc.row(&[
            row.k.to_string(),
            row.t_k.to_string(),
            fmt_f64(row.a_k),
            fmt_f64(row.target),
            fmt_f64(row.budget),
            row.pass.to_string(),
        ]);
    }
    let rows_pass = report.rows.iter().all(|r| r.pass);

    let plan = SamplePlan::for_schedule(&schedule, cfg.seed);
    let (certificate, failure) = match certified_lower_bound(&system, &schedule, &levels, &psi, &plan)
    {
        Ok(cert) => (cert, None),
        Err(e @ (Error::CountingBoundFailed { .. } | Error::MassBoundFailed { .. })) => {
            return Err(e);
        }
        Err(other) => return Err(other),
    };
    let certification_ok = certificate.pass && rows_pass && failure.is_none();

    let file = CertificateFile {
        config: cfg.clone(),
        schedule: schedule.clone(),
        levels: levels
            .iter()
            .map(|l| LevelSummary {
                k: l.k,
                word_len: l.word_len(),
                count: l.len(),
                log_m: l.log_m,
            })
            .collect(),
        divergence: DivergenceSummary {
            degenerate: report.degenerate,
            alternation_pass: report.alternation_pass,
            min_consecutive_gap: report.min_consecutive_gap,
            rows_pass,
        },
        certificate,
    };
    let certificate_json = serde_json::to_string_pretty(&file).unwrap();
    Ok(Artifacts {
        point_txt,
        oscillation_csv: osc.into_string(),
        certificate_json,
        certification_ok,
        failure,
    })
}

pub fn run_construct(args: ConstructArgs) -> CliResult {
    let system = config::load_system(&args.system)?;
    let phi = config::load_potential(&args.phi, &system)?;
    let psi = match &args.psi {
        Some(p) => config::load_potential(p, &system)?,
        None => zero_potential(&system),
    };
    let mu1 = config::load_measure(&args.mu1, &system)?;
    let mu2 = config::load_measure(&args.mu2, &system)?;

    let cfg = ConstructConfig {
        alphabet: system.alphabet_size(),
        transitions: system.transition_rows().concat(),
        system_name: system.name().map(str::to_string),
        phi: PotentialSpec::of(&phi),
        psi: PotentialSpec::of(&psi),
        mu1: MeasureSpec::of(&mu1, system.alphabet_size()),
        mu2: MeasureSpec::of(&mu2, system.alphabet_size()),
        gamma: args.gamma,
        k_max: args.k_max,
        budget: args.budget,
        epsilon: args.epsilon,
        r1: args.r.0,
        r2: args.r.1,
        r3: args.r.2,
        seed: args.seed,
    };
    let artifacts = construct_artifacts(&cfg)?;
    ensure_out(&args.out)?;
    write_file(&args.out.join("point.txt"), &artifacts.point_txt)?;
    write_file(&args.out.join("oscillation.csv"), &artifacts.oscillation_csv)?;
    write_file(&args.out.join("certificate.json"), &artifacts.certificate_json)?;
    if !artifacts.certification_ok {
        return Err(CliError::Certification(
            artifacts
                .failure
                .unwrap_or_else(|| "divergence or mass checks failed".to_string()),
        ));
    }
    println!("certificate: pass");
    Ok(())
}

pub fn run_suspend(
    system_path: &Path,
    roof_path: &Path,
    phi_path: Option<&Path>,
    out: &Path,
) -> CliResult {
    let system = config::load_system(system_path)?;
    let roof = RoofFunction::new(config::load_potential(roof_path, &system)?)?;
    ensure_out(out)?;

    let root = abramov_entropy(&system, &roof)?;
    let h_top = transfer_pressure(&system, &zero_potential(&system))?;
    let hi = h_top / roof.inf();
    let mut csv = Csv::new("s,pressure");
    for i in 0..=20 {
        let s = hi * i as f64 / 20.0;
        let p = transfer_pressure(&system, &roof.potential().affine(-s, 0.0))?;
        csv.row(&[fmt_f64(s), fmt_f64(p)]);
    }
    csv.write(&out.join("suspension.csv")).map_err(|e| CliError::Input(e.to_string()))?;

    #[derive(Serialize)]
    struct Summary {
        flow_entropy_root: f64,
        base_entropy: f64,
        ratio_max: Option<f64>,
        ratio_min: Option<f64>,
        verdict: Option<String>,
    }
    let mut summary = Summary {
        flow_entropy_root: root,
        base_entropy: h_top,
        ratio_max: None,
        ratio_min: None,
        verdict: None,
    };
    if let Some(p) = phi_path {
        let phi = config::load_potential(p, &system)?;
        let max = ratio_extremum(&system, &phi, &roof, Sense::Max)?;
        let min = ratio_extremum(&system, &phi, &roof, Sense::Min)?;
        let verdict = flow_irregularity_test(&system, &phi, &roof)?;
        summary.ratio_max = Some(max.value);
        summary.ratio_min = Some(min.value);
        summary.verdict = Some(match verdict {
            IrregularityVerdict::NonTrivial { .. } => "non-trivial".to_string(),
            IrregularityVerdict::Degenerate => "degenerate".to_string(),
        });
    }
    println!("flow entropy root: {}", fmt_f64(root));
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )
}

pub fn run_verify(out: &Path) -> CliResult {
    let cert_path = out.join("certificate.json");
    let text = std::fs::read_to_string(&cert_path)
        .map_err(|e| CliError::Input(format!("cannot read {cert_path:?}: {e}")))?;
    let file: CertificateFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad certificate file: {e}")))?;

    let artifacts = construct_artifacts(&file.config)?;
    let mut mismatches = Vec::new();
    if artifacts.certificate_json != text {
        mismatches.push("certificate.json");
    }
    for (name, fresh) in [
        ("point.txt", &artifacts.point_txt),
        ("oscillation.csv", &artifacts.oscillation_csv),
    ] {
        let stored = std::fs::read_to_string(out.join(name))
            .map_err(|e| CliError::Input(format!("cannot read {name}: {e}")))?;
        if &stored != fresh {
            mismatches.push(name);
        }
    }
    if !mismatches.is_empty() {
        return Err(CliError::Certification(format!(
            "artifacts do not reproduce: {}",
            mismatches.join(", ")
        )));
    }
    if !artifacts.certification_ok {
        return Err(CliError::Certification("re-run certification failed".to_string()));
    }
    println!("verify: all artifacts reproduce and certify");
    Ok(())
}
