use std::fmt;
use std::path::{Path, PathBuf};

use xvanon::anonymizer::{AnonymizerModel, BaselineConfig, FarMetric, FdConfig};
use xvanon::gmm::GmmConfig;
use xvanon::io::{
    read_embeddings, read_kaldi_text, write_atomic, write_embeddings_with_comment, EmbeddingFormat, KaldiSidecar,
};
use xvanon::rng::{derive_seed, label_tag};
use xvanon::stats::linkage::enroll_trial_split;
use xvanon::stats::report::{self, KsRow, MetricsRow};
use xvanon::stats::{cllr, cllr_min, eer, ecdf_points, ks_statistic, linkage_scenario, parameter_sweep, speaker_split};
use xvanon::stats::similarity::cross_similarities;
use xvanon::strategy::{anonymize_set, FakeGranularity, Strata, Strategy};
use xvanon::synth::{generate_population, PopulationSpec};
use xvanon::{EmbeddingSet, Error, Gender};

use crate::args::*;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;
pub const EXIT_CONTRACT: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

/// Errors while reading inputs or validating flags.
fn input(e: Error) -> CliError {
    CliError::usage(e.to_string())
}

/// Errors while training or evaluating.
fn compute(e: Error) -> CliError {
    let code = match e {
        Error::RejectionExhausted { .. } => EXIT_CONTRACT,
        _ => EXIT_COMPUTE,
    };
    CliError { code, message: e.to_string() }
}

/// Errors while applying models to inputs: bad inputs stay usage errors.
fn apply(e: Error) -> CliError {
    match e {
        Error::InvalidInput(_) => input(e),
        other => compute(other),
    }
}

type CmdResult = Result<(), CliError>;

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Anonymize(a) => cmd_anonymize(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::EvalKs(a) => cmd_eval_ks(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::AsvSim(a) => cmd_asv_sim(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn gender_of(g: GenderArg) -> Gender {
    match g {
        GenderArg::Male => Gender::Male,
        GenderArg::Female => Gender::Female,
        GenderArg::Unspecified => Gender::Unspecified,
    }
}

fn load_input(a: &InputArgs) -> Result<EmbeddingSet, CliError> {
    let format = match a.format {
        Some(FormatArg::Csv) => EmbeddingFormat::Csv,
        Some(FormatArg::Kaldi) => EmbeddingFormat::KaldiText,
        None => EmbeddingFormat::from_path(&a.input),
    };
    let set = match format {
        EmbeddingFormat::Csv => read_embeddings(&a.input, format),
        EmbeddingFormat::KaldiText => {
            let sidecar = KaldiSidecar::read(a.utt2spk.as_deref(), a.spk2gender.as_deref()).map_err(input)?;
            read_kaldi_text(&a.input, &sidecar)
        }
    }
    .map_err(input)?;
    Ok(match a.gender {
        Some(g) => {
            let g = gender_of(g);
            set.filter(|e| e.gender() == g)
        }
        None => set,
    })
}

fn load_csv(path: &Path) -> Result<EmbeddingSet, CliError> {
    read_embeddings(path, EmbeddingFormat::from_path(path)).map_err(input)
}

fn non_empty(set: EmbeddingSet, what: &str) -> Result<EmbeddingSet, CliError> {
    if set.is_empty() {
        Err(CliError::usage(format!("{what} has no embeddings after filtering")))
    } else {
        Ok(set)
    }
}

fn seed_comment(seed: u64) -> String {
    format!("seed={seed} version={}", report::TOOL_VERSION)
}

fn write_report(path: &Path, text: &str) -> CmdResult {
    write_atomic(path, text.as_bytes()).map_err(input)
}

fn write_set(path: &Path, set: &EmbeddingSet, seed: u64) -> CmdResult {
    write_embeddings_with_comment(set, path, EmbeddingFormat::from_path(path), Some(&seed_comment(seed))).map_err(input)
}

/// Output path for one gender stratum.
pub fn stratum_path(template: &Path, gender: Gender) -> PathBuf {
    let text = template.to_string_lossy();
    if text.contains("{gender}") {
        return PathBuf::from(text.replace("{gender}", gender.as_str()));
    }
    let stem = template.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match template.extension() {
        Some(ext) => format!("{stem}_{gender}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{gender}"),
    };
    template.with_file_name(name)
}

fn check_variance(v: f64) -> CmdResult {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--variance {v} must be in (0, 1]")))
    }
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    check_variance(a.variance)?;
    let set = non_empty(load_input(&a.input)?, "input")?;
    for (gender, stratum) in set.by_gender() {
        let config = GmmConfig {
            n_components: a.components as usize,
            max_iterations: a.max_iterations as usize,
            tolerance: a.tolerance,
            seed: a.seed,
            restarts: a.restarts as usize,
        };
        let model = AnonymizerModel::train_with(&stratum, gender, a.variance, &config).map_err(compute)?;
        let path = stratum_path(&a.out, gender);
        model.save(&path).map_err(input)?;
        eprintln!(
            "{gender}: {} vectors, {} PCA dims, {} components, {} EM iterations -> {}",
            stratum.len(),
            model.pca().reduced_dim(),
            model.gmm().n_components(),
            model.gmm().n_iterations_run(),
            path.display()
        );
    }
    Ok(())
}

fn load_models(paths: &[PathBuf]) -> Result<Strata<AnonymizerModel>, CliError> {
    let mut strata = Strata::new();
    for p in paths {
        let m = AnonymizerModel::load(p).map_err(input)?;
        strata.insert(m.gender(), m);
    }
    Ok(strata)
}

fn granularity(per_utterance: bool) -> FakeGranularity {
    if per_utterance {
        FakeGranularity::PerUtterance
    } else {
        FakeGranularity::PerSpeaker
    }
}

fn cmd_anonymize(a: &AnonymizeArgs) -> CmdResult {
    let set = non_empty(load_input(&a.input)?, "input")?;
    let models = load_models(&a.model)?;
    let fd = FdConfig::new(a.fd_threshold, a.max_attempts).map_err(input)?;
    let strategy = if a.fd { Strategy::OursFd(&models, fd) } else { Strategy::Ours(&models) };
    let out = anonymize_set(&set, &strategy, granularity(a.per_utterance), a.seed).map_err(apply)?;
    write_set(&a.out, &out.set, a.seed)?;
    eprintln!(
        "{} fakes for {} embeddings ({} draws)",
        out.n_fakes,
        set.len(),
        out.total_attempts
    );
    Ok(())
}

fn stratified_pools(pool: &EmbeddingSet) -> Strata<EmbeddingSet> {
    let mut strata: Strata<EmbeddingSet> = pool.by_gender().into_iter().collect();
    strata.insert(Gender::Unspecified, pool.clone());
    strata
}

fn baseline_config(n_far: u64, n_avg: u64, metric: MetricArg) -> BaselineConfig {
    BaselineConfig {
        n_far: n_far as usize,
        n_avg: n_avg as usize,
        metric: match metric {
            MetricArg::Cosine => FarMetric::Cosine,
            MetricArg::Euclidean => FarMetric::Euclidean,
        },
    }
}

fn cmd_baseline(a: &BaselineArgs) -> CmdResult {
    let set = non_empty(load_input(&a.input)?, "input")?;
    let pool = load_csv(&a.pool)?;
    let pools = stratified_pools(&pool);
    let strategy = Strategy::Baseline(&pools, baseline_config(a.n_far, a.n_avg, a.metric));
    let out = anonymize_set(&set, &strategy, granularity(a.per_utterance), a.seed).map_err(apply)?;
    write_set(&a.out, &out.set, a.seed)
}

fn cmd_eval_ks(a: &EvalKsArgs) -> CmdResult {
    let set_a = load_csv(&a.a)?;
    let set_b = load_csv(&a.b)?;
    let mut rows = Vec::new();
    let mut ecdfs = None;
    let strata_a = set_a.by_gender();
    let strata_b = set_b.by_gender();
    let mut groups = vec![("all".to_string(), set_a.clone(), set_b.clone())];
    for (g, sa) in &strata_a {
        if let Some(sb) = strata_b.get(g) {
            if strata_a.len() > 1 || strata_b.len() > 1 {
                groups.push((g.to_string(), sa.clone(), sb.clone()));
            }
        }
    }
    for (label, sa, sb) in groups {
        if sa.len() < 2 || sb.len() < 2 {
            continue;
        }
        let ca = cross_similarities(&sa).map_err(input)?;
        let cb = cross_similarities(&sb).map_err(input)?;
        let ks = ks_statistic(&ca.values, &cb.values).map_err(compute)?;
        rows.push(KsRow { gender: label.clone(), n_a: sa.len(), n_b: sb.len(), ks });
        if label == "all" {
            ecdfs = Some((ca.values, cb.values));
        }
    }
    let Some((ca, cb)) = ecdfs else {
        return Err(CliError::usage("both inputs need at least two embeddings"));
    };
    if let Some(p) = &a.ecdf_a {
        write_report(p, &report::ecdf_csv(&ecdf_points(&ca).map_err(compute)?, a.seed))?;
    }
    if let Some(p) = &a.ecdf_b {
        write_report(p, &report::ecdf_csv(&ecdf_points(&cb).map_err(compute)?, a.seed))?;
    }
    write_report(&a.out, &report::ks_csv(&rows, a.seed))
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    for &v in &a.variances {
        check_variance(v)?;
    }
    if a.components.contains(&0) {
        return Err(CliError::usage("--components entries must be at least 1"));
    }
    let set = non_empty(load_input(&a.input)?, "input")?;
    let result = parameter_sweep(&set, &a.variances, &a.components, a.split, a.seed).map_err(input)?;
    for c in &result.cells {
        if let Err(msg) = &c.ks {
            eprintln!(
                "warning: {} variance={} components={} failed: {msg}",
                c.gender, c.retained_variance_target, c.n_components
            );
        }
    }
    write_report(&a.out, &report::sweep_csv(&result, a.seed))
}

fn scenario_of(s: ScenarioArg) -> xvanon::stats::Scenario {
    match s {
        ScenarioArg::Oo => xvanon::stats::Scenario::Oo,
        ScenarioArg::Oa => xvanon::stats::Scenario::Oa,
        ScenarioArg::Aa => xvanon::stats::Scenario::Aa,
    }
}

fn cmd_asv_sim(a: &AsvSimArgs) -> CmdResult {
    check_variance(a.variance)?;
    let set = non_empty(load_input(&a.input)?, "input")?;
    let (pool, eval_set) = match &a.pool {
        Some(p) => (load_csv(p)?, set),
        None => speaker_split(&set, a.split, derive_seed(a.seed, &[label_tag("asv-split")])).map_err(input)?,
    };

    let needs_models = a.strategy.iter().any(|s| matches!(s, StrategyArg::Ours | StrategyArg::OursFd));
    let models = if !a.model.is_empty() {
        load_models(&a.model)?
    } else if needs_models {
        let mut strata = Strata::new();
        for (gender, stratum) in pool.by_gender() {
            let seed = derive_seed(a.seed, &[label_tag("train"), label_tag(gender.as_str())]);
            let m = AnonymizerModel::train_for(&stratum, gender, a.variance, a.components as usize, seed)
                .map_err(compute)?;
            strata.insert(gender, m);
        }
        strata
    } else {
        Strata::new()
    };
    let pools = stratified_pools(&pool);
    let fd = FdConfig::new(a.fd_threshold, a.max_attempts).map_err(input)?;
    let base_cfg = baseline_config(a.n_far, a.n_avg, MetricArg::Cosine);

    let strata: Vec<(Gender, (EmbeddingSet, EmbeddingSet))> = eval_set
        .by_gender()
        .into_iter()
        .map(|(g, s)| enroll_trial_split(&s).map(|split| (g, split)))
        .collect::<Result<_, _>>()
        .map_err(input)?;

    let mut rows = Vec::new();
    for &sc in &a.scenario {
        let scenario = scenario_of(sc);
        for &st in &a.strategy {
            let strategy = match st {
                StrategyArg::None => Strategy::None,
                StrategyArg::Ours => Strategy::Ours(&models),
                StrategyArg::OursFd => Strategy::OursFd(&models, fd),
                StrategyArg::Baseline => Strategy::Baseline(&pools, base_cfg),
            };
            for (gender, (enroll, trial)) in &strata {
                let seed = derive_seed(a.seed, &[label_tag(scenario.as_str()), label_tag(gender.as_str())]);
                let scores = linkage_scenario(enroll, trial, scenario, &strategy, seed).map_err(apply)?;
                rows.push(MetricsRow {
                    scenario: scenario.to_string(),
                    strategy: strategy.kind().to_string(),
                    gender: gender.to_string(),
                    eer: eer(&scores).map_err(compute)?,
                    cllr: cllr(&scores).map_err(compute)?,
                    cllr_min: cllr_min(&scores).map_err(compute)?,
                    n_genuine: scores.genuine.len(),
                    n_impostor: scores.impostor.len(),
                });
            }
        }
    }
    write_report(&a.out, &report::metrics_csv(&rows, a.seed))
}

fn cmd_synth(a: &SynthArgs) -> CmdResult {
    let spec = PopulationSpec {
        n_speakers: a.speakers as usize,
        utterances_per_speaker: a.utts as usize,
        dim: a.dim as usize,
        n_modes: a.modes as usize,
        between_speaker_scale: a.between,
        speaker_jitter_scale: a.jitter,
        within_speaker_scale: a.within,
        gender_fractions: (a.male_fraction, 1.0 - a.male_fraction),
        seed: a.seed,
    };
    for w in spec.validate().map_err(input)? {
        eprintln!("warning: {w}");
    }
    let set = generate_population(&spec).map_err(input)?;
    write_set(&a.out, &set, a.seed)
}
