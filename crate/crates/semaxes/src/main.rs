//! Command-line front end for the semantic-axes pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use semaxes::axes::{axes_to_tuples_tsv, label_axes};
use semaxes::crosslang;
use semaxes::embeddings;
use semaxes::error::{Error, Result};
use semaxes::evalkappa;
use semaxes::ica::{IcaConfig, Nonlinearity};
use semaxes::icasso::{self, ClusterReport, IcassoConfig, Linkage};
use semaxes::pipeline::{self, write_atomic};
use semaxes::synth::{Mixing, SharedRows, SourceLaw, SyntheticScenario};
use semaxes::binio;

#[derive(Parser)]
#[command(
    name = "semaxes",
    version,
    about = "Reproducible semantic axes from word embeddings, with cross-language matching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// `name=path` pair used by flags that take one value per language.
#[derive(Clone, Debug)]
struct NamedPath {
    name: String,
    path: PathBuf,
}

fn parse_named_path(s: &str) -> std::result::Result<NamedPath, String> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected <name>=<path>, got {s:?}"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected <name>=<path>, got {s:?}"));
    }
    Ok(NamedPath {
        name: name.to_owned(),
        path: PathBuf::from(path),
    })
}

#[derive(Subcommand)]
enum Command {
    /// Build the aligned vocabulary and write materialized per-language matrices.
    Ingest {
        /// Embedding file per language as name=path; the first is the pivot.
        #[arg(long = "embeddings", value_parser = parse_named_path, required = true)]
        embeddings: Vec<NamedPath>,
        /// Dictionary from the pivot into each non-pivot language, in order.
        #[arg(long = "dictionary")]
        dictionaries: Vec<PathBuf>,
        /// Frequency list per language, in language order.
        #[arg(long = "frequency-list", required = true)]
        frequency_lists: Vec<PathBuf>,
        #[arg(long, default_value_t = 50_000)]
        total_size: usize,
        /// Read at most this many words per embedding file.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, default_value = "ingest_out")]
        out: PathBuf,
    },
    /// Run repeated ICA on one matrix and cluster the components.
    Icasso {
        /// A `.vec` embedding matrix (for instance from `ingest`).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long)]
        base_seed: Option<u64>,
        #[arg(long, default_value_t = 300)]
        target_clusters: usize,
        #[arg(long, default_value_t = 0.8)]
        quality_threshold: f64,
        #[arg(long, default_value_t = 300)]
        retain: usize,
        #[arg(long, value_enum, default_value_t = CliNonlinearity::Logcosh)]
        nonlinearity: CliNonlinearity,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long, value_enum, default_value_t = CliLinkage::Average)]
        linkage: CliLinkage,
        #[arg(long, default_value = "icasso_out")]
        out: PathBuf,
    },
    /// Label reliable axes with their top words.
    Axes {
        /// Reliable-axes matrix dump written by `icasso`.
        #[arg(long)]
        axes: PathBuf,
        /// Cluster report written by `icasso` (provides qualities).
        #[arg(long)]
        cluster_report: PathBuf,
        /// The `.vec` file the axes were computed from (provides vocabulary).
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        language: String,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
        #[arg(long, default_value = "axes_out")]
        out: PathBuf,
    },
    /// Test axis correspondence across languages and cluster them.
    Crosslang {
        /// Reliable-axes matrix per language as name=path.
        #[arg(long = "axes", value_parser = parse_named_path, required = true)]
        axes: Vec<NamedPath>,
        /// Number of leading translation-aligned columns.
        #[arg(long)]
        n_common: usize,
        #[arg(long, default_value_t = 0.01)]
        alpha_fd: f64,
        #[arg(long, default_value_t = 0.01)]
        alpha_fp: f64,
        /// Override the multiple-testing divisor (defaults to the number of
        /// cross-language axis pairs actually tested).
        #[arg(long)]
        n_tests: Option<usize>,
        #[arg(long, default_value = "crosslang_out")]
        out: PathBuf,
    },
    /// Compute Fleiss' kappa over a ratings CSV (item,rater,0/1).
    Kappa {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, default_value = "kappa_out")]
        out: PathBuf,
    },
    /// Generate a synthetic ground-truth fixture ready for `run`.
    Synth {
        #[arg(long, default_value_t = 2)]
        datasets: usize,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Share the first N source rows between dataset 0 and every other.
        #[arg(long, default_value_t = 5)]
        shared: usize,
        #[arg(long, value_enum, default_value_t = CliLaw::Laplace)]
        law: CliLaw,
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 10.0)]
        max_condition: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value = "synth_out")]
        out: PathBuf,
    },
    /// Run the whole pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliNonlinearity {
    Logcosh,
    Exp,
    Cube,
}

impl From<CliNonlinearity> for Nonlinearity {
    fn from(v: CliNonlinearity) -> Self {
        match v {
            CliNonlinearity::Logcosh => Nonlinearity::LogCosh,
            CliNonlinearity::Exp => Nonlinearity::Exp,
            CliNonlinearity::Cube => Nonlinearity::Cube,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliLinkage {
    Average,
    Single,
    Complete,
}

impl From<CliLinkage> for Linkage {
    fn from(v: CliLinkage) -> Self {
        match v {
            CliLinkage::Average => Linkage::Average,
            CliLinkage::Single => Linkage::Single,
            CliLinkage::Complete => Linkage::Complete,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliLaw {
    Laplace,
    Uniform,
    Mixture,
}

impl From<CliLaw> for SourceLaw {
    fn from(v: CliLaw) -> Self {
        match v {
            CliLaw::Laplace => SourceLaw::Laplace,
            CliLaw::Uniform => SourceLaw::Uniform,
            CliLaw::Mixture => SourceLaw::Mixture,
        }
    }
}

fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Internal(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn cmd_ingest(
    embeddings_args: Vec<NamedPath>,
    dictionaries: Vec<PathBuf>,
    frequency_lists: Vec<PathBuf>,
    total_size: usize,
    limit: Option<usize>,
    out: PathBuf,
) -> Result<()> {
    let n_langs = embeddings_args.len();
    if n_langs < 2 {
        return Err(Error::Config("need at least two --embeddings".into()));
    }
    if dictionaries.len() != n_langs - 1 {
        return Err(Error::Config(format!(
            "need {} --dictionary flags for {n_langs} languages",
            n_langs - 1
        )));
    }
    if frequency_lists.len() != n_langs {
        return Err(Error::Config(format!(
            "need {n_langs} --frequency-list flags"
        )));
    }
    let names: Vec<String> = embeddings_args.iter().map(|e| e.name.clone()).collect();
    let mut sources = Vec::with_capacity(n_langs);
    for e in &embeddings_args {
        sources.push(embeddings::parse_vec_file(&e.path, limit)?);
    }
    let dicts = dictionaries
        .iter()
        .map(|p| embeddings::load_bilingual_dictionary(p))
        .collect::<Result<Vec<_>>>()?;
    let freqs = frequency_lists
        .iter()
        .map(|p| embeddings::load_frequency_list(p))
        .collect::<Result<Vec<_>>>()?;
    let plan = embeddings::build_vocabulary_plan(&names, &dicts, &freqs, &sources, total_size)?;
    let matrices = embeddings::materialize(&plan, &sources)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(&out.join("plan.json"), &plan)?;
    for (name, m) in names.iter().zip(&matrices) {
        embeddings::write_vec_file(m, &out.join(format!("{name}.vec")))?;
    }
    println!(
        "aligned {} common + {} fill words per language over {} languages -> {}",
        plan.common_size(),
        total_size - plan.common_size(),
        n_langs,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_icasso(
    input: PathBuf,
    runs: usize,
    base_seed: Option<u64>,
    target_clusters: usize,
    quality_threshold: f64,
    retain: usize,
    nonlinearity: Nonlinearity,
    tol: f64,
    max_iter: usize,
    linkage: Linkage,
    out: PathBuf,
) -> Result<()> {
    let matrix = embeddings::parse_vec_file(&input, None)?;
    let base = base_seed.unwrap_or(0);
    let config = IcassoConfig {
        seeds: (0..runs as u64).map(|k| base.wrapping_add(k)).collect(),
        retain: retain.min(matrix.dim()),
        target_clusters,
        quality_threshold,
        linkage,
        ica: IcaConfig {
            nonlinearity,
            max_iter,
            tol,
        },
    };
    let result = icasso::run_icasso(matrix.values(), &config)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(&out.join("cluster_report.json"), &result.cluster_report())?;
    write_atomic(
        &out.join("quality_curve.tsv"),
        result.quality_curve_tsv().as_bytes(),
    )?;
    binio::write_matrix(&result.reliable_axes, &out.join("reliable_axes.bin"))?;
    println!(
        "{} of {} clusters above quality {} -> {}",
        result.reliable_count(),
        result.clusters.len(),
        quality_threshold,
        out.display()
    );
    Ok(())
}

fn cmd_axes(
    axes_path: PathBuf,
    cluster_report: PathBuf,
    vocab: PathBuf,
    language: String,
    top_k: usize,
    out: PathBuf,
) -> Result<()> {
    let matrix = binio::read_matrix(&axes_path)?;
    let report_text =
        std::fs::read_to_string(&cluster_report).map_err(|e| Error::io(&cluster_report, e))?;
    let report: ClusterReport = serde_json::from_str(&report_text)
        .map_err(|e| Error::malformed(&cluster_report, 0, format!("bad cluster report: {e}")))?;
    let qualities: Vec<f64> = report
        .clusters
        .iter()
        .filter(|c| c.reliable)
        .map(|c| c.quality)
        .collect();
    let vocab_matrix = embeddings::parse_vec_file(&vocab, None)?;
    let labeled = label_axes(
        &language,
        &matrix,
        &qualities,
        vocab_matrix.words(),
        top_k,
    )?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(&out.join("axes.json"), &labeled)?;
    write_atomic(&out.join("axes.tsv"), axes_to_tuples_tsv(&labeled).as_bytes())?;
    println!("labeled {} axes -> {}", labeled.len(), out.display());
    Ok(())
}

fn cmd_crosslang(
    axes: Vec<NamedPath>,
    n_common: usize,
    alpha_fd: f64,
    alpha_fp: f64,
    n_tests: Option<usize>,
    out: PathBuf,
) -> Result<()> {
    if axes.len() < 2 {
        return Err(Error::Config("need at least two --axes".into()));
    }
    let matrices: Vec<DMatrix<f64>> = axes
        .iter()
        .map(|a| binio::read_matrix(&a.path))
        .collect::<Result<_>>()?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut sims = Vec::new();
    for a in 0..matrices.len() {
        for b in (a + 1)..matrices.len() {
            let cs = crosslang::cross_similarity(a, b, &matrices[a], &matrices[b], n_common)?;
            write_atomic(
                &out.join(format!("similarity_{}_{}.tsv", axes[a].name, axes[b].name)),
                crosslang::similarity_histogram_tsv(&cs, 50).as_bytes(),
            )?;
            sims.push(cs);
        }
    }
    let clustering = crosslang::cluster_across_languages(&sims, alpha_fd, alpha_fp, n_tests)?;
    println!(
        "multiple-testing convention: n_tests = {} ({})",
        clustering.policy.n_tests,
        if n_tests.is_some() {
            "explicit override"
        } else {
            "number of cross-language axis pairs tested"
        }
    );
    let summary = clustering.summary();
    write_json(&out.join("summary.json"), &summary)?;
    #[derive(serde::Serialize)]
    struct NamedCluster {
        members: Vec<String>,
        links: Vec<crosslang::LinkStat>,
    }
    let named: Vec<NamedCluster> = clustering
        .clusters
        .iter()
        .map(|c| NamedCluster {
            members: c
                .members
                .iter()
                .map(|&(l, i)| format!("{}:{}", axes[l].name, i))
                .collect(),
            links: c.links.clone(),
        })
        .collect();
    #[derive(serde::Serialize)]
    struct ClustersFile<T: serde::Serialize> {
        policy: crosslang::SignificancePolicy,
        summary: crosslang::CrossLanguageSummary,
        clusters: T,
    }
    write_json(
        &out.join("clusters.json"),
        &ClustersFile {
            policy: clustering.policy.clone(),
            summary,
            clusters: named,
        },
    )?;
    println!(
        "{} clusters covering {} axes -> {}",
        clustering.clusters.len(),
        clustering
            .clusters
            .iter()
            .map(|c| c.members.len())
            .sum::<usize>(),
        out.display()
    );
    Ok(())
}

fn cmd_kappa(ratings: PathBuf, out: PathBuf) -> Result<()> {
    let table = evalkappa::load_ratings_csv(&ratings)?;
    let report = evalkappa::fleiss_kappa(&table);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(&out.join("kappa.json"), &report)?;
    match (report.kappa, &report.interpretation) {
        (Some(k), Some(band)) => println!(
            "kappa = {k:.4} ({band}); p_bar = {:.4}, p_bar_e = {:.4}",
            report.p_bar, report.p_bar_e
        ),
        _ => println!(
            "kappa undefined (chance agreement is 1); p_bar = {:.4}",
            report.p_bar
        ),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    datasets: usize,
    dim: usize,
    samples: usize,
    shared: usize,
    law: SourceLaw,
    noise_sigma: f64,
    max_condition: f64,
    seed: u64,
    runs: usize,
    out: PathBuf,
) -> Result<()> {
    if shared > dim {
        return Err(Error::Config(format!(
            "--shared {shared} exceeds --dim {dim}"
        )));
    }
    let shared_specs: Vec<SharedRows> = (1..datasets)
        .filter(|_| shared > 0)
        .map(|k| SharedRows {
            from: 0,
            to: k,
            rows: (0..shared).collect(),
        })
        .collect();
    let scenario = SyntheticScenario {
        datasets,
        dim,
        samples,
        law,
        mixing: Mixing::Random { max_condition },
        shared: shared_specs,
        noise_sigma,
        seed,
    };
    let seeds: Vec<u64> = (0..runs as u64).collect();
    let config_path = pipeline::write_synthetic_fixture(&scenario, &out, &seeds, 0.8)?;
    println!(
        "fixture with {datasets} datasets ({dim}x{samples}, {shared} shared sources) -> {}",
        out.display()
    );
    println!("run it with: semaxes run --config {}", config_path.display());
    Ok(())
}

fn cmd_run(config_path: PathBuf) -> Result<()> {
    let (config, warnings) = pipeline::validate_config(&config_path)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let manifest = pipeline::run_pipeline(&config)?;
    println!(
        "pipeline ok: {} artifacts in {}",
        manifest.artifacts.len(),
        config.output_dir.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            embeddings,
            dictionaries,
            frequency_lists,
            total_size,
            limit,
            out,
        } => cmd_ingest(embeddings, dictionaries, frequency_lists, total_size, limit, out),
        Command::Icasso {
            input,
            runs,
            base_seed,
            target_clusters,
            quality_threshold,
            retain,
            nonlinearity,
            tol,
            max_iter,
            linkage,
            out,
        } => cmd_icasso(
            input,
            runs,
            base_seed,
            target_clusters,
            quality_threshold,
            retain,
            nonlinearity.into(),
            tol,
            max_iter,
            linkage.into(),
            out,
        ),
        Command::Axes {
            axes,
            cluster_report,
            vocab,
            language,
            top_k,
            out,
        } => cmd_axes(axes, cluster_report, vocab, language, top_k, out),
        Command::Crosslang {
            axes,
            n_common,
            alpha_fd,
            alpha_fp,
            n_tests,
            out,
        } => cmd_crosslang(axes, n_common, alpha_fd, alpha_fp, n_tests, out),
        Command::Kappa { ratings, out } => cmd_kappa(ratings, out),
        Command::Synth {
            datasets,
            dim,
            samples,
            shared,
            law,
            noise_sigma,
            max_condition,
            seed,
            runs,
            out,
        } => cmd_synth(
            datasets,
            dim,
            samples,
            shared,
            law.into(),
            noise_sigma,
            max_condition,
            seed,
            runs,
            out,
        ),
        Command::Run { config } => cmd_run(config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
