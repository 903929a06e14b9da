//! Config-driven end-to-end pipeline: ingest, per-language reliability
//! clustering, axis labeling, cross-language testing, and report artifacts.
//!
//! Everything random flows from seeds in the config, artifacts are written
//! atomically, and a manifest records every artifact with its content hash,
//! so identical configs reproduce identical output bytes. The expensive
//! stages (whitening, per-run ICA, the similarity matrix) checkpoint under
//! `checkpoints/` and reload bit-for-bit on rerun.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::axes::{self, SemanticAxis};
use crate::binio;
use crate::crosslang::{self, CrossLanguageClustering, CrossSimilarity};
use crate::embeddings::{self, EmbeddingMatrix, VocabularyPlan};
use crate::error::{Error, Result};
use crate::evalkappa::{self, QuestionnaireItem};
use crate::ica::{self, IcaConfig, IcaResult, Nonlinearity, WhitenedData};
use crate::icasso::{self, IcassoResult, Linkage, SimilarityMatrix};

/// One language's input files. `dictionary` maps the pivot (first) language
/// into this one and must be absent on the pivot itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageConfig {
    pub name: String,
    pub embeddings: PathBuf,
    pub frequency_list: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaSettings {
    pub nonlinearity: Nonlinearity,
    pub tol: f64,
    pub max_iter: usize,
    pub retain: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcassoSettings {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub target_clusters: usize,
    pub quality_threshold: f64,
    pub linkage: Linkage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossLangSettings {
    pub alpha_fd: f64,
    pub alpha_fp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tests: Option<usize>,
}

/// Fully resolved pipeline settings; serializes back to the resolved-config
/// artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub total_size: usize,
    pub top_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_limit: Option<usize>,
    pub checkpoints: bool,
    pub languages: Vec<LanguageConfig>,
    pub ica: IcaSettings,
    pub icasso: IcassoSettings,
    pub crosslang: CrossLangSettings,
}

#[derive(Debug, Default, Deserialize)]
struct RawLanguage {
    name: Option<String>,
    embeddings: Option<PathBuf>,
    frequency_list: Option<PathBuf>,
    dictionary: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
struct RawIca {
    nonlinearity: Option<Nonlinearity>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    retain: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
struct RawIcasso {
    runs: Option<usize>,
    seeds: Option<Vec<u64>>,
    base_seed: Option<u64>,
    target_clusters: Option<usize>,
    quality_threshold: Option<f64>,
    linkage: Option<Linkage>,
}

#[derive(Debug, Default, Deserialize)]
struct RawCrossLang {
    alpha_fd: Option<f64>,
    alpha_fp: Option<f64>,
    n_tests: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct RawConfig {
    output_dir: Option<PathBuf>,
    total_size: Option<usize>,
    top_k: Option<usize>,
    parse_limit: Option<usize>,
    checkpoints: Option<bool>,
    languages: Option<Vec<RawLanguage>>,
    ica: Option<RawIca>,
    icasso: Option<RawIcasso>,
    crosslang: Option<RawCrossLang>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Collects warnings for keys outside the known schema, without failing.
fn unknown_key_warnings(table: &toml::Table) -> Vec<String> {
    const ROOT: &[&str] = &[
        "output_dir",
        "total_size",
        "top_k",
        "parse_limit",
        "checkpoints",
        "languages",
        "ica",
        "icasso",
        "crosslang",
    ];
    const LANGUAGE: &[&str] = &["name", "embeddings", "frequency_list", "dictionary"];
    const ICA: &[&str] = &["nonlinearity", "tol", "max_iter", "retain"];
    const ICASSO: &[&str] = &[
        "runs",
        "seeds",
        "base_seed",
        "target_clusters",
        "quality_threshold",
        "linkage",
    ];
    const CROSSLANG: &[&str] = &["alpha_fd", "alpha_fp", "n_tests"];

    let mut warnings = Vec::new();
    let mut check = |table: &toml::Table, known: &[&str], ctx: &str| {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                warnings.push(format!("unknown key {key:?} in {ctx}"));
            }
        }
    };
    check(table, ROOT, "config root");
    if let Some(langs) = table.get("languages").and_then(|v| v.as_array()) {
        for (i, lang) in langs.iter().enumerate() {
            if let Some(t) = lang.as_table() {
                check(t, LANGUAGE, &format!("languages[{i}]"));
            }
        }
    }
    for (key, known) in [("ica", ICA), ("icasso", ICASSO), ("crosslang", CROSSLANG)] {
        if let Some(t) = table.get(key).and_then(|v| v.as_table()) {
            check(t, known, &format!("[{key}]"));
        }
    }
    warnings
}

fn absolutize(path: &Path, base: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Parses and resolves a config file: defaults filled, seeds made explicit,
/// ranges checked, referenced files verified to exist, paths made absolute
/// relative to the config file's directory. Unknown keys come back as
/// warnings.
pub fn validate_config(path: &Path) -> Result<(PipelineConfig, Vec<String>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let warnings = unknown_key_warnings(&table);
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;

    let base = std::path::absolute(path)
        .map_err(|e| config_err(format!("cannot resolve {}: {e}", path.display())))?
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("/"));

    let raw_langs = raw
        .languages
        .ok_or_else(|| config_err("missing [[languages]] section"))?;
    if raw_langs.len() < 2 {
        return Err(config_err("need at least two [[languages]] entries"));
    }
    let mut languages = Vec::with_capacity(raw_langs.len());
    for (i, lang) in raw_langs.into_iter().enumerate() {
        let name = lang
            .name
            .ok_or_else(|| config_err(format!("languages[{i}] needs a name")))?;
        let embeddings = absolutize(
            &lang
                .embeddings
                .ok_or_else(|| config_err(format!("language {name:?} needs embeddings")))?,
            &base,
        );
        let frequency_list = absolutize(
            &lang
                .frequency_list
                .ok_or_else(|| config_err(format!("language {name:?} needs a frequency_list")))?,
            &base,
        );
        let dictionary = lang.dictionary.map(|d| absolutize(&d, &base));
        if i == 0 && dictionary.is_some() {
            return Err(config_err(format!(
                "pivot language {name:?} must not carry a dictionary"
            )));
        }
        if i > 0 && dictionary.is_none() {
            return Err(config_err(format!(
                "language {name:?} needs a dictionary from the pivot language"
            )));
        }
        for (what, p) in [
            ("embeddings", Some(&embeddings)),
            ("frequency_list", Some(&frequency_list)),
            ("dictionary", dictionary.as_ref()),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(config_err(format!(
                        "{what} file {} for language {name:?} does not exist",
                        p.display()
                    )));
                }
            }
        }
        languages.push(LanguageConfig {
            name,
            embeddings,
            frequency_list,
            dictionary,
        });
    }
    let mut names: Vec<&str> = languages.iter().map(|l| l.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != languages.len() {
        return Err(config_err("language names must be unique"));
    }

    let ica_raw = raw.ica.unwrap_or_default();
    let ica = IcaSettings {
        nonlinearity: ica_raw.nonlinearity.unwrap_or_default(),
        tol: ica_raw.tol.unwrap_or(1e-6),
        max_iter: ica_raw.max_iter.unwrap_or(1000),
        retain: ica_raw.retain.unwrap_or(300),
    };
    if ica.tol <= 0.0 || ica.tol.is_nan() {
        return Err(config_err("ica.tol must be positive"));
    }
    if ica.max_iter == 0 || ica.retain == 0 {
        return Err(config_err("ica.max_iter and ica.retain must be at least 1"));
    }

    let icasso_raw = raw.icasso.unwrap_or_default();
    let seeds = match (icasso_raw.seeds, icasso_raw.runs, icasso_raw.base_seed) {
        (Some(seeds), runs, _) => {
            if seeds.is_empty() {
                return Err(config_err("icasso.seeds must not be empty"));
            }
            if let Some(r) = runs {
                if r != seeds.len() {
                    return Err(config_err(format!(
                        "icasso.runs = {r} disagrees with {} explicit seeds",
                        seeds.len()
                    )));
                }
            }
            seeds
        }
        (None, runs, base) => {
            let m = runs.unwrap_or(10);
            if m == 0 {
                return Err(config_err("icasso.runs must be at least 1"));
            }
            let b = base.unwrap_or(0);
            (0..m as u64).map(|k| b.wrapping_add(k)).collect()
        }
    };
    {
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(config_err("icasso seeds must be distinct"));
        }
    }
    let icasso = IcassoSettings {
        runs: seeds.len(),
        seeds,
        target_clusters: icasso_raw.target_clusters.unwrap_or(300),
        quality_threshold: icasso_raw.quality_threshold.unwrap_or(0.8),
        linkage: icasso_raw.linkage.unwrap_or_default(),
    };
    if icasso.target_clusters == 0 {
        return Err(config_err("icasso.target_clusters must be at least 1"));
    }
    if !(-1.0..=1.0).contains(&icasso.quality_threshold) {
        return Err(config_err("icasso.quality_threshold must be in [-1, 1]"));
    }

    let cross_raw = raw.crosslang.unwrap_or_default();
    let crosslang = CrossLangSettings {
        alpha_fd: cross_raw.alpha_fd.unwrap_or(0.01),
        alpha_fp: cross_raw.alpha_fp.unwrap_or(0.01),
        n_tests: cross_raw.n_tests,
    };
    for (name, alpha) in [
        ("alpha_fd", crosslang.alpha_fd),
        ("alpha_fp", crosslang.alpha_fp),
    ] {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(config_err(format!(
                "crosslang.{name} must be in (0, 1), got {alpha}"
            )));
        }
    }
    if crosslang.n_tests == Some(0) {
        return Err(config_err("crosslang.n_tests must be at least 1"));
    }

    let total_size = raw.total_size.unwrap_or(50_000);
    let top_k = raw.top_k.unwrap_or(3);
    if total_size == 0 || top_k == 0 {
        return Err(config_err("total_size and top_k must be at least 1"));
    }
    if raw.parse_limit == Some(0) {
        return Err(config_err("parse_limit must be at least 1 when given"));
    }

    Ok((
        PipelineConfig {
            output_dir: absolutize(&raw.output_dir.unwrap_or_else(|| PathBuf::from("out")), &base),
            total_size,
            top_k,
            parse_limit: raw.parse_limit,
            checkpoints: raw.checkpoints.unwrap_or(true),
            languages,
            ica,
            icasso,
            crosslang,
        },
        warnings,
    ))
}

/// One artifact entry of the run manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Every artifact a run produced, with hashes; `status` is `"ok"` or
/// `"failed:<stage>"` for a partial run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    pub artifacts: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temp file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct ArtifactSink {
    root: PathBuf,
    entries: BTreeMap<String, ManifestEntry>,
}

impl ArtifactSink {
    fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            entries: BTreeMap::new(),
        }
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        write_atomic(&path, bytes)?;
        self.entries.insert(
            rel.to_owned(),
            ManifestEntry {
                path: rel.to_owned(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(bytes),
            },
        );
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| Error::Internal(format!("serializing {rel}: {e}")))?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    fn manifest(&self, status: &str) -> Manifest {
        Manifest {
            status: status.to_owned(),
            artifacts: self.entries.values().cloned().collect(),
        }
    }

    fn finish(&mut self, status: &str) -> Result<Manifest> {
        let manifest = self.manifest(status);
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| Error::Internal(format!("serializing manifest: {e}")))?;
        bytes.push(b'\n');
        write_atomic(&self.root.join("manifest.json"), &bytes)?;
        Ok(manifest)
    }
}

/// Cross-language cluster report with language names and axis words resolved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossClusterReport {
    pub languages: Vec<String>,
    pub n_common: usize,
    pub policy: crosslang::SignificancePolicy,
    pub summary: crosslang::CrossLanguageSummary,
    pub clusters: Vec<CrossClusterEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossClusterEntry {
    pub members: Vec<CrossMemberEntry>,
    pub links: Vec<CrossLinkEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossMemberEntry {
    pub language: String,
    pub axis: usize,
    pub quality: f64,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossLinkEntry {
    pub a: String,
    pub b: String,
    pub sigma: f64,
    pub p_value: f64,
}

struct LanguageStage {
    name: String,
    icasso: IcassoResult,
    axes: Vec<SemanticAxis>,
}

/// Fingerprint tying checkpoints to the exact data and ICA settings that
/// produced them.
fn checkpoint_fingerprint(name: &str, matrix: &EmbeddingMatrix, config: &PipelineConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(name.as_bytes());
    hasher.update([0u8]);
    hasher.update((matrix.dim() as u64).to_le_bytes());
    hasher.update((matrix.len() as u64).to_le_bytes());
    for v in matrix.values().iter() {
        hasher.update(v.to_le_bytes());
    }
    hasher.update((config.ica.retain as u64).to_le_bytes());
    hasher.update(config.ica.tol.to_le_bytes());
    hasher.update((config.ica.max_iter as u64).to_le_bytes());
    hasher.update(format!("{:?}", config.ica.nonlinearity).as_bytes());
    hex::encode(&Sha256::finalize(hasher)[..8])
}

fn load_or_compute_whitening(
    dir: Option<&Path>,
    fp: &str,
    x: &DMatrix<f64>,
    retain: usize,
) -> Result<WhitenedData> {
    let path = dir.map(|d| d.join(format!("whiten_{fp}.wht")));
    if let Some(p) = &path {
        if p.exists() {
            return binio::read_whitening(p);
        }
    }
    let white = ica::center_and_whiten(x, retain)?;
    if let Some(p) = &path {
        binio::write_whitening(&white, p)?;
    }
    Ok(white)
}

fn load_or_compute_runs(
    dir: Option<&Path>,
    fp: &str,
    white: &WhitenedData,
    config: &PipelineConfig,
) -> Result<Vec<IcaResult>> {
    let ica_config = IcaConfig {
        nonlinearity: config.ica.nonlinearity,
        max_iter: config.ica.max_iter,
        tol: config.ica.tol,
    };
    let results = crate::exec::map_indexed(config.icasso.seeds.len(), |k| {
        let seed = config.icasso.seeds[k];
        let path = dir.map(|d| d.join(format!("run_{fp}_{seed}.icr")));
        if let Some(p) = &path {
            if p.exists() {
                let loaded = binio::read_ica_result(p)?;
                if loaded.seed() == seed && loaded.components().ncols() == white.n_samples() {
                    return Ok(loaded);
                }
            }
        }
        let run = ica::fastica(white, seed, &ica_config)?;
        if let Some(p) = &path {
            binio::write_ica_result(&run, p)?;
        }
        Ok(run)
    });
    results.into_iter().collect()
}

fn load_or_compute_similarity(
    dir: Option<&Path>,
    fp: &str,
    runs: &[IcaResult],
) -> Result<SimilarityMatrix> {
    let d_w = runs[0].components().nrows();
    let path = dir.map(|d| d.join(format!("sim_{fp}.bin")));
    if let Some(p) = &path {
        if p.exists() {
            let dense = binio::read_matrix(p)?;
            if dense.nrows() == runs.len() * d_w {
                // column-major read-out equals row-major here: the dump is symmetric
                let values: Vec<f64> = dense.iter().copied().collect();
                return SimilarityMatrix::from_dense(dense.nrows(), d_w, values);
            }
        }
    }
    let sim = icasso::build_similarity_matrix(runs)?;
    if let Some(p) = &path {
        binio::write_matrix(&sim.to_dense(), p)?;
    }
    Ok(sim)
}

fn stage_ingest(
    config: &PipelineConfig,
    sink: &mut ArtifactSink,
) -> Result<(VocabularyPlan, Vec<EmbeddingMatrix>)> {
    let mut sources = Vec::with_capacity(config.languages.len());
    let mut freq_lists = Vec::with_capacity(config.languages.len());
    let mut dicts = Vec::with_capacity(config.languages.len() - 1);
    for (i, lang) in config.languages.iter().enumerate() {
        sources.push(embeddings::parse_vec_file(
            &lang.embeddings,
            config.parse_limit,
        )?);
        freq_lists.push(embeddings::load_frequency_list(&lang.frequency_list)?);
        if i > 0 {
            let dict_path = lang.dictionary.as_ref().ok_or_else(|| {
                config_err(format!("language {:?} lacks a dictionary", lang.name))
            })?;
            dicts.push(embeddings::load_bilingual_dictionary(dict_path)?);
        }
    }
    let names: Vec<String> = config.languages.iter().map(|l| l.name.clone()).collect();
    let plan = embeddings::build_vocabulary_plan(
        &names,
        &dicts,
        &freq_lists,
        &sources,
        config.total_size,
    )?;
    sink.write_json("plan.json", &plan)?;
    let materialized = embeddings::materialize(&plan, &sources)?;
    Ok((plan, materialized))
}

fn stage_language(
    config: &PipelineConfig,
    lang: &LanguageConfig,
    matrix: EmbeddingMatrix,
    checkpoint_dir: Option<&Path>,
    sink: &mut ArtifactSink,
) -> Result<LanguageStage> {
    let fp = checkpoint_fingerprint(&lang.name, &matrix, config);
    let white = load_or_compute_whitening(
        checkpoint_dir,
        &fp,
        matrix.values(),
        config.ica.retain.min(matrix.dim()),
    )?;
    let runs = load_or_compute_runs(checkpoint_dir, &fp, &white, config)?;
    let sim = load_or_compute_similarity(checkpoint_dir, &fp, &runs)?;
    let icasso_result = IcassoResult::from_runs_and_similarity(
        runs,
        &sim,
        config.icasso.target_clusters.min(sim.size()),
        config.icasso.quality_threshold,
        config.icasso.linkage,
    )?;
    sink.write_json(
        &format!("{}/cluster_report.json", lang.name),
        &icasso_result.cluster_report(),
    )?;
    sink.write(
        &format!("{}/quality_curve.tsv", lang.name),
        icasso_result.quality_curve_tsv().as_bytes(),
    )?;

    let labeled = axes::label_axes(
        &lang.name,
        &icasso_result.reliable_axes,
        &icasso_result.reliable_qualities(),
        matrix.words(),
        config.top_k.min(matrix.len()),
    )?;
    sink.write_json(&format!("{}/axes.json", lang.name), &labeled)?;
    sink.write(
        &format!("{}/axes.tsv", lang.name),
        axes::axes_to_tuples_tsv(&labeled).as_bytes(),
    )?;
    Ok(LanguageStage {
        name: lang.name.clone(),
        icasso: icasso_result,
        axes: labeled,
    })
}

fn stage_crosslang(
    config: &PipelineConfig,
    plan: &VocabularyPlan,
    stages: &[LanguageStage],
    sink: &mut ArtifactSink,
) -> Result<(CrossLanguageClustering, CrossClusterReport)> {
    let n_common = plan.common_size();
    let mut sims: Vec<CrossSimilarity> = Vec::new();
    for a in 0..stages.len() {
        for b in (a + 1)..stages.len() {
            let cs = crosslang::cross_similarity(
                a,
                b,
                &stages[a].icasso.reliable_axes,
                &stages[b].icasso.reliable_axes,
                n_common,
            )?;
            sink.write(
                &format!("cross/similarity_{}_{}.tsv", stages[a].name, stages[b].name),
                crosslang::similarity_histogram_tsv(&cs, 50).as_bytes(),
            )?;
            sims.push(cs);
        }
    }
    let clustering = crosslang::cluster_across_languages(
        &sims,
        config.crosslang.alpha_fd,
        config.crosslang.alpha_fp,
        config.crosslang.n_tests,
    )?;

    let names: Vec<String> = stages.iter().map(|s| s.name.clone()).collect();
    let entries: Vec<CrossClusterEntry> = clustering
        .clusters
        .iter()
        .map(|c| CrossClusterEntry {
            members: c
                .members
                .iter()
                .map(|&(lang, axis)| {
                    let ax = &stages[lang].axes[axis];
                    CrossMemberEntry {
                        language: names[lang].clone(),
                        axis,
                        quality: ax.quality,
                        words: ax.top_words.iter().map(|(w, _)| w.clone()).collect(),
                    }
                })
                .collect(),
            links: c
                .links
                .iter()
                .map(|l| CrossLinkEntry {
                    a: format!("{}:{}", names[l.a.0], l.a.1),
                    b: format!("{}:{}", names[l.b.0], l.b.1),
                    sigma: l.sigma,
                    p_value: l.p_value,
                })
                .collect(),
        })
        .collect();
    let report = CrossClusterReport {
        languages: names.clone(),
        n_common,
        policy: clustering.policy.clone(),
        summary: clustering.summary(),
        clusters: entries,
    };
    sink.write_json("cross/clusters.json", &report)?;
    sink.write_json("cross/summary.json", &report.summary)?;

    // aligned word table, one row per cluster, one column per language
    let mut table = String::from("cluster");
    for name in &names {
        table.push('\t');
        table.push_str(name);
    }
    table.push('\n');
    for (i, cluster) in report.clusters.iter().enumerate() {
        table.push_str(&(i + 1).to_string());
        for name in &names {
            table.push('\t');
            if let Some(m) = cluster.members.iter().find(|m| &m.language == name) {
                table.push_str(&m.words.join(" "));
            }
        }
        table.push('\n');
    }
    sink.write("cross/cluster_table.tsv", table.as_bytes())?;
    Ok((clustering, report))
}

fn stage_questionnaire(report: &CrossClusterReport, sink: &mut ArtifactSink) -> Result<()> {
    let items: Vec<QuestionnaireItem> = report
        .clusters
        .iter()
        .map(|c| {
            if c.members.iter().any(|m| m.words.is_empty()) {
                return Err(Error::InvalidInput(
                    "cluster member lacks an interpreted axis".into(),
                ));
            }
            Ok(QuestionnaireItem {
                entries: c
                    .members
                    .iter()
                    .map(|m| (m.language.clone(), m.words.clone()))
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;
    sink.write(
        "cross/questionnaire.txt",
        evalkappa::export_questionnaire(&items).as_bytes(),
    )
}

/// Runs the whole pipeline. On failure a partial manifest with
/// `status = "failed:<stage>"` is left behind and the error is returned.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Manifest> {
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let mut sink = ArtifactSink::new(&config.output_dir);
    match run_stages(config, &mut sink) {
        Ok(()) => sink.finish("ok"),
        Err((stage, err)) => {
            let _ = sink.finish(&format!("failed:{stage}"));
            Err(err)
        }
    }
}

fn run_stages(
    config: &PipelineConfig,
    sink: &mut ArtifactSink,
) -> std::result::Result<(), (&'static str, Error)> {
    let resolved = toml::to_string_pretty(config)
        .map_err(|e| ("config", Error::Internal(format!("serializing config: {e}"))))?;
    sink.write("resolved_config.toml", resolved.as_bytes())
        .map_err(|e| ("config", e))?;

    let (plan, matrices) = stage_ingest(config, sink).map_err(|e| ("ingest", e))?;

    let checkpoint_dir = if config.checkpoints {
        let dir = config.output_dir.join("checkpoints");
        fs::create_dir_all(&dir).map_err(|e| ("icasso", Error::io(&dir, e)))?;
        Some(dir)
    } else {
        None
    };

    let mut stages = Vec::with_capacity(config.languages.len());
    for (lang, matrix) in config.languages.iter().zip(matrices) {
        let stage = stage_language(config, lang, matrix, checkpoint_dir.as_deref(), sink)
            .map_err(|e| ("icasso", e))?;
        stages.push(stage);
    }

    let (_clustering, report) =
        stage_crosslang(config, &plan, &stages, sink).map_err(|e| ("crosslang", e))?;
    stage_questionnaire(&report, sink).map_err(|e| ("questionnaire", e))?;
    Ok(())
}

/// Materializes a synthetic scenario as a ready-to-run fixture: one `.vec`
/// file per dataset (columns are aligned samples), pivot dictionaries and
/// frequency lists covering every word, the ground truth, and a pipeline
/// config wired to them. Returns the config path.
pub fn write_synthetic_fixture(
    scenario: &crate::synth::SyntheticScenario,
    dir: &Path,
    seeds: &[u64],
    quality_threshold: f64,
) -> Result<PathBuf> {
    use std::fmt::Write as _;

    let datasets = crate::synth::generate(scenario)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let word = |lang: usize, i: usize| format!("w{lang}x{i:05}");
    for (k, ds) in datasets.iter().enumerate() {
        let words: Vec<String> = (0..scenario.samples).map(|i| word(k, i)).collect();
        let matrix = EmbeddingMatrix::new(scenario.dim, words.clone(), ds.x.clone())?;
        embeddings::write_vec_file(&matrix, &dir.join(format!("syn{k}.vec")))?;
        let freq = words.join("\n") + "\n";
        write_atomic(&dir.join(format!("freq{k}.txt")), freq.as_bytes())?;
        if k > 0 {
            let mut dict = String::new();
            for i in 0..scenario.samples {
                let _ = writeln!(dict, "{} {}", word(0, i), word(k, i));
            }
            write_atomic(&dir.join(format!("dict0_{k}.txt")), dict.as_bytes())?;
        }
    }
    let truth = serde_json::to_vec_pretty(scenario)
        .map_err(|e| Error::Internal(format!("serializing scenario: {e}")))?;
    write_atomic(&dir.join("ground_truth.json"), &truth)?;

    let mut config = String::new();
    let _ = writeln!(config, "output_dir = \"out\"");
    let _ = writeln!(config, "total_size = {}", scenario.samples);
    let _ = writeln!(config, "top_k = 3");
    for k in 0..scenario.datasets {
        let _ = writeln!(config, "\n[[languages]]");
        let _ = writeln!(config, "name = \"syn{k}\"");
        let _ = writeln!(config, "embeddings = \"syn{k}.vec\"");
        let _ = writeln!(config, "frequency_list = \"freq{k}.txt\"");
        if k > 0 {
            let _ = writeln!(config, "dictionary = \"dict0_{k}.txt\"");
        }
    }
    let _ = writeln!(config, "\n[ica]\nretain = {}", scenario.dim);
    let seed_list: Vec<String> = seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(
        config,
        "\n[icasso]\nseeds = [{}]\ntarget_clusters = {}\nquality_threshold = {}",
        seed_list.join(", "),
        scenario.dim,
        quality_threshold
    );
    let _ = writeln!(config, "\n[crosslang]\nalpha_fd = 0.01\nalpha_fp = 0.01");
    let config_path = dir.join("pipeline.toml");
    write_atomic(&config_path, config.as_bytes())?;
    Ok(config_path)
}

/// Verifies that every artifact listed in a manifest exists under `root`
/// with matching size and hash.
pub fn verify_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    for entry in &manifest.artifacts {
        let path = root.join(&entry.path);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() as u64 != entry.bytes || sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::InvalidInput(format!(
                "artifact {} does not match its manifest entry",
                entry.path
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn minimal_fixture(dir: &Path) -> PathBuf {
        write_file(
            dir,
            "a.vec",
            "4 2\nalpha 1 0\nbeta 0 1\ngamma 1 1\ndelta 2 -1\n",
        );
        write_file(
            dir,
            "b.vec",
            "4 2\nxen 1 0\nyen 0 1\nzen 1 2\nwen -1 2\n",
        );
        write_file(dir, "dict.txt", "alpha xen\nbeta yen\ngamma zen\n");
        write_file(dir, "freq_a.txt", "delta\ngamma\nbeta\nalpha\n");
        write_file(dir, "freq_b.txt", "wen\nzen\nyen\nxen\n");
        write_file(
            dir,
            "pipeline.toml",
            r#"
output_dir = "out"
total_size = 4
top_k = 2

[[languages]]
name = "la"
embeddings = "a.vec"
frequency_list = "freq_a.txt"

[[languages]]
name = "lb"
embeddings = "b.vec"
frequency_list = "freq_b.txt"
dictionary = "dict.txt"

[ica]
retain = 2

[icasso]
runs = 2
target_clusters = 2
"#,
        )
    }

    #[test]
    fn minimal_config_gets_paper_defaults() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "e.vec", "2 2\na 1 0\nb 0 1\n");
        write_file(dir.path(), "f.txt", "a\nb\n");
        write_file(dir.path(), "d.txt", "a a\n");
        let path = write_file(
            dir.path(),
            "c.toml",
            r#"
[[languages]]
name = "l0"
embeddings = "e.vec"
frequency_list = "f.txt"

[[languages]]
name = "l1"
embeddings = "e.vec"
frequency_list = "f.txt"
dictionary = "d.txt"
"#,
        );
        let (config, warnings) = validate_config(&path).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(config.icasso.runs, 10);
        assert_eq!(config.icasso.seeds, (0..10).collect::<Vec<u64>>());
        assert_eq!(config.icasso.target_clusters, 300);
        assert_eq!(config.icasso.quality_threshold, 0.8);
        assert_eq!(config.ica.retain, 300);
        assert_eq!(config.ica.max_iter, 1000);
        assert_eq!(config.ica.tol, 1e-6);
        assert_eq!(config.crosslang.alpha_fd, 0.01);
        assert_eq!(config.crosslang.alpha_fp, 0.01);
        assert_eq!(config.total_size, 50_000);
        assert_eq!(config.top_k, 3);
        assert!(config.checkpoints);
    }

    #[test]
    fn out_of_range_alpha_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "e.vec", "2 2\na 1 0\nb 0 1\n");
        write_file(dir.path(), "f.txt", "a\n");
        write_file(dir.path(), "d.txt", "a a\n");
        let path = write_file(
            dir.path(),
            "c.toml",
            r#"
[[languages]]
name = "l0"
embeddings = "e.vec"
frequency_list = "f.txt"

[[languages]]
name = "l1"
embeddings = "e.vec"
frequency_list = "f.txt"
dictionary = "d.txt"

[crosslang]
alpha_fd = 1.5
"#,
        );
        let err = validate_config(&path).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_warn_but_pass() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "e.vec", "2 2\na 1 0\nb 0 1\n");
        write_file(dir.path(), "f.txt", "a\n");
        write_file(dir.path(), "d.txt", "a a\n");
        let path = write_file(
            dir.path(),
            "c.toml",
            r#"
mystery = 1

[[languages]]
name = "l0"
embeddings = "e.vec"
frequency_list = "f.txt"
typo_key = "x"

[[languages]]
name = "l1"
embeddings = "e.vec"
frequency_list = "f.txt"
dictionary = "d.txt"

[ica]
shrink = true
"#,
        );
        let (_, warnings) = validate_config(&path).unwrap();
        assert_eq!(warnings.len(), 3, "{warnings:?}");
    }

    #[test]
    fn missing_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "c.toml",
            r#"
[[languages]]
name = "l0"
embeddings = "nope.vec"
frequency_list = "f.txt"

[[languages]]
name = "l1"
embeddings = "nope.vec"
frequency_list = "f.txt"
dictionary = "d.txt"
"#,
        );
        assert!(matches!(validate_config(&path), Err(Error::Config(_))));
    }

    #[test]
    fn resolved_config_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = minimal_fixture(dir.path());
        let (config, _) = validate_config(&path).unwrap();
        let emitted = toml::to_string_pretty(&config).unwrap();
        let re_path = write_file(dir.path(), "resolved.toml", &emitted);
        let (config2, warnings) = validate_config(&re_path).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(config, config2);
    }

    #[test]
    fn pipeline_runs_on_tiny_fixture_and_manifest_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let path = minimal_fixture(dir.path());
        let (mut config, _) = validate_config(&path).unwrap();
        config.icasso.target_clusters = 2;
        let manifest = run_pipeline(&config).unwrap();
        assert_eq!(manifest.status, "ok");
        let expected = [
            "plan.json",
            "resolved_config.toml",
            "la/cluster_report.json",
            "la/quality_curve.tsv",
            "la/axes.json",
            "la/axes.tsv",
            "lb/cluster_report.json",
            "lb/quality_curve.tsv",
            "lb/axes.json",
            "lb/axes.tsv",
            "cross/similarity_la_lb.tsv",
            "cross/clusters.json",
            "cross/summary.json",
            "cross/cluster_table.tsv",
            "cross/questionnaire.txt",
        ];
        for e in expected {
            assert!(
                manifest.artifacts.iter().any(|a| a.path == e),
                "missing artifact {e}"
            );
        }
        verify_manifest(&config.output_dir, &manifest).unwrap();
    }
}
