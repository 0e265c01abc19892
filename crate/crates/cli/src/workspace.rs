//! Project state shared by the CLI and the HTTP service. Every operation
//! returns a serializable payload; both front ends print it with [`to_json`].

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use fuzzlens_core::blockers::{classify, extract_blockers, BlockerRecord, ClassifyOptions};
use fuzzlens_core::code_db::{export_dimensions_csv, ProgramDb};
use fuzzlens_core::lang::{EntityId, NodeKind, Project};
use fuzzlens_core::queries::{
    entity_label, query1_hybrid_taint, query2_distribution, query3_flag_suggestions, resolve_location, ArgShape,
    Query1Options, Query2Options, QueryArg, QueryError, QueryKind, TaintWitness,
};
use fuzzlens_core::runtime::{fuzz, Corpus, FactWriter, FuzzOptions};
use fuzzlens_core::static_analysis::{ExtraRules, FlowNode, TaintConfig};
use fuzzlens_core::warehouse::{load_facts, FactStore, RunRow};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ApiError;

/// Pretty JSON with a trailing newline: the one serialization path.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("payloads serialize");
    s.push('\n');
    s
}

/// Named extra taint rule sets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rules {
    None,
    AddressCopy,
    FieldToQualifier,
    #[default]
    Both,
}

impl Rules {
    pub fn parse(s: &str) -> Option<Rules> {
        match s {
            "none" => Some(Rules::None),
            "address-copy" => Some(Rules::AddressCopy),
            "field-to-qualifier" => Some(Rules::FieldToQualifier),
            "both" => Some(Rules::Both),
            _ => None,
        }
    }

    pub fn extra(self) -> ExtraRules {
        match self {
            Rules::None => ExtraRules::NONE,
            Rules::AddressCopy => ExtraRules { address_copy: true, field_to_qualifier: false },
            Rules::FieldToQualifier => ExtraRules { address_copy: false, field_to_qualifier: true },
            Rules::Both => ExtraRules::default(),
        }
    }
}

pub const DEFAULT_QUERY_EXECS: u64 = 5_000;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryOptions {
    /// Location ARG of the taint source; defaults to the driver's input buffer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<Rules>,
    /// Skip the dynamic step of q1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_only: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub query_id: String,
    pub arg: String,
    #[serde(default)]
    pub options: QueryOptions,
}

impl QueryRequest {
    /// Deterministic job id: hash of the canonical request.
    pub fn job_id(&self) -> String {
        let canon = serde_json::to_string(self).expect("request serializes");
        hex::encode(&Sha256::digest(canon.as_bytes())[..8])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryResponse {
    pub query_id: String,
    pub arg: String,
    pub generation: String,
    /// One-line human summary.
    pub summary: String,
    pub result: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub generation: String,
    pub driver: String,
    pub files: Vec<String>,
    pub functions: usize,
    pub statements: usize,
    pub basic_blocks: usize,
    pub cfg_edges: usize,
    pub accesses: usize,
    pub dims_dir: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct FuzzRequest {
    pub execs: u64,
    pub seed: u64,
    /// Location ARGs of accesses whose values are recorded.
    pub monitor: Vec<String>,
    pub append: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzSummary {
    pub generation: String,
    pub facts_dir: String,
    pub first_run_id: u64,
    pub next_run_id: u64,
    pub execs: u64,
    pub corpus_size: usize,
    pub crashes: Vec<u64>,
    pub monitored: Vec<EntityId>,
    pub edges_covered: usize,
    pub cfg_edges: usize,
    pub line_coverage: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockersReport {
    pub generation: String,
    pub runs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub blockers: Vec<BlockerRecord>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ClassifyRequest {
    pub top: Option<usize>,
    pub execs: Option<u64>,
    pub seed: Option<u64>,
    pub rules: Rules,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactGeneration {
    pub generation: String,
    pub runs: usize,
    pub current: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectInfo {
    pub manifest: String,
    pub driver: String,
    pub files: Vec<String>,
    pub dim_generation: String,
    pub fact_generations: Vec<FactGeneration>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceText {
    pub file: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunsReport {
    pub generation: String,
    pub runs: Vec<RunRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LineHits {
    pub file: String,
    pub line: u32,
    pub hits: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub generation: String,
    pub runs: usize,
    pub line_coverage: f64,
    pub lines: Vec<LineHits>,
}

type FactsKey = (u64, Option<SystemTime>);

/// A built project and its on-disk state under `<manifest dir>/.fuzzlens`.
pub struct Workspace {
    pub manifest_path: PathBuf,
    pub db: ProgramDb,
    facts_cache: Mutex<Option<(FactsKey, Arc<FactStore>)>>,
}

fn io_err(path: &Path, e: std::io::Error) -> ApiError {
    ApiError::Io(format!("{}: {e}", path.display()))
}

impl Workspace {
    pub fn open(manifest_path: &Path) -> Result<Workspace, ApiError> {
        let project = Project::load(manifest_path)?;
        let db = ProgramDb::build(project)?;
        Ok(Workspace { manifest_path: manifest_path.to_path_buf(), db, facts_cache: Mutex::new(None) })
    }

    pub fn generation(&self) -> &str {
        self.db.generation()
    }

    fn state_root(&self) -> PathBuf {
        self.db.project.root.join(".fuzzlens")
    }

    pub fn dims_dir(&self) -> PathBuf {
        self.state_root().join(self.generation()).join("dims")
    }

    pub fn facts_dir(&self) -> PathBuf {
        self.state_root().join(self.generation()).join("facts")
    }

    fn facts_key(&self) -> Option<FactsKey> {
        let meta = fs::metadata(self.facts_dir().join("runs.csv")).ok()?;
        Some((meta.len(), meta.modified().ok()))
    }

    /// The current generation's facts, or `None` before the first campaign.
    pub fn facts(&self) -> Result<Option<Arc<FactStore>>, ApiError> {
        let Some(key) = self.facts_key() else { return Ok(None) };
        let mut cache = self.facts_cache.lock().expect("facts cache lock");
        if let Some((k, store)) = cache.as_ref() {
            if *k == key {
                return Ok(Some(store.clone()));
            }
        }
        let store = Arc::new(load_facts(&self.db.dims, &self.facts_dir())?);
        *cache = Some((key, store.clone()));
        Ok(Some(store))
    }

    pub fn build(&self) -> Result<BuildReport, ApiError> {
        let dir = self.dims_dir();
        export_dimensions_csv(&self.db.dims, &dir)?;
        let d = &self.db.dims;
        Ok(BuildReport {
            generation: self.generation().to_string(),
            driver: self.db.project.manifest.driver.clone(),
            files: self.db.project.manifest.files.clone(),
            functions: d.functions.len(),
            statements: d.statements.len(),
            basic_blocks: d.basic_blocks.len(),
            cfg_edges: d.cfg_edges.len(),
            accesses: d.variable_accesses.len(),
            dims_dir: dir.display().to_string(),
        })
    }

    fn resolve_monitor(&self, locs: &[String]) -> Result<BTreeSet<EntityId>, ApiError> {
        let mut out = BTreeSet::new();
        for raw in locs {
            let arg = QueryArg::parse(raw, ArgShape::Location)?;
            let id = resolve_location(&self.db, &arg.location()?)?;
            let n = self.db.ast.node(id);
            if self.db.dims.access(id).is_none() && n.kind != NodeKind::VarDecl {
                return Err(QueryError::NotAnAccess(n.loc.clone()).into());
            }
            out.insert(id);
        }
        Ok(out)
    }

    /// Runs a campaign and writes its facts. Without `append` the current
    /// generation's facts are replaced.
    pub fn fuzz(&self, req: &FuzzRequest) -> Result<FuzzSummary, ApiError> {
        let monitor = self.resolve_monitor(&req.monitor)?;
        let dir = self.facts_dir();
        let first_run_id = match (req.append, self.facts()?) {
            (true, Some(store)) => store.runs.iter().map(|r| r.run_id + 1).max().unwrap_or(0),
            (false, Some(_)) => {
                fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
                0
            }
            (_, None) => 0,
        };
        let mut writer = FactWriter::open(&dir, self.generation()).map_err(|e| io_err(&dir, e))?;
        let opts = FuzzOptions { exec_limit: req.execs, seed: req.seed, first_run_id, ..FuzzOptions::default() };
        let report = fuzz(&self.db, Corpus::new(), &monitor, &opts, |t, i| writer.write(t, i))
            .map_err(|e| io_err(&dir, e))?;
        writer.flush().map_err(|e| io_err(&dir, e))?;
        drop(writer);

        let store = self.facts()?.ok_or_else(|| ApiError::NoFacts(self.generation().to_string()))?;
        Ok(FuzzSummary {
            generation: self.generation().to_string(),
            facts_dir: dir.display().to_string(),
            first_run_id,
            next_run_id: report.next_run_id,
            execs: report.execs,
            corpus_size: report.corpus.len(),
            crashes: report.crashes.iter().map(|(r, _)| *r).collect(),
            monitored: monitor.into_iter().collect(),
            edges_covered: store.edge_counts(&self.db).len(),
            cfg_edges: self.db.dims.cfg_edges.len(),
            line_coverage: fuzzlens_core::warehouse::line_coverage(&self.db, &store),
        })
    }

    pub fn blockers(&self) -> Result<BlockersReport, ApiError> {
        let generation = self.generation().to_string();
        Ok(match self.facts()? {
            Some(store) => {
                BlockersReport { generation, runs: store.runs.len(), note: None, blockers: extract_blockers(&self.db, &store) }
            }
            None => BlockersReport { generation, runs: 0, note: Some("no facts loaded".into()), blockers: Vec::new() },
        })
    }

    /// Blockers with taxonomy verdicts, limited to the `top` highest ranked.
    pub fn classify(&self, req: &ClassifyRequest) -> Result<BlockersReport, ApiError> {
        let mut report = self.blockers()?;
        if let Some(k) = req.top {
            report.blockers.truncate(k);
        }
        let cfg = TaintConfig::for_driver(&self.db).with_rules(req.rules.extra());
        let mut opts = ClassifyOptions::default();
        if let Some(n) = req.execs {
            opts.query1.fuzz.exec_limit = n;
        }
        if let Some(s) = req.seed {
            opts.query1.fuzz.seed = s;
        }
        for b in &mut report.blockers {
            b.taxonomy = Some(classify(&self.db, b, &cfg, &opts));
        }
        Ok(report)
    }

    pub fn query(&self, req: &QueryRequest) -> Result<QueryResponse, ApiError> {
        let kind = QueryKind::parse(&req.query_id).ok_or_else(|| ApiError::UnknownQuery(req.query_id.clone()))?;
        let o = &req.options;
        let arg = QueryArg::parse(&req.arg, kind.shape())?;
        let label = |id: EntityId| entity_label(&self.db, id);
        let (summary, result) = match kind {
            QueryKind::Q1 => {
                let mut cfg = TaintConfig::for_driver(&self.db).with_rules(o.rules.unwrap_or_default().extra());
                let source = match &o.source {
                    Some(s) => {
                        let id = resolve_location(&self.db, &QueryArg::parse(s, ArgShape::Location)?.location()?)?;
                        FlowNode::new(&self.db, id)
                    }
                    None => *cfg.sources.iter().next().ok_or_else(|| {
                        ApiError::BadRequest("the driver has no input buffer; pass a source location".into())
                    })?,
                };
                cfg.sources = BTreeSet::from([source]);
                let mut opts = Query1Options { dynamic: !o.static_only.unwrap_or(false), ..Query1Options::default() };
                opts.fuzz.exec_limit = o.execs.unwrap_or(DEFAULT_QUERY_EXECS);
                opts.fuzz.seed = o.seed.unwrap_or(0);
                let v = query1_hybrid_taint(&self.db, source, &arg, &cfg, &opts)?;
                let mut summary = format!("{:?}: {} -> {}", v.status, label(v.source.access), label(v.sink.access));
                if let TaintWitness::Relation { relation } = &v.witness {
                    summary.push_str(&format!(" via {}", relation.render(label)));
                }
                (summary, serde_json::to_value(&v))
            }
            QueryKind::Q2 => {
                let store = self.facts()?.ok_or_else(|| ApiError::NoFacts(self.generation().to_string()))?;
                let mut opts = Query2Options::default();
                if let Some(g) = o.grid_points {
                    opts.grid_points = g;
                }
                let d = query2_distribution(&self.db, &store, &arg, &opts)?;
                let summary = format!("{} over {} samples: min {} max {} mean {}", d.expression, d.samples, d.min, d.max, d.mean);
                (summary, serde_json::to_value(&d))
            }
            QueryKind::Q3 => {
                let r = query3_flag_suggestions(&self.db, &arg)?;
                let names: Vec<&str> = r.suggestions.iter().map(|s| s.setter.as_str()).collect();
                let summary = if names.is_empty() {
                    format!("no uncalled setter for flag {:#x} of {}", r.flag_value, r.target)
                } else {
                    format!("call {} to set flag {:#x} of {}", names.join(", "), r.flag_value, r.target)
                };
                (summary, serde_json::to_value(&r))
            }
        };
        Ok(QueryResponse {
            query_id: req.query_id.clone(),
            arg: req.arg.clone(),
            generation: self.generation().to_string(),
            summary,
            result: result.expect("results serialize"),
        })
    }

    pub fn project_info(&self) -> ProjectInfo {
        let mut fact_generations = Vec::new();
        if let Ok(entries) = fs::read_dir(self.state_root()) {
            let mut names: Vec<String> = entries.flatten().filter_map(|e| e.file_name().into_string().ok()).collect();
            names.sort();
            for g in names {
                let runs = self.state_root().join(&g).join("facts").join("runs.csv");
                if let Ok(text) = fs::read_to_string(&runs) {
                    let current = g == self.generation();
                    fact_generations.push(FactGeneration { runs: text.lines().count().saturating_sub(1), generation: g, current });
                }
            }
        }
        ProjectInfo {
            manifest: self.manifest_path.display().to_string(),
            driver: self.db.project.manifest.driver.clone(),
            files: self.db.project.manifest.files.clone(),
            dim_generation: self.generation().to_string(),
            fact_generations,
        }
    }

    pub fn source(&self, file: &str) -> Result<SourceText, ApiError> {
        let text = self.db.project.source(file).ok_or_else(|| ApiError::UnknownFile(file.to_string()))?;
        Ok(SourceText { file: file.to_string(), text: text.to_string() })
    }

    pub fn runs(&self) -> Result<RunsReport, ApiError> {
        let runs = self.facts()?.map(|s| s.runs.clone()).unwrap_or_default();
        Ok(RunsReport { generation: self.generation().to_string(), runs })
    }

    pub fn coverage(&self) -> Result<CoverageReport, ApiError> {
        let store = self.facts()?.unwrap_or_default();
        let lines = store
            .line_hits(&self.db)
            .into_iter()
            .map(|((file, line), hits)| LineHits { file, line, hits })
            .collect();
        Ok(CoverageReport {
            generation: self.generation().to_string(),
            runs: store.runs.len(),
            line_coverage: fuzzlens_core::warehouse::line_coverage(&self.db, &store),
            lines,
        })
    }
}
