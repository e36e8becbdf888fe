//! `mathkg` subcommands. Each one loads its inputs, calls the matching
//! library operation and writes the artifact; reports go to stdout as JSON.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use clap::{Args, Parser, Subcommand};
use mathkg_core::completion::{complete_kg, default_rules};
use mathkg_core::embedding::{SentenceMask, Strategy, WeightVector};
use mathkg_core::eval::{
    ks_statistic, precision, sample_entities, tail_rank, transe_train, transe_vd, triples_from_kg, PrecisionSample,
};
use mathkg_core::fusion::fuse;
use mathkg_core::index::{build_vd, load_vd, save_vd, VectorDb};
use mathkg_core::ingest::{extract_from_latex, ingest_structured, to_input_kg, LatexConfig, RefPatterns, StructuredRecordMapping};
use mathkg_core::llm::augment_kg;
use mathkg_core::store::{load_kg, save_kg};
use mathkg_core::{Direction, EntityId, EntityType, KnowledgeGraph};
use serde::Serialize;

use crate::config::ToolkitConfig;
use crate::service::{self, ServiceState};
use crate::vis::{self, VisFormat};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "mathkg", version, about = "Build, search and evaluate a mathematical knowledge graph")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Scripted LLM fixtures (JSON Lines), used when no LLM URL is configured.
    #[arg(long, global = true)]
    pub llm_fixtures: Option<PathBuf>,
    /// Log at debug level.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract entities from LaTeX or structured records into a new graph.
    Ingest(IngestArgs),
    /// Fill titles, fields, bodylists, references and tactics with the LLM.
    Augment(InOut),
    /// Embed every entity into a vector index.
    BuildVd(BuildVdArgs),
    /// Nearest entities to a text or to an indexed entity.
    Search(SearchArgs),
    /// Fuse an input graph into an existing one.
    Fuse(FuseArgs),
    /// Supply missing proofs and solutions.
    Complete(CompleteArgs),
    /// Evaluation tools.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Node, edge, head, leaf and cycle counts.
    Stats(KgArg),
    /// Export the graph for a viewer.
    ExportVis(ExportArgs),
    /// Run the HTTP retrieval service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct KgArg {
    /// Knowledge graph file (JSON Lines).
    #[arg(long)]
    pub kg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InOut {
    #[arg(long)]
    pub kg: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// LaTeX sources, processed in order.
    #[arg(long, conflicts_with = "structured")]
    pub latex: Vec<PathBuf>,
    /// Structured records, one JSON object per line.
    #[arg(long, requires = "mapping")]
    pub structured: Option<PathBuf>,
    /// Field mapping for structured records (JSON).
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Source tag stored on every entity.
    #[arg(long)]
    pub source: Option<String>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildVdArgs {
    #[arg(long)]
    pub kg: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// strategy1 or strategy2.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    /// Five comma-separated weights summing to 1.
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<WeightVector>,
    /// Included sentence numbers, e.g. `1,2,3`.
    #[arg(long, value_parser = parse_mask)]
    pub mask: Option<SentenceMask>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub vd: Option<PathBuf>,
    #[arg(long, conflicts_with = "entity", required_unless_present = "entity")]
    pub text: Option<String>,
    #[arg(long)]
    pub entity: Option<u64>,
    #[arg(short, long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// The graph whose entities are fused in.
    #[arg(long)]
    pub input: PathBuf,
    /// The graph being updated.
    #[arg(long)]
    pub existing: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write a rebuilt vector index of the result.
    #[arg(long)]
    pub vd_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[arg(long)]
    pub kg: Option<PathBuf>,
    #[arg(long)]
    pub vd: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub vd_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Hits@q of k-hop reachability over sampled entities.
    Reach(ReachArgs),
    /// Precision over labelled retrievals (JSON list of {entity_id, labels}).
    Precision {
        #[arg(long)]
        labels: PathBuf,
    },
    /// Two-sample Kolmogorov-Smirnov statistic of two JSON arrays.
    Ks {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Train TransE on the graph's edges.
    Transe(TranseArgs),
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    #[arg(long)]
    pub kg: Option<PathBuf>,
    #[arg(long)]
    pub vd: Option<PathBuf>,
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Comma-separated q values.
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<usize>,
    /// forward, backward or either.
    #[arg(long)]
    pub direction: Option<Direction>,
    /// Per-type sample sizes, e.g. `definition=50,theorem=30,problem=20`.
    #[arg(long, value_parser = parse_counts)]
    pub counts: Option<BTreeMap<EntityType, usize>>,
    /// Use every indexed entity instead of sampling.
    #[arg(long, conflicts_with = "counts")]
    pub all: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write `q,rate` lines here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TranseArgs {
    #[arg(long)]
    pub kg: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the entity vectors as a transe-tagged index.
    #[arg(long)]
    pub vd_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub kg: Option<PathBuf>,
    /// visjson or dot.
    #[arg(long, default_value = "visjson")]
    pub format: VisFormat,
    /// Defaults to stdout.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub kg: Option<PathBuf>,
    /// Vector indexes; the first is the default for searches.
    #[arg(long)]
    pub vd: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Route POST /fuse and POST /complete.
    #[arg(long)]
    pub allow_mutations: bool,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s {
        "strategy1" | "1" => Ok(Strategy::Strategy1),
        "strategy2" | "2" => Ok(Strategy::Strategy2),
        _ => Err("expected strategy1 or strategy2".into()),
    }
}

fn parse_weights(s: &str) -> Result<WeightVector, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let arr: [f64; 5] = parts.try_into().map_err(|_| "expected five weights".to_string())?;
    WeightVector::new(arr).map_err(|e| e.to_string())
}

fn parse_mask(s: &str) -> Result<SentenceMask, String> {
    let nums: Vec<u8> = s
        .split(',')
        .map(|p| p.trim().parse::<u8>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    SentenceMask::try_from(nums).map_err(|e| e.to_string())
}

fn parse_counts(s: &str) -> Result<BTreeMap<EntityType, usize>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (t, n) = part.split_once('=').ok_or_else(|| format!("`{part}` is not type=count"))?;
        let t: EntityType = t.trim().parse().map_err(|e| format!("{e}"))?;
        out.insert(t, n.trim().parse().map_err(|e| format!("{e}"))?);
    }
    Ok(out)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mathkg: {e}");
            e.exit_code()
        }
    }
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn need(path: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    path.or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Usage(format!("--{what} is required (or set paths.{what} in the config)")))
}

fn read_kg(path: &Path) -> Result<KnowledgeGraph, CliError> {
    load_kg(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_vd(path: &Path) -> Result<VectorDb, CliError> {
    load_vd(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_kg(kg: &KnowledgeGraph, path: &Path) -> Result<(), CliError> {
    save_kg(kg, path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_vd(vd: &VectorDb, path: &Path) -> Result<(), CliError> {
    save_vd(vd, path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct IngestSummary {
    entities: usize,
    edges: usize,
    unresolved: usize,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ToolkitConfig::load(p)?,
        None => ToolkitConfig::default(),
    };
    cfg.apply_env();
    if cli.llm_fixtures.is_some() {
        cfg.paths.llm_fixtures = cli.llm_fixtures.clone();
    }
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Augment(a) => {
            let mut kg = read_kg(&need(a.kg, &cfg.paths.kg, "kg")?)?;
            let llm = cfg.llm()?;
            let report = augment_kg(&mut kg, llm.as_ref(), &cfg.augment_config())?;
            write_kg(&kg, &a.out)?;
            print_json(&report);
            Ok(())
        }
        Command::BuildVd(a) => {
            let kg = read_kg(&need(a.kg, &cfg.paths.kg, "kg")?)?;
            let mut embed = cfg.embed;
            if let Some(s) = a.strategy {
                embed.strategy = s;
            }
            if let Some(w) = a.weights {
                embed.weights = w;
            }
            if let Some(m) = a.mask {
                embed.mask = m;
            }
            let (vd, failures) = build_vd(&kg, cfg.embedder()?.as_ref(), &embed)?;
            write_vd(&vd, &a.out)?;
            print_json(&serde_json::json!({"records": vd.len(), "failures": failures}));
            Ok(())
        }
        Command::Search(a) => {
            let vd = read_vd(&need(a.vd, &cfg.paths.vd, "vd")?)?;
            let embedder: Arc<dyn mathkg_core::embedding::Embedder> = Arc::from(cfg.embedder()?);
            let state = ServiceState::new(KnowledgeGraph::new(), vec![vd], embedder, cfg);
            let req = service::SearchRequest {
                text: a.text,
                entity_id: a.entity,
                k: a.k,
                strategy: None,
            };
            let resp = service::run_search(&state, &req).map_err(|e| {
                let body = e.body();
                match body.error.as_str() {
                    "backend_unavailable" => CliError::Backend(body.message.clone()),
                    _ => CliError::Data(body.message.clone()),
                }
            })?;
            print_json(&resp);
            Ok(())
        }
        Command::Fuse(a) => {
            let input = read_kg(&a.input)?;
            let mut existing = read_kg(&need(a.existing, &cfg.paths.kg, "existing")?)?;
            let llm = cfg.llm()?;
            let embedder = cfg.embedder()?;
            let report = fuse(&input, &mut existing, embedder.as_ref(), llm.as_ref(), &cfg.fusion_config())?;
            write_kg(&existing, &a.out)?;
            if let Some(p) = a.vd_out {
                write_vd(&build_vd(&existing, embedder.as_ref(), &cfg.embed)?.0, &p)?;
            }
            print_json(&report);
            if report.failed > 0 {
                return Err(CliError::Backend(format!("{} entities were not fused", report.failed)));
            }
            Ok(())
        }
        Command::Complete(a) => {
            let mut kg = read_kg(&need(a.kg, &cfg.paths.kg, "kg")?)?;
            let vd = read_vd(&need(a.vd, &cfg.paths.vd, "vd")?)?;
            let llm = cfg.llm()?;
            let embedder = cfg.embedder()?;
            let report = complete_kg(
                &mut kg,
                &vd,
                embedder.as_ref(),
                llm.as_ref(),
                &default_rules(),
                &cfg.completion_config(),
            )?;
            write_kg(&kg, &a.out)?;
            if let Some(p) = a.vd_out {
                write_vd(&build_vd(&kg, embedder.as_ref(), &cfg.embed)?.0, &p)?;
            }
            print_json(&report);
            Ok(())
        }
        Command::Eval(e) => eval(e, cfg),
        Command::Stats(a) => {
            let kg = read_kg(&need(a.kg, &cfg.paths.kg, "kg")?)?;
            print_json(&kg.graph_stats(cfg.simple_cycle_cap));
            Ok(())
        }
        Command::ExportVis(a) => {
            let kg = read_kg(&need(a.kg, &cfg.paths.kg, "kg")?)?;
            let text = vis::render(&kg, a.format);
            match a.out {
                Some(p) => std::fs::write(&p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Serve(a) => serve(a, cfg),
    }
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let raws = if let Some(path) = &a.structured {
        let mapping: StructuredRecordMapping = read_json(a.mapping.as_deref().expect("clap requires mapping"))?;
        let records: Vec<serde_json::Value> = read_text(path)?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1))))
            .collect::<Result<_, _>>()?;
        let source = a.source.clone().unwrap_or_else(|| "structured".into());
        ingest_structured(&records, &mapping, &source, &RefPatterns::default())?
    } else {
        if a.latex.is_empty() {
            return Err(CliError::Usage("give --latex FILE or --structured FILE --mapping FILE".into()));
        }
        let mut latex = LatexConfig::default();
        if let Some(s) = &a.source {
            latex.source = s.clone();
        }
        let mut raws = Vec::new();
        for p in &a.latex {
            raws.extend(extract_from_latex(&read_text(p)?, &latex).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?);
        }
        raws
    };
    let kg = to_input_kg(&raws)?;
    write_kg(&kg, &a.out)?;
    print_json(&IngestSummary {
        entities: kg.len(),
        edges: kg.edge_count(),
        unresolved: kg.unresolved_refs().len(),
    });
    Ok(())
}

fn eval(cmd: EvalCommand, cfg: ToolkitConfig) -> Result<(), CliError> {
    match cmd {
        EvalCommand::Reach(a) => {
            let kg = read_kg(&need(a.kg, &cfg.paths.kg, "kg")?)?;
            let vd = read_vd(&need(a.vd, &cfg.paths.vd, "vd")?)?;
            let mut rc = cfg.reach.clone();
            if let Some(k) = a.k {
                rc.k = k;
            }
            if !a.q.is_empty() {
                rc.q_values = a.q;
            }
            if let Some(d) = a.direction {
                rc.direction = d;
            }
            if let Some(c) = a.counts {
                rc.sample_counts = c;
            }
            if let Some(s) = a.seed {
                rc.seed = s;
            }
            let samples: Vec<EntityId> = if a.all {
                vd.ids().filter(|id| kg.contains(*id)).collect()
            } else {
                sample_entities(&kg, &rc.sample_counts, rc.seed)?
            };
            let res = mathkg_core::eval::hits_at_qs(&kg, &vd, &samples, rc.k, &rc.q_values, rc.direction)?;
            if let Some(p) = a.csv {
                std::fs::write(&p, res.to_csv()).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            }
            print_json(&res);
            Ok(())
        }
        EvalCommand::Precision { labels } => {
            let samples: Vec<PrecisionSample> = read_json(&labels)?;
            print_json(&precision(&samples)?);
            Ok(())
        }
        EvalCommand::Ks { a, b } => {
            let (a, b): (Vec<f64>, Vec<f64>) = (read_json(&a)?, read_json(&b)?);
            print_json(&serde_json::json!({"d": ks_statistic(&a, &b)?, "n_a": a.len(), "n_b": b.len()}));
            Ok(())
        }
        EvalCommand::Transe(a) => {
            let kg = read_kg(&need(a.kg, &cfg.paths.kg, "kg")?)?;
            let mut tc = cfg.transe.clone();
            if let Some(e) = a.epochs {
                tc.epochs = e;
            }
            if let Some(s) = a.seed {
                tc.seed = s;
            }
            let triples = triples_from_kg(&kg);
            let model = transe_train(&triples, &tc)?;
            let hits1 = triples.iter().filter(|t| tail_rank(&model, t) == Some(1)).count() as f64 / triples.len() as f64;
            if let Some(p) = a.vd_out {
                write_vd(&transe_vd(&model)?, &p)?;
            }
            print_json(&serde_json::json!({
                "triples": triples.len(),
                "entities": model.entities.len(),
                "epoch_losses": model.epoch_losses,
                "train_hits_at_1": hits1,
            }));
            Ok(())
        }
    }
}

fn serve(a: ServeArgs, cfg: ToolkitConfig) -> Result<(), CliError> {
    let kg = read_kg(&need(a.kg, &cfg.paths.kg, "kg")?)?;
    let mut paths = a.vd;
    if paths.is_empty() {
        paths.extend(cfg.paths.vd.clone());
    }
    let vds = paths.iter().map(|p| read_vd(p)).collect::<Result<Vec<_>, _>>()?;
    let embedder: Arc<dyn mathkg_core::embedding::Embedder> = Arc::from(cfg.embedder()?);
    let llm = if a.allow_mutations { Some(Arc::from(cfg.llm()?)) } else { None };
    let mut state = ServiceState::new(kg, vds, embedder, cfg);
    state.llm = llm;
    // Backends may own blocking HTTP clients, which must not be dropped on
    // the runtime; this handle keeps the last reference outside it.
    let shared = Arc::new(RwLock::new(state));
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    let res = rt.block_on(service::serve(shared.clone(), a.allow_mutations, &a.bind));
    drop(rt);
    drop(shared);
    res.map_err(|e| CliError::Data(format!("serve {}: {e}", a.bind)))
}
