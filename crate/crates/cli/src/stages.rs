//! Stage implementations. Artifacts under the work directory:
//!
//! ```text
//! documents/<doi stem>.json        ingest
//! extractions/<doi stem>.json      mine-text (plus the transcript when recording)
//! graphs/<graph stem>.json         mine-graph
//! db.jsonl, merge_log.jsonl        merge
//! features/<target>.csv, .meta.json, schema.json   encode
//! models/<run>.json, .split.json   train
//! reports/<run>.json, .csv         evaluate
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cellmine_core::corpus::{doi_to_file_stem, file_stem_to_doi, parse_document, Document};
use cellmine_core::digitizer::{digitize, AnnotationFileDetector, Detector, GraphSeriesFile, PlotImage, Unextractable};
use cellmine_core::eval::{classification_metrics, regression_metrics};
use cellmine_core::extraction::{Extractor, PaperExtraction};
use cellmine_core::features::{build_schema, dataset_from_csv, dataset_to_csv, encode_dataset, filter_dataset, Target};
use cellmine_core::fixtures::{named_suite, render_fixture, FixtureSpec};
use cellmine_core::gateway::{
    CompletionBackend, Gateway, HttpBackend, HttpConfig, RecordingBackend, ScriptedBackend, Transcript,
};
use cellmine_core::merge::{assemble_database, read_database, write_database, write_log, Database, Matcher};
use cellmine_core::ml::{fit_forest, fit_gbm, predict, train_test_split, Dataset, Ensemble, Task};
use cellmine_core::standardize::ChemDictionary;
use serde::{Deserialize, Serialize};

use crate::config::{GatewayMode, LabelMatcher, ModelKind, PipelineConfig};
use crate::manifest::{KeyBuilder, Manifest};
use crate::{read_file, write_file, CliError, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: &'static str,
    pub status: StageStatus,
    pub outputs: Vec<PathBuf>,
}

/// Files in `dir` whose names end with `suffix`, sorted by name.
fn list(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(suffix)))
        .collect();
    out.sort();
    out
}

fn stem_of(path: &Path, suffix: &str) -> String {
    let name = path.file_name().unwrap_or_default().to_string_lossy();
    name.strip_suffix(suffix).unwrap_or(&name).to_string()
}

/// Removes earlier outputs so a rerun never leaves stale files behind.
fn clear(dir: &Path, suffix: &str) -> Result<(), CliError> {
    for p in list(dir, suffix) {
        std::fs::remove_file(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn require(stage: Stage, path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::StageInputMissing { stage, path: path.to_path_buf() })
    }
}

fn require_any(stage: Stage, dir: &Path, suffix: &str) -> Result<Vec<PathBuf>, CliError> {
    let files = list(dir, suffix);
    if files.is_empty() {
        return Err(CliError::StageInputMissing { stage, path: dir.join(format!("*{suffix}")) });
    }
    Ok(files)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

fn parse<T: for<'de> Deserialize<'de>>(stage: Stage, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_file(path)?).map_err(|e| CliError::failed(stage, format!("{}: {e}", path.display())))
}

fn documents_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.work.join("documents")
}

fn extractions_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.work.join("extractions")
}

fn graphs_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.work.join("graphs")
}

fn features_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.work.join("features")
}

fn merge_log_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.work.join("merge_log.jsonl")
}

/// `<target>_<cycle|na>`, the dataset file stem.
fn target_stem(t: Target) -> String {
    match t.cycle() {
        Some(n) => format!("{}_{n}", t.name()),
        None => format!("{}_na", t.name()),
    }
}

fn dataset_path(cfg: &PipelineConfig) -> PathBuf {
    features_dir(cfg).join(format!("{}.csv", target_stem(cfg.task.target())))
}

fn meta_path(cfg: &PipelineConfig) -> PathBuf {
    features_dir(cfg).join(format!("{}.meta.json", target_stem(cfg.task.target())))
}

fn model_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.models_dir().join(format!("{}.json", cfg.run_stem()))
}

fn split_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.models_dir().join(format!("{}.split.json", cfg.run_stem()))
}

/// Per-dataset sidecar written by encode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub target: Target,
    pub task: Task,
    pub width: usize,
    pub families: BTreeMap<String, String>,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub ratio: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Input files and the freshness key of one stage. Fails with
/// `StageInputMissing` when a declared input is absent.
fn plan(stage: Stage, cfg: &PipelineConfig) -> Result<(Vec<PathBuf>, String), CliError> {
    let version = env!("CARGO_PKG_VERSION");
    let mut key = KeyBuilder::new(stage.as_str()).setting("version", &version);
    let inputs = match stage {
        Stage::Ingest => {
            require(stage, &cfg.paths.corpus)?;
            require_any(stage, &cfg.paths.corpus, ".xml")?
        }
        Stage::MineText => {
            let mut inputs = require_any(stage, &documents_dir(cfg), ".json")?;
            let g = &cfg.gateway;
            key = key.setting("mode", &g.mode).setting("retries", &g.retries);
            match g.mode {
                GatewayMode::Replay => {
                    require(stage, &cfg.paths.transcripts)?;
                    inputs.push(cfg.paths.transcripts.clone());
                }
                GatewayMode::Record => {
                    let k = cfg.paths.answer_key.clone().expect("validated");
                    require(stage, &k)?;
                    inputs.push(k);
                }
                GatewayMode::Live => key = key.setting("endpoint", &g.endpoint).setting("model", &g.model),
            }
            inputs
        }
        Stage::MineGraph => {
            let mut inputs = require_any(stage, &extractions_dir(cfg), ".json")?;
            inputs.extend(list(&cfg.paths.fixtures, ".png"));
            inputs.extend(list(&cfg.paths.fixtures, ".annotation.json"));
            key = key.setting("digitizer", &cfg.digitizer);
            inputs
        }
        Stage::Merge => {
            let mut inputs = require_any(stage, &extractions_dir(cfg), ".json")?;
            inputs.extend(list(&graphs_dir(cfg), ".json"));
            if let Some(d) = &cfg.merge.dictionary {
                require(stage, d)?;
                inputs.push(d.clone());
            }
            key = key.setting("merge", &cfg.merge);
            if cfg.merge.matcher == LabelMatcher::Gateway {
                key = key.setting("mode", &cfg.gateway.mode);
                if cfg.gateway.mode == GatewayMode::Replay && cfg.paths.transcripts.exists() {
                    inputs.push(cfg.paths.transcripts.clone());
                }
            }
            inputs
        }
        Stage::Encode => {
            require(stage, &cfg.db_path())?;
            key = key.setting("filter", &cfg.filter).setting("target", &cfg.task.target());
            vec![cfg.db_path()]
        }
        Stage::Train => {
            require(stage, &dataset_path(cfg))?;
            key = key.setting("task", &cfg.task).setting("seed", &cfg.seed);
            vec![dataset_path(cfg)]
        }
        Stage::Evaluate => {
            let inputs = vec![model_path(cfg), split_path(cfg), dataset_path(cfg), meta_path(cfg)];
            for p in &inputs {
                require(stage, p)?;
            }
            inputs
        }
    };
    let key = key.files(&inputs).finish();
    Ok((inputs, key))
}

fn ingest(cfg: &PipelineConfig, inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let stage = Stage::Ingest;
    let dir = documents_dir(cfg);
    clear(&dir, ".json")?;
    let mut outputs = Vec::new();
    for path in inputs {
        let stem = stem_of(path, ".xml");
        let doc = parse_document(&read_file(path)?, &file_stem_to_doi(&stem))
            .map_err(|e| CliError::failed(stage, format!("{}: {e}", path.display())))?;
        let out = dir.join(format!("{}.json", doi_to_file_stem(&doc.doi)));
        write_file(&out, json(&doc).as_bytes())?;
        log::info!(
            "stage=ingest doi={} captions={} results={} methods={}",
            doc.doi,
            doc.captions.len(),
            doc.result_paragraphs.len(),
            doc.method_paragraphs.len()
        );
        outputs.push(out);
    }
    Ok(outputs)
}

/// Gateway for the configured mode and, when recording, the recorder whose
/// transcript must be saved afterwards.
fn gateway(cfg: &PipelineConfig, stage: Stage) -> Result<(Gateway, Option<Arc<RecordingBackend>>), CliError> {
    let g = &cfg.gateway;
    let inner: Arc<dyn CompletionBackend> = match g.mode {
        GatewayMode::Replay => {
            let t = Transcript::load(&cfg.paths.transcripts).map_err(|e| CliError::failed(stage, e))?;
            return Ok((Gateway::replay(t), None));
        }
        GatewayMode::Record => {
            let key = cfg.paths.answer_key.as_ref().expect("validated");
            Arc::new(ScriptedBackend::load(key).map_err(|e| CliError::failed(stage, e))?)
        }
        GatewayMode::Live => Arc::new(HttpBackend::new(HttpConfig {
            endpoint: g.endpoint.clone(),
            model: g.model.clone(),
            api_key_env: g.api_key_env.clone(),
        })),
    };
    let recorder = Arc::new(RecordingBackend::new(inner));
    let mut gw = Gateway::new(recorder.clone());
    if let Some(rpm) = g.requests_per_minute {
        gw = gw.with_rate_limit(rpm);
    }
    Ok((gw, Some(recorder)))
}

fn extractor(cfg: &PipelineConfig, stage: Stage) -> Result<(Extractor, Option<Arc<RecordingBackend>>), CliError> {
    let (gw, recorder) = gateway(cfg, stage)?;
    let mut ex = Extractor::new(gw);
    ex.retries = cfg.gateway.retries;
    Ok((ex, recorder))
}

fn mine_text(cfg: &PipelineConfig, inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let stage = Stage::MineText;
    let (ex, recorder) = extractor(cfg, stage)?;
    let dir = extractions_dir(cfg);
    clear(&dir, ".json")?;
    let mut outputs = Vec::new();
    for path in inputs.iter().filter(|p| p.starts_with(documents_dir(cfg))) {
        let doc: Document = parse(stage, path)?;
        let paper = ex.mine_paper(&doc).map_err(|e| CliError::failed(stage, format!("{}: {e}", doc.doi)))?;
        let out = dir.join(format!("{}.json", doi_to_file_stem(&doc.doi)));
        write_file(&out, json(&paper).as_bytes())?;
        log::info!(
            "stage=mine-text doi={} graphs={} cells={} materials={}",
            paper.doi,
            paper.graphs.len(),
            paper.graphs.iter().map(|g| g.cells.len()).sum::<usize>(),
            paper.materials.len()
        );
        outputs.push(out);
    }
    if let Some(r) = recorder {
        r.transcript().save(&cfg.paths.transcripts).map_err(|e| CliError::failed(stage, e))?;
        outputs.push(cfg.paths.transcripts.clone());
    }
    Ok(outputs)
}

fn load_extractions(cfg: &PipelineConfig, stage: Stage) -> Result<Vec<PaperExtraction>, CliError> {
    list(&extractions_dir(cfg), ".json").iter().map(|p| parse(stage, p)).collect()
}

fn mine_graph(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let stage = Stage::MineGraph;
    let dir = graphs_dir(cfg);
    clear(&dir, ".json")?;
    let detector = AnnotationFileDetector { dir: cfg.paths.fixtures.clone() };
    let mut outputs = Vec::new();
    for paper in load_extractions(cfg, stage)? {
        for g in &paper.graphs {
            let stem = g.graph.file_stem();
            let png = cfg.paths.fixtures.join(format!("{stem}.png"));
            if !png.exists() {
                log::warn!("stage=mine-graph graph={stem} status=missing_image");
                continue;
            }
            let outcome = PlotImage::load(&png)
                .map(|mut img| {
                    img.provenance = Some(g.graph.clone());
                    img
                })
                .and_then(|img| detector.detect(&img).map(|a| (img, a)))
                .map_err(|cause| Unextractable { cause })
                .and_then(|(img, ann)| digitize(&img, &ann, &cfg.digitizer));
            match &outcome {
                Ok(s) => log::info!("stage=mine-graph graph={stem} series={}", s.len()),
                Err(e) => {
                    log::warn!("stage=mine-graph graph={stem} status=unextractable cause={:?}", e.cause.to_string())
                }
            }
            let out = dir.join(format!("{stem}.json"));
            write_file(&out, json(&GraphSeriesFile::new(&g.graph, &outcome)).as_bytes())?;
            outputs.push(out);
        }
    }
    if outputs.is_empty() {
        return Err(CliError::failed(stage, "no graph could be read"));
    }
    Ok(outputs)
}

fn merge(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let stage = Stage::Merge;
    let papers = load_extractions(cfg, stage)?;
    let graphs: Vec<GraphSeriesFile> =
        list(&graphs_dir(cfg), ".json").iter().map(|p| parse(stage, p)).collect::<Result<_, _>>()?;
    let owned;
    let dict = match &cfg.merge.dictionary {
        Some(p) => {
            owned = ChemDictionary::load(p).map_err(|e| CliError::failed(stage, e))?;
            &owned
        }
        None => ChemDictionary::builtin(),
    };
    let ex;
    let matcher = match cfg.merge.matcher {
        LabelMatcher::Fallback => Matcher::Fallback,
        LabelMatcher::Gateway => {
            ex = extractor(cfg, stage)?.0;
            Matcher::Gateway(&ex)
        }
    };
    let assembly = assemble_database(&papers, &graphs, dict, &cfg.merge.config, matcher);
    let db = Database { records: assembly.records };
    write_database(&cfg.db_path(), &db).map_err(|e| CliError::failed(stage, e))?;
    write_log(&merge_log_path(cfg), &assembly.log).map_err(|e| CliError::failed(stage, e))?;
    log::info!("stage=merge records={} log_entries={}", db.records.len(), assembly.log.len());
    Ok(vec![cfg.db_path(), merge_log_path(cfg)])
}

fn encode(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let stage = Stage::Encode;
    let db = read_database(&cfg.db_path()).map_err(|e| CliError::failed(stage, e))?;
    let subset = filter_dataset(&db.records, &cfg.filter);
    let schema = build_schema(&subset).map_err(|e| CliError::failed(stage, e))?;
    let target = cfg.task.target();
    let set = encode_dataset(&subset, &schema, target).map_err(|e| CliError::failed(stage, e))?;
    let meta = DatasetMeta {
        target,
        task: target.task(),
        width: set.names.len(),
        families: set.dataset.ids.iter().cloned().zip(set.families.iter().cloned()).collect(),
        skipped: set.skipped.clone(),
    };
    let schema_path = features_dir(cfg).join("schema.json");
    write_file(&schema_path, schema.to_json().as_bytes())?;
    write_file(&dataset_path(cfg), dataset_to_csv(&set).as_bytes())?;
    write_file(&meta_path(cfg), json(&meta).as_bytes())?;
    log::info!(
        "stage=encode records={} filtered={} rows={} width={}",
        db.records.len(),
        subset.len(),
        set.dataset.len(),
        meta.width
    );
    Ok(vec![schema_path, dataset_path(cfg), meta_path(cfg)])
}

fn load_dataset(cfg: &PipelineConfig, stage: Stage) -> Result<Dataset, CliError> {
    let task = cfg.task.target().task();
    dataset_from_csv(&read_file(&dataset_path(cfg))?, task).map(|(ds, _)| ds).map_err(|e| CliError::failed(stage, e))
}

pub fn fit_model(cfg: &PipelineConfig, train: &Dataset) -> Result<Ensemble, CliError> {
    let fitted = match cfg.task.model {
        ModelKind::Rf => fit_forest(train, &cfg.task.forest, cfg.seed),
        ModelKind::Gbm => fit_gbm(train, &cfg.task.gbm, cfg.seed),
    };
    fitted.map_err(|e| CliError::failed(Stage::Train, e))
}

fn train(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let stage = Stage::Train;
    let ds = load_dataset(cfg, stage)?;
    let (tr, te) = train_test_split(&ds, cfg.task.split_ratio, cfg.seed).map_err(|e| CliError::failed(stage, e))?;
    let model = fit_model(cfg, &tr)?;
    let split = SplitFile { seed: cfg.seed, ratio: cfg.task.split_ratio, train: tr.ids.clone(), test: te.ids.clone() };
    write_file(&model_path(cfg), model.to_json().as_bytes())?;
    write_file(&split_path(cfg), json(&split).as_bytes())?;
    log::info!(
        "stage=train model={} train={} test={} trees={}",
        cfg.task.model.as_str(),
        tr.len(),
        te.len(),
        model.trees.len()
    );
    Ok(vec![model_path(cfg), split_path(cfg)])
}

fn rows_for(ds: &Dataset, ids: &[String], stage: Stage) -> Result<Dataset, CliError> {
    let index: BTreeMap<&str, usize> = ds.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let rows = ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::failed(stage, format!("split id {id} not in dataset")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ds.subset(&rows))
}

fn evaluate(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let stage = Stage::Evaluate;
    let ds = load_dataset(cfg, stage)?;
    let model = Ensemble::from_json(&read_file(&model_path(cfg))?).map_err(|e| CliError::failed(stage, e))?;
    let split: SplitFile = parse(stage, &split_path(cfg))?;
    let meta: DatasetMeta = parse(stage, &meta_path(cfg))?;
    let test = rows_for(&ds, &split.test, stage)?;
    let pred = predict(&model, &test.x).map_err(|e| CliError::failed(stage, e))?;
    let dir = cfg.reports_dir();
    let stem = cfg.run_stem();
    let outputs = match test.task {
        Task::Regression => {
            let tags: Vec<String> =
                test.ids.iter().map(|id| meta.families.get(id).cloned().unwrap_or_default()).collect();
            let report =
                regression_metrics(&test.y, &pred.values, &test.ids, &tags).map_err(|e| CliError::failed(stage, e))?;
            log::info!("stage=evaluate n={} mae={} r2={:?}", report.n, report.mae, report.r2);
            report.emit(&dir, &stem)
        }
        Task::Classification => {
            let report = classification_metrics(&test.y, &pred.values, 1).map_err(|e| CliError::failed(stage, e))?;
            log::info!("stage=evaluate n={} accuracy={}", report.n, report.accuracy);
            report.emit(&dir, &stem)
        }
    };
    outputs.map_err(|e| CliError::failed(stage, e))
}

/// Runs one stage, or skips it when the manifest shows it fresh.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage, manifest: &mut Manifest) -> Result<StageReport, CliError> {
    let (inputs, key) = plan(stage, cfg)?;
    if manifest.is_fresh(stage.as_str(), &key) {
        log::info!("stage={stage} status=skipped");
        let outputs = manifest.stages[stage.as_str()].outputs.keys().cloned().collect();
        return Ok(StageReport { stage: stage.as_str(), status: StageStatus::Skipped, outputs });
    }
    let outputs = match stage {
        Stage::Ingest => ingest(cfg, &inputs)?,
        Stage::MineText => mine_text(cfg, &inputs)?,
        Stage::MineGraph => mine_graph(cfg)?,
        Stage::Merge => merge(cfg)?,
        Stage::Encode => encode(cfg)?,
        Stage::Train => train(cfg)?,
        Stage::Evaluate => evaluate(cfg)?,
    };
    manifest.record(stage.as_str(), key, &outputs);
    manifest.save(&cfg.paths.work)?;
    log::info!("stage={stage} status=ran outputs={}", outputs.len());
    Ok(StageReport { stage: stage.as_str(), status: StageStatus::Ran, outputs })
}

/// Validates the config and runs `stages` in pipeline order.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage]) -> Result<Vec<StageReport>, CliError> {
    cfg.validate()?;
    let mut order = stages.to_vec();
    order.sort();
    order.dedup();
    let mut manifest = Manifest::load(&cfg.paths.work);
    order.into_iter().map(|s| run_stage(cfg, s, &mut manifest)).collect()
}

/// Renders every `<name>.fixture.json` in `specs` into `out`.
pub fn gen_fixtures_from_specs(specs: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let files = list(specs, ".fixture.json");
    if files.is_empty() {
        return Err(CliError::Io(format!("no *.fixture.json in {}", specs.display())));
    }
    let mut written = Vec::new();
    for path in files {
        let spec: FixtureSpec =
            serde_json::from_str(&read_file(&path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let name = stem_of(&path, ".fixture.json");
        render_into(&spec, out, &name)?;
        written.push(out.join(format!("{name}.png")));
    }
    Ok(written)
}

/// Renders a named generated suite (`standard`, `ce`, `ambiguous`, `all`).
pub fn gen_fixtures_suite(name: &str, seed: u64, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let specs = named_suite(name, seed).ok_or_else(|| CliError::ConfigInvalid(format!("unknown suite {name:?}")))?;
    let mut written = Vec::new();
    for spec in &specs {
        render_into(spec, out, &spec.name)?;
        write_file(&out.join(format!("{}.fixture.json", spec.name)), json(spec).as_bytes())?;
        written.push(out.join(format!("{}.png", spec.name)));
    }
    Ok(written)
}

fn render_into(spec: &FixtureSpec, out: &Path, name: &str) -> Result<(), CliError> {
    let rendered = render_fixture(spec).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    rendered.write(out, name).map_err(|e| CliError::Io(e.to_string()))
}

/// Predictions for every row of a dataset CSV: `id,pred` plus `prob` for
/// classifiers.
pub fn predict_csv(model_path: &Path, dataset: &Path) -> Result<String, CliError> {
    let stage = Stage::Evaluate;
    let model = Ensemble::from_json(&read_file(model_path)?).map_err(|e| CliError::failed(stage, e))?;
    let (ds, _) = dataset_from_csv(&read_file(dataset)?, model.task).map_err(|e| CliError::failed(stage, e))?;
    let pred = predict(&model, &ds.x).map_err(|e| CliError::failed(stage, e))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let row = |w: &mut csv::Writer<Vec<u8>>, fields: Vec<String>| {
        w.write_record(fields).map_err(|e| CliError::failed(stage, e))
    };
    match &pred.probabilities {
        Some(p) => {
            row(&mut w, vec!["id".into(), "pred".into(), "prob".into()])?;
            for (i, id) in ds.ids.iter().enumerate() {
                row(&mut w, vec![id.clone(), pred.values[i].to_string(), p[i].to_string()])?;
            }
        }
        None => {
            row(&mut w, vec!["id".into(), "pred".into()])?;
            for (id, v) in ds.ids.iter().zip(&pred.values) {
                row(&mut w, vec![id.clone(), v.to_string()])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::failed(stage, e))?;
    String::from_utf8(bytes).map_err(|e| CliError::failed(stage, e))
}
