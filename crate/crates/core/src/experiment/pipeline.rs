use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{class_weights, resample, unlabeled_selection, BaselineKind};
use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, Method};
use crate::gnn::{evaluate, train, EvalReport, GnnModel, LabelledNodes, TrainOutcome};
use crate::graph::{draw_minority_classes, make_imbalanced_split, Graph, Split, SplitSpec};
use crate::nn::DenseMatrix;
use crate::rl::{select_supplement, PolicyAgent, SelectionEnv, Supplement};
use crate::rng::derive_seed;
use crate::selection::{build_candidates, compute_centers, CandidateSet};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub acc: f64,
    pub macro_f1: f64,
    pub auc_roc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub minority_classes: Vec<usize>,
    pub test: EvalReport,
    /// Labelled training nodes per class.
    pub labelled_per_class: Vec<usize>,
    /// Candidate-list length per class (similarity-based methods).
    pub candidates_per_class: Option<Vec<usize>>,
    /// Added pseudo-labelled nodes per class (selection methods).
    pub supplement_per_class: Option<Vec<usize>>,
    pub final_train_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub kind: String,
    pub message: String,
}

/// Aggregate over seeds. Wall-clock timings are kept out of this record
/// (see [`RunTiming`]) so identical runs serialise identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub dataset: String,
    pub arch: String,
    pub method: String,
    pub imbalance_ratio: f64,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    pub failures: Vec<SeedFailure>,
    pub mean: MetricSummary,
    /// Sample standard deviation (n − 1); zero for a single seed.
    pub std: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub total_seconds: f64,
    pub per_seed_seconds: Vec<(u64, f64)>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RunResult {
    pub fn aggregate(cfg: &ExperimentConfig, per_seed: Vec<SeedResult>, failures: Vec<SeedFailure>) -> Self {
        let pick = |f: fn(&EvalReport) -> f64| mean_std(&per_seed.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
        let (acc_m, acc_s) = pick(|r| r.acc);
        let (f1_m, f1_s) = pick(|r| r.macro_f1);
        let (auc_m, auc_s) = pick(|r| r.auc_roc);
        Self {
            run_id: cfg.run_id(),
            dataset: cfg.dataset_name(),
            arch: cfg.arch.to_string(),
            method: cfg.method.to_string(),
            imbalance_ratio: cfg.imbalance_ratio,
            seeds: cfg.seeds.clone(),
            per_seed,
            failures,
            mean: MetricSummary {
                acc: acc_m,
                macro_f1: f1_m,
                auc_roc: auc_m,
            },
            std: MetricSummary {
                acc: acc_s,
                macro_f1: f1_s,
                auc_roc: auc_s,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Artifacts written for one seed, relative to its directory.
struct SeedDir(Option<PathBuf>);

impl SeedDir {
    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if let Some(dir) = &self.0 {
            let path = dir.join(name);
            fs::write(&path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    fn save_model(&self, stem: &str, model: &GnnModel) -> Result<()> {
        match &self.0 {
            Some(dir) => model.to_checkpoint().save(dir, stem),
            None => Ok(()),
        }
    }
}

fn labelled(nodes: &[usize], graph: &Graph) -> LabelledNodes {
    LabelledNodes::from_graph(graph, nodes)
}

pub fn make_split(cfg: &ExperimentConfig, graph: &Graph, seed: u64) -> Result<Split> {
    let minority: BTreeSet<usize> = match &cfg.minority_classes {
        Some(c) => c.iter().copied().collect(),
        None => draw_minority_classes(graph.num_classes(), cfg.num_minority, derive_seed(seed, "minority"))?,
    };
    let spec = SplitSpec {
        minority_classes: minority,
        majority_count: cfg.majority_count,
        imbalance_ratio: cfg.imbalance_ratio,
        val_per_class: cfg.val_per_class,
        test_per_class: cfg.test_per_class,
        seed: derive_seed(seed, "split"),
    };
    make_imbalanced_split(graph, &spec)
}

fn train_model(
    cfg: &ExperimentConfig,
    graph: &Graph,
    train_set: &LabelledNodes,
    val: &LabelledNodes,
    weights: Option<&[f64]>,
    seed: u64,
) -> Result<TrainOutcome> {
    train(graph, cfg.arch, train_set, val, &cfg.train, weights, seed)
}

/// Initial classifier, its embeddings and the pseudo-labels of `U`.
struct Initial {
    model: GnnModel,
    embeddings: DenseMatrix,
    pseudo: Vec<usize>,
}

fn initial_classifier(
    cfg: &ExperimentConfig,
    graph: &Graph,
    split: &Split,
    val: &LabelledNodes,
    seed: u64,
    dir: &SeedDir,
) -> Result<Initial> {
    let base = LabelledNodes::new(split.train.clone(), split.train_labels.clone());
    let g = train_model(cfg, graph, &base, val, None, derive_seed(seed, "classifier-g"))?;
    dir.save_model("classifier_g", &g.model)?;
    let embeddings = g.model.embed(graph)?;
    let pseudo = g.model.pseudo_label(graph, &split.unlabelled)?;
    Ok(Initial {
        model: g.model,
        embeddings,
        pseudo,
    })
}

fn candidates_for(cfg: &ExperimentConfig, split: &Split, init: &Initial) -> Result<CandidateSet> {
    let centers = compute_centers(&init.embeddings, split)?;
    build_candidates(&init.embeddings, &split.unlabelled, &init.pseudo, &centers, cfg.k)
}

fn graphsr_supplement(
    cfg: &ExperimentConfig,
    graph: &Graph,
    split: &Split,
    val: &LabelledNodes,
    init: &Initial,
    candidates: &CandidateSet,
    seed: u64,
    dir: &SeedDir,
) -> Result<Supplement> {
    let base = LabelledNodes::new(split.train.clone(), split.train_labels.clone());
    let mut env = SelectionEnv::new(
        graph,
        &init.embeddings,
        candidates,
        base.clone(),
        val.clone(),
        init.model.clone(),
        cfg.rl.env(),
        derive_seed(seed, "env"),
    )?;
    let mut agent = PolicyAgent::new(
        env.state_dim(),
        cfg.rl.ppo(),
        1.0 / base.len() as f64,
        derive_seed(seed, "agent"),
    );
    let mut log_file = match &dir.0 {
        Some(d) => {
            let path = d.join("trajectory.jsonl");
            Some(BufWriter::new(fs::File::create(&path).map_err(|e| Error::io(&path, e))?))
        }
        None => None,
    };
    let supplement = select_supplement(
        &mut agent,
        &mut env,
        cfg.rl.epochs,
        graph.num_classes(),
        log_file.as_mut().map(|w| w as &mut dyn Write),
    )?;
    if let Some(mut w) = log_file {
        w.flush().map_err(|e| Error::io("trajectory.jsonl", e))?;
    }
    if let Some(d) = &dir.0 {
        agent.to_checkpoint().save(d, "agent")?;
    }
    Ok(supplement)
}

/// Runs one seed of the configured method end to end.
pub fn run_seed(cfg: &ExperimentConfig, graph: &Graph, seed: u64, out_dir: Option<&Path>) -> Result<SeedResult> {
    let dir = match out_dir {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            SeedDir(Some(d.to_path_buf()))
        }
        None => SeedDir(None),
    };
    let split = make_split(cfg, graph, seed)?;
    dir.write_json("split.json", &split)?;
    let base = LabelledNodes::new(split.train.clone(), split.train_labels.clone());
    let val = labelled(&split.val, graph);
    let test = labelled(&split.test, graph);
    let counts = split.train_class_counts();
    let f_seed = derive_seed(seed, "classifier-f");

    let mut candidates_per_class = None;
    let mut supplement_per_class = None;
    let (model, final_size) = match cfg.method {
        Method::Baseline(BaselineKind::Vanilla) => {
            let g = train_model(cfg, graph, &base, &val, None, derive_seed(seed, "classifier-g"))?;
            (g.model, base.len())
        }
        Method::Baseline(kind) if kind.is_weighting() => {
            let w = class_weights(kind, &counts, cfg.en_beta)?;
            dir.write_json("class_weights.json", &w)?;
            let f = train_model(cfg, graph, &base, &val, Some(&w), f_seed)?;
            (f.model, base.len())
        }
        Method::Baseline(kind) if kind.is_resampling() => {
            let set = resample(kind, &split, derive_seed(seed, "resample"))?;
            let f = train_model(cfg, graph, &set, &val, None, f_seed)?;
            (f.model, set.len())
        }
        Method::Baseline(kind) => {
            let init = initial_classifier(cfg, graph, &split, &val, seed, &dir)?;
            let supp = unlabeled_selection(kind, &split, &init.embeddings, &init.pseudo, derive_seed(seed, "selection"))?;
            dir.write_json("supplement.json", &supp)?;
            supplement_per_class = Some(supp.class_counts(graph.num_classes()));
            let mut set = base.clone();
            set.nodes.extend(&supp.nodes);
            set.labels.extend(&supp.labels);
            let f = train_model(cfg, graph, &set, &val, None, f_seed)?;
            (f.model, set.len())
        }
        Method::GraphSr => {
            let init = initial_classifier(cfg, graph, &split, &val, seed, &dir)?;
            let candidates = candidates_for(cfg, &split, &init)?;
            if let Some(d) = &dir.0 {
                candidates.save_csv(&d.join("candidates.csv"))?;
            }
            candidates_per_class = Some(candidates.class_counts(graph.num_classes()));
            let supp = graphsr_supplement(cfg, graph, &split, &val, &init, &candidates, seed, &dir)?;
            dir.write_json("supplement.json", &supp.nodes)?;
            supplement_per_class = Some(supp.per_class.clone());
            let mut set = base.clone();
            set.nodes.extend(&supp.nodes.nodes);
            set.labels.extend(&supp.nodes.labels);
            let f = train_model(cfg, graph, &set, &val, None, f_seed)?;
            (f.model, set.len())
        }
    };
    dir.save_model("classifier_f", &model)?;
    let report = evaluate(&model, graph, &test)?;
    dir.write_json("eval.json", &report)?;
    Ok(SeedResult {
        seed,
        minority_classes: split.minority_classes.iter().copied().collect(),
        test: report,
        labelled_per_class: counts,
        candidates_per_class,
        supplement_per_class,
        final_train_size: final_size,
    })
}

/// Runs every configured seed (in parallel when enabled) and aggregates.
/// Per-seed artifacts go to `<output_dir>/<run-id>/<seed>/` when an output
/// directory is configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(RunResult, RunTiming)> {
    cfg.validate()?;
    let start = Instant::now();
    let graph = cfg.load_graph()?;
    let run_dir = cfg.output_dir.as_ref().map(|d| d.join(cfg.run_id()));
    if let Some(d) = &run_dir {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        let path = d.join("config.toml");
        fs::write(&path, cfg.to_toml_string()?).map_err(|e| Error::io(&path, e))?;
    }
    let one = |seed: u64| {
        let t0 = Instant::now();
        let dir = run_dir.as_ref().map(|d| d.join(seed.to_string()));
        let r = run_seed(cfg, &graph, seed, dir.as_deref());
        (seed, r, t0.elapsed().as_secs_f64())
    };
    let outcomes: Vec<_> = if cfg.parallel {
        cfg.seeds.par_iter().map(|&s| one(s)).collect()
    } else {
        cfg.seeds.iter().map(|&s| one(s)).collect()
    };
    let mut per_seed = Vec::new();
    let mut failures = Vec::new();
    let mut timing = RunTiming {
        total_seconds: 0.0,
        per_seed_seconds: Vec::new(),
    };
    let mut last_error = None;
    for (seed, r, secs) in outcomes {
        timing.per_seed_seconds.push((seed, secs));
        match r {
            Ok(res) => per_seed.push(res),
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                failures.push(SeedFailure {
                    seed,
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                });
                last_error = Some(e);
            }
        }
    }
    if per_seed.is_empty() {
        return Err(last_error.unwrap_or_else(|| Error::InvalidState("no seeds ran".into())));
    }
    let result = RunResult::aggregate(cfg, per_seed, failures);
    timing.total_seconds = start.elapsed().as_secs_f64();
    if let Some(d) = &run_dir {
        let path = d.join("result.json");
        fs::write(&path, result.to_json()?).map_err(|e| Error::io(&path, e))?;
        let path = d.join("timing.json");
        fs::write(&path, serde_json::to_string_pretty(&timing)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok((result, timing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std_closed_form() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
