use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use graphsr::experiment::{
    diagnose_precision_recall, emit_table, mean_std, parse_table_csv, report_scales, run_experiment, table_csv,
    ExperimentConfig, Method, RunResult,
};
use graphsr::graph::SyntheticSpec;
use graphsr::BaselineKind;

fn small_config(method: Method, out: Option<&Path>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        synthetic: Some(SyntheticSpec::new(150, 3, 0.2, 0.01, 8, 3)),
        method,
        num_minority: 1,
        majority_count: 10,
        val_per_class: 6,
        test_per_class: 10,
        k: 6,
        seeds: vec![0, 1, 2],
        output_dir: out.map(Path::to_path_buf),
        ..ExperimentConfig::default()
    };
    cfg.train.max_epochs = 80;
    cfg.train.patience = 20;
    cfg.train.hidden_dim = 16;
    cfg.rl.epochs = 3;
    cfg.rl.finetune_epochs = 3;
    cfg
}

#[derive(serde::Deserialize)]
struct LogLine {
    mode: String,
    class: usize,
    action: String,
}

#[test]
fn graphsr_bookkeeping_agrees_with_trajectory_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(Method::GraphSr, Some(dir.path()));
    let (result, timing) = run_experiment(&cfg).unwrap();
    assert_eq!(result.per_seed.len(), 3);
    assert_eq!(timing.per_seed_seconds.len(), 3);
    let run_dir = dir.path().join(cfg.run_id());
    for name in ["config.toml", "result.json", "timing.json"] {
        assert!(run_dir.join(name).is_file(), "{name}");
    }
    let stored: RunResult = serde_json::from_str(&fs::read_to_string(run_dir.join("result.json")).unwrap()).unwrap();
    assert_eq!(stored, result);

    for s in &result.per_seed {
        let seed_dir = run_dir.join(s.seed.to_string());
        for name in ["split.json", "candidates.csv", "trajectory.jsonl", "supplement.json", "eval.json"] {
            assert!(seed_dir.join(name).is_file(), "seed {} lacks {name}", s.seed);
        }
        let supp = s.supplement_per_class.as_ref().unwrap();
        let cands = s.candidates_per_class.as_ref().unwrap();

        let mut greedy: BTreeMap<usize, usize> = BTreeMap::new();
        let mut explore_steps = 0;
        for line in fs::read_to_string(seed_dir.join("trajectory.jsonl")).unwrap().lines() {
            let l: LogLine = serde_json::from_str(line).unwrap();
            match l.mode.as_str() {
                "greedy" => {
                    if l.action == "accept" {
                        *greedy.entry(l.class).or_default() += 1;
                    }
                }
                "explore" => explore_steps += 1,
                other => panic!("unknown mode {other}"),
            }
        }
        let total_candidates: usize = cands.iter().sum();
        assert_eq!(explore_steps, cfg.rl.epochs * total_candidates);
        for c in 0..supp.len() {
            assert_eq!(supp[c], greedy.get(&c).copied().unwrap_or(0), "seed {} class {c}", s.seed);
            assert!(supp[c] <= cands[c] && cands[c] <= cfg.k);
        }
        let labelled: usize = s.labelled_per_class.iter().sum();
        assert_eq!(s.final_train_size, labelled + supp.iter().sum::<usize>());
    }

    let scales = report_scales(std::slice::from_ref(&result));
    assert_eq!(scales.len(), 3);
    assert!(scales.iter().all(|r| r.labelled_count == 3));
}

#[test]
fn table_is_recomputable_and_round_trips() {
    let vanilla = run_experiment(&small_config(Method::Baseline(BaselineKind::Vanilla), None)).unwrap().0;
    let reweight = run_experiment(&small_config(Method::Baseline(BaselineKind::ReWeighting), None)).unwrap().0;
    assert!(report_scales(std::slice::from_ref(&vanilla)).is_empty());

    let rows = emit_table(&[vanilla.clone(), reweight]).unwrap();
    assert_eq!(rows.len(), 2);
    let f1: Vec<f64> = vanilla.per_seed.iter().map(|s| s.test.macro_f1).collect();
    let (mean, std) = mean_std(&f1);
    assert_eq!(rows[0].f1_mean, mean);
    assert_eq!(rows[0].f1_std, std);
    assert_eq!(rows[0].f1_mean, vanilla.mean.macro_f1);
    assert_eq!(parse_table_csv(&table_csv(&rows)).unwrap(), rows);

    let mut one = vanilla;
    one.per_seed.truncate(1);
    assert_eq!(emit_table(&[one]).unwrap()[0].acc_std, 0.0);
    assert!(emit_table(&[]).is_err());
}

#[test]
fn every_baseline_runs() {
    for kind in BaselineKind::ALL {
        let mut cfg = small_config(Method::Baseline(kind), None);
        cfg.seeds = vec![0];
        let (r, _) = run_experiment(&cfg).unwrap();
        let s = &r.per_seed[0];
        assert!((0.0..=1.0).contains(&s.test.acc), "{kind}");
        let labelled: usize = s.labelled_per_class.iter().sum();
        match kind {
            BaselineKind::OverSampling => assert_eq!(s.final_train_size, 10 * 3),
            BaselineKind::CbSampling | BaselineKind::Vanilla | BaselineKind::ReWeighting | BaselineKind::EnWeighting => {
                assert_eq!(s.final_train_size, labelled)
            }
            BaselineKind::RuSelection | BaselineKind::SuSelection => {
                let supp = s.supplement_per_class.as_ref().unwrap();
                assert_eq!(s.final_train_size, labelled + supp.iter().sum::<usize>());
            }
        }
    }
}

#[test]
fn separable_graph_diagnoses_perfectly() {
    let mut cfg = small_config(Method::Baseline(BaselineKind::Vanilla), None);
    cfg.synthetic = Some(SyntheticSpec {
        feature_noise: 0.0,
        ..SyntheticSpec::new(150, 3, 0.3, 0.0, 8, 3)
    });
    cfg.seeds = vec![0];
    let report = diagnose_precision_recall(&cfg).unwrap();
    for c in &report[0].classes {
        assert_eq!((c.precision, c.recall), (1.0, 1.0), "class {}", c.class);
        assert!(!c.flagged);
    }
    cfg.method = Method::GraphSr;
    assert!(diagnose_precision_recall(&cfg).is_err());
}
