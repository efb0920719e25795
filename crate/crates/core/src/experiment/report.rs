use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, Method};
use crate::experiment::pipeline::{make_split, mean_std, RunResult};
use crate::gnn::{evaluate, train, LabelledNodes};
use crate::baselines::BaselineKind;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub dataset: String,
    pub arch: String,
    pub seed: u64,
    pub minority_class: usize,
    pub labelled_count: usize,
    pub supplement_count: usize,
}

/// Per-seed, per-minority-class supplement sizes of every result that
/// recorded them (results of plain baselines contribute nothing).
pub fn report_scales(results: &[RunResult]) -> Vec<ScaleRow> {
    let mut rows = Vec::new();
    for r in results {
        for s in &r.per_seed {
            let Some(supp) = &s.supplement_per_class else { continue };
            for &c in &s.minority_classes {
                rows.push(ScaleRow {
                    dataset: r.dataset.clone(),
                    arch: r.arch.clone(),
                    seed: s.seed,
                    minority_class: c,
                    labelled_count: s.labelled_per_class[c],
                    supplement_count: supp[c],
                });
            }
        }
    }
    rows
}

pub fn write_scales_csv(rows: &[ScaleRow], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "dataset,arch,seed,minority_class,labelled_count,supplement_count")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.dataset, r.arch, r.seed, r.minority_class, r.labelled_count, r.supplement_count
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDiagnosis {
    pub class: usize,
    pub minority: bool,
    pub precision: f64,
    pub recall: f64,
    /// No correct prediction of this class (this includes a class that is
    /// never predicted).
    pub zero_precision: bool,
    /// Minority class less precise than at least one majority class.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDiagnosis {
    pub seed: u64,
    pub classes: Vec<ClassDiagnosis>,
}

/// Per-class precision and recall on the test set; `flagged` marks the
/// minority classes whose precision falls below the best majority class.
pub fn diagnose_classes(precision: &[f64], recall: &[f64], minority: &[usize]) -> Vec<ClassDiagnosis> {
    let best_majority = (0..precision.len())
        .filter(|c| !minority.contains(c))
        .map(|c| precision[c])
        .fold(f64::NEG_INFINITY, f64::max);
    (0..precision.len())
        .map(|c| {
            let is_min = minority.contains(&c);
            ClassDiagnosis {
                class: c,
                minority: is_min,
                precision: precision[c],
                recall: recall[c],
                zero_precision: precision[c] == 0.0,
                flagged: is_min && precision[c] < best_majority,
            }
        })
        .collect()
}

/// Trains the plain classifier for every seed and diagnoses its per-class
/// precision and recall on the balanced test set.
pub fn diagnose_precision_recall(cfg: &ExperimentConfig) -> Result<Vec<SeedDiagnosis>> {
    if cfg.method != Method::Baseline(BaselineKind::Vanilla) {
        return Err(Error::Config(format!(
            "precision/recall diagnosis needs method = vanilla, got {}",
            cfg.method
        )));
    }
    cfg.validate()?;
    let graph = cfg.load_graph()?;
    cfg.seeds
        .iter()
        .map(|&seed| {
            let split = make_split(cfg, &graph, seed)?;
            let base = LabelledNodes::new(split.train.clone(), split.train_labels.clone());
            let val = LabelledNodes::from_graph(&graph, &split.val);
            let test = LabelledNodes::from_graph(&graph, &split.test);
            let g = train(&graph, cfg.arch, &base, &val, &cfg.train, None, derive_seed(seed, "classifier-g"))?;
            let report = evaluate(&g.model, &graph, &test)?;
            let minority: Vec<usize> = split.minority_classes.iter().copied().collect();
            Ok(SeedDiagnosis {
                seed,
                classes: diagnose_classes(&report.precision, &report.recall, &minority),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub arch: String,
    pub dataset: String,
    pub imbalance_ratio: f64,
    pub seeds: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
}

/// One row per result, recomputing mean and sample std from the stored
/// per-seed reports.
pub fn emit_table(results: &[RunResult]) -> Result<Vec<TableRow>> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to tabulate".into()));
    }
    Ok(results
        .iter()
        .map(|r| {
            let col = |f: fn(&crate::gnn::EvalReport) -> f64| {
                mean_std(&r.per_seed.iter().map(|s| f(&s.test)).collect::<Vec<_>>())
            };
            let (acc_mean, acc_std) = col(|t| t.acc);
            let (f1_mean, f1_std) = col(|t| t.macro_f1);
            let (auc_mean, auc_std) = col(|t| t.auc_roc);
            TableRow {
                method: r.method.clone(),
                arch: r.arch.clone(),
                dataset: r.dataset.clone(),
                imbalance_ratio: r.imbalance_ratio,
                seeds: r.per_seed.len(),
                acc_mean,
                acc_std,
                f1_mean,
                f1_std,
                auc_mean,
                auc_std,
            }
        })
        .collect())
}

const TABLE_HEADER: &str = "method,arch,dataset,imbalance_ratio,seeds,acc_mean,acc_std,f1_mean,f1_std,auc_mean,auc_std";

/// CSV with full float precision (round-trips through [`parse_table_csv`]).
pub fn table_csv(rows: &[TableRow]) -> String {
    let mut s = String::from(TABLE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.arch,
            r.dataset,
            r.imbalance_ratio,
            r.seeds,
            r.acc_mean,
            r.acc_std,
            r.f1_mean,
            r.f1_std,
            r.auc_mean,
            r.auc_std
        );
    }
    s
}

pub fn parse_table_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(TABLE_HEADER) {
        return Err(Error::parse("table.csv", 1, "unexpected header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| Error::parse("table.csv", i + 2, format!("bad {what}"));
            if f.len() != 11 {
                return Err(bad("column count"));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad("number"));
            Ok(TableRow {
                method: f[0].to_string(),
                arch: f[1].to_string(),
                dataset: f[2].to_string(),
                imbalance_ratio: num(3)?,
                seeds: f[4].parse().map_err(|_| bad("seed count"))?,
                acc_mean: num(5)?,
                acc_std: num(6)?,
                f1_mean: num(7)?,
                f1_std: num(8)?,
                auc_mean: num(9)?,
                auc_std: num(10)?,
            })
        })
        .collect()
}

/// Aligned text table with metrics in percent, `mean±std`.
pub fn table_text(rows: &[TableRow]) -> String {
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            let pct = |m: f64, s: f64| format!("{:.2}±{:.2}", 100.0 * m, 100.0 * s);
            [
                r.method.clone(),
                r.arch.clone(),
                pct(r.acc_mean, r.acc_std),
                pct(r.f1_mean, r.f1_std),
                pct(r.auc_mean, r.auc_std),
            ]
        })
        .collect();
    let header = ["Method", "Arch", "ACC", "F1", "AUC"];
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: &[String]| {
        row.iter()
            .zip(&width)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&header.map(String::from));
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_minority_below_best_majority() {
        let d = diagnose_classes(&[0.9, 0.5, 0.0], &[0.8, 0.6, 0.0], &[1, 2]);
        assert!(!d[0].flagged);
        assert!(d[1].flagged);
        assert!(d[2].flagged && d[2].zero_precision);
    }

    #[test]
    fn text_table_alignment() {
        let row = TableRow {
            method: "vanilla".into(),
            arch: "gcn".into(),
            dataset: "cora".into(),
            imbalance_ratio: 0.3,
            seeds: 1,
            acc_mean: 0.7225,
            acc_std: 0.0,
            f1_mean: 0.7172,
            f1_std: 0.0,
            auc_mean: 0.9,
            auc_std: 0.0,
        };
        let text = table_text(&[row.clone()]);
        assert!(text.contains("72.25±0.00"), "{text}");
        assert_eq!(parse_table_csv(&table_csv(&[row.clone()])).unwrap(), vec![row]);
    }
}
