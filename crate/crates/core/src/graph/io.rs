//! Dataset readers and the canonical on-disk format.
//!
//! Canonical layout (one directory per dataset):
//!
//! ```text
//! edges.tsv     "u<TAB>v" per undirected edge
//! features.csv  one comma-separated row per node
//! labels.csv    one class id per line
//! meta.json     {"num_nodes", "d", "m", "class_names", "features_normalized"}
//! ```
//!
//! The raw citation format is the LINQS release (`<name>.content` with
//! `id w_1 .. w_d label` rows and `<name>.cites` with `cited citing` pairs).

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Canonical,
    PlanetoidRaw,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Self::Canonical),
            "planetoid-raw" | "raw" => Ok(Self::PlanetoidRaw),
            other => Err(Error::InvalidArgument(format!("unknown dataset format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Skip citation pairs whose endpoints are not in the content file
    /// (the raw CiteSeer release has a few) instead of failing.
    pub drop_dangling_edges: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    d: usize,
    m: usize,
    class_names: Vec<String>,
    #[serde(default)]
    features_normalized: bool,
}

/// Class order used by the common Planetoid release of Cora, so that class
/// ids line up with published label histograms.
const CORA_CLASS_ORDER: [&str; 7] = [
    "Neural_Networks",
    "Rule_Learning",
    "Reinforcement_Learning",
    "Probabilistic_Methods",
    "Theory",
    "Genetic_Algorithms",
    "Case_Based",
];

/// Loads a dataset and L1-normalises its feature rows.
pub fn load_dataset(path: &Path, format: DatasetFormat, options: LoadOptions) -> Result<Graph> {
    let graph = match format {
        DatasetFormat::Canonical => load_canonical(path)?,
        DatasetFormat::PlanetoidRaw => load_linqs(path, options)?,
    };
    Ok(graph.row_normalized())
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn load_canonical(dir: &Path) -> Result<Graph> {
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_reader(open(&meta_path)?)
        .map_err(|e| Error::parse(&meta_path, e.line(), e.to_string()))?;

    let labels_path = dir.join("labels.csv");
    let mut labels = Vec::with_capacity(meta.num_nodes);
    for (i, line) in open(&labels_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&labels_path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let y: usize = line
            .parse()
            .map_err(|_| Error::parse(&labels_path, i + 1, format!("bad class id `{line}`")))?;
        if y >= meta.m {
            return Err(Error::parse(
                &labels_path,
                i + 1,
                format!("label {y} out of range for {} classes", meta.m),
            ));
        }
        labels.push(y);
    }
    if labels.len() != meta.num_nodes {
        return Err(Error::parse(
            &labels_path,
            labels.len(),
            format!("{} labels, meta.json says {} nodes", labels.len(), meta.num_nodes),
        ));
    }

    let features_path = dir.join("features.csv");
    let mut data = Vec::with_capacity(meta.num_nodes * meta.d);
    let mut rows = 0;
    for (i, line) in open(&features_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&features_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(&features_path, i + 1, format!("bad feature value `{field}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(&features_path, i + 1, "non-finite feature"));
            }
            data.push(v);
        }
        if data.len() - before != meta.d {
            return Err(Error::parse(
                &features_path,
                i + 1,
                format!("{} features, expected {}", data.len() - before, meta.d),
            ));
        }
        rows += 1;
    }
    if rows != meta.num_nodes {
        return Err(Error::parse(
            &features_path,
            rows,
            format!("{rows} feature rows, meta.json says {} nodes", meta.num_nodes),
        ));
    }
    let features = DenseMatrix::from_vec(rows, meta.d, data)?;

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (i, line) in open(&edges_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&edges_path, e))?;
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::parse(&edges_path, i + 1, "expected two columns"));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(&edges_path, i + 1, format!("bad node id `{s}`")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u >= meta.num_nodes || v >= meta.num_nodes {
            return Err(Error::parse(
                &edges_path,
                i + 1,
                format!("dangling edge endpoint in ({u}, {v})"),
            ));
        }
        edges.push((u, v));
    }

    Graph::new(features, labels, meta.m, edges)?
        .with_class_names(meta.class_names)
        .map(|g| g.mark_normalized(meta.features_normalized))
}

fn find_with_extension(dir: &Path, ext: &str) -> Result<PathBuf> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    found.sort();
    match found.len() {
        1 => Ok(found.remove(0)),
        0 => Err(Error::io(
            dir.join(format!("*.{ext}")),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        )),
        _ => Err(Error::InvalidArgument(format!(
            "{} contains more than one .{ext} file",
            dir.display()
        ))),
    }
}

fn load_linqs(dir: &Path, options: LoadOptions) -> Result<Graph> {
    let content_path = find_with_extension(dir, "content")?;
    let cites_path = find_with_extension(dir, "cites")?;

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut dim = None;
    for (i, line) in open(&content_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&content_path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 2 {
            return Err(Error::parse(&content_path, i + 1, "expected id, features, label"));
        }
        let d = fields.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::parse(
                    &content_path,
                    i + 1,
                    format!("{d} features, expected {expected}"),
                ))
            }
            _ => {}
        }
        let row = fields[1..fields.len() - 1]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(&content_path, i + 1, format!("bad feature `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if ids.insert(fields[0].to_string(), rows.len()).is_some() {
            return Err(Error::parse(
                &content_path,
                i + 1,
                format!("duplicate node id `{}`", fields[0]),
            ));
        }
        rows.push(row);
        raw_labels.push(fields[fields.len() - 1].to_string());
    }

    let mut names: Vec<String> = raw_labels.clone();
    names.sort();
    names.dedup();
    let mut cora_sorted = CORA_CLASS_ORDER.map(String::from).to_vec();
    cora_sorted.sort();
    if names == cora_sorted {
        names = CORA_CLASS_ORDER.map(String::from).to_vec();
    }
    let class_of: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(c, n)| (n.as_str(), c))
        .collect();
    let labels = raw_labels.iter().map(|l| class_of[l.as_str()]).collect();

    let mut edges = Vec::new();
    for (i, line) in open(&cites_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&cites_path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::parse(&cites_path, i + 1, "expected two columns"));
        }
        match (ids.get(fields[0]), ids.get(fields[1])) {
            (Some(&u), Some(&v)) => edges.push((u, v)),
            _ if options.drop_dangling_edges => {}
            _ => {
                return Err(Error::parse(
                    &cites_path,
                    i + 1,
                    format!("dangling edge endpoint in ({}, {})", fields[0], fields[1]),
                ))
            }
        }
    }

    let features = DenseMatrix::from_rows(&rows)?;
    let m = names.len();
    Graph::new(features, labels, m, edges)?.with_class_names(names)
}

/// Writes `graph` in the canonical layout, creating `dir` if needed.
pub fn save_canonical(graph: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| -> Result<(PathBuf, BufWriter<fs::File>)> {
        let p = dir.join(name);
        let f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        Ok((p, BufWriter::new(f)))
    };

    let (p, mut w) = create("edges.tsv")?;
    for (u, v) in graph.edges() {
        writeln!(w, "{u}\t{v}").map_err(|e| Error::io(&p, e))?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;

    let (p, mut w) = create("features.csv")?;
    let mut line = String::new();
    for i in 0..graph.num_nodes() {
        line.clear();
        for (j, v) in graph.features().row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            // `{}` prints the shortest representation that parses back exactly.
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(|e| Error::io(&p, e))?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;

    let (p, mut w) = create("labels.csv")?;
    for y in graph.labels() {
        writeln!(w, "{y}").map_err(|e| Error::io(&p, e))?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;

    let meta = Meta {
        num_nodes: graph.num_nodes(),
        d: graph.feature_dim(),
        m: graph.num_classes(),
        class_names: graph.class_names().to_vec(),
        features_normalized: graph.features_normalized(),
    };
    let (p, w) = create("meta.json")?;
    serde_json::to_writer_pretty(w, &meta).map_err(|e| Error::io(&p, e.into()))?;
    Ok(())
}
