//! Input readers and output writers.
//!
//! Inputs:
//! - edge list: one `u v` pair per line, whitespace separated, `#` comments.
//! - features: CSV (row `i` = node `i`) or the binary layout
//!   `b"NOPEFEAT"`, `n: u64 LE`, `d: u64 LE`, then `n·d` `f64 LE` row-major.
//!
//! Outputs of a run (see [`write_outputs`]): `partition.tsv`,
//! `coarse_edges.txt`, `coarse_features.csv`, `trace.jsonl`, `metrics.json`,
//! `manifest.json`. Floats are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coarsen::{EngineConfig, EngineRun, RunStatus};
use crate::error::{Error, Result};
use crate::graph::{
    CoarsenedGraph, EdgeNormalization, FeatureMatrix, MergeRecord, MergeTrace, NodeId, Partition,
    StaticGraph,
};
use crate::metrics::{dirichlet_energy, TrajectoryReport};

pub const FEATURE_MAGIC: &[u8; 8] = b"NOPEFEAT";

pub const PARTITION_FILE: &str = "partition.tsv";
pub const COARSE_EDGES_FILE: &str = "coarse_edges.txt";
pub const COARSE_FEATURES_FILE: &str = "coarse_features.csv";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Serde helpers that emit floats as `{:.16e}` (17 significant digits).
pub mod json_floats {
    use serde::ser::{SerializeSeq, Serializer};
    use serde::Serialize;
    use serde_json::value::RawValue;

    /// 17 significant digits in scientific notation; non-finite values
    /// become `null` since JSON cannot carry them.
    pub fn format(x: f64) -> String {
        if x.is_finite() {
            format!("{x:.16e}")
        } else {
            "null".to_string()
        }
    }

    fn raw(x: f64) -> Box<RawValue> {
        RawValue::from_string(format(x)).expect("formatted float is valid JSON")
    }

    pub fn f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        raw(*x).serialize(s)
    }

    pub fn opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => raw(*v).serialize(s),
            None => s.serialize_none(),
        }
    }

    pub fn vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for &x in xs {
            seq.serialize_element(&raw(x))?;
        }
        seq.end()
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone)]
pub struct EdgeListInput {
    pub graph: StaticGraph,
    pub normalization: EdgeNormalization,
}

/// Reads an edge list. `n` is `max id + 1` unless `num_nodes` asks for more.
pub fn read_edge_list(path: impl AsRef<Path>, num_nodes: Option<usize>) -> Result<EdgeListInput> {
    let path = path.as_ref();
    parse_edge_list(BufReader::new(open(path)?), path, num_nodes)
}

pub fn parse_edge_list(
    reader: impl BufRead,
    path: &Path,
    num_nodes: Option<usize>,
) -> Result<EdgeListInput> {
    let mut edges = Vec::new();
    let mut max_id: Option<NodeId> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut fields = body.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 'u v', got '{body}'"),
            ));
        };
        let parse_id = |tok: &str| -> Result<NodeId> {
            if tok.starts_with('-') {
                return Err(parse_err(path, lineno, format!("negative node id '{tok}'")));
            }
            tok.parse::<NodeId>()
                .ok()
                .filter(|&v| v < NodeId::MAX / 2)
                .ok_or_else(|| parse_err(path, lineno, format!("invalid node id '{tok}'")))
        };
        let (a, b) = (parse_id(a)?, parse_id(b)?);
        max_id = Some(max_id.unwrap_or(0).max(a).max(b));
        edges.push((a, b));
    }
    let implied = max_id.map_or(0, |m| m as usize + 1);
    let n = match num_nodes {
        Some(k) if k < implied => {
            return Err(Error::Invalid(format!(
                "{}: --num-nodes {k} is smaller than max id + 1 = {implied}",
                path.display()
            )))
        }
        Some(k) => k,
        None => implied,
    };
    let (graph, normalization) = StaticGraph::from_edges(n, edges)?;
    if normalization.self_loops > 0 {
        log::warn!(
            "{}: dropped {} self-loop(s)",
            path.display(),
            normalization.self_loops
        );
    }
    Ok(EdgeListInput {
        graph,
        normalization,
    })
}

pub fn write_edge_list(path: impl AsRef<Path>, graph: &StaticGraph) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let res = (|| {
        writeln!(
            out,
            "# nodes: {} edges: {}",
            graph.num_nodes(),
            graph.num_edges()
        )?;
        for (a, b) in graph.edges() {
            writeln!(out, "{a} {b}")?;
        }
        out.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Reads a CSV or binary feature matrix and checks it has `expected_n` rows.
pub fn read_features(path: impl AsRef<Path>, expected_n: usize) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let matrix = if bytes.starts_with(FEATURE_MAGIC) {
        decode_binary_features(&bytes, path)?
    } else {
        parse_csv_features(&bytes, path)?
    };
    if matrix.num_rows() != expected_n {
        return Err(Error::Invalid(format!(
            "{}: {} feature rows for {expected_n} nodes",
            path.display(),
            matrix.num_rows()
        )));
    }
    Ok(matrix)
}

fn parse_csv_features(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Invalid(format!("{}: not UTF-8 text", path.display())))?;
    let mut data = Vec::new();
    let mut d = None;
    let mut n = 0;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("invalid number '{}'", tok.trim())))?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("non-finite value '{}'", tok.trim()),
                ));
            }
            data.push(v);
        }
        let width = data.len() - before;
        match d {
            None => d = Some(width),
            Some(w) if w != width => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("row has {width} columns, expected {w}"),
                ))
            }
            _ => {}
        }
        n += 1;
    }
    let d = d.ok_or_else(|| Error::Invalid(format!("{}: no feature rows", path.display())))?;
    FeatureMatrix::from_flat(n, d, data)
}

fn decode_binary_features(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let bad = |msg: &str| Error::Invalid(format!("{}: {msg}", path.display()));
    let header = FEATURE_MAGIC.len() + 16;
    if bytes.len() < header {
        return Err(bad("truncated binary header"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let n = word(8) as usize;
    let d = word(16) as usize;
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() - header != expected {
        return Err(bad(&format!(
            "payload is {} bytes, header promises {n} x {d} floats",
            bytes.len() - header
        )));
    }
    let data = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::from_flat(n, d, data)
}

pub fn write_features_binary(path: impl AsRef<Path>, features: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let res = (|| {
        out.write_all(FEATURE_MAGIC)?;
        out.write_all(&(features.num_rows() as u64).to_le_bytes())?;
        out.write_all(&(features.dim() as u64).to_le_bytes())?;
        for v in features.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn write_features_csv(path: impl AsRef<Path>, features: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let res = (|| {
        for row in features.rows() {
            let line: Vec<String> = row.iter().map(|&v| json_floats::format(v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// `node_id \t supernode_id`, one line per original node in id order.
pub fn write_partition(path: impl AsRef<Path>, partition: &Partition) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let res = (|| {
        for (node, k) in partition.assignment().iter().enumerate() {
            writeln!(out, "{node}\t{k}")?;
        }
        out.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_partition(path: impl AsRef<Path>) -> Result<Partition> {
    let path = path.as_ref();
    let reader = BufReader::new(open(path)?);
    let mut assignment = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (node, k) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, lineno, "expected 'node<TAB>supernode'"))?;
        let node: usize = node
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, "invalid node id"))?;
        let k: u32 = k
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, "invalid supernode id"))?;
        if node != assignment.len() {
            return Err(parse_err(
                path,
                lineno,
                format!("expected node {}", assignment.len()),
            ));
        }
        assignment.push(k);
    }
    Ok(Partition::from_assignment(assignment))
}

pub fn write_trace(path: impl AsRef<Path>, trace: &MergeTrace) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    for rec in &trace.records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<MergeTrace> {
    let path = path.as_ref();
    let reader = BufReader::new(open(path)?);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MergeRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(path, idx + 1, e.to_string()))?;
        records.push(rec);
    }
    Ok(MergeTrace { records })
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut hasher = Sha256::new();
    let mut file = open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let k = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Reproducibility envelope written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub algorithm: String,
    #[serde(serialize_with = "json_floats::f64")]
    pub target_ratio: f64,
    #[serde(serialize_with = "json_floats::f64")]
    pub achieved_ratio: f64,
    pub seed: u64,
    pub input_digests: BTreeMap<String, String>,
    #[serde(serialize_with = "json_floats::f64")]
    pub wall_time_ms: f64,
    pub peak_tracked_bytes: usize,
    pub status: RunStatus,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub supernodes: usize,
    pub merges: usize,
    pub rng: String,
}

impl RunManifest {
    pub fn from_run(
        config: &EngineConfig,
        original: &StaticGraph,
        run: &EngineRun,
        input_digests: BTreeMap<String, String>,
    ) -> Self {
        RunManifest {
            algorithm: config.algorithm.name().to_string(),
            target_ratio: config.ratio,
            achieved_ratio: run.coarse.ratio_achieved,
            seed: config.seed,
            input_digests,
            wall_time_ms: run.stats.elapsed.as_secs_f64() * 1e3,
            peak_tracked_bytes: run.stats.peak_tracked_bytes,
            status: run.status,
            num_nodes: original.num_nodes(),
            num_edges: original.num_edges(),
            supernodes: run.coarse.graph.num_nodes(),
            merges: run.stats.merges,
            rng: crate::synth::RNG_NAME.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct MetricsFile<'a> {
    supernodes: usize,
    coarse_edges: usize,
    #[serde(serialize_with = "json_floats::f64")]
    ratio_achieved: f64,
    #[serde(serialize_with = "json_floats::opt")]
    dirichlet_energy: Option<f64>,
    trajectory: Option<&'a TrajectoryReport>,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes the six output files of a run into `dir`, creating it if needed.
pub fn write_outputs(
    dir: impl AsRef<Path>,
    coarse: &CoarsenedGraph,
    trace: &MergeTrace,
    report: Option<&TrajectoryReport>,
    manifest: &RunManifest,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths: Vec<PathBuf> = [
        PARTITION_FILE,
        COARSE_EDGES_FILE,
        COARSE_FEATURES_FILE,
        TRACE_FILE,
        METRICS_FILE,
        MANIFEST_FILE,
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    write_partition(&paths[0], &coarse.partition)?;
    write_edge_list(&paths[1], &coarse.graph)?;
    write_features_csv(&paths[2], &coarse.features)?;
    write_trace(&paths[3], trace)?;
    write_json(
        &paths[4],
        &MetricsFile {
            supernodes: coarse.graph.num_nodes(),
            coarse_edges: coarse.graph.num_edges(),
            ratio_achieved: coarse.ratio_achieved,
            dirichlet_energy: dirichlet_energy(&coarse.graph, &coarse.features).ok(),
            trajectory: report,
        },
    )?;
    write_json(&paths[5], manifest)?;
    Ok(paths)
}
