//! Snapshot files: `<stem>_nodes.csv` (`id,age,social_index,degree`),
//! `<stem>_edges.csv` (`id_a,id_b,multiplicity,self_loop`) and a JSON
//! sidecar `<stem>.json`. Floats are written in shortest round-trip form, so
//! reading a snapshot back is lossless.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dynnet_core::snapshot::{EdgeRow, NodeRow};
use dynnet_core::{ModelConfig, Snapshot};
use serde::{Deserialize, Serialize};

use crate::error::Failure;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub schema: u32,
    #[serde(flatten)]
    pub model: ModelConfig,
    pub seed: u64,
    pub stream: u64,
    /// Extinct attempts thrown away before this one survived.
    pub discards: u32,
    pub clock: f64,
    pub events: u64,
    pub nodes: usize,
    pub edge_copies: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    id_a: u64,
    id_b: u64,
    multiplicity: u32,
    self_loop: bool,
}

pub fn snapshot_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join(format!("{stem}_nodes.csv")), dir.join(format!("{stem}_edges.csv")), dir.join(format!("{stem}.json")))
}

pub fn write_nodes<W: Write>(w: W, nodes: &[NodeRow]) -> Result<(), Failure> {
    let mut out = csv::Writer::from_writer(w);
    for n in nodes {
        out.serialize(n)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_edges<W: Write>(w: W, edges: &[EdgeRow]) -> Result<(), Failure> {
    let mut out = csv::Writer::from_writer(w);
    for e in edges {
        out.serialize(EdgeRecord { id_a: e.a, id_b: e.b, multiplicity: e.multiplicity, self_loop: e.is_self_loop() })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_snapshot(dir: &Path, stem: &str, snap: &Snapshot, meta: &SnapshotMeta) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    let (n, e, j) = snapshot_paths(dir, stem);
    write_nodes(BufWriter::new(File::create(n)?), &snap.nodes)?;
    write_edges(BufWriter::new(File::create(e)?), &snap.edges)?;
    write_json(&j, meta)
}

pub fn read_snapshot(dir: &Path, stem: &str) -> Result<(Snapshot, SnapshotMeta), Failure> {
    let (n, e, j) = snapshot_paths(dir, stem);
    let meta: SnapshotMeta = serde_json::from_reader(File::open(j)?)?;
    let nodes = csv::Reader::from_path(n)?.deserialize().collect::<Result<Vec<NodeRow>, _>>()?;
    let mut edges = Vec::new();
    for rec in csv::Reader::from_path(e)?.deserialize() {
        let r: EdgeRecord = rec?;
        if r.self_loop != (r.id_a == r.id_b) {
            return Err(Failure::Io(format!("edge {}-{}: inconsistent self_loop flag", r.id_a, r.id_b)));
        }
        edges.push(EdgeRow { a: r.id_a, b: r.id_b, multiplicity: r.multiplicity });
    }
    Ok((Snapshot { time: meta.clock, nodes, edges }, meta))
}
