//! Edge-by-edge growth of the directed preferential attachment graph.
//!
//! Each step adds one edge:
//!
//! * with probability `alpha` a new node `w` and an edge `w -> v`, with `v`
//!   drawn by in-degree;
//! * with probability `beta` an edge `v -> w` between existing nodes, `v`
//!   drawn by out-degree and `w` by in-degree, independently (so self-loops
//!   and multi-edges occur);
//! * with probability `gamma` a new node `w` and an edge `v -> w`, with `v`
//!   drawn by out-degree.
//!
//! A node is drawn by in-degree with probability
//! `(D_in(v) + lambda) / (n + lambda N)`. The sampler never builds that
//! distribution: with probability `n / (n + lambda N)` it returns the target
//! of a uniformly chosen edge, otherwise a uniformly chosen node.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{derived_constants, ModelParams};
use crate::pmf::SparseJointPMF;
use crate::rng::{replicate_rng, Pcg64};
use rand::RngExt;

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Init {
    /// One node carrying a self-loop.
    SelfLoop,
    Edges(Vec<(NodeId, NodeId)>),
}

#[derive(Debug, Clone)]
pub struct GraphState {
    pub in_deg: Vec<u32>,
    pub out_deg: Vec<u32>,
    pub edge_sources: Vec<NodeId>,
    pub edge_targets: Vec<NodeId>,
    pub params: ModelParams,
    rng: Pcg64,
}

pub fn new_graph(params: &ModelParams, init: &Init) -> Result<GraphState> {
    new_graph_on_stream(params, init, 0)
}

/// Like [`new_graph`] but drawing from PCG stream `stream` (the replicate
/// index).
pub fn new_graph_on_stream(params: &ModelParams, init: &Init, stream: u64) -> Result<GraphState> {
    let edges: &[(NodeId, NodeId)] = match init {
        Init::SelfLoop => &[(0, 0)],
        Init::Edges(e) if e.is_empty() => return Err(Error::EmptyInit),
        Init::Edges(e) => e,
    };
    let n_nodes = edges.iter().map(|&(s, t)| s.max(t)).max().unwrap_or(0) as usize + 1;
    let mut in_deg = vec![0; n_nodes];
    let mut out_deg = vec![0; n_nodes];
    for &(s, t) in edges {
        out_deg[s as usize] += 1;
        in_deg[t as usize] += 1;
    }
    Ok(GraphState {
        in_deg,
        out_deg,
        edge_sources: edges.iter().map(|e| e.0).collect(),
        edge_targets: edges.iter().map(|e| e.1).collect(),
        params: *params,
        rng: replicate_rng(params.seed, stream),
    })
}

impl GraphState {
    pub fn n_edges(&self) -> usize {
        self.edge_sources.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.in_deg.len()
    }

    #[inline]
    fn pick(&mut self, ends: Which, offset: f64) -> NodeId {
        let n = self.edge_sources.len() as f64;
        let big_n = self.in_deg.len() as f64;
        if self.rng.random::<f64>() * (n + offset * big_n) < n {
            let e = self.rng.random_range(0..self.edge_sources.len());
            match ends {
                Which::Targets => self.edge_targets[e],
                Which::Sources => self.edge_sources[e],
            }
        } else {
            self.rng.random_range(0..self.in_deg.len()) as NodeId
        }
    }

    /// Node drawn with probability `(D_in(v) + lambda) / (n + lambda N)`.
    pub fn sample_in_node(&mut self) -> NodeId {
        self.pick(Which::Targets, self.params.lambda_in)
    }

    /// Node drawn with probability `(D_out(v) + mu) / (n + mu N)`.
    pub fn sample_out_node(&mut self) -> NodeId {
        self.pick(Which::Sources, self.params.mu_out)
    }

    fn add_node(&mut self) -> NodeId {
        let id = self.in_deg.len() as NodeId;
        self.in_deg.push(0);
        self.out_deg.push(0);
        id
    }

    fn add_edge(&mut self, from: NodeId, to: NodeId) {
        self.out_deg[from as usize] += 1;
        self.in_deg[to as usize] += 1;
        self.edge_sources.push(from);
        self.edge_targets.push(to);
    }

    /// Adds exactly one edge; returns whether a node was born.
    pub fn step(&mut self) -> bool {
        let u: f64 = self.rng.random();
        let p = &self.params;
        if u < p.alpha {
            let v = self.sample_in_node();
            let w = self.add_node();
            self.add_edge(w, v);
            true
        } else if u < p.alpha + p.beta {
            let v = self.sample_out_node();
            let w = self.sample_in_node();
            self.add_edge(v, w);
            false
        } else {
            let v = self.sample_out_node();
            let w = self.add_node();
            self.add_edge(v, w);
            true
        }
    }

    pub fn tally(&self, seed: u64) -> DegreeTally {
        let mut counts: HashMap<(u64, u64), u64> = HashMap::new();
        for (&i, &j) in self.in_deg.iter().zip(&self.out_deg) {
            *counts.entry((i as u64, j as u64)).or_insert(0) += 1;
        }
        DegreeTally {
            counts: counts.into_iter().collect(),
            n_nodes: self.n_nodes() as u64,
            n_edges: self.n_edges() as u64,
            params: self.params,
            seed,
            replicates: 1,
        }
    }
}

#[derive(Clone, Copy)]
enum Which {
    Sources,
    Targets,
}

/// Counts of nodes by `(in-degree, out-degree)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeTally {
    #[serde(skip)]
    pub counts: BTreeMap<(u64, u64), u64>,
    pub n_nodes: u64,
    pub n_edges: u64,
    pub params: ModelParams,
    pub seed: u64,
    /// Number of replicates pooled into this tally.
    pub replicates: u64,
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    i: u64,
    j: u64,
    count: u64,
}

impl DegreeTally {
    /// Pools `other` into `self`. Both must come from the same parameters.
    pub fn merge(&mut self, other: &DegreeTally) -> Result<()> {
        if !same_model(&self.params, &other.params) {
            return Err(Error::Config("cannot pool tallies with different parameters".into()));
        }
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.n_nodes += other.n_nodes;
        self.n_edges += other.n_edges;
        self.replicates += other.replicates;
        Ok(())
    }

    /// Node counts by in-degree.
    pub fn in_degree_counts(&self) -> BTreeMap<u64, u64> {
        let mut m = BTreeMap::new();
        for (&(i, _), &c) in &self.counts {
            *m.entry(i).or_insert(0) += c;
        }
        m
    }

    pub fn out_degree_counts(&self) -> BTreeMap<u64, u64> {
        let mut m = BTreeMap::new();
        for (&(_, j), &c) in &self.counts {
            *m.entry(j).or_insert(0) += c;
        }
        m
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (&(i, j), &count) in &self.counts {
            w.serialize(CountRow { i, j, count })?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Writes `path` (CSV `i,j,count`) and its JSON sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(crate::io::create(path)?)?;
        crate::io::write_json(&crate::io::sidecar_path(path), self)
    }

    /// Reads a tally CSV and the JSON sidecar next to it.
    pub fn load(path: &Path) -> Result<DegreeTally> {
        let side = crate::io::sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let mut tally: DegreeTally = serde_json::from_str(&text)?;
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        tally.counts = read_counts(file)?;
        let nodes: u64 = tally.counts.values().sum();
        if nodes != tally.n_nodes {
            return Err(Error::Config(format!(
                "{}: counts sum to {nodes} but the sidecar records {} nodes",
                path.display(),
                tally.n_nodes
            )));
        }
        Ok(tally)
    }
}

fn read_counts<R: Read>(input: R) -> Result<BTreeMap<(u64, u64), u64>> {
    let mut r = csv::Reader::from_reader(input);
    let mut counts = BTreeMap::new();
    for row in r.deserialize() {
        let row: CountRow = row?;
        *counts.entry((row.i, row.j)).or_insert(0) += row.count;
    }
    Ok(counts)
}

fn same_model(a: &ModelParams, b: &ModelParams) -> bool {
    a.alpha == b.alpha && a.beta == b.beta && a.gamma == b.gamma && a.lambda_in == b.lambda_in && a.mu_out == b.mu_out
}

#[derive(Deserialize)]
struct EdgeRow {
    source: NodeId,
    target: NodeId,
}

/// Reads an initial graph from a CSV edge list with header `source,target`.
pub fn read_edge_list(path: &Path) -> Result<Vec<(NodeId, NodeId)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize::<EdgeRow>()
        .map(|row| row.map(|e| (e.source, e.target)).map_err(Error::from))
        .collect()
}

/// Grows one replicate (PCG stream `replicate`) to `n_target_edges` edges.
pub fn run_replicate(params: &ModelParams, n_target_edges: u64, init: &Init, replicate: u64) -> Result<DegreeTally> {
    let mut g = new_graph_on_stream(params, init, replicate)?;
    let initial = g.n_edges() as u64;
    if n_target_edges <= initial {
        return Err(Error::TargetTooSmall {
            target: n_target_edges,
            initial,
        });
    }
    if n_target_edges > NodeId::MAX as u64 {
        return Err(Error::Config(format!("at most {} edges are supported", NodeId::MAX)));
    }
    let extra = (n_target_edges - initial) as usize;
    g.edge_sources.reserve(extra);
    g.edge_targets.reserve(extra);
    for _ in 0..extra {
        g.step();
    }
    Ok(g.tally(params.seed))
}

pub fn run(params: &ModelParams, n_target_edges: u64) -> Result<DegreeTally> {
    run_replicate(params, n_target_edges, &Init::SelfLoop, 0)
}

/// Replicates `0..replicates` run in parallel; tallies are returned in
/// replicate order.
pub fn run_replicates(
    params: &ModelParams,
    n_target_edges: u64,
    init: &Init,
    replicates: u64,
) -> Result<Vec<DegreeTally>> {
    (0..replicates)
        .into_par_iter()
        .map(|r| run_replicate(params, n_target_edges, init, r))
        .collect()
}

pub fn pool(tallies: &[DegreeTally]) -> Result<DegreeTally> {
    let (first, rest) = tallies
        .split_first()
        .ok_or_else(|| Error::Config("no tallies to pool".into()))?;
    let mut pooled = first.clone();
    for t in rest {
        pooled.merge(t)?;
    }
    Ok(pooled)
}

/// Empirical frequencies `N_ij / N` as a table with no residual.
pub fn empirical_joint(tally: &DegreeTally) -> Result<SparseJointPMF> {
    if tally.n_nodes == 0 {
        return Err(Error::domain("empirical_joint", "tally has no nodes"));
    }
    let total = tally.n_nodes as f64;
    let entries: BTreeMap<(u64, u64), f64> = tally.counts.iter().map(|(&k, &c)| (k, c as f64 / total)).collect();
    let partial_sum = entries.values().sum();
    Ok(SparseJointPMF {
        i_max: entries.keys().map(|k| k.0).max().unwrap_or(0),
        j_max: entries.keys().map(|k| k.1).max().unwrap_or(0),
        entries,
        partial_sum,
        residual_bound: 0.0,
        envelope: None,
        underflow_cells: 0,
        params: tally.params,
        constants: derived_constants(&tally.params),
    })
}
