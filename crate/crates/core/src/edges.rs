//! Time-ordered edge streams and their aggregated multigraph.

use rustc_hash::FxHashMap;

use crate::error::{input, Error, Result};
use crate::sequence::TokenAlphabet;

/// One parsed row of an edge stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRow {
    pub source: String,
    pub target: String,
    pub time: Option<f64>,
}

impl EdgeRow {
    pub fn new(source: impl Into<String>, target: impl Into<String>, time: Option<f64>) -> Self {
        EdgeRow {
            source: source.into(),
            target: target.into(),
            time,
        }
    }
}

/// An ordered list of edge events over a node registry.
///
/// Undirected edges are stored canonically as `(min, max)`. Self-loops are
/// kept and add 2 to the degree of their node in the undirected case.
#[derive(Debug, Clone)]
pub struct EdgeStream {
    directed: bool,
    nodes: TokenAlphabet,
    events: Vec<(u32, u32)>,
    times: Option<Vec<f64>>,
    aggregated: FxHashMap<(u32, u32), u64>,
    out_degree: Vec<u64>,
    in_degree: Vec<u64>,
}

pub fn ingest_edge_stream(rows: &[EdgeRow], directed: bool) -> Result<EdgeStream> {
    let mut nodes = TokenAlphabet::new();
    let pairs: Vec<(u32, u32)> = rows
        .iter()
        .map(|r| (nodes.intern(&r.source), nodes.intern(&r.target)))
        .collect();
    let timed = rows.iter().filter(|r| r.time.is_some()).count();
    let times = if timed == 0 {
        None
    } else if timed == rows.len() {
        let t: Vec<f64> = rows.iter().map(|r| r.time.unwrap()).collect();
        if let Some(i) = t.windows(2).position(|w| w[1] < w[0]) {
            return input(format!("edge row {} is earlier than row {}", i + 1, i));
        }
        Some(t)
    } else {
        return input("either every edge row or none must carry a time");
    };
    EdgeStream::from_pairs(nodes, pairs, times, directed)
}

impl EdgeStream {
    pub fn from_pairs(
        nodes: TokenAlphabet,
        pairs: Vec<(u32, u32)>,
        times: Option<Vec<f64>>,
        directed: bool,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut aggregated: FxHashMap<(u32, u32), u64> = FxHashMap::default();
        let mut out_degree = vec![0u64; n];
        let mut in_degree = vec![0u64; n];
        let mut events = Vec::with_capacity(pairs.len());
        for (i, j) in pairs {
            if i as usize >= n || j as usize >= n {
                return input(format!("edge ({i}, {j}) refers to an unknown node"));
            }
            let e = if directed || i <= j { (i, j) } else { (j, i) };
            *aggregated.entry(e).or_insert(0) += 1;
            out_degree[e.0 as usize] += 1;
            in_degree[e.1 as usize] += 1;
            events.push(e);
        }
        Ok(EdgeStream {
            directed,
            nodes,
            events,
            times,
            aggregated,
            out_degree,
            in_degree,
        })
    }

    /// Stream over nodes `0..num_nodes` named by their index.
    pub fn from_indices(num_nodes: usize, pairs: Vec<(u32, u32)>, directed: bool) -> Result<Self> {
        Self::from_pairs(TokenAlphabet::numbered(num_nodes), pairs, None, directed)
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &TokenAlphabet {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[(u32, u32)] {
        &self.events
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.times.as_deref()
    }

    /// Multiplicity `A_ij` of the canonical edge `(i, j)`.
    pub fn multiplicity(&self, i: u32, j: u32) -> u64 {
        let e = if self.directed || i <= j { (i, j) } else { (j, i) };
        self.aggregated.get(&e).copied().unwrap_or(0)
    }

    pub fn aggregated(&self) -> &FxHashMap<(u32, u32), u64> {
        &self.aggregated
    }

    /// Total degree `d_i` (undirected) or out-degree (directed).
    pub fn degree(&self, i: u32) -> u64 {
        if self.directed {
            self.out_degree[i as usize]
        } else {
            self.out_degree[i as usize] + self.in_degree[i as usize]
        }
    }

    pub fn out_degree(&self, i: u32) -> u64 {
        self.out_degree[i as usize]
    }

    pub fn in_degree(&self, i: u32) -> u64 {
        self.in_degree[i as usize]
    }

    /// The first `len` events as a stream over the nodes they touch.
    /// Returns the stream and the map from its node ids to ids in `self`.
    pub fn prefix(&self, len: usize) -> (EdgeStream, Vec<u32>) {
        let len = len.min(self.events.len());
        let mut nodes = TokenAlphabet::new();
        let mut back = Vec::new();
        let mut forward: FxHashMap<u32, u32> = FxHashMap::default();
        let mut map = |v: u32, nodes: &mut TokenAlphabet| {
            *forward.entry(v).or_insert_with(|| {
                back.push(v);
                nodes.intern(self.nodes.name(v))
            })
        };
        let pairs: Vec<(u32, u32)> = self.events[..len]
            .iter()
            .map(|&(i, j)| {
                let a = map(i, &mut nodes);
                let b = map(j, &mut nodes);
                (a, b)
            })
            .collect();
        let times = self.times.as_ref().map(|t| t[..len].to_vec());
        let stream = EdgeStream::from_pairs(nodes, pairs, times, self.directed)
            .expect("prefix of a valid stream is valid");
        (stream, back)
    }
}

/// Parses `source<TAB>target[<TAB>time]` rows; blank lines and `#` comments are skipped.
pub fn parse_edge_tsv(text: &str) -> Result<Vec<EdgeRow>> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return input(format!("edge line {}: expected 2 or 3 tab-separated fields", ln + 1));
        }
        let time = match fields.get(2) {
            Some(t) => Some(
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Input(format!("edge line {}: {e}", ln + 1)))?,
            ),
            None => None,
        };
        if fields[0].is_empty() || fields[1].is_empty() {
            return input(format!("edge line {}: empty node name", ln + 1));
        }
        rows.push(EdgeRow::new(fields[0], fields[1], time));
    }
    Ok(rows)
}
