//! Road networks with BPR edge costs and explicit path sets.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on per-pair demand sums of a path flow.
pub const DEMAND_TOL: f64 = 1e-9;

/// A directed edge with cost `tau(f) = t0 (1 + rho (f / fbar)^{1/mu})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub t0: f64,
    pub rho: f64,
    pub mu: f64,
    pub fbar: f64,
}

impl Edge {
    pub fn new(id: &str, tail: &str, head: &str, t0: f64, rho: f64, mu: f64, fbar: f64) -> Self {
        Self {
            id: id.into(),
            tail: tail.into(),
            head: head.into(),
            t0,
            rho,
            mu,
            fbar,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let ok = |v: f64, strict: bool| v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
        if !ok(self.t0, true) {
            return Err(format!(
                "edge {}: t0 must be positive, got {}",
                self.id, self.t0
            ));
        }
        if !ok(self.rho, false) {
            return Err(format!(
                "edge {}: rho must be nonnegative, got {}",
                self.id, self.rho
            ));
        }
        if !ok(self.mu, true) {
            return Err(format!(
                "edge {}: mu must be positive, got {}",
                self.id, self.mu
            ));
        }
        if !ok(self.fbar, true) {
            return Err(format!(
                "edge {}: fbar must be positive, got {}",
                self.id, self.fbar
            ));
        }
        Ok(())
    }

    /// Cost at a flow already known to be nonnegative.
    pub(crate) fn cost(&self, f: f64) -> f64 {
        if self.rho == 0.0 || f <= 0.0 {
            return self.t0;
        }
        self.t0 * (1.0 + self.rho * (f / self.fbar).powf(1.0 / self.mu))
    }

    /// `sigma(f) = int_0^f tau = t0 f + t0 rho mu/(1+mu) f^{1+1/mu} / fbar^{1/mu}`.
    pub fn sigma(&self, f: f64) -> f64 {
        let f = f.max(0.0);
        let tail = if self.rho == 0.0 || f == 0.0 {
            0.0
        } else {
            let a = 1.0 / self.mu;
            self.t0 * self.rho * (self.mu / (1.0 + self.mu)) * f * (f / self.fbar).powf(a)
        };
        self.t0 * f + tail
    }

    /// The flow with `tau(f) = t` for `t >= t0` and `rho > 0`.
    pub(crate) fn inverse_cost(&self, t: f64) -> f64 {
        let s = ((t - self.t0) / (self.t0 * self.rho)).max(0.0);
        self.fbar * s.powf(self.mu)
    }
}

/// An origin-destination pair with its demand and path set; paths hold edge
/// indices into [`RoadNetwork::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct OdPair {
    pub origin: String,
    pub dest: String,
    pub demand: f64,
    pub paths: Vec<Vec<usize>>,
}

/// A validated network. Path flows are flat vectors ordered by pair, then by
/// path within the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    od_pairs: Vec<OdPair>,
    offsets: Vec<usize>,
}

/// Flow on every path, in the network's path order.
pub type PathFlow = Vec<f64>;

impl RoadNetwork {
    /// Builds a network; paths are given as edge ids.
    pub fn new(
        nodes: Vec<String>,
        edges: Vec<Edge>,
        od_pairs: Vec<(String, String, f64, Vec<Vec<String>>)>,
    ) -> Result<Self> {
        let raw = RawNetwork {
            nodes: nodes.into_iter().map(RawId::Str).collect(),
            edges: edges
                .into_iter()
                .map(|e| RawEdge {
                    id: RawId::Str(e.id),
                    tail: RawId::Str(e.tail),
                    head: RawId::Str(e.head),
                    t0: e.t0,
                    rho: e.rho,
                    mu: e.mu,
                    fbar: e.fbar,
                })
                .collect(),
            od_pairs: od_pairs
                .into_iter()
                .map(|(o, d, demand, paths)| RawOd {
                    origin: RawId::Str(o),
                    dest: RawId::Str(d),
                    demand,
                    paths: paths
                        .into_iter()
                        .map(|p| p.into_iter().map(RawId::Str).collect())
                        .collect(),
                })
                .collect(),
        };
        build(raw, &|_, _| None)
    }

    /// Parses and validates the JSON network format.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawNetwork = serde_json::from_str(text).map_err(|e| Error::Network {
            line: (e.line() > 0).then_some(e.line()),
            message: e.to_string(),
        })?;
        let locate = |key: &str, index: usize| key_lines(text, key).get(index).copied();
        build(raw, &locate)
    }

    pub fn to_json(&self) -> String {
        let raw = RawNetwork {
            nodes: self.nodes.iter().cloned().map(RawId::Str).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| RawEdge {
                    id: RawId::Str(e.id.clone()),
                    tail: RawId::Str(e.tail.clone()),
                    head: RawId::Str(e.head.clone()),
                    t0: e.t0,
                    rho: e.rho,
                    mu: e.mu,
                    fbar: e.fbar,
                })
                .collect(),
            od_pairs: self
                .od_pairs
                .iter()
                .map(|w| RawOd {
                    origin: RawId::Str(w.origin.clone()),
                    dest: RawId::Str(w.dest.clone()),
                    demand: w.demand,
                    paths: w
                        .paths
                        .iter()
                        .map(|p| {
                            p.iter()
                                .map(|&e| RawId::Str(self.edges[e].id.clone()))
                                .collect()
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("network serializes")
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn od_pairs(&self) -> &[OdPair] {
        &self.od_pairs
    }

    pub fn num_paths(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Index range of pair `w`'s paths in a [`PathFlow`].
    pub fn path_range(&self, w: usize) -> std::ops::Range<usize> {
        self.offsets[w]..self.offsets[w + 1]
    }

    /// Edge indices of every path, in path order.
    pub fn paths(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.od_pairs.iter().flat_map(|w| w.paths.iter())
    }

    /// Largest number of edges on a path (`H`).
    pub fn max_path_len(&self) -> usize {
        self.paths().map(|p| p.len()).max().unwrap_or(0)
    }

    /// `M~`: the largest edge cost reachable when every pair routes all of its
    /// demand over the edge.
    pub fn edge_cost_ceiling(&self) -> f64 {
        let mut load = vec![0.0; self.edges.len()];
        for w in &self.od_pairs {
            let used: HashSet<usize> = w.paths.iter().flatten().copied().collect();
            for e in used {
                load[e] += w.demand;
            }
        }
        self.edges
            .iter()
            .zip(&load)
            .map(|(e, &f)| e.cost(f))
            .fold(0.0, f64::max)
    }

    /// `M = M~ H`, a ceiling on every path cost.
    pub fn path_cost_ceiling(&self) -> f64 {
        self.edge_cost_ceiling() * self.max_path_len() as f64
    }

    pub fn total_demand(&self) -> f64 {
        self.od_pairs.iter().map(|w| w.demand).sum()
    }

    /// Proportional split `d_w / n_w` on every path.
    pub fn uniform_flow(&self) -> PathFlow {
        self.od_pairs
            .iter()
            .flat_map(|w| std::iter::repeat_n(w.demand / w.paths.len() as f64, w.paths.len()))
            .collect()
    }

    /// Checks membership in `X = {x >= 0, sum_{p in P_w} x_p = d_w}`.
    pub fn check_path_flow(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_paths() {
            return Err(Error::Domain(format!(
                "path flow has length {}, the network has {} paths",
                x.len(),
                self.num_paths()
            )));
        }
        if let Some(p) = x.iter().position(|v| !v.is_finite() || *v < -DEMAND_TOL) {
            return Err(Error::Domain(format!(
                "path flow {p} is negative or not finite: {}",
                x[p]
            )));
        }
        for (w, pair) in self.od_pairs.iter().enumerate() {
            let s: f64 = x[self.path_range(w)].iter().sum();
            if (s - pair.demand).abs() > DEMAND_TOL * pair.demand.max(1.0) {
                return Err(Error::Domain(format!(
                    "pair {} -> {} carries {s}, demand is {}",
                    pair.origin, pair.dest, pair.demand
                )));
            }
        }
        Ok(())
    }

    /// `f = Theta x` without membership checks.
    pub(crate) fn flows_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.edges.len()];
        for (p, path) in self.paths().enumerate() {
            for &e in path {
                f[e] += x[p];
            }
        }
        f
    }

    /// Path costs `T_p = sum_{e in p} t_e` for edge times `t`.
    pub(crate) fn path_times(&self, t: &[f64]) -> Vec<f64> {
        self.paths()
            .map(|path| path.iter().map(|&e| t[e]).sum())
            .collect()
    }

    pub(crate) fn edge_costs_unchecked(&self, f: &[f64]) -> Vec<f64> {
        self.edges
            .iter()
            .zip(f)
            .map(|(e, &fe)| e.cost(fe))
            .collect()
    }

    pub(crate) fn path_costs_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.path_times(&self.edge_costs_unchecked(&self.flows_unchecked(x)))
    }

    pub(crate) fn potential_unchecked(&self, x: &[f64]) -> f64 {
        let f = self.flows_unchecked(x);
        self.edges.iter().zip(&f).map(|(e, &fe)| e.sigma(fe)).sum()
    }
}

/// Edge flows `f_e = sum_p delta_ep x_p`.
pub fn edge_flows(net: &RoadNetwork, x: &[f64]) -> Result<Vec<f64>> {
    net.check_path_flow(x)?;
    Ok(net
        .flows_unchecked(x)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect())
}

/// BPR cost `t0 (1 + rho (f/fbar)^{1/mu})`.
pub fn bpr_cost(edge: &Edge, f: f64) -> Result<f64> {
    if f.is_nan() || f < 0.0 {
        return Err(Error::Domain(format!(
            "edge {}: flow must be nonnegative, got {f}",
            edge.id
        )));
    }
    Ok(edge.cost(f))
}

/// Path costs `G_p(x) = sum_{e in p} tau_e(f_e(x))`.
pub fn path_costs(net: &RoadNetwork, x: &[f64]) -> Result<Vec<f64>> {
    let f = edge_flows(net, x)?;
    Ok(net.path_times(&net.edge_costs_unchecked(&f)))
}

/// Beckmann potential `Psi(x) = sum_e sigma_e(f_e(x))`; its gradient in `x`
/// is the path-cost vector.
pub fn beckmann_potential(net: &RoadNetwork, x: &[f64]) -> Result<f64> {
    let f = edge_flows(net, x)?;
    Ok(net.edges.iter().zip(&f).map(|(e, &fe)| e.sigma(fe)).sum())
}

/// `sum_w sum_{p in P_w} x_p ln(x_p / d_w)` with `0 ln 0 = 0`.
pub(crate) fn relative_entropy(net: &RoadNetwork, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for (w, pair) in net.od_pairs.iter().enumerate() {
        for &xp in &x[net.path_range(w)] {
            if xp > 0.0 {
                s += xp * (xp / pair.demand).ln();
            }
        }
    }
    s
}

/// `Psi_gamma(x) = Psi(x) + gamma sum x_p ln(x_p / d_w)`.
pub fn entropy_potential(net: &RoadNetwork, x: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Input(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    let psi = beckmann_potential(net, x)?;
    if gamma == 0.0 {
        return Ok(psi);
    }
    Ok(psi + gamma * relative_entropy(net, &clamp_nonneg(x)))
}

/// `gamma sum_w d_w ln d_w`: the amount by which the `x ln x` form of the
/// entropy term exceeds the `x ln(x / d_w)` form.
pub fn entropy_convention_shift(net: &RoadNetwork, gamma: f64) -> f64 {
    gamma
        * net
            .od_pairs
            .iter()
            .map(|w| w.demand * w.demand.ln())
            .sum::<f64>()
}

fn clamp_nonneg(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawId {
    Str(String),
    Int(i64),
}

impl RawId {
    fn key(&self) -> String {
        match self {
            RawId::Str(s) => s.clone(),
            RawId::Int(i) => i.to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    id: RawId,
    tail: RawId,
    head: RawId,
    t0: f64,
    rho: f64,
    mu: f64,
    fbar: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOd {
    origin: RawId,
    dest: RawId,
    demand: f64,
    paths: Vec<Vec<RawId>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    nodes: Vec<RawId>,
    edges: Vec<RawEdge>,
    od_pairs: Vec<RawOd>,
}

type Locate<'a> = dyn Fn(&str, usize) -> Option<usize> + 'a;

fn build(raw: RawNetwork, locate: &Locate<'_>) -> Result<RoadNetwork> {
    let fail = |line: Option<usize>, message: String| Error::Network { line, message };
    let mut node_set = HashSet::new();
    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for n in &raw.nodes {
        let k = n.key();
        if !node_set.insert(k.clone()) {
            return Err(fail(locate("nodes", 0), format!("duplicate node {k}")));
        }
        nodes.push(k);
    }
    let mut edge_index = HashMap::new();
    let mut edges = Vec::with_capacity(raw.edges.len());
    for (i, e) in raw.edges.iter().enumerate() {
        let line = locate("tail", i);
        let edge = Edge {
            id: e.id.key(),
            tail: e.tail.key(),
            head: e.head.key(),
            t0: e.t0,
            rho: e.rho,
            mu: e.mu,
            fbar: e.fbar,
        };
        for end in [&edge.tail, &edge.head] {
            if !node_set.contains(end) {
                return Err(fail(
                    line,
                    format!("edge {} refers to unknown node {end}", edge.id),
                ));
            }
        }
        edge.validate().map_err(|m| fail(line, m))?;
        if edge_index.insert(edge.id.clone(), i).is_some() {
            return Err(fail(line, format!("duplicate edge id {}", edge.id)));
        }
        edges.push(edge);
    }
    if raw.od_pairs.is_empty() {
        return Err(fail(
            locate("od_pairs", 0),
            "network has no OD pairs".into(),
        ));
    }
    let mut od_pairs = Vec::with_capacity(raw.od_pairs.len());
    let mut offsets = vec![0];
    for (w, od) in raw.od_pairs.iter().enumerate() {
        let line = locate("origin", w);
        let (origin, dest) = (od.origin.key(), od.dest.key());
        for end in [&origin, &dest] {
            if !node_set.contains(end) {
                return Err(fail(
                    line,
                    format!("OD pair {w} refers to unknown node {end}"),
                ));
            }
        }
        if !(od.demand > 0.0 && od.demand.is_finite()) {
            return Err(fail(
                line,
                format!(
                    "OD pair {origin} -> {dest}: demand must be positive, got {}",
                    od.demand
                ),
            ));
        }
        if od.paths.is_empty() {
            return Err(fail(
                line,
                format!("OD pair {origin} -> {dest} has no paths"),
            ));
        }
        let mut paths = Vec::with_capacity(od.paths.len());
        for (j, p) in od.paths.iter().enumerate() {
            let here = |m: String| fail(line, format!("OD pair {origin} -> {dest}, path {j}: {m}"));
            if p.is_empty() {
                return Err(here("path is empty".into()));
            }
            let mut idx = Vec::with_capacity(p.len());
            for id in p {
                let k = id.key();
                match edge_index.get(&k) {
                    Some(&e) => idx.push(e),
                    None => return Err(here(format!("unknown edge id {k}"))),
                }
            }
            let mut at = &origin;
            for &e in &idx {
                if &edges[e].tail != at {
                    return Err(here(format!(
                        "disconnected at edge {}: expected tail {at}, found {}",
                        edges[e].id, edges[e].tail
                    )));
                }
                at = &edges[e].head;
            }
            if at != &dest {
                return Err(here(format!("ends at {at}, not at destination {dest}")));
            }
            paths.push(idx);
        }
        offsets.push(offsets[w] + paths.len());
        od_pairs.push(OdPair {
            origin,
            dest,
            demand: od.demand,
            paths,
        });
    }
    Ok(RoadNetwork {
        nodes,
        edges,
        od_pairs,
        offsets,
    })
}

/// 1-based lines of every occurrence of `key` as an object key, in document
/// order. String contents are skipped, so values equal to `key` do not count.
fn key_lines(text: &str, key: &str) -> Vec<usize> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut line = 1;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\n' => line += 1,
            b'"' => {
                let start_line = line;
                let start = i + 1;
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    } else if bytes[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
                let s = &text[start..i.min(bytes.len())];
                let mut j = i + 1;
                while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                    if bytes[j] == b'\n' {
                        line += 1;
                    }
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b':' && s == key {
                    out.push(start_line);
                }
                i = j;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_lines_skip_string_values() {
        let text = "{\n \"a\": \"tail\",\n \"tail\": 1,\n \"x\": {\"tail\" : 2}\n}";
        assert_eq!(key_lines(text, "tail"), vec![3, 4]);
    }
}
