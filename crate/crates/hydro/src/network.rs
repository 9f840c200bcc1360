use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HydroError, Result};

/// The Hanoi benchmark network.
pub const HANOI_JSON: &str = include_str!("../fixtures/hanoi.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub id: u32,
    pub head_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: u32,
    /// Nominal demand; the model scales it by a per-node factor.
    pub demand_m3h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeSpec {
    pub id: u32,
    /// Upstream end; leak positions are measured from here.
    pub from: u32,
    pub to: u32,
    pub length_m: f64,
    pub diameter_m: f64,
}

/// `loss = w * l * q |q|^(flow_exponent - 1) / (c^flow_exponent * D^diameter_exponent)`
/// with `q` in m3/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazenWilliams {
    pub w: f64,
    pub c: f64,
    pub flow_exponent: f64,
    pub diameter_exponent: f64,
}

impl Default for HazenWilliams {
    fn default() -> Self {
        Self { w: 10.5088, c: 130.0, flow_exponent: 1.85, diameter_exponent: 4.87 }
    }
}

impl HazenWilliams {
    /// Friction loss in metres over `length` metres of pipe for a flow of
    /// `q` m3/s. Odd in `q`.
    pub fn headloss(&self, q: f64, length: f64, diameter: f64) -> f64 {
        self.w * length * q * q.abs().powf(self.flow_exponent - 1.0)
            / (self.c.powf(self.flow_exponent) * diameter.powf(self.diameter_exponent))
    }

    /// Head at a point `position` of the way along a pipe whose upstream
    /// end sits at `upstream_head`.
    pub fn leak_head(&self, upstream_head: f64, q: f64, position: f64, length: f64, diameter: f64) -> f64 {
        upstream_head - self.headloss(q, position * length, diameter)
    }
}

/// Network description as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub reservoir: ReservoirSpec,
    #[serde(default)]
    pub hazen_williams: HazenWilliams,
    /// Minimum acceptable head at demand nodes.
    pub min_head_m: f64,
    pub nodes: Vec<NodeSpec>,
    pub pipes: Vec<PipeSpec>,
    /// Independent loops as lists of pipe ids. Derived from a spanning tree
    /// when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<Vec<Vec<u32>>>,
}

#[derive(Debug, Clone)]
pub(crate) struct Pipe {
    pub id: u32,
    pub from: usize,
    pub to: usize,
    pub length: f64,
    /// Friction resistance per metre.
    pub r: f64,
}

/// Validated network. Node index 0 is the reservoir; junctions follow in
/// file order.
#[derive(Debug, Clone)]
pub struct Network {
    pub(crate) name: String,
    pub(crate) node_ids: Vec<u32>,
    pub(crate) demand_m3s: Vec<f64>,
    pub(crate) reservoir_head: f64,
    pub(crate) min_head: f64,
    pub(crate) exponent: f64,
    pub(crate) pipes: Vec<Pipe>,
    /// Per loop: (pipe index, orientation sign).
    pub(crate) loops: Vec<Vec<(usize, f64)>>,
    /// Junctions in breadth-first order from the reservoir.
    pub(crate) bfs: Vec<usize>,
    /// Per node: tree pipe to its parent and the sign `s` such that
    /// `H[node] = H[parent] - s * dH[pipe]`. Unused for the reservoir.
    pub(crate) parent: Vec<(usize, usize, f64)>,
    /// Per node: the tree path from the reservoir as (pipe, sign) pairs.
    pub(crate) paths: Vec<Vec<(usize, f64)>>,
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    let spec: NetworkSpec = serde_json::from_str(&text)?;
    Network::from_spec(&spec)
}

/// Hanoi network from the bundled fixture.
pub fn hanoi() -> Network {
    let spec: NetworkSpec = serde_json::from_str(HANOI_JSON).expect("bundled fixture parses");
    Network::from_spec(&spec).expect("bundled fixture is valid")
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl Network {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(&serde_json::from_str(text)?)
    }

    pub fn from_spec(spec: &NetworkSpec) -> Result<Self> {
        let hw = spec.hazen_williams;
        if !(positive(hw.w) && positive(hw.c) && positive(hw.flow_exponent) && positive(hw.diameter_exponent))
        {
            return Err(HydroError::BadConstant(format!("{hw:?}")));
        }
        if !positive(spec.reservoir.head_m) {
            return Err(HydroError::BadConstant(format!("reservoir head {}", spec.reservoir.head_m)));
        }
        if !positive(spec.min_head_m) {
            return Err(HydroError::BadConstant(format!("minimum head {}", spec.min_head_m)));
        }

        let mut index: HashMap<u32, usize> = HashMap::new();
        let mut node_ids = vec![spec.reservoir.id];
        let mut demand = vec![0.0];
        index.insert(spec.reservoir.id, 0);
        for n in &spec.nodes {
            if index.insert(n.id, node_ids.len()).is_some() {
                return Err(HydroError::DuplicateNode(n.id));
            }
            if !n.demand_m3h.is_finite() {
                return Err(HydroError::BadDemand(n.id));
            }
            node_ids.push(n.id);
            demand.push(n.demand_m3h / 3600.0);
        }

        let mut seen = HashSet::new();
        let mut pipes = Vec::with_capacity(spec.pipes.len());
        for p in &spec.pipes {
            if !seen.insert(p.id) {
                return Err(HydroError::DuplicatePipe(p.id));
            }
            let end = |node: u32| {
                index.get(&node).copied().ok_or(HydroError::UnknownNode { pipe: p.id, node })
            };
            let (from, to) = (end(p.from)?, end(p.to)?);
            if from == to {
                return Err(HydroError::SelfLoop(p.id));
            }
            if !positive(p.length_m) || !positive(p.diameter_m) {
                return Err(HydroError::BadPipe {
                    id: p.id,
                    reason: "length and diameter must be positive".into(),
                });
            }
            let r = hw.w / (hw.c.powf(hw.flow_exponent) * p.diameter_m.powf(hw.diameter_exponent));
            pipes.push(Pipe { id: p.id, from, to, length: p.length_m, r });
        }

        let n_nodes = node_ids.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for (k, p) in pipes.iter().enumerate() {
            adj[p.from].push(k);
            adj[p.to].push(k);
        }

        // breadth-first spanning tree from the reservoir
        let mut parent = vec![(usize::MAX, usize::MAX, 0.0); n_nodes];
        let mut visited = vec![false; n_nodes];
        let mut in_tree = vec![false; pipes.len()];
        let mut bfs = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(u) = queue.pop_front() {
            for &k in &adj[u] {
                let p = &pipes[k];
                let (v, sign) = if p.from == u { (p.to, 1.0) } else { (p.from, -1.0) };
                if !visited[v] {
                    visited[v] = true;
                    parent[v] = (k, u, sign);
                    in_tree[k] = true;
                    bfs.push(v);
                    queue.push_back(v);
                }
            }
        }
        if let Some(v) = (0..n_nodes).find(|&v| !visited[v]) {
            return Err(HydroError::Disconnected(node_ids[v]));
        }
        let mut paths: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
        for &v in &bfs {
            let (k, u, s) = parent[v];
            let mut path = paths[u].clone();
            path.push((k, s));
            paths[v] = path;
        }

        let expected = pipes.len() + 1 - n_nodes;
        let loops = match &spec.loops {
            Some(given) => {
                let pipe_index: HashMap<u32, usize> =
                    pipes.iter().enumerate().map(|(k, p)| (p.id, k)).collect();
                let mut out = Vec::new();
                for (li, lp) in given.iter().enumerate() {
                    let ks = lp
                        .iter()
                        .map(|id| {
                            pipe_index
                                .get(id)
                                .copied()
                                .ok_or(HydroError::UnknownLoopPipe { index: li, pipe: *id })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    out.push(orient_loop(li, &ks, &pipes, &node_ids)?);
                }
                out
            }
            None => fundamental_loops(&pipes, &in_tree, &paths),
        };
        if loops.len() != expected {
            return Err(HydroError::LoopCount { expected, found: loops.len() });
        }
        if !loops.is_empty() {
            let mut m = DMatrix::zeros(loops.len(), pipes.len());
            for (i, l) in loops.iter().enumerate() {
                for &(k, s) in l {
                    m[(i, k)] = s;
                }
            }
            if m.rank(1e-9) != loops.len() {
                return Err(HydroError::DependentLoops);
            }
        }

        Ok(Self {
            name: spec.name.clone(),
            node_ids,
            demand_m3s: demand,
            reservoir_head: spec.reservoir.head_m,
            min_head: spec.min_head_m,
            exponent: hw.flow_exponent,
            pipes,
            loops,
            bfs,
            parent,
            paths,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of demand nodes (the reservoir excluded).
    pub fn n_junctions(&self) -> usize {
        self.node_ids.len() - 1
    }

    pub fn n_pipes(&self) -> usize {
        self.pipes.len()
    }

    pub fn n_loops(&self) -> usize {
        self.loops.len()
    }

    pub fn junction_ids(&self) -> &[u32] {
        &self.node_ids[1..]
    }

    pub fn pipe_ids(&self) -> Vec<u32> {
        self.pipes.iter().map(|p| p.id).collect()
    }

    /// Nominal junction demands in m3/h.
    pub fn nominal_demands_m3h(&self) -> Vec<f64> {
        self.demand_m3s[1..].iter().map(|d| d * 3600.0).collect()
    }

    pub fn reservoir_head(&self) -> f64 {
        self.reservoir_head
    }

    pub fn min_head(&self) -> f64 {
        self.min_head
    }

    /// Junction index (0-based, reservoir excluded) of a node id.
    pub fn junction_index(&self, id: u32) -> Option<usize> {
        self.node_ids[1..].iter().position(|&n| n == id)
    }

    /// Head loss along `length` metres of pipe `k` carrying `q` m3/s.
    pub(crate) fn loss(&self, k: usize, q: f64, length: f64) -> f64 {
        self.pipes[k].r * length * q * q.abs().powf(self.exponent - 1.0)
    }

    /// Derivative of [`Network::loss`] in `q`, floored away from zero flow.
    pub(crate) fn loss_dq(&self, k: usize, q: f64, length: f64) -> f64 {
        let a = q.abs().max(1e-6);
        self.exponent * self.pipes[k].r * length * a.powf(self.exponent - 1.0)
    }
}

/// Walk the loop to fix its orientation; signs are +1 for pipes traversed
/// from upstream to downstream.
fn orient_loop(
    index: usize,
    ks: &[usize],
    pipes: &[Pipe],
    node_ids: &[u32],
) -> Result<Vec<(usize, f64)>> {
    let mut degree: HashMap<usize, usize> = HashMap::new();
    for &k in ks {
        *degree.entry(pipes[k].from).or_default() += 1;
        *degree.entry(pipes[k].to).or_default() += 1;
    }
    let mut bad: Vec<usize> = degree.iter().filter(|(_, &d)| d != 2).map(|(&n, _)| n).collect();
    bad.sort_unstable();
    if let Some(&n) = bad.first() {
        return Err(HydroError::LoopNotClosed { index, node: node_ids[n] });
    }
    let Some(&first) = ks.first() else {
        return Err(HydroError::LoopCount { expected: 1, found: 0 });
    };
    let mut used = vec![false; ks.len()];
    let mut out = Vec::with_capacity(ks.len());
    let start = pipes[first].from;
    let mut at = start;
    loop {
        let next = ks.iter().enumerate().find(|(i, &k)| {
            !used[*i] && (pipes[k].from == at || pipes[k].to == at)
        });
        let Some((i, &k)) = next else { break };
        used[i] = true;
        if pipes[k].from == at {
            out.push((k, 1.0));
            at = pipes[k].to;
        } else {
            out.push((k, -1.0));
            at = pipes[k].from;
        }
        if at == start {
            break;
        }
    }
    if out.len() != ks.len() || at != start {
        // two disjoint cycles
        let stray = ks.iter().enumerate().find(|(i, _)| !used[*i]).map(|(_, &k)| pipes[k].from);
        return Err(HydroError::LoopNotClosed { index, node: node_ids[stray.unwrap_or(at)] });
    }
    Ok(out)
}

/// One loop per chord: the chord plus the tree paths to its two ends.
fn fundamental_loops(
    pipes: &[Pipe],
    in_tree: &[bool],
    paths: &[Vec<(usize, f64)>],
) -> Vec<Vec<(usize, f64)>> {
    let mut loops = Vec::new();
    for (k, p) in pipes.iter().enumerate() {
        if in_tree[k] {
            continue;
        }
        let mut coef: HashMap<usize, f64> = HashMap::new();
        coef.insert(k, 1.0);
        for &(q, s) in &paths[p.from] {
            *coef.entry(q).or_default() += s;
        }
        for &(q, s) in &paths[p.to] {
            *coef.entry(q).or_default() -= s;
        }
        let mut l: Vec<(usize, f64)> = coef.into_iter().filter(|(_, c)| *c != 0.0).collect();
        l.sort_by_key(|(q, _)| *q);
        loops.push(l);
    }
    loops
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> NetworkSpec {
        serde_json::from_str(HANOI_JSON).unwrap()
    }

    #[test]
    fn hanoi_shape() {
        let net = hanoi();
        assert_eq!(net.n_junctions(), 31);
        assert_eq!(net.n_pipes(), 34);
        assert_eq!(net.n_loops(), 3);
        let total: f64 = net.nominal_demands_m3h().iter().sum();
        assert!((total - 19940.0).abs() < 1e-9);
    }

    #[test]
    fn derived_loops_match_count() {
        let mut s = spec();
        s.loops = None;
        let net = Network::from_spec(&s).unwrap();
        assert_eq!(net.n_loops(), 3);
    }

    #[test]
    fn errors_name_the_offending_node() {
        let mut s = spec();
        s.pipes[5].to = 999;
        let e = Network::from_spec(&s).unwrap_err();
        assert!(e.to_string().contains("999"), "{e}");

        let mut s = spec();
        s.nodes.push(NodeSpec { id: 77, demand_m3h: 10.0 });
        let e = Network::from_spec(&s).unwrap_err();
        assert!(matches!(e, HydroError::Disconnected(77)));

        let mut s = spec();
        s.nodes[3].id = s.nodes[4].id;
        assert!(matches!(Network::from_spec(&s), Err(HydroError::DuplicateNode(_))));
    }

    #[test]
    fn open_or_missing_loops_rejected() {
        let mut s = spec();
        s.loops.as_mut().unwrap()[0].pop();
        assert!(matches!(Network::from_spec(&s), Err(HydroError::LoopNotClosed { index: 0, .. })));

        let mut s = spec();
        s.loops.as_mut().unwrap().pop();
        assert!(matches!(
            Network::from_spec(&s),
            Err(HydroError::LoopCount { expected: 3, found: 2 })
        ));

        let mut s = spec();
        let l = s.loops.as_ref().unwrap()[0].clone();
        s.loops.as_mut().unwrap()[1] = l;
        assert!(matches!(Network::from_spec(&s), Err(HydroError::DependentLoops)));
    }

    #[test]
    fn bad_pipe_rejected() {
        let mut s = spec();
        s.pipes[0].diameter_m = 0.0;
        assert!(matches!(Network::from_spec(&s), Err(HydroError::BadPipe { id: 1, .. })));
    }

    #[test]
    fn headloss_is_odd_and_matches_hand_formula() {
        let hw = HazenWilliams::default();
        assert_eq!(hw.headloss(0.0, 100.0, 1.016), 0.0);
        for q in [0.01, 0.3, 2.5, 100.0] {
            assert_eq!(hw.headloss(-q, 250.0, 0.5), -hw.headloss(q, 250.0, 0.5));
        }
        let by_hand = 10.5088 * 100.0 * 100f64.powf(1.85) / (130f64.powf(1.85) * 1.016f64.powf(4.87));
        assert!((hw.headloss(100.0, 100.0, 1.016) - by_hand).abs() < 1e-12 * by_hand);
    }

    #[test]
    fn leak_head_interpolates_along_pipe() {
        let hw = HazenWilliams::default();
        let (h, q, l, d) = (95.0, 1.2, 800.0, 0.6);
        assert_eq!(hw.leak_head(h, q, 0.0, l, d), h);
        assert!((hw.leak_head(h, q, 1.0, l, d) - (h - hw.headloss(q, l, d))).abs() < 1e-12);
        let grid: Vec<f64> = (0..=50).map(|i| hw.leak_head(h, q, i as f64 / 50.0, l, d)).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn network_losses_use_the_constants() {
        let net = hanoi();
        let s = spec();
        let hw = s.hazen_williams;
        for (k, p) in s.pipes.iter().enumerate() {
            let a = net.loss(k, 0.7, p.length_m);
            let b = hw.headloss(0.7, p.length_m, p.diameter_m);
            assert!((a - b).abs() < 1e-12 * b.abs());
        }
    }

    #[test]
    fn fixture_values() {
        let s = spec();
        assert_eq!(s.reservoir.head_m, 100.0);
        let n12 = s.nodes.iter().find(|n| n.id == 12).unwrap();
        assert_eq!(n12.demand_m3h, 1350.0);
        let p23 = s.pipes.iter().find(|p| p.id == 23).unwrap();
        assert_eq!((p23.length_m, p23.diameter_m), (3500.0, 0.6096));
    }
}

#[cfg(test)]
mod props {
    use super::HazenWilliams;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn headloss_odd_and_increasing(q in 0.0f64..5.0, dq in 1e-6f64..1.0, l in 1.0f64..5000.0, d in 0.2f64..1.2) {
            let hw = HazenWilliams::default();
            prop_assert_eq!(hw.headloss(-q, l, d), -hw.headloss(q, l, d));
            prop_assert!(hw.headloss(q + dq, l, d) > hw.headloss(q, l, d));
        }

        #[test]
        fn leak_head_falls_downstream(h in 30.0f64..100.0, q in 1e-3f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let hw = HazenWilliams::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(hw.leak_head(h, q, hi, 900.0, 0.5) < hw.leak_head(h, q, lo, 900.0, 0.5));
        }
    }
}
