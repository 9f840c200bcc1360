use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HydroError, Result};
use crate::network::Network;

/// Leak on one pipe: outflow `coeff * sqrt(head)` at fraction `position` of
/// the pipe length from its upstream end. `coeff` is in (m3/s)/sqrt(m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakParams {
    pub coeff: f64,
    pub position: f64,
}

impl LeakParams {
    pub const NONE: LeakParams = LeakParams { coeff: 0.0, position: 0.5 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Infinity norm of the scaled residual.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, max_halvings: 10 }
    }
}

/// Solution of one steady-state solve. Flows are in m3/h, heads in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicState {
    pub converged: bool,
    pub iterations: usize,
    /// Final scaled residual norm.
    pub residual: f64,
    /// Flow entering each pipe at its upstream end.
    pub flows_m3h: Vec<f64>,
    pub leak_flows_m3h: Vec<f64>,
    pub leak_heads_m: Vec<f64>,
    /// Junction heads in network order (reservoir excluded).
    pub node_heads_m: Vec<f64>,
}

impl HydraulicState {
    pub fn min_head(&self) -> f64 {
        self.node_heads_m.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Unscaled residuals recomputed from a reported state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// Largest junction mass imbalance, m3/s.
    pub mass: f64,
    /// Largest loop head imbalance, m.
    pub head: f64,
    /// Largest leak head mismatch, m.
    pub leak: f64,
}

struct Eval {
    f: DVector<f64>,
    norm: f64,
}

struct System<'a> {
    net: &'a Network,
    demand: Vec<f64>,
    leaks: &'a [LeakParams],
    mass_scale: f64,
    head_scale: f64,
}

impl<'a> System<'a> {
    fn np(&self) -> usize {
        self.net.pipes.len()
    }

    fn leak_flow(&self, k: usize, h: f64) -> f64 {
        self.leaks[k].coeff * h.max(0.0).sqrt()
    }

    fn leak_flow_dh(&self, k: usize, h: f64) -> f64 {
        if h > 0.0 {
            self.leaks[k].coeff / (2.0 * h.max(1e-8).sqrt())
        } else {
            0.0
        }
    }

    /// Head drop from upstream to downstream end of pipe `k`.
    fn dh(&self, k: usize, q: f64, s: f64) -> f64 {
        let l = self.net.pipes[k].length;
        let d = self.leaks[k].position;
        self.net.loss(k, q, d * l) + self.net.loss(k, q - s, (1.0 - d) * l)
    }

    fn heads(&self, x: &DVector<f64>) -> Vec<f64> {
        let np = self.np();
        let mut h = vec![0.0; self.net.node_ids.len()];
        h[0] = self.net.reservoir_head;
        for &v in &self.net.bfs {
            let (k, u, sign) = self.net.parent[v];
            let s = self.leak_flow(k, x[np + k]);
            h[v] = h[u] - sign * self.dh(k, x[k], s);
        }
        h
    }

    fn residual(&self, x: &DVector<f64>) -> Eval {
        let np = self.np();
        let nj = self.net.node_ids.len() - 1;
        let mut f = DVector::zeros(2 * np);
        let s: Vec<f64> = (0..np).map(|k| self.leak_flow(k, x[np + k])).collect();
        for j in 1..=nj {
            f[j - 1] = -self.demand[j];
        }
        for (k, p) in self.net.pipes.iter().enumerate() {
            if p.to != 0 {
                f[p.to - 1] += x[k] - s[k];
            }
            if p.from != 0 {
                f[p.from - 1] -= x[k];
            }
        }
        for (i, lp) in self.net.loops.iter().enumerate() {
            f[nj + i] = lp.iter().map(|&(k, sg)| sg * self.dh(k, x[k], s[k])).sum();
        }
        let h = self.heads(x);
        let row0 = nj + self.net.loops.len();
        for (k, p) in self.net.pipes.iter().enumerate() {
            let up = self.net.loss(k, x[k], self.leaks[k].position * p.length);
            f[row0 + k] = x[np + k] - (h[p.from] - up);
        }
        let mut norm = 0.0f64;
        for (i, v) in f.iter().enumerate() {
            let scale = if i < nj { self.mass_scale } else { self.head_scale };
            norm = norm.max((v / scale).abs());
        }
        if !norm.is_finite() {
            norm = f64::INFINITY;
        }
        Eval { f, norm }
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let np = self.np();
        let nj = self.net.node_ids.len() - 1;
        let mut jac = DMatrix::zeros(2 * np, 2 * np);
        // dH_k / dQ_k and dH_k / dh_k
        let mut a = vec![0.0; np];
        let mut b = vec![0.0; np];
        let mut ds = vec![0.0; np];
        for (k, p) in self.net.pipes.iter().enumerate() {
            let d = self.leaks[k].position;
            let h = x[np + k];
            let s = self.leak_flow(k, h);
            ds[k] = self.leak_flow_dh(k, h);
            let down = self.net.loss_dq(k, x[k] - s, (1.0 - d) * p.length);
            a[k] = self.net.loss_dq(k, x[k], d * p.length) + down;
            b[k] = -down * ds[k];
        }
        for (k, p) in self.net.pipes.iter().enumerate() {
            if p.to != 0 {
                jac[(p.to - 1, k)] += 1.0;
                jac[(p.to - 1, np + k)] -= ds[k];
            }
            if p.from != 0 {
                jac[(p.from - 1, k)] -= 1.0;
            }
        }
        for (i, lp) in self.net.loops.iter().enumerate() {
            for &(k, sg) in lp {
                jac[(nj + i, k)] += sg * a[k];
                jac[(nj + i, np + k)] += sg * b[k];
            }
        }
        let row0 = nj + self.net.loops.len();
        for (k, p) in self.net.pipes.iter().enumerate() {
            let r = row0 + k;
            jac[(r, np + k)] += 1.0;
            jac[(r, k)] += self.net.loss_dq(k, x[k], self.leaks[k].position * p.length);
            // -H[from] = -H_res + sum s * dH
            for &(q, sg) in &self.net.paths[p.from] {
                jac[(r, q)] += sg * a[q];
                jac[(r, np + q)] += sg * b[q];
            }
        }
        jac
    }

    /// Leak-free tree flows from mass balance with uniform chord flows.
    fn initial_guess(&self) -> DVector<f64> {
        let np = self.np();
        let n = self.net.node_ids.len();
        let total: f64 = self.demand.iter().sum();
        let chord = total / np as f64;
        let mut x = DVector::zeros(2 * np);
        let mut is_tree = vec![false; np];
        for &v in &self.net.bfs {
            is_tree[self.net.parent[v].0] = true;
        }
        let mut out = self.demand.clone();
        for (k, p) in self.net.pipes.iter().enumerate() {
            if !is_tree[k] {
                x[k] = chord;
                out[p.from] += chord;
                out[p.to] -= chord;
            }
        }
        for &v in self.net.bfs.iter().rev() {
            let (k, u, sign) = self.net.parent[v];
            x[k] = sign * out[v];
            out[u] += out[v];
        }
        debug_assert_eq!(out.len(), n);
        let h = self.heads(&x);
        for (k, p) in self.net.pipes.iter().enumerate() {
            x[np + k] = h[p.from] - self.net.loss(k, x[k], self.leaks[k].position * p.length);
        }
        x
    }
}

fn check_inputs(net: &Network, demand_factors: &[f64], leaks: &[LeakParams]) -> Result<()> {
    if demand_factors.len() != net.n_junctions() {
        return Err(HydroError::Dimension {
            what: "demand factors",
            expected: net.n_junctions(),
            got: demand_factors.len(),
        });
    }
    if leaks.len() != net.n_pipes() {
        return Err(HydroError::Dimension { what: "leaks", expected: net.n_pipes(), got: leaks.len() });
    }
    if let Some(l) = leaks
        .iter()
        .find(|l| !(l.coeff.is_finite() && l.coeff >= 0.0 && (0.0..=1.0).contains(&l.position)))
    {
        return Err(HydroError::Data(format!("invalid leak {l:?}")));
    }
    Ok(())
}

fn system<'a>(net: &'a Network, demand_factors: &[f64], leaks: &'a [LeakParams]) -> System<'a> {
    let mut demand = vec![0.0; net.node_ids.len()];
    for (j, f) in demand_factors.iter().enumerate() {
        demand[j + 1] = f * net.demand_m3s[j + 1];
    }
    let total: f64 = demand.iter().map(|d| d.abs()).sum();
    System {
        net,
        demand,
        leaks,
        mass_scale: if total > 0.0 { total } else { 1.0 },
        head_scale: net.reservoir_head,
    }
}

/// Steady-state flows and heads for scaled demands and leaks.
///
/// Newton's method with an analytic Jacobian and step halving. A solve
/// that fails to converge is returned with `converged = false`.
pub fn solve_network(
    net: &Network,
    demand_factors: &[f64],
    leaks: &[LeakParams],
    opts: &SolveOptions,
) -> Result<HydraulicState> {
    check_inputs(net, demand_factors, leaks)?;
    let sys = system(net, demand_factors, leaks);
    let np = net.n_pipes();
    let mut x = sys.initial_guess();
    let mut cur = sys.residual(&x);
    let mut iterations = 0;
    while cur.norm >= opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let jac = sys.jacobian(&x);
        let Some(step) = jac.lu().solve(&(-&cur.f)) else { break };
        let mut lambda = 1.0;
        let mut trial = &x + &step;
        let mut next = sys.residual(&trial);
        let mut halvings = 0;
        while !(next.norm <= cur.norm) && halvings < opts.max_halvings {
            lambda *= 0.5;
            trial = &x + &step * lambda;
            next = sys.residual(&trial);
            halvings += 1;
        }
        if !next.norm.is_finite() {
            break;
        }
        x = trial;
        cur = next;
    }
    let converged = cur.norm < opts.tol;
    let h = sys.heads(&x);
    Ok(HydraulicState {
        converged,
        iterations,
        residual: cur.norm,
        flows_m3h: (0..np).map(|k| x[k] * 3600.0).collect(),
        leak_flows_m3h: (0..np).map(|k| sys.leak_flow(k, x[np + k]) * 3600.0).collect(),
        leak_heads_m: (0..np).map(|k| x[np + k]).collect(),
        node_heads_m: h[1..].to_vec(),
    })
}

/// Recompute mass, loop and leak-head residuals from a reported state.
pub fn residuals(
    net: &Network,
    demand_factors: &[f64],
    leaks: &[LeakParams],
    state: &HydraulicState,
) -> Result<Residuals> {
    check_inputs(net, demand_factors, leaks)?;
    let sys = system(net, demand_factors, leaks);
    let np = net.n_pipes();
    let mut x = DVector::zeros(2 * np);
    for k in 0..np {
        x[k] = state.flows_m3h[k] / 3600.0;
        x[np + k] = state.leak_heads_m[k];
    }
    let e = sys.residual(&x);
    let nj = net.n_junctions();
    let nl = net.n_loops();
    let amax = |r: std::ops::Range<usize>| r.map(|i| e.f[i].abs()).fold(0.0, f64::max);
    Ok(Residuals { mass: amax(0..nj), head: amax(nj..nj + nl), leak: amax(nj + nl..2 * np) })
}
