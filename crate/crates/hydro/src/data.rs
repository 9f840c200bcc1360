use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HydroError, Result};
use crate::network::Network;
use crate::solver::{solve_network, LeakParams, SolveOptions};

/// One known loading condition: demand factors in network junction order.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub id: u32,
    pub demand_factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub condition_id: u32,
    pub node_id: u32,
    pub observed_head_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConditionRow {
    condition_id: u32,
    node_id: u32,
    demand_factor: f64,
}

/// Head observations under known demand conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub conditions: Vec<Condition>,
    pub observations: Vec<Observation>,
}

impl Dataset {
    pub fn validate(&self, net: &Network) -> Result<()> {
        let mut ids = HashSet::new();
        for c in &self.conditions {
            if !ids.insert(c.id) {
                return Err(HydroError::Data(format!("duplicate condition {}", c.id)));
            }
            if c.demand_factors.len() != net.n_junctions() {
                return Err(HydroError::Data(format!(
                    "condition {} has {} demand factors, expected {}",
                    c.id,
                    c.demand_factors.len(),
                    net.n_junctions()
                )));
            }
        }
        for o in &self.observations {
            if !ids.contains(&o.condition_id) {
                return Err(HydroError::Data(format!("observation for unknown condition {}", o.condition_id)));
            }
            if net.junction_index(o.node_id).is_none() {
                return Err(HydroError::Data(format!("observation at unknown node {}", o.node_id)));
            }
            if !o.observed_head_m.is_finite() {
                return Err(HydroError::Data(format!("non-finite head at node {}", o.node_id)));
            }
        }
        if self.observations.is_empty() {
            return Err(HydroError::Data("no observations".into()));
        }
        Ok(())
    }

    /// Read `condition_id,node_id,observed_head_m` and
    /// `condition_id,node_id,demand_factor` files.
    pub fn read(observations: impl AsRef<Path>, conditions: impl AsRef<Path>, net: &Network) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(observations)?;
        let obs = rdr.deserialize().collect::<std::result::Result<Vec<Observation>, _>>()?;
        let mut rdr = csv::Reader::from_path(conditions)?;
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<ConditionRow>, _>>()?;
        let mut by_id: BTreeMap<u32, Vec<Option<f64>>> = BTreeMap::new();
        for r in rows {
            let j = net
                .junction_index(r.node_id)
                .ok_or_else(|| HydroError::Data(format!("condition row at unknown node {}", r.node_id)))?;
            by_id.entry(r.condition_id).or_insert_with(|| vec![None; net.n_junctions()])[j] =
                Some(r.demand_factor);
        }
        let mut conds = Vec::new();
        for (id, f) in by_id {
            let factors = f
                .into_iter()
                .enumerate()
                .map(|(j, v)| {
                    v.ok_or_else(|| {
                        HydroError::Data(format!(
                            "condition {id} lacks a factor for node {}",
                            net.junction_ids()[j]
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            conds.push(Condition { id, demand_factors: factors });
        }
        let d = Self { conditions: conds, observations: obs };
        d.validate(net)?;
        Ok(d)
    }

    pub fn write(&self, observations: impl AsRef<Path>, conditions: impl AsRef<Path>, net: &Network) -> Result<()> {
        let o = std::fs::File::create(observations)?;
        let c = std::fs::File::create(conditions)?;
        self.write_to(o, c, net)
    }

    /// Write both CSV tables to arbitrary sinks.
    pub fn write_to<O: Write, C: Write>(&self, observations: O, conditions: C, net: &Network) -> Result<()> {
        let mut w = csv::Writer::from_writer(observations);
        for o in &self.observations {
            w.serialize(o)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(conditions);
        for c in &self.conditions {
            for (id, f) in net.junction_ids().iter().zip(&c.demand_factors) {
                w.serialize(ConditionRow { condition_id: c.id, node_id: *id, demand_factor: *f })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Synthetic leak scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    /// One large leak on a pipe feeding the weakest part of the network,
    /// small background leaks elsewhere.
    LargeLeak,
    /// Small leaks everywhere.
    SmallLeaks,
}

/// Pipe carrying the large leak: the branch from node 58 to 60, at the far
/// end of the most head-limited loop.
const LARGE_LEAK_PIPE: u32 = 59;
const LARGE_LEAK_COEFF: f64 = 0.012;

impl Case {
    /// True leak configuration. Background leak sizes are drawn from an
    /// exponential with mean 0.0005 and positions uniformly, using `seed`.
    pub fn truth(self, net: &Network, seed: u64) -> Vec<LeakParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exp = Exp::new(1.0).expect("unit rate");
        let mut leaks: Vec<LeakParams> = (0..net.n_pipes())
            .map(|_| LeakParams {
                coeff: 0.0005 * exp.sample(&mut rng),
                position: rng.random::<f64>(),
            })
            .collect();
        if self == Case::LargeLeak {
            if let Some(k) = net.pipe_ids().iter().position(|&id| id == LARGE_LEAK_PIPE) {
                leaks[k] = LeakParams { coeff: LARGE_LEAK_COEFF, position: 0.5 };
            }
        }
        leaks
    }
}

/// Heads for `leaks` under `n_conditions` demand conditions drawn from the
/// demand prior, plus Gaussian noise of `sigma_m`.
pub fn synthetic_dataset(
    net: &Network,
    leaks: &[LeakParams],
    n_conditions: usize,
    sigma_m: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let demand = Normal::new(0.75, 0.15).expect("valid normal");
    let noise = Normal::new(0.0, sigma_m).map_err(|e| HydroError::Data(e.to_string()))?;
    let mut conditions = Vec::new();
    let mut observations = Vec::new();
    let mut attempts = 0;
    while conditions.len() < n_conditions {
        attempts += 1;
        if attempts > 100 * n_conditions.max(1) {
            return Err(HydroError::Data("could not generate converged conditions".into()));
        }
        let factors: Vec<f64> = (0..net.n_junctions()).map(|_| demand.sample(&mut rng)).collect();
        let st = solve_network(net, &factors, leaks, &SolveOptions::default())?;
        if !st.converged {
            continue;
        }
        let id = conditions.len() as u32 + 1;
        for (node, h) in net.junction_ids().iter().zip(&st.node_heads_m) {
            observations.push(Observation {
                condition_id: id,
                node_id: *node,
                observed_head_m: h + noise.sample(&mut rng),
            });
        }
        conditions.push(Condition { id, demand_factors: factors });
    }
    Ok(Dataset { conditions, observations })
}
