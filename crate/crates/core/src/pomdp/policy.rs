use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::spec::{PomdpSpec, ROW_SUM_TOLERANCE};
use crate::error::{ensure, Result};

/// A stationary stochastic policy `π(a | o)` stored as a dense table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub id: String,
    /// `table[o][a]`
    pub table: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(id: impl Into<String>, table: Vec<Vec<f64>>) -> Self {
        Policy {
            id: id.into(),
            table,
        }
    }

    /// One action per observation.
    pub fn deterministic(id: impl Into<String>, actions: &[usize], n_actions: usize) -> Self {
        let table = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Policy::new(id, table)
    }

    /// Deterministic policy with an id built from the chosen action names.
    pub fn deterministic_named(spec: &PomdpSpec, actions: &[usize]) -> Self {
        let id = actions
            .iter()
            .map(|&a| spec.actions()[a].as_str())
            .collect::<Vec<_>>()
            .join(",");
        Policy::deterministic(format!("det[{id}]"), actions, spec.n_actions())
    }

    pub fn uniform(id: impl Into<String>, n_obs: usize, n_actions: usize) -> Self {
        Policy::new(id, vec![vec![1.0 / n_actions as f64; n_actions]; n_obs])
    }

    pub fn row(&self, obs: usize) -> &[f64] {
        &self.table[obs]
    }

    /// Action chosen on each observation, if the policy is deterministic.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        self.table
            .iter()
            .map(|row| {
                let mut it = row.iter().enumerate().filter(|(_, p)| **p != 0.0);
                match (it.next(), it.next()) {
                    (Some((a, p)), None) if *p == 1.0 => Some(a),
                    _ => None,
                }
            })
            .collect()
    }

    /// Checks shape and stochasticity against `spec`.
    pub fn validate_for(&self, spec: &PomdpSpec) -> Result<()> {
        ensure!(
            self.table.len() == spec.n_observations(),
            "policy `{}` has {} rows but the spec has {} observations",
            self.id,
            self.table.len(),
            spec.n_observations()
        );
        for (o, row) in self.table.iter().enumerate() {
            ensure!(
                row.len() == spec.n_actions(),
                "policy `{}` row {o} has {} entries but the spec has {} actions",
                self.id,
                row.len(),
                spec.n_actions()
            );
            let mut sum = 0.0;
            for &p in row {
                ensure!(
                    p.is_finite() && (0.0..=1.0).contains(&p),
                    "policy `{}` row {o} has probability {p} outside [0,1]",
                    self.id
                );
                sum += p;
            }
            ensure!(
                (sum - 1.0).abs() <= ROW_SUM_TOLERANCE,
                "policy `{}` row {o} sums to {sum}",
                self.id
            );
        }
        Ok(())
    }

    /// Ordering used for reproducible tie-breaks: rows are compared in
    /// observation order, and within a row the policy putting more mass on an
    /// earlier action sorts first. For deterministic policies this is the
    /// lexicographic order of the chosen action indices.
    pub fn table_cmp(&self, other: &Policy) -> Ordering {
        for (a, b) in self.table.iter().zip(&other.table) {
            for (x, y) in a.iter().zip(b) {
                match y.total_cmp(x) {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
        }
        self.table.len().cmp(&other.table.len())
    }
}
