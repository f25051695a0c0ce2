use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::pomdp::{Policy, PomdpSpec};

/// A finite policy class `Π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PolicyClassSpec {
    /// Every deterministic observation → action table; `|A|^|O|` members.
    AllDeterministic,
    Explicit { policies: Vec<Policy> },
    /// Every table whose rows have entries in multiples of `1/resolution`.
    StochasticGrid { resolution: u32 },
}

/// Probability rows with entries `k/resolution`, ordered so that rows with
/// more mass on earlier actions come first.
pub(crate) fn grid_rows(n_actions: usize, resolution: u32) -> Vec<Vec<f64>> {
    fn rec(left: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(left - k, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(resolution, n_actions, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|r| r.into_iter().map(|k| k as f64 / resolution as f64).collect())
        .collect()
}

impl PolicyClassSpec {
    pub fn validate_for(&self, spec: &PomdpSpec) -> Result<()> {
        match self {
            PolicyClassSpec::AllDeterministic => Ok(()),
            PolicyClassSpec::Explicit { policies } => {
                ensure!(!policies.is_empty(), "explicit policy class is empty");
                policies.iter().try_for_each(|p| p.validate_for(spec))
            }
            PolicyClassSpec::StochasticGrid { resolution } => {
                ensure!(*resolution >= 1, "grid resolution must be at least 1");
                Ok(())
            }
        }
    }

    /// Row choices per observation for product-form classes.
    pub(crate) fn row_options(&self, spec: &PomdpSpec) -> Option<Vec<Vec<f64>>> {
        match self {
            PolicyClassSpec::AllDeterministic => Some(
                (0..spec.n_actions())
                    .map(|a| {
                        let mut r = vec![0.0; spec.n_actions()];
                        r[a] = 1.0;
                        r
                    })
                    .collect(),
            ),
            PolicyClassSpec::StochasticGrid { resolution } => {
                Some(grid_rows(spec.n_actions(), *resolution))
            }
            PolicyClassSpec::Explicit { .. } => None,
        }
    }

    /// Number of members (saturating).
    pub fn size(&self, spec: &PomdpSpec) -> u128 {
        match self.row_options(spec) {
            Some(rows) => (rows.len() as u128)
                .checked_pow(spec.n_observations() as u32)
                .unwrap_or(u128::MAX),
            None => match self {
                PolicyClassSpec::Explicit { policies } => policies.len() as u128,
                _ => unreachable!(),
            },
        }
    }

    /// Member at `index`. Product-form classes are indexed in table order
    /// (first observation most significant).
    pub fn policy_at(&self, spec: &PomdpSpec, index: u128) -> Result<Policy> {
        let size = self.size(spec);
        ensure!(index < size, "policy index {index} out of range (class size {size})");
        match self {
            PolicyClassSpec::Explicit { policies } => Ok(policies[index as usize].clone()),
            _ => {
                let rows = self.row_options(spec).expect("product class");
                let coords = index_to_coords(index, rows.len(), spec.n_observations());
                Ok(self.policy_from_coords(spec, &rows, &coords))
            }
        }
    }

    pub(crate) fn policy_from_coords(&self, spec: &PomdpSpec, rows: &[Vec<f64>], coords: &[usize]) -> Policy {
        match self {
            PolicyClassSpec::AllDeterministic => Policy::deterministic_named(spec, coords),
            PolicyClassSpec::StochasticGrid { resolution } => {
                let id = coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
                Policy::new(
                    format!("grid{resolution}[{id}]"),
                    coords.iter().map(|&c| rows[c].clone()).collect(),
                )
            }
            PolicyClassSpec::Explicit { .. } => unreachable!("explicit classes have no coordinates"),
        }
    }

    /// All members, in index order.
    pub fn policies(&self, spec: &PomdpSpec) -> Result<Vec<Policy>> {
        let size = self.size(spec);
        ensure!(
            size <= 50_000_000,
            "policy class of size {size} is too large to materialise"
        );
        (0..size).map(|i| self.policy_at(spec, i)).collect()
    }
}

pub(crate) fn index_to_coords(mut index: u128, base: usize, len: usize) -> Vec<usize> {
    let mut coords = vec![0; len];
    for slot in coords.iter_mut().rev() {
        *slot = (index % base as u128) as usize;
        index /= base as u128;
    }
    coords
}

impl From<Vec<Policy>> for PolicyClassSpec {
    fn from(policies: Vec<Policy>) -> Self {
        PolicyClassSpec::Explicit { policies }
    }
}

pub(crate) fn capacity(bound: String, value: f64, cap: f64) -> Error {
    Error::Capacity {
        bound,
        value,
        cap,
        hint: "; use hill_climb_search for approximate search".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::random::{random_spec, RandomShape};

    #[test]
    fn grid_rows_count_and_order() {
        let rows = grid_rows(3, 2);
        // C(2 + 2, 2) = 6
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(rows[5], vec![0.0, 0.0, 1.0]);
        for w in rows.windows(2) {
            let a = Policy::new("a", vec![w[0].clone()]);
            let b = Policy::new("b", vec![w[1].clone()]);
            assert!(a.table_cmp(&b).is_lt());
        }
    }

    #[test]
    fn deterministic_class_size_and_order() {
        let spec = random_spec(1, RandomShape::default());
        let class = PolicyClassSpec::AllDeterministic;
        assert_eq!(class.size(&spec), 8);
        let all = class.policies(&spec).unwrap();
        for w in all.windows(2) {
            assert!(w[0].table_cmp(&w[1]).is_lt());
        }
        assert_eq!(all[5].as_deterministic(), Some(vec![1, 0, 1]));
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let spec = random_spec(1, RandomShape::default());
        assert!(PolicyClassSpec::AllDeterministic.policy_at(&spec, 8).is_err());
    }
}
