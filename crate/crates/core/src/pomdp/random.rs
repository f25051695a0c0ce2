//! Seeded generators of small random specs and policies, for property tests
//! and the acceptance suite.

use rand::Rng;

use super::policy::Policy;
use super::sim::rng_from_seed;
use super::spec::{PomdpSpec, Row, SpecParts};

/// Shape of a generated spec.
#[derive(Debug, Clone, Copy)]
pub struct RandomShape {
    pub states: usize,
    pub observations: usize,
    pub actions: usize,
    pub horizon: usize,
    pub window: usize,
    /// Probability that an entry of a transition row is forced to zero.
    pub sparsity: f64,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            states: 3,
            observations: 3,
            actions: 2,
            horizon: 3,
            window: 1,
            sparsity: 0.0,
        }
    }
}

/// Random probability vector of length `n`; at least one entry is nonzero and
/// the entries sum to 1 up to rounding.
pub fn random_row<R: Rng>(rng: &mut R, n: usize, sparsity: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < sparsity {
                0.0
            } else {
                rng.gen::<f64>() + 0.05
            }
        })
        .collect();
    if w.iter().all(|x| *x == 0.0) {
        let k = rng.gen_range(0..n);
        w[k] = 1.0;
    }
    let total: f64 = w.iter().sum();
    let mut row: Vec<f64> = w.iter().map(|x| x / total).collect();
    // push the rounding residue onto the largest entry
    let residue = 1.0 - row.iter().sum::<f64>();
    let (k, _) = row
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("n >= 1");
    row[k] += residue;
    row
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn random_spec(seed: u64, shape: RandomShape) -> PomdpSpec {
    let mut rng = rng_from_seed(seed);
    let pair = shape.states * shape.actions;
    let transition = (1..=shape.window)
        .map(|j| {
            (0..pair.pow(j as u32))
                .map(|_| Row::dense(&random_row(&mut rng, shape.states, shape.sparsity)))
                .collect()
        })
        .collect();
    let observation = (0..shape.states)
        .map(|_| Row::dense(&random_row(&mut rng, shape.observations, 0.3)))
        .collect();
    PomdpSpec::new(SpecParts {
        id: format!("random-{seed}"),
        states: names("s", shape.states),
        observations: names("o", shape.observations),
        actions: names("a", shape.actions),
        initial: Row::dense(&random_row(&mut rng, shape.states, 0.0)),
        window: shape.window,
        transition,
        observation,
        horizon: shape.horizon,
    })
    .expect("generated spec is valid")
}

pub fn random_policy(seed: u64, spec: &PomdpSpec) -> Policy {
    let mut rng = rng_from_seed(seed ^ 0x5EED);
    let table = (0..spec.n_observations())
        .map(|_| random_row(&mut rng, spec.n_actions(), 0.2))
        .collect();
    Policy::new(format!("random-policy-{seed}"), table)
}

/// Random per-step table `r[s][a]` in `[0, 1)`, used for averaged rewards.
pub fn random_step_table(seed: u64, spec: &PomdpSpec) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed ^ 0xAB5E_ED00);
    (0..spec.n_states())
        .map(|_| (0..spec.n_actions()).map(|_| rng.gen::<f64>()).collect())
        .collect()
}
