//! Learning from a finite dataset: empirical risk, ERM, and the reduction of
//! the data problem to a degenerate POMDP.
//!
//! In the reduction the observation is the instance `x`, the state is the
//! pair `(x, y)`, every hypothesis `h` becomes the deterministic policy
//! `π_h(a|o) = 1[h(o) = a]`, states are drawn i.i.d. from the training points
//! regardless of the action taken, and the sequence reward is the negated
//! average loss. The expected reward of `π_h` is then exactly minus the
//! empirical risk of `h`, and the state-sequence law is the same for every
//! policy.
//!
//! The dataset size is `m`; the reduction horizon `T` is a separate knob.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::pomdp::{Policy, PomdpSpec, Row, SequenceReward, SpecParts};

/// Training sample over finite instance and label sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub instances: Vec<String>,
    pub labels: Vec<String>,
    /// `(x, y)` index pairs.
    pub examples: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn m(&self) -> usize {
        self.examples.len()
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.instances.is_empty(), "dataset has no instances");
        ensure!(!self.labels.is_empty(), "dataset has no labels");
        ensure!(!self.examples.is_empty(), "dataset is empty (m = 0)");
        for (i, &(x, y)) in self.examples.iter().enumerate() {
            ensure!(
                x < self.instances.len(),
                "example {i}: instance index {x} out of range"
            );
            ensure!(y < self.labels.len(), "example {i}: label index {y} out of range");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    /// `map[x]` is the predicted label index.
    pub map: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisClass {
    pub hypotheses: Vec<Hypothesis>,
}

impl HypothesisClass {
    /// Every map `X → Y`, in lexicographic order of the label vector. Ids spell
    /// the vector, e.g. `h010`.
    pub fn all_maps(n_instances: usize, n_labels: usize) -> Self {
        let total = n_labels.pow(n_instances as u32);
        let hypotheses = (0..total)
            .map(|mut k| {
                let mut map = vec![0; n_instances];
                for slot in map.iter_mut().rev() {
                    *slot = k % n_labels;
                    k /= n_labels;
                }
                let id = format!(
                    "h{}",
                    map.iter().map(|y| y.to_string()).collect::<Vec<_>>().join("")
                );
                Hypothesis { id, map }
            })
            .collect();
        HypothesisClass { hypotheses }
    }

    pub fn validate_for(&self, data: &Dataset) -> Result<()> {
        ensure!(!self.hypotheses.is_empty(), "hypothesis class is empty");
        let mut seen = BTreeMap::new();
        for (i, h) in self.hypotheses.iter().enumerate() {
            if let Some(j) = seen.insert(h.id.as_str(), i) {
                return Err(Error::invalid(format!(
                    "hypothesis id `{}` repeated at {j} and {i}",
                    h.id
                )));
            }
            ensure!(
                h.map.len() == data.instances.len(),
                "hypothesis `{}` is defined on {} instances, dataset has {}",
                h.id,
                h.map.len(),
                data.instances.len()
            );
            ensure!(
                h.map.iter().all(|&y| y < data.labels.len()),
                "hypothesis `{}` predicts a label outside the label set",
                h.id
            );
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&Hypothesis> {
        self.hypotheses
            .iter()
            .find(|h| h.id == id)
            .ok_or_else(|| Error::invalid(format!("unknown hypothesis `{id}`")))
    }
}

type LossEval = dyn Fn(usize, usize, usize) -> f64 + Send + Sync;

/// Bounded loss `ℓ(x, y, ŷ) ∈ [0, max]`.
#[derive(Clone)]
pub struct LossFn {
    name: String,
    max: f64,
    eval: Arc<LossEval>,
}

impl fmt::Debug for LossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LossFn({}, max = {})", self.name, self.max)
    }
}

impl LossFn {
    pub fn new(
        name: impl Into<String>,
        max: f64,
        eval: impl Fn(usize, usize, usize) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        ensure!(max.is_finite() && max >= 0.0, "loss bound {max} is invalid");
        Ok(LossFn {
            name: name.into(),
            max,
            eval: Arc::new(eval),
        })
    }

    pub fn zero_one() -> Self {
        LossFn {
            name: "zero_one".into(),
            max: 1.0,
            eval: Arc::new(|_, y, yhat| if y == yhat { 0.0 } else { 1.0 }),
        }
    }

    /// `|y − ŷ|` on label indices, bounded by `n_labels − 1`.
    pub fn absolute_error(n_labels: usize) -> Self {
        LossFn {
            name: "absolute_error".into(),
            max: n_labels.saturating_sub(1) as f64,
            eval: Arc::new(|_, y, yhat| (y as f64 - yhat as f64).abs()),
        }
    }

    pub fn by_name(name: &str, n_labels: usize) -> Result<Self> {
        match name {
            "zero_one" => Ok(LossFn::zero_one()),
            "absolute_error" => Ok(LossFn::absolute_error(n_labels)),
            other => Err(Error::invalid(format!(
                "unknown loss `{other}` (expected zero_one or absolute_error)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn eval(&self, x: usize, y: usize, yhat: usize) -> Result<f64> {
        let v = (self.eval)(x, y, yhat);
        ensure!(
            v.is_finite() && v >= 0.0 && v <= self.max,
            "loss `{}` returned {v}, outside [0, {}]",
            self.name,
            self.max
        );
        Ok(v)
    }
}

fn risk_of(data: &Dataset, h: &Hypothesis, loss: &LossFn) -> Result<f64> {
    let mut total = 0.0;
    for &(x, y) in &data.examples {
        total += loss.eval(x, y, h.map[x])?;
    }
    Ok(total / data.m() as f64)
}

/// `(1/m) Σ ℓ(x_i, y_i, h(x_i))`.
pub fn empirical_risk(
    data: &Dataset,
    hypothesis_id: &str,
    class: &HypothesisClass,
    loss: &LossFn,
) -> Result<f64> {
    data.validate()?;
    class.validate_for(data)?;
    risk_of(data, class.get(hypothesis_id)?, loss)
}

/// Empirical risk of every hypothesis, in class order.
pub fn risk_vector(data: &Dataset, class: &HypothesisClass, loss: &LossFn) -> Result<Vec<f64>> {
    data.validate()?;
    class.validate_for(data)?;
    class.hypotheses.iter().map(|h| risk_of(data, h, loss)).collect()
}

/// Minimiser of the empirical risk; ties go to the earliest hypothesis.
pub fn erm_learn(data: &Dataset, class: &HypothesisClass, loss: &LossFn) -> Result<String> {
    let risks = risk_vector(data, class, loss)?;
    let mut best = 0;
    for (i, r) in risks.iter().enumerate() {
        if *r < risks[best] {
            best = i;
        }
    }
    Ok(class.hypotheses[best].id.clone())
}

/// Distribution from which reduction states are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StateSampling {
    /// Pick one of the `m` training points uniformly (duplicates add mass).
    UniformTrainingPoints,
    /// Explicit law over `X × Y`, row-major in `(x, y)`.
    Table { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub horizon: usize,
    pub sampling: StateSampling,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            horizon: 1,
            sampling: StateSampling::UniformTrainingPoints,
        }
    }
}

/// The RL problem equivalent to a data-learning problem.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub spec: PomdpSpec,
    /// One deterministic policy per hypothesis, in class order, keyed by id.
    pub policies: Vec<(String, Policy)>,
    pub reward: SequenceReward,
}

impl Reduction {
    pub fn policy(&self, hypothesis_id: &str) -> Option<&Policy> {
        self.policies
            .iter()
            .find(|(id, _)| id == hypothesis_id)
            .map(|(_, p)| p)
    }

    /// JSON manifest mapping hypothesis ids to policy tables.
    pub fn policy_manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "spec_id": self.spec.id(),
            "policies": self
                .policies
                .iter()
                .map(|(id, p)| (id.clone(), serde_json::to_value(p).expect("policy serializes")))
                .collect::<serde_json::Map<_, _>>(),
        })
    }
}

pub fn reduce_to_rl(
    data: &Dataset,
    class: &HypothesisClass,
    loss: &LossFn,
    config: &ReductionConfig,
) -> Result<Reduction> {
    data.validate()?;
    class.validate_for(data)?;
    ensure!(config.horizon >= 1, "reduction horizon must be at least 1");
    let n_x = data.instances.len();
    let n_y = data.labels.len();
    let state_of = |x: usize, y: usize| x * n_y + y;

    let law = match &config.sampling {
        StateSampling::UniformTrainingPoints => {
            let w = 1.0 / data.m() as f64;
            Row::sparse(data.examples.iter().map(|&(x, y)| (state_of(x, y), w)))
        }
        StateSampling::Table { probs } => {
            ensure!(
                probs.len() == n_x * n_y,
                "sampling table has {} entries, expected |X|·|Y| = {}",
                probs.len(),
                n_x * n_y
            );
            Row::dense(probs)
        }
    };

    let states: Vec<String> = (0..n_x)
        .flat_map(|x| (0..n_y).map(move |y| (x, y)))
        .map(|(x, y)| format!("({},{})", data.instances[x], data.labels[y]))
        .collect();
    let n_s = states.len();
    let spec = PomdpSpec::new(SpecParts::markov(
        "data-reduction",
        states,
        data.instances.clone(),
        data.labels.clone(),
        law.clone(),
        vec![vec![law; n_y]; n_s],
        (0..n_s).map(|s| Row::point(s / n_y)).collect(),
        config.horizon,
    ))?;

    let policies = class
        .hypotheses
        .iter()
        .map(|h| (h.id.clone(), Policy::deterministic(h.id.clone(), &h.map, n_y)))
        .collect();

    let horizon = config.horizon as f64;
    let loss_for_reward = loss.clone();
    let reward = SequenceReward::new(
        format!("neg_mean_{}", loss.name()),
        -loss.max(),
        0.0,
        move |traj| {
            let total: f64 = traj
                .steps
                .iter()
                .map(|st| {
                    let (x, y) = (st.state / n_y, st.state % n_y);
                    (loss_for_reward.eval)(x, y, st.action)
                })
                .sum();
            -total / horizon
        },
    )?;
    Ok(Reduction {
        spec,
        policies,
        reward,
    })
}

/// The shipped 8-hypothesis corpus: |X| = 3, |Y| = 2, m = 6, every map X → Y.
pub fn corpus() -> (Dataset, HypothesisClass) {
    let data = serde_json::from_str(include_str!("../data/corpus_dataset.json"))
        .expect("corpus dataset parses");
    let class = serde_json::from_str(include_str!("../data/corpus_class.json"))
        .expect("corpus class parses");
    (data, class)
}
