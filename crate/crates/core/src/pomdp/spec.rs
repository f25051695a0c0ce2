use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Tolerance on row sums when a kernel is loaded.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A sparse probability row: `(index, probability)` pairs in ascending index
/// order with zero entries dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Row(Vec<(usize, f64)>);

impl Row {
    pub fn point(index: usize) -> Self {
        Row(vec![(index, 1.0)])
    }

    pub fn dense(probs: &[f64]) -> Self {
        Row(probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != 0.0)
            .map(|(i, p)| (i, *p))
            .collect())
    }

    /// Builds a row from arbitrary pairs; duplicate indices are summed.
    pub fn sparse(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, p) in pairs {
            *acc.entry(i).or_insert(0.0) += p;
        }
        Row(acc.into_iter().filter(|(_, p)| *p != 0.0).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Row((0..n).map(|i| (i, 1.0 / n as f64)).collect())
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.0
    }

    pub fn support_len(&self) -> usize {
        self.0.len()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.0
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|k| self.0[k].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, p) in &self.0 {
            out[i] = p;
        }
        out
    }

    fn validate(&self, len: usize, what: &str) -> Result<()> {
        let mut sum = 0.0;
        for &(i, p) in &self.0 {
            ensure!(i < len, "{what}: index {i} out of range (size {len})");
            ensure!(
                p.is_finite() && (0.0..=1.0).contains(&p),
                "{what}: probability {p} at index {i} outside [0,1]"
            );
            sum += p;
        }
        ensure!(
            (sum - 1.0).abs() <= ROW_SUM_TOLERANCE,
            "{what}: row sums to {sum}, expected 1 within {ROW_SUM_TOLERANCE:e}"
        );
        Ok(())
    }
}

/// A finite-horizon partially observed decision process.
///
/// Transitions condition on a window of the last `window` (state, action)
/// pairs. Steps that have fewer than `window` predecessors use the kernel for
/// the history length actually available, so `transition[j - 1]` holds the
/// rows for histories of length `j`, indexed by [`PomdpSpec::history_index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub struct PomdpSpec {
    id: String,
    states: Vec<String>,
    observations: Vec<String>,
    actions: Vec<String>,
    initial: Row,
    window: usize,
    transition: Vec<Vec<Row>>,
    observation: Vec<Row>,
    horizon: usize,
}

/// Constructor arguments for [`PomdpSpec::new`].
#[derive(Debug, Clone)]
pub struct SpecParts {
    pub id: String,
    pub states: Vec<String>,
    pub observations: Vec<String>,
    pub actions: Vec<String>,
    pub initial: Row,
    pub window: usize,
    pub transition: Vec<Vec<Row>>,
    pub observation: Vec<Row>,
    pub horizon: usize,
}

impl SpecParts {
    /// Markov (window 1) parts with `transition[s][a]` rows.
    #[allow(clippy::too_many_arguments)]
    pub fn markov(
        id: impl Into<String>,
        states: Vec<String>,
        observations: Vec<String>,
        actions: Vec<String>,
        initial: Row,
        transition: Vec<Vec<Row>>,
        observation: Vec<Row>,
        horizon: usize,
    ) -> Self {
        let flat = transition.into_iter().flatten().collect();
        SpecParts {
            id: id.into(),
            states,
            observations,
            actions,
            initial,
            window: 1,
            transition: vec![flat],
            observation,
            horizon,
        }
    }
}

fn check_names(names: &[String], what: &str) -> Result<()> {
    ensure!(!names.is_empty(), "{what} set is empty");
    let mut seen = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if let Some(j) = seen.insert(n.as_str(), i) {
            return Err(Error::invalid(format!(
                "{what} name `{n}` repeated at indices {j} and {i}"
            )));
        }
    }
    Ok(())
}

impl PomdpSpec {
    pub fn new(parts: SpecParts) -> Result<Self> {
        let SpecParts {
            id,
            states,
            observations,
            actions,
            initial,
            window,
            transition,
            observation,
            horizon,
        } = parts;
        check_names(&states, "state")?;
        check_names(&observations, "observation")?;
        check_names(&actions, "action")?;
        ensure!(horizon >= 1, "horizon must be at least 1");
        ensure!(
            window >= 1 && window <= horizon,
            "window {window} must lie in 1..=horizon ({horizon})"
        );
        let n_s = states.len();
        initial.validate(n_s, "initial distribution")?;
        ensure!(
            transition.len() == window,
            "expected {window} transition kernels (one per history length), got {}",
            transition.len()
        );
        let pair = (n_s as u128) * (actions.len() as u128);
        for (j, kernel) in transition.iter().enumerate() {
            let want = pair.checked_pow(j as u32 + 1);
            ensure!(
                want == Some(kernel.len() as u128),
                "transition kernel for history length {} has {} rows, expected {:?}",
                j + 1,
                kernel.len(),
                want
            );
            for (r, row) in kernel.iter().enumerate() {
                row.validate(n_s, &format!("transition[{}][{r}]", j + 1))?;
            }
        }
        ensure!(
            observation.len() == n_s,
            "observation kernel has {} rows, expected {n_s}",
            observation.len()
        );
        for (s, row) in observation.iter().enumerate() {
            row.validate(observations.len(), &format!("observation[{}]", states[s]))?;
        }
        Ok(PomdpSpec {
            id,
            states,
            observations,
            actions,
            initial,
            window,
            transition,
            observation,
            horizon,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn states(&self) -> &[String] {
        &self.states
    }
    pub fn observations(&self) -> &[String] {
        &self.observations
    }
    pub fn actions(&self) -> &[String] {
        &self.actions
    }
    pub fn n_states(&self) -> usize {
        self.states.len()
    }
    pub fn n_observations(&self) -> usize {
        self.observations.len()
    }
    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn window(&self) -> usize {
        self.window
    }
    pub fn initial(&self) -> &Row {
        &self.initial
    }
    pub fn observation_row(&self, state: usize) -> &Row {
        &self.observation[state]
    }

    /// Same process with a different horizon. Fails if the window no longer fits.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        ensure!(
            horizon >= self.window,
            "horizon {horizon} shorter than window {}",
            self.window
        );
        let mut out = self.clone();
        out.horizon = horizon;
        Ok(out)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Row index of a history of (state, action) pairs, oldest first.
    pub fn history_index(&self, history: &[(usize, usize)]) -> usize {
        let n_a = self.actions.len();
        let base = self.states.len() * n_a;
        history
            .iter()
            .fold(0usize, |acc, &(s, a)| acc * base + s * n_a + a)
    }

    /// Distribution of the next state given the full (state, action) history so
    /// far; only the last `window` pairs are consulted.
    pub fn next_state_row(&self, history: &[(usize, usize)]) -> &Row {
        debug_assert!(!history.is_empty());
        let start = history.len().saturating_sub(self.window);
        let recent = &history[start..];
        &self.transition[recent.len() - 1][self.history_index(recent)]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }
    pub fn observation_index(&self, name: &str) -> Option<usize> {
        self.observations.iter().position(|s| s == name)
    }
    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|s| s == name)
    }

    /// Largest support among rows of each kernel: (initial, transition, observation).
    pub fn max_supports(&self) -> (usize, usize, usize) {
        let t = self
            .transition
            .iter()
            .flatten()
            .map(Row::support_len)
            .max()
            .unwrap_or(0);
        let o = self
            .observation
            .iter()
            .map(Row::support_len)
            .max()
            .unwrap_or(0);
        (self.initial.support_len(), t, o)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// JSON row: either a dense array in index order or an object keyed by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RowDoc {
    Dense(Vec<f64>),
    Sparse(BTreeMap<String, f64>),
}

impl RowDoc {
    fn encode(row: &Row, names: &[String]) -> Self {
        if row.support_len() * 4 < names.len() {
            RowDoc::Sparse(
                row.entries()
                    .iter()
                    .map(|&(i, p)| (names[i].clone(), p))
                    .collect(),
            )
        } else {
            RowDoc::Dense(row.to_dense(names.len()))
        }
    }

    fn decode(self, names: &[String], what: &str) -> Result<Row> {
        match self {
            RowDoc::Dense(v) => {
                ensure!(
                    v.len() == names.len(),
                    "{what}: dense row has {} entries, expected {}",
                    v.len(),
                    names.len()
                );
                Ok(Row::dense(&v))
            }
            RowDoc::Sparse(map) => {
                let mut pairs = Vec::with_capacity(map.len());
                for (name, p) in map {
                    let i = names.iter().position(|n| *n == name).ok_or_else(|| {
                        Error::invalid(format!("{what}: unknown name `{name}`"))
                    })?;
                    pairs.push((i, p));
                }
                Ok(Row::sparse(pairs))
            }
        }
    }
}

/// On-disk schema of a [`PomdpSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecDoc {
    #[serde(default)]
    id: String,
    states: Vec<String>,
    observations: Vec<String>,
    actions: Vec<String>,
    horizon: usize,
    #[serde(default = "default_window")]
    window: usize,
    initial: RowDoc,
    /// One list of rows per history length `1..=window`.
    transition: Vec<Vec<RowDoc>>,
    observation_kernel: Vec<RowDoc>,
}

fn default_window() -> usize {
    1
}

impl From<PomdpSpec> for SpecDoc {
    fn from(s: PomdpSpec) -> Self {
        SpecDoc {
            initial: RowDoc::encode(&s.initial, &s.states),
            transition: s
                .transition
                .iter()
                .map(|k| k.iter().map(|r| RowDoc::encode(r, &s.states)).collect())
                .collect(),
            observation_kernel: s
                .observation
                .iter()
                .map(|r| RowDoc::encode(r, &s.observations))
                .collect(),
            id: s.id,
            states: s.states,
            observations: s.observations,
            actions: s.actions,
            horizon: s.horizon,
            window: s.window,
        }
    }
}

impl TryFrom<SpecDoc> for PomdpSpec {
    type Error = Error;

    fn try_from(d: SpecDoc) -> Result<Self> {
        let initial = d.initial.decode(&d.states, "initial")?;
        let transition = d
            .transition
            .into_iter()
            .enumerate()
            .map(|(j, k)| {
                k.into_iter()
                    .enumerate()
                    .map(|(r, row)| row.decode(&d.states, &format!("transition[{}][{r}]", j + 1)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let observation = d
            .observation_kernel
            .into_iter()
            .enumerate()
            .map(|(s, row)| row.decode(&d.observations, &format!("observation_kernel[{s}]")))
            .collect::<Result<Vec<_>>>()?;
        PomdpSpec::new(SpecParts {
            id: d.id,
            states: d.states,
            observations: d.observations,
            actions: d.actions,
            initial,
            window: d.window,
            transition,
            observation,
            horizon: d.horizon,
        })
    }
}
