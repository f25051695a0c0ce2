use std::fmt;
use std::sync::Arc;

type VerifierFn = dyn Fn(&[usize]) -> bool + Send + Sync;

/// Binary judgment over state sequences: `true` means aligned.
#[derive(Clone)]
pub struct Verifier {
    id: String,
    eval: Arc<VerifierFn>,
}

impl fmt::Debug for Verifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Verifier({})", self.id)
    }
}

impl Verifier {
    pub fn new(
        id: impl Into<String>,
        eval: impl Fn(&[usize]) -> bool + Send + Sync + 'static,
    ) -> Self {
        Verifier {
            id: id.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(aligned: bool) -> Self {
        let id = if aligned { "always_aligned" } else { "never_aligned" };
        Verifier::new(id, move |_| aligned)
    }

    /// Aligned iff no state in `bad` is ever visited.
    pub fn avoids(id: impl Into<String>, bad: Vec<usize>) -> Self {
        Verifier::new(id, move |states| !states.iter().any(|s| bad.contains(s)))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_aligned(&self, states: &[usize]) -> bool {
        (self.eval)(states)
    }
}
