//! Policy search over finite classes: exhaustive exact evaluation, and a
//! seeded hill-climbing fallback for classes too large to enumerate.

mod class;
mod search;

pub use class::PolicyClassSpec;
pub use search::{
    exact_policy_search, hill_climb_search, ExactSearchOptions, HillClimbConfig, SearchMethod,
    SearchResult, TIE_TOLERANCE,
};
