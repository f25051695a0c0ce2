//! Fair-coin state chain with identity observations. Actions have no effect.

use crate::alignment::{BufferedEnv, Verifier};
use crate::error::Result;
use crate::pomdp::{Policy, PomdpSpec, Row, SpecParts};

pub fn coin_chain(horizon: usize, n_actions: usize) -> Result<PomdpSpec> {
    let sides = vec!["heads".to_string(), "tails".to_string()];
    PomdpSpec::new(SpecParts::markov(
        "coin",
        sides.clone(),
        sides,
        (0..n_actions).map(|a| format!("a{a}")).collect(),
        Row::uniform(2),
        vec![vec![Row::uniform(2); n_actions]; 2],
        vec![Row::point(0), Row::point(1)],
        horizon,
    ))
}

#[derive(Debug, Clone)]
pub struct CoinEnv {
    pub buffered_env: BufferedEnv,
    pub verifier: Verifier,
    pub policy: Policy,
}

pub fn build_coin(horizon: usize) -> Result<CoinEnv> {
    let spec = coin_chain(horizon, 2)?;
    Ok(CoinEnv {
        policy: Policy::uniform("uniform", 2, 2),
        buffered_env: BufferedEnv::identity("coin", spec),
        verifier: Verifier::constant(true),
    })
}
