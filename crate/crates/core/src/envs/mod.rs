pub mod catalog;
pub mod cauldron;
pub mod coin;
pub mod driving;
pub mod matrix;

pub use catalog::{build_entry, build_kind, canonical_catalog, CatalogEntry, EnvManifest};
pub use cauldron::{build_cauldron, CauldronEnv, CauldronSpec};
pub use coin::{build_coin, coin_chain, CoinEnv};
pub use driving::{build_driving, DrivingEnv, DrivingSpec, PassengerRequest};
pub use matrix::{build_matrix, MatrixEnv, MatrixSpec};
