pub mod bundled;
pub mod cli;
pub mod error;
pub mod figures;
pub mod mdp;
pub mod power;
pub mod retarget;
pub mod sideffects;
pub mod visit;

pub use error::{Error, Result};
pub use mdp::{Policy, RewardFunction, RewardlessMdp};
