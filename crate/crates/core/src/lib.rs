//! Exact distributions, local limit expansions and count-based branching
//! random walks on `Z^d`.

pub mod branching;
pub mod error;
pub mod exact_dist;
pub mod harness;
pub mod llt;
pub mod martingales;
pub mod step_law;

pub use error::{DistError, Error, LawError, OffspringError, SimError};
pub use exact_dist::{cf_invert, cf_invert_box, LatticeDist};
pub use llt::{rw_expansion, ExpansionConstants};
pub use step_law::{Moments, RawStepLaw, StepLaw, WalkClass};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
