//! Experiment runners. Each returns a sorted [`Table`].

pub mod bounds;
pub mod d2c;
pub mod p0;
pub mod resolvents;
pub mod stacking;
pub mod tlp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::table::Table;

pub use bounds::run_bound_suite;
pub use d2c::run_d2c;
pub use p0::run_p0_audit;
pub use resolvents::run_resolvents;
pub use stacking::run_stacking_audit;
pub use tlp::run_tlp_table;

/// A generator for one experiment, derived from the run seed and a label so
/// that experiments do not share streams.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    // FNV-1a of the label, mixed into the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    match cfg.kind {
        ExperimentKind::BoundSuite => run_bound_suite(cfg),
        ExperimentKind::D2cHeat => run_d2c(cfg),
        ExperimentKind::ResolventConvergence => run_resolvents(cfg),
        ExperimentKind::TlpTable => run_tlp_table(cfg),
        ExperimentKind::StackingAudit => run_stacking_audit(cfg),
        ExperimentKind::P0Audit => run_p0_audit(cfg),
    }
}
