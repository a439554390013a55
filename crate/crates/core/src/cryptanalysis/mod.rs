//! Attacks on the transform and on the vault.

mod link;
mod modified;
mod preimage;
mod recover;

use std::time::Duration;

use serde::{Serialize, Serializer};

pub use link::{link_biocodes, LinkOutcome, LinkVerdict};
pub use modified::{consensus_scores, eliminate_minorities, recover_key_modified, Elimination};
pub use preimage::{
    count_exact_preimages, count_nearby_preimages, count_nearby_preimages_exact, enumerate_preimages, forge_preimage,
    forge_preimage_from, ENUMERATION_LIMIT,
};
pub use recover::{recover_key, GroupNode, GroupPartition, NodeKind, SlotComponents, DEFAULT_BUDGET, TREE_PASS_LIMIT};

use crate::vault::Key;

/// What a key-recovery run did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoveryReport {
    /// Always digest-verified when present.
    pub recovered_key: Option<Key>,
    pub candidates_tested: u64,
    /// Partition leaves for the shared-fake attack; groups examined for the
    /// per-bit attack.
    pub groups: usize,
    pub max_depth: usize,
    pub fallback_used: bool,
    #[serde(rename = "elapsed_ms", serialize_with = "as_millis")]
    pub elapsed: Duration,
    /// Slots labeled fake at each word depth (per-bit attack only).
    pub eliminated_per_depth: Vec<usize>,
}

fn as_millis<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}
