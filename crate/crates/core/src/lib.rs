//! Treaps whose priorities come from frequency predictions, with classical
//! baselines, closed-form cost analytics, Zipfian workloads and an experiment
//! runner.
//!
//! Cost is counted as comparisons: the number of nodes on a root-to-target
//! search path, so the root has depth 1.

pub mod analytics;
pub mod baselines;
pub mod experiment;
pub mod oracle;
pub mod par;
pub mod seed;
pub mod shuffled;
pub mod treap;
pub mod workload;

pub use baselines::{RedBlackTree, SplayTree};
pub use oracle::{assign_priorities, FrequencyTable, OracleKind};
pub use shuffled::{FourWiseHash, ShuffledTreap};
pub use treap::{AccessResult, Key, Priority, Treap};

/// Common surface of every instrumented tree, used by the experiment runner.
pub trait SearchTree {
    fn access(&mut self, key: Key) -> AccessResult;
    fn comparisons(&self) -> u64;
    fn rotations(&self) -> u64;
    /// Work outside tree paths (map lookups, cross-pointer hops).
    fn overhead_ops(&self) -> u64 {
        0
    }
    fn reset_counters(&mut self);
}

macro_rules! search_tree {
    ($ty:ty $(, $overhead:ident)?) => {
        impl SearchTree for $ty {
            fn access(&mut self, key: Key) -> AccessResult {
                <$ty>::access(self, key)
            }
            fn comparisons(&self) -> u64 {
                <$ty>::comparisons(self)
            }
            fn rotations(&self) -> u64 {
                <$ty>::rotations(self)
            }
            $(fn $overhead(&self) -> u64 {
                <$ty>::$overhead(self)
            })?
            fn reset_counters(&mut self) {
                <$ty>::reset_counters(self)
            }
        }
    };
}

search_tree!(Treap);
search_tree!(ShuffledTreap, overhead_ops);
search_tree!(SplayTree);
search_tree!(RedBlackTree);
