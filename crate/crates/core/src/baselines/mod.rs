//! Classical comparison-instrumented search trees.

mod rbtree;
mod splay;

pub use rbtree::{RbViolation, RedBlackTree};
pub use splay::{SplayTree, SplayViolation};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::treap::{Key, Priority, Treap};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error("key {0} is already present")]
    DuplicateKey(Key),
}

/// Treap over `entries` with i.i.d. uniform priorities.
///
/// `entries` must be sorted by key with no duplicates.
pub fn random_treap<R: Rng + ?Sized>(entries: &[(Key, u64)], rng: &mut R) -> Treap {
    Treap::from_sorted(entries.iter().map(|&(k, v)| (k, v, Priority::random(rng))))
        .expect("entries must be sorted and distinct")
}

/// Keys in a seeded random order, for trees whose shape depends on insertion order.
pub fn shuffled_order<R: Rng + ?Sized>(entries: &[(Key, u64)], rng: &mut R) -> Vec<(Key, u64)> {
    let mut order = entries.to_vec();
    order.shuffle(rng);
    order
}
