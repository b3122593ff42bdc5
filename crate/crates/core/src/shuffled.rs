//! Learned treap over hashed surrogate keys, paired with an identity-keyed
//! random treap.
//!
//! Each element `x` gets a surrogate `s = h(x)` from a degree-3 polynomial hash
//! over a prime field. The learned treap is keyed on surrogates and ordered by
//! oracle priorities, so its key order is independent of how identities relate
//! to ranks. Each learned node points at the node for `x` in the random treap,
//! which answers successor, predecessor and range queries by identity.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::seed;
use crate::treap::{AccessResult, InvariantViolation, Key, NodeId, Priority, Treap, TreapError};

/// The Mersenne prime 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// `h(x) = (a3 x^3 + a2 x^2 + a1 x + a0) mod p`, reported in `[0, 1)` as `h(x) / p`.
///
/// Drawing the coefficients uniformly from the field gives a 4-wise independent
/// family over field elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FourWiseHash {
    prime: u64,
    /// `coeffs[j]` multiplies `x^j`.
    coeffs: [u64; 4],
}

impl FourWiseHash {
    /// Random member of the family over `2^61 - 1`.
    pub fn new(seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let coeffs = std::array::from_fn(|_| rng.random_range(0..MERSENNE_61));
        Self {
            prime: MERSENNE_61,
            coeffs,
        }
    }

    /// Explicit member; `prime` must be prime and every coefficient below it.
    pub fn with_coefficients(prime: u64, coeffs: [u64; 4]) -> Self {
        assert!(prime >= 2, "field size must be at least 2");
        assert!(coeffs.iter().all(|&a| a < prime), "coefficients must be field elements");
        Self { prime, coeffs }
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    /// Field value of the polynomial at `x mod p`.
    pub fn raw(&self, x: Key) -> u64 {
        let p = self.prime as u128;
        let x = x as u128 % p;
        self.coeffs
            .iter()
            .rev()
            .fold(0u128, |acc, &a| (acc * x + a as u128) % p) as u64
    }

    /// `raw(x) / p`, in `[0, 1)`.
    pub fn eval(&self, x: Key) -> f64 {
        self.raw(x) as f64 / self.prime as f64
    }
}

/// How identities are mapped to surrogates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SurrogateStore {
    /// Keep an explicit identity-to-surrogate map.
    #[default]
    Map,
    /// Recompute the hash on every operation.
    HashOnly,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShuffledError {
    #[error("key {0} is already present")]
    DuplicateKey(Key),
    #[error("key {0} is not present")]
    KeyNotFound(Key),
    #[error("surrogate collision between keys {existing} and {incoming}")]
    Collision { existing: Key, incoming: Key },
    #[error("invalid range: lo {lo} exceeds hi {hi}")]
    InvalidRange { lo: Key, hi: Key },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShuffledViolation {
    #[error("learned treap: {0}")]
    Learned(InvariantViolation),
    #[error("random treap: {0}")]
    Random(InvariantViolation),
    #[error("learned treap holds {learned} nodes, random treap {random}, map {map:?}")]
    SizeMismatch {
        learned: usize,
        random: usize,
        map: Option<usize>,
    },
    #[error("surrogate {surrogate} points at a dead node")]
    DanglingPointer { surrogate: u64 },
    #[error("surrogate {surrogate} points at key {key}, whose hash differs")]
    WrongTarget { surrogate: u64, key: Key },
    #[error("two surrogates point at key {key}")]
    SharedTarget { key: Key },
    #[error("map entry for key {key} disagrees with the hash")]
    MapMismatch { key: Key },
}

/// Learned treap on surrogates plus random treap on identities, with cross pointers.
#[derive(Clone, Debug)]
pub struct ShuffledTreap {
    // Keyed by surrogate; the payload is the arena index of the identity node.
    learned: Treap,
    random: Treap,
    key_map: Option<HashMap<Key, u64>>,
    hash: FourWiseHash,
    rng: ChaCha8Rng,
    overhead: u64,
}

impl ShuffledTreap {
    /// Map-backed structure with a random hash from `hash_seed`; random-treap
    /// priorities come from `priority_seed`.
    pub fn new(hash_seed: u64, priority_seed: u64) -> Self {
        Self::with_hash(FourWiseHash::new(hash_seed), priority_seed, SurrogateStore::Map)
    }

    pub fn with_hash(hash: FourWiseHash, priority_seed: u64, store: SurrogateStore) -> Self {
        Self {
            learned: Treap::new(),
            random: Treap::new(),
            key_map: match store {
                SurrogateStore::Map => Some(HashMap::new()),
                SurrogateStore::HashOnly => None,
            },
            hash,
            rng: seed::rng(priority_seed),
            overhead: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.random.len()
    }

    pub fn is_empty(&self) -> bool {
        self.random.is_empty()
    }

    pub fn hash(&self) -> &FourWiseHash {
        &self.hash
    }

    pub fn learned(&self) -> &Treap {
        &self.learned
    }

    pub fn random(&self) -> &Treap {
        &self.random
    }

    /// Comparisons charged to both trees.
    pub fn comparisons(&self) -> u64 {
        self.learned.comparisons() + self.random.comparisons()
    }

    pub fn rotations(&self) -> u64 {
        self.learned.rotations() + self.random.rotations()
    }

    /// Map lookups, hash evaluations and cross-pointer hops.
    pub fn overhead_ops(&self) -> u64 {
        self.overhead
    }

    pub fn reset_counters(&mut self) {
        self.learned.reset_counters();
        self.random.reset_counters();
        self.overhead = 0;
    }

    /// Surrogate of a present key (uncounted).
    pub fn surrogate_of(&self, key: Key) -> Option<u64> {
        match &self.key_map {
            Some(map) => map.get(&key).copied(),
            None => self.random.contains(key).then(|| self.hash.raw(key)),
        }
    }

    /// One-based depth of `key`'s surrogate in the learned treap.
    pub fn depth_of(&self, key: Key) -> Result<usize, ShuffledError> {
        let s = self.surrogate_of(key).ok_or(ShuffledError::KeyNotFound(key))?;
        self.learned
            .depth_of(s)
            .map_err(|_| ShuffledError::KeyNotFound(key))
    }

    pub fn insert(&mut self, key: Key, value: u64, learned_priority: Priority) -> Result<(), ShuffledError> {
        let present = match &self.key_map {
            Some(map) => map.contains_key(&key),
            None => self.random.contains(key),
        };
        if present {
            return Err(ShuffledError::DuplicateKey(key));
        }
        let s = self.hash.raw(key);
        if let Some(other) = self.learned.find_node(s) {
            let target = NodeId::from_index(self.learned.node_value(other) as usize);
            return Err(ShuffledError::Collision {
                existing: self.random.node_key(target),
                incoming: key,
            });
        }
        let priority = Priority::random(&mut self.rng);
        let target = self
            .random
            .insert_node(key, value, priority)
            .expect("absence checked above");
        self.learned
            .insert(s, target.index() as u64, learned_priority)
            .expect("surrogate absence checked above");
        if let Some(map) = &mut self.key_map {
            map.insert(key, s);
        }
        Ok(())
    }

    pub fn access(&mut self, key: Key) -> AccessResult {
        self.access_target(key).0
    }

    pub fn delete(&mut self, key: Key) -> Result<u64, ShuffledError> {
        let s = self.surrogate_of(key).ok_or(ShuffledError::KeyNotFound(key))?;
        self.overhead += 1;
        self.learned.delete(s).map_err(|_| ShuffledError::KeyNotFound(key))?;
        let value = self.random.delete(key).map_err(|_| ShuffledError::KeyNotFound(key))?;
        if let Some(map) = &mut self.key_map {
            map.remove(&key);
        }
        Ok(value)
    }

    /// Learned-treap access, then one hop along the random treap's threading.
    pub fn successor(&mut self, key: Key) -> Result<Option<Key>, ShuffledError> {
        let (_, target) = self.access_target(key);
        let id = target.ok_or(ShuffledError::KeyNotFound(key))?;
        self.overhead += 1;
        Ok(self.random.node_succ(id).map(|s| self.random.node_key(s)))
    }

    pub fn predecessor(&mut self, key: Key) -> Result<Option<Key>, ShuffledError> {
        let (_, target) = self.access_target(key);
        let id = target.ok_or(ShuffledError::KeyNotFound(key))?;
        self.overhead += 1;
        Ok(self.random.node_pred(id).map(|p| self.random.node_key(p)))
    }

    /// Served by the identity-keyed random treap.
    pub fn range_count(&mut self, lo: Key, hi: Key) -> Result<usize, ShuffledError> {
        self.random.range_count(lo, hi).map_err(|e| match e {
            TreapError::InvalidRange { lo, hi } => ShuffledError::InvalidRange { lo, hi },
            other => unreachable!("range_count only fails on bad ranges: {other}"),
        })
    }

    pub fn validate(&self) -> Result<(), ShuffledViolation> {
        self.learned.validate().map_err(ShuffledViolation::Learned)?;
        self.random.validate().map_err(ShuffledViolation::Random)?;
        let map_len = self.key_map.as_ref().map(HashMap::len);
        if self.learned.len() != self.random.len() || map_len.is_some_and(|m| m != self.random.len()) {
            return Err(ShuffledViolation::SizeMismatch {
                learned: self.learned.len(),
                random: self.random.len(),
                map: map_len,
            });
        }
        let mut targets = HashSet::with_capacity(self.len());
        for id in self.learned.node_ids() {
            let s = self.learned.node_key(id);
            let target = NodeId::from_index(self.learned.node_value(id) as usize);
            if !self.random.is_live(target) {
                return Err(ShuffledViolation::DanglingPointer { surrogate: s });
            }
            let key = self.random.node_key(target);
            if self.hash.raw(key) != s {
                return Err(ShuffledViolation::WrongTarget { surrogate: s, key });
            }
            if !targets.insert(target) {
                return Err(ShuffledViolation::SharedTarget { key });
            }
            if let Some(map) = &self.key_map {
                if map.get(&key) != Some(&s) {
                    return Err(ShuffledViolation::MapMismatch { key });
                }
            }
        }
        Ok(())
    }

    fn access_target(&mut self, key: Key) -> (AccessResult, Option<NodeId>) {
        let miss = |comparisons| {
            (
                AccessResult {
                    found: false,
                    comparisons,
                    value: None,
                },
                None,
            )
        };
        self.overhead += 1;
        let s = match &self.key_map {
            Some(map) => match map.get(&key) {
                Some(&s) => s,
                None => return miss(0),
            },
            None => self.hash.raw(key),
        };
        let (result, node) = self.learned.access_node(s);
        let Some(node) = node else {
            return miss(result.comparisons);
        };
        self.overhead += 1;
        let target = NodeId::from_index(self.learned.node_value(node) as usize);
        // Without a map an absent key can share a surrogate with a present one.
        if self.random.node_key(target) != key {
            return miss(result.comparisons);
        }
        (
            AccessResult {
                found: true,
                comparisons: result.comparisons,
                value: Some(self.random.node_value(target)),
            },
            Some(target),
        )
    }
}
