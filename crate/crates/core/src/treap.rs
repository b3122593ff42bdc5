//! Rotation-based treap with arbitrary real priorities.
//!
//! Nodes live in an arena and are addressed by [`NodeId`]. Parent links are not
//! stored: insertion, deletion and priority updates record the root-to-node path
//! and rotate along it. Every node carries its subtree size and payload sum (for
//! order statistics and range aggregates) and is threaded into an in-order doubly
//! linked list through `succ`/`pred` links.
//!
//! Depth is one-based throughout: the root has depth 1, and the number of
//! comparisons of a successful access equals the depth of the accessed node.

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

/// Element identity.
pub type Key = u64;

/// Treap priority, ordered lexicographically by `(primary, tiebreak)`.
///
/// The primary score comes from an oracle (a frequency, a negated rank, or a
/// random draw). The tiebreak is a uniform draw that separates equal primaries.
#[derive(Clone, Copy, Debug)]
pub struct Priority {
    pub primary: f64,
    pub tiebreak: f64,
}

impl Priority {
    pub fn new(primary: f64, tiebreak: f64) -> Self {
        Self { primary, tiebreak }
    }

    /// A priority with the given primary score and a fresh uniform tiebreak.
    pub fn with_random_tiebreak<R: Rng + ?Sized>(primary: f64, rng: &mut R) -> Self {
        Self::new(primary, rng.random::<f64>())
    }

    /// Both components uniform in `[0, 1)`: a classic random-treap priority.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(rng.random::<f64>(), rng.random::<f64>())
    }
}

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.primary
            .total_cmp(&other.primary)
            .then_with(|| self.tiebreak.total_cmp(&other.tiebreak))
    }
}

/// Outcome of a single lookup.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AccessResult {
    pub found: bool,
    /// Nodes visited on the search path, the root counting as one.
    pub comparisons: u64,
    pub value: Option<u64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreapError {
    #[error("key {0} is already present")]
    DuplicateKey(Key),
    #[error("key {0} is not present")]
    KeyNotFound(Key),
    #[error("invalid range: lo {lo} exceeds hi {hi}")]
    InvalidRange { lo: Key, hi: Key },
    #[error("rank {rank} is outside 1..={len}")]
    RankOutOfRange { rank: usize, len: usize },
    #[error("bulk-load keys must be strictly increasing (saw {prev} then {next})")]
    UnsortedBulkLoad { prev: Key, next: Key },
}

/// First structural invariant found broken by [`Treap::validate`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvariantViolation {
    #[error("BST order violated at key {key}")]
    BstOrder { key: Key },
    #[error("heap order violated: child {child} outranks parent {parent}")]
    HeapOrder { parent: Key, child: Key },
    #[error("subtree size at key {key} is {stored}, expected {actual}")]
    SubtreeSize { key: Key, stored: usize, actual: usize },
    #[error("subtree sum at key {key} is {stored}, expected {actual}")]
    SubtreeSum { key: Key, stored: u128, actual: u128 },
    #[error("succ/pred threading broken at key {key}")]
    Threading { key: Key },
    #[error("node count is {stored}, tree holds {actual}")]
    Count { stored: usize, actual: usize },
}

/// Index of a node in a treap's arena. Stable across rotations; reused after deletion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(index: usize) -> Self {
        NodeId(u32::try_from(index).expect("arena index exceeds u32"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dir {
    Left,
    Right,
}

/// Where a subtree hangs: at the root, or under a given parent on one side.
#[derive(Clone, Copy, Debug)]
enum Slot {
    Root,
    Child(NodeId, Dir),
}

#[derive(Clone, Debug)]
struct Node {
    key: Key,
    priority: Priority,
    value: u64,
    left: Option<NodeId>,
    right: Option<NodeId>,
    size: usize,
    sum: u128,
    succ: Option<NodeId>,
    pred: Option<NodeId>,
}

impl Node {
    fn leaf(key: Key, value: u64, priority: Priority) -> Self {
        Self {
            key,
            priority,
            value,
            left: None,
            right: None,
            size: 1,
            sum: value as u128,
            succ: None,
            pred: None,
        }
    }
}

/// Heap-ordered binary search tree with comparison and rotation counters.
#[derive(Clone, Debug, Default)]
pub struct Treap {
    nodes: Vec<Node>,
    free: Vec<NodeId>,
    root: Option<NodeId>,
    len: usize,
    comparisons: u64,
    rotations: u64,
    // Reused search path; kept here so mutations do not allocate.
    path: Vec<(NodeId, Dir)>,
}

impl Treap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a treap from entries with strictly increasing keys in linear time.
    ///
    /// The result has the same shape as inserting the entries one by one in any
    /// order. Counters start at zero.
    pub fn from_sorted<I>(entries: I) -> Result<Self, TreapError>
    where
        I: IntoIterator<Item = (Key, u64, Priority)>,
    {
        let entries = entries.into_iter();
        let mut treap = Treap::new();
        treap.nodes.reserve(entries.size_hint().0);
        // Right spine of the Cartesian tree built so far.
        let mut spine: Vec<NodeId> = Vec::new();
        let mut prev: Option<NodeId> = None;
        for (key, value, priority) in entries {
            if let Some(p) = prev {
                let prev_key = treap.nodes[p.index()].key;
                if prev_key >= key {
                    return Err(TreapError::UnsortedBulkLoad {
                        prev: prev_key,
                        next: key,
                    });
                }
            }
            let id = treap.alloc(Node::leaf(key, value, priority));
            let mut last_popped = None;
            while let Some(&top) = spine.last() {
                if treap.nodes[top.index()].priority < priority {
                    last_popped = spine.pop();
                } else {
                    break;
                }
            }
            treap.nodes[id.index()].left = last_popped;
            match spine.last() {
                Some(&top) => treap.nodes[top.index()].right = Some(id),
                None => treap.root = Some(id),
            }
            spine.push(id);
            if let Some(p) = prev {
                treap.nodes[p.index()].succ = Some(id);
                treap.nodes[id.index()].pred = Some(p);
            }
            prev = Some(id);
            treap.len += 1;
        }
        // Aggregates are filled in bottom-up once the shape is final.
        for id in treap.postorder() {
            treap.pull(id);
        }
        Ok(treap)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Cumulative comparisons charged by counted operations.
    pub fn comparisons(&self) -> u64 {
        self.comparisons
    }

    pub fn rotations(&self) -> u64 {
        self.rotations
    }

    pub fn reset_counters(&mut self) {
        self.comparisons = 0;
        self.rotations = 0;
    }

    pub fn root_key(&self) -> Option<Key> {
        self.root.map(|r| self.nodes[r.index()].key)
    }

    pub fn contains(&self, key: Key) -> bool {
        self.locate(key).0.is_some()
    }

    pub fn priority_of(&self, key: Key) -> Option<Priority> {
        self.locate(key).0.map(|id| self.nodes[id.index()].priority)
    }

    pub fn min_key(&self) -> Option<Key> {
        let mut cur = self.root?;
        while let Some(l) = self.nodes[cur.index()].left {
            cur = l;
        }
        Some(self.nodes[cur.index()].key)
    }

    pub fn max_key(&self) -> Option<Key> {
        let mut cur = self.root?;
        while let Some(r) = self.nodes[cur.index()].right {
            cur = r;
        }
        Some(self.nodes[cur.index()].key)
    }

    /// Inserts a new key as a leaf and rotates it up until heap order holds.
    pub fn insert(&mut self, key: Key, value: u64, priority: Priority) -> Result<(), TreapError> {
        self.insert_node(key, value, priority).map(|_| ())
    }

    /// Like [`Treap::insert`], returning the arena slot of the new node.
    pub fn insert_node(
        &mut self,
        key: Key,
        value: u64,
        priority: Priority,
    ) -> Result<NodeId, TreapError> {
        let mut path = std::mem::take(&mut self.path);
        path.clear();
        let mut cur = self.root;
        while let Some(id) = cur {
            let node = &self.nodes[id.index()];
            match key.cmp(&node.key) {
                Ordering::Equal => {
                    self.path = path;
                    return Err(TreapError::DuplicateKey(key));
                }
                Ordering::Less => {
                    path.push((id, Dir::Left));
                    cur = node.left;
                }
                Ordering::Greater => {
                    path.push((id, Dir::Right));
                    cur = node.right;
                }
            }
        }
        self.comparisons += path.len() as u64;

        let x = self.alloc(Node::leaf(key, value, priority));
        match path.last() {
            None => self.root = Some(x),
            Some(&(p, Dir::Left)) => {
                let pred = self.nodes[p.index()].pred;
                self.link_neighbors(pred, x, Some(p));
                self.nodes[p.index()].left = Some(x);
            }
            Some(&(p, Dir::Right)) => {
                let succ = self.nodes[p.index()].succ;
                self.link_neighbors(Some(p), x, succ);
                self.nodes[p.index()].right = Some(x);
            }
        }
        for &(id, _) in &path {
            let node = &mut self.nodes[id.index()];
            node.size += 1;
            node.sum += value as u128;
        }
        self.len += 1;
        self.sift_up(x, &mut path);
        self.path = path;
        Ok(x)
    }

    /// Removes a key, rotating it down past its higher-priority child until it
    /// can be spliced out.
    pub fn delete(&mut self, key: Key) -> Result<u64, TreapError> {
        let mut path = std::mem::take(&mut self.path);
        let found = self.search_path(key, &mut path);
        let Some(x) = found else {
            self.path = path;
            return Err(TreapError::KeyNotFound(key));
        };
        self.comparisons += path.len() as u64 + 1;
        let value = self.nodes[x.index()].value;
        for &(id, _) in &path {
            let node = &mut self.nodes[id.index()];
            node.size -= 1;
            node.sum -= value as u128;
        }

        let mut slot = match path.last() {
            Some(&(p, dir)) => Slot::Child(p, dir),
            None => Slot::Root,
        };
        self.path = path;
        // Nodes rotated above x still count it in their aggregates.
        let mut lifted = Vec::new();
        loop {
            let node = &self.nodes[x.index()];
            match (node.left, node.right) {
                (None, None) => {
                    self.set_slot(slot, None);
                    break;
                }
                (Some(c), None) | (None, Some(c)) => {
                    self.set_slot(slot, Some(c));
                    break;
                }
                (Some(l), Some(r)) => {
                    let (top, dir) = if self.nodes[l.index()].priority > self.nodes[r.index()].priority {
                        (self.rotate_right(x), Dir::Right)
                    } else {
                        (self.rotate_left(x), Dir::Left)
                    };
                    self.set_slot(slot, Some(top));
                    lifted.push(top);
                    slot = Slot::Child(top, dir);
                }
            }
        }
        for id in lifted {
            let node = &mut self.nodes[id.index()];
            node.size -= 1;
            node.sum -= value as u128;
        }

        let (pred, succ) = {
            let node = &self.nodes[x.index()];
            (node.pred, node.succ)
        };
        if let Some(p) = pred {
            self.nodes[p.index()].succ = succ;
        }
        if let Some(s) = succ {
            self.nodes[s.index()].pred = pred;
        }
        self.release(x);
        self.len -= 1;
        Ok(value)
    }

    /// Looks a key up, charging the search path to the comparison counter.
    /// Accesses never restructure the tree.
    pub fn access(&mut self, key: Key) -> AccessResult {
        let (found, visited) = self.locate(key);
        self.comparisons += visited;
        AccessResult {
            found: found.is_some(),
            comparisons: visited,
            value: found.map(|id| self.nodes[id.index()].value),
        }
    }

    /// Counted access that also reports the node reached.
    pub fn access_node(&mut self, key: Key) -> (AccessResult, Option<NodeId>) {
        let (found, visited) = self.locate(key);
        self.comparisons += visited;
        let result = AccessResult {
            found: found.is_some(),
            comparisons: visited,
            value: found.map(|id| self.nodes[id.index()].value),
        };
        (result, found)
    }

    /// Changes a key's priority and restores heap order by rotating it up
    /// (priority increased) or down (priority decreased).
    pub fn update_priority(&mut self, key: Key, priority: Priority) -> Result<(), TreapError> {
        let mut path = std::mem::take(&mut self.path);
        let Some(x) = self.search_path(key, &mut path) else {
            self.path = path;
            return Err(TreapError::KeyNotFound(key));
        };
        self.comparisons += path.len() as u64 + 1;
        let old = std::mem::replace(&mut self.nodes[x.index()].priority, priority);
        match priority.cmp(&old) {
            Ordering::Greater => self.sift_up(x, &mut path),
            Ordering::Less => {
                let slot = match path.last() {
                    Some(&(p, dir)) => Slot::Child(p, dir),
                    None => Slot::Root,
                };
                self.sift_down(x, slot);
            }
            Ordering::Equal => {}
        }
        self.path = path;
        Ok(())
    }

    /// Number of keys in `[lo, hi]`.
    pub fn range_count(&mut self, lo: Key, hi: Key) -> Result<usize, TreapError> {
        if lo > hi {
            return Err(TreapError::InvalidRange { lo, hi });
        }
        let (upper, _, v1) = self.prefix(hi, true);
        let (lower, _, v2) = self.prefix(lo, false);
        self.comparisons += v1 + v2;
        Ok(upper - lower)
    }

    /// Sum of payloads of keys in `[lo, hi]`.
    pub fn range_sum(&mut self, lo: Key, hi: Key) -> Result<u128, TreapError> {
        if lo > hi {
            return Err(TreapError::InvalidRange { lo, hi });
        }
        let (_, upper, v1) = self.prefix(hi, true);
        let (_, lower, v2) = self.prefix(lo, false);
        self.comparisons += v1 + v2;
        Ok(upper - lower)
    }

    /// Smallest key greater than `key`, found by one pointer hop after the access.
    pub fn successor(&mut self, key: Key) -> Result<Option<Key>, TreapError> {
        let (_, node) = self.access_node(key);
        let id = node.ok_or(TreapError::KeyNotFound(key))?;
        Ok(self.nodes[id.index()].succ.map(|s| self.nodes[s.index()].key))
    }

    pub fn predecessor(&mut self, key: Key) -> Result<Option<Key>, TreapError> {
        let (_, node) = self.access_node(key);
        let id = node.ok_or(TreapError::KeyNotFound(key))?;
        Ok(self.nodes[id.index()].pred.map(|p| self.nodes[p.index()].key))
    }

    /// The `rank`-th smallest key (one-based). Navigates by subtree sizes and
    /// leaves the comparison counter alone.
    pub fn kth(&self, rank: usize) -> Result<Key, TreapError> {
        if rank == 0 || rank > self.len {
            return Err(TreapError::RankOutOfRange { rank, len: self.len });
        }
        let mut remaining = rank;
        let mut cur = self.root;
        while let Some(id) = cur {
            let node = &self.nodes[id.index()];
            let left = self.size(node.left);
            match remaining.cmp(&(left + 1)) {
                Ordering::Equal => return Ok(node.key),
                Ordering::Less => cur = node.left,
                Ordering::Greater => {
                    remaining -= left + 1;
                    cur = node.right;
                }
            }
        }
        unreachable!("subtree sizes are inconsistent with len")
    }

    /// One-based position of `key` in sorted order.
    pub fn rank_of(&mut self, key: Key) -> Result<usize, TreapError> {
        let mut rank = 0;
        let mut visited = 0;
        let mut cur = self.root;
        while let Some(id) = cur {
            visited += 1;
            let node = &self.nodes[id.index()];
            match key.cmp(&node.key) {
                Ordering::Equal => {
                    self.comparisons += visited;
                    return Ok(rank + self.size(node.left) + 1);
                }
                Ordering::Less => cur = node.left,
                Ordering::Greater => {
                    rank += self.size(node.left) + 1;
                    cur = node.right;
                }
            }
        }
        self.comparisons += visited;
        Err(TreapError::KeyNotFound(key))
    }

    /// One-based depth of `key`. Diagnostic: does not touch the counters.
    pub fn depth_of(&self, key: Key) -> Result<usize, TreapError> {
        match self.locate(key) {
            (Some(_), visited) => Ok(visited as usize),
            (None, _) => Err(TreapError::KeyNotFound(key)),
        }
    }

    /// Keys on the root-to-`key` path, excluding `key` itself.
    pub fn ancestors(&self, key: Key) -> Result<Vec<Key>, TreapError> {
        let mut out = Vec::new();
        let mut cur = self.root;
        while let Some(id) = cur {
            let node = &self.nodes[id.index()];
            match key.cmp(&node.key) {
                Ordering::Equal => return Ok(out),
                Ordering::Less => cur = node.left,
                Ordering::Greater => cur = node.right,
            }
            out.push(node.key);
        }
        Err(TreapError::KeyNotFound(key))
    }

    /// Calls `f(key, depth)` for every node, depth one-based, in breadth-first order.
    pub fn for_each_depth<F: FnMut(Key, usize)>(&self, mut f: F) {
        let mut frontier: Vec<NodeId> = self.root.into_iter().collect();
        let mut next = Vec::new();
        let mut depth = 1;
        while !frontier.is_empty() {
            for &id in &frontier {
                let node = &self.nodes[id.index()];
                f(node.key, depth);
                next.extend(node.left);
                next.extend(node.right);
            }
            std::mem::swap(&mut frontier, &mut next);
            next.clear();
            depth += 1;
        }
    }

    /// Pre-order serialization with `None` for empty subtrees. Two treaps have
    /// the same shape iff their serializations are equal.
    pub fn shape(&self) -> Vec<Option<Key>> {
        let mut out = Vec::with_capacity(2 * self.len + 1);
        let mut stack = vec![self.root];
        while let Some(slot) = stack.pop() {
            match slot {
                None => out.push(None),
                Some(id) => {
                    let node = &self.nodes[id.index()];
                    out.push(Some(node.key));
                    stack.push(node.right);
                    stack.push(node.left);
                }
            }
        }
        out
    }

    /// Keys in ascending order, walked through the successor links.
    pub fn keys(&self) -> Vec<Key> {
        let mut out = Vec::with_capacity(self.len);
        let mut cur = self.root.map(|r| self.leftmost(r));
        while let Some(id) = cur {
            out.push(self.nodes[id.index()].key);
            cur = self.nodes[id.index()].succ;
        }
        out
    }

    /// Walks the whole tree checking BST order, heap order, subtree aggregates,
    /// succ/pred threading and the node count.
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        let order = self.postorder();
        if order.len() != self.len {
            return Err(InvariantViolation::Count {
                stored: self.len,
                actual: order.len(),
            });
        }
        for &id in &order {
            let node = &self.nodes[id.index()];
            for child in [node.left, node.right].into_iter().flatten() {
                let c = &self.nodes[child.index()];
                if c.priority > node.priority {
                    return Err(InvariantViolation::HeapOrder {
                        parent: node.key,
                        child: c.key,
                    });
                }
            }
            let size = 1 + self.size(node.left) + self.size(node.right);
            if node.size != size {
                return Err(InvariantViolation::SubtreeSize {
                    key: node.key,
                    stored: node.size,
                    actual: size,
                });
            }
            let sum = node.value as u128 + self.sum(node.left) + self.sum(node.right);
            if node.sum != sum {
                return Err(InvariantViolation::SubtreeSum {
                    key: node.key,
                    stored: node.sum,
                    actual: sum,
                });
            }
        }

        let inorder = self.inorder();
        for pair in inorder.windows(2) {
            let (a, b) = (&self.nodes[pair[0].index()], &self.nodes[pair[1].index()]);
            if a.key >= b.key {
                return Err(InvariantViolation::BstOrder { key: b.key });
            }
        }
        for (i, &id) in inorder.iter().enumerate() {
            let node = &self.nodes[id.index()];
            let want_pred = i.checked_sub(1).map(|j| inorder[j]);
            let want_succ = inorder.get(i + 1).copied();
            if node.pred != want_pred || node.succ != want_succ {
                return Err(InvariantViolation::Threading { key: node.key });
            }
        }
        Ok(())
    }

    pub(crate) fn find_node(&self, key: Key) -> Option<NodeId> {
        self.locate(key).0
    }

    /// Key stored at an arena slot. Panics on a freed or unknown slot.
    pub fn node_key(&self, id: NodeId) -> Key {
        self.nodes[id.index()].key
    }

    pub fn node_value(&self, id: NodeId) -> u64 {
        self.nodes[id.index()].value
    }

    pub fn node_succ(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].succ
    }

    pub fn node_pred(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].pred
    }

    /// Arena slots of all live nodes in key order.
    pub fn node_ids(&self) -> Vec<NodeId> {
        self.inorder()
    }

    pub(crate) fn is_live(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len() && !self.free.contains(&id)
    }

    fn locate(&self, key: Key) -> (Option<NodeId>, u64) {
        let mut visited = 0;
        let mut cur = self.root;
        while let Some(id) = cur {
            visited += 1;
            let node = &self.nodes[id.index()];
            match key.cmp(&node.key) {
                Ordering::Equal => return (Some(id), visited),
                Ordering::Less => cur = node.left,
                Ordering::Greater => cur = node.right,
            }
        }
        (None, visited)
    }

    /// Fills `path` with the strict ancestors of `key` and returns its node.
    fn search_path(&self, key: Key, path: &mut Vec<(NodeId, Dir)>) -> Option<NodeId> {
        path.clear();
        let mut cur = self.root;
        while let Some(id) = cur {
            let node = &self.nodes[id.index()];
            match key.cmp(&node.key) {
                Ordering::Equal => return Some(id),
                Ordering::Less => {
                    path.push((id, Dir::Left));
                    cur = node.left;
                }
                Ordering::Greater => {
                    path.push((id, Dir::Right));
                    cur = node.right;
                }
            }
        }
        None
    }

    /// Count and payload sum of keys below `bound` (or at most `bound` when
    /// inclusive), plus the number of nodes visited.
    fn prefix(&self, bound: Key, inclusive: bool) -> (usize, u128, u64) {
        let (mut count, mut sum, mut visited) = (0, 0, 0);
        let mut cur = self.root;
        while let Some(id) = cur {
            visited += 1;
            let node = &self.nodes[id.index()];
            let below = if inclusive { node.key <= bound } else { node.key < bound };
            if below {
                count += self.size(node.left) + 1;
                sum += self.sum(node.left) + node.value as u128;
                cur = node.right;
            } else {
                cur = node.left;
            }
        }
        (count, sum, visited)
    }

    fn sift_up(&mut self, x: NodeId, path: &mut Vec<(NodeId, Dir)>) {
        while let Some((p, dir)) = path.pop() {
            if self.nodes[p.index()].priority >= self.nodes[x.index()].priority {
                break;
            }
            match dir {
                Dir::Left => self.rotate_right(p),
                Dir::Right => self.rotate_left(p),
            };
            let slot = match path.last() {
                Some(&(g, gdir)) => Slot::Child(g, gdir),
                None => Slot::Root,
            };
            self.set_slot(slot, Some(x));
        }
    }

    fn sift_down(&mut self, x: NodeId, mut slot: Slot) {
        loop {
            let node = &self.nodes[x.index()];
            let best = match (node.left, node.right) {
                (None, None) => break,
                (Some(l), None) => (l, Dir::Left),
                (None, Some(r)) => (r, Dir::Right),
                (Some(l), Some(r)) => {
                    if self.nodes[l.index()].priority > self.nodes[r.index()].priority {
                        (l, Dir::Left)
                    } else {
                        (r, Dir::Right)
                    }
                }
            };
            if self.nodes[best.0.index()].priority <= self.nodes[x.index()].priority {
                break;
            }
            let (top, down) = match best.1 {
                Dir::Left => (self.rotate_right(x), Dir::Right),
                Dir::Right => (self.rotate_left(x), Dir::Left),
            };
            self.set_slot(slot, Some(top));
            slot = Slot::Child(top, down);
        }
    }

    /// Lifts the left child of `p` above it; returns the new subtree root.
    fn rotate_right(&mut self, p: NodeId) -> NodeId {
        let l = self.nodes[p.index()].left.expect("rotate_right needs a left child");
        self.nodes[p.index()].left = self.nodes[l.index()].right;
        self.nodes[l.index()].right = Some(p);
        self.pull(p);
        self.pull(l);
        self.rotations += 1;
        l
    }

    fn rotate_left(&mut self, p: NodeId) -> NodeId {
        let r = self.nodes[p.index()].right.expect("rotate_left needs a right child");
        self.nodes[p.index()].right = self.nodes[r.index()].left;
        self.nodes[r.index()].left = Some(p);
        self.pull(p);
        self.pull(r);
        self.rotations += 1;
        r
    }

    fn set_slot(&mut self, slot: Slot, id: Option<NodeId>) {
        match slot {
            Slot::Root => self.root = id,
            Slot::Child(p, Dir::Left) => self.nodes[p.index()].left = id,
            Slot::Child(p, Dir::Right) => self.nodes[p.index()].right = id,
        }
    }

    fn link_neighbors(&mut self, pred: Option<NodeId>, x: NodeId, succ: Option<NodeId>) {
        self.nodes[x.index()].pred = pred;
        self.nodes[x.index()].succ = succ;
        if let Some(p) = pred {
            self.nodes[p.index()].succ = Some(x);
        }
        if let Some(s) = succ {
            self.nodes[s.index()].pred = Some(x);
        }
    }

    fn pull(&mut self, id: NodeId) {
        let node = &self.nodes[id.index()];
        let size = 1 + self.size(node.left) + self.size(node.right);
        let sum = node.value as u128 + self.sum(node.left) + self.sum(node.right);
        let node = &mut self.nodes[id.index()];
        node.size = size;
        node.sum = sum;
    }

    fn size(&self, id: Option<NodeId>) -> usize {
        id.map_or(0, |i| self.nodes[i.index()].size)
    }

    fn sum(&self, id: Option<NodeId>) -> u128 {
        id.map_or(0, |i| self.nodes[i.index()].sum)
    }

    fn leftmost(&self, mut id: NodeId) -> NodeId {
        while let Some(l) = self.nodes[id.index()].left {
            id = l;
        }
        id
    }

    fn alloc(&mut self, node: Node) -> NodeId {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id.index()] = node;
                id
            }
            None => {
                self.nodes.push(node);
                NodeId::from_index(self.nodes.len() - 1)
            }
        }
    }

    fn release(&mut self, id: NodeId) {
        let node = &mut self.nodes[id.index()];
        node.left = None;
        node.right = None;
        node.succ = None;
        node.pred = None;
        self.free.push(id);
    }

    fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.len);
        let mut stack: Vec<NodeId> = self.root.into_iter().collect();
        while let Some(id) = stack.pop() {
            out.push(id);
            let node = &self.nodes[id.index()];
            stack.extend(node.left);
            stack.extend(node.right);
        }
        // Reversed root-right-left pre-order is a valid children-first order.
        out.reverse();
        out
    }

    fn inorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.len);
        let mut stack = Vec::new();
        let mut cur = self.root;
        loop {
            while let Some(id) = cur {
                stack.push(id);
                cur = self.nodes[id.index()].left;
            }
            let Some(id) = stack.pop() else { break };
            out.push(id);
            cur = self.nodes[id.index()].right;
        }
        out
    }
}
