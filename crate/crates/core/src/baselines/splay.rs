use thiserror::Error;

use super::BaselineError;
use crate::treap::{AccessResult, Key};

#[derive(Clone, Debug)]
struct Node {
    key: Key,
    value: u64,
    left: Option<u32>,
    right: Option<u32>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplayViolation {
    #[error("BST order violated at key {key}")]
    BstOrder { key: Key },
    #[error("stored count {stored} but {actual} nodes reachable")]
    Count { stored: usize, actual: usize },
}

/// Bottom-up splay tree.
///
/// Every access splays the last node on its search path to the root, whether
/// or not the key was found.
#[derive(Clone, Debug, Default)]
pub struct SplayTree {
    nodes: Vec<Node>,
    root: Option<u32>,
    comparisons: u64,
    rotations: u64,
    path: Vec<u32>,
}

impl SplayTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

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
        self.root.map(|r| self.nodes[r as usize].key)
    }

    pub fn insert(&mut self, key: Key, value: u64) -> Result<(), BaselineError> {
        if self.descend(key) {
            return Err(BaselineError::DuplicateKey(key));
        }
        self.comparisons += self.path.len() as u64;
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            key,
            value,
            left: None,
            right: None,
        });
        match self.path.last() {
            None => self.root = Some(id),
            Some(&p) => {
                let parent = &mut self.nodes[p as usize];
                if key < parent.key {
                    parent.left = Some(id);
                } else {
                    parent.right = Some(id);
                }
            }
        }
        self.path.push(id);
        self.splay();
        Ok(())
    }

    pub fn access(&mut self, key: Key) -> AccessResult {
        let found = self.descend(key);
        let comparisons = self.path.len() as u64;
        self.comparisons += comparisons;
        let value = found.then(|| self.nodes[*self.path.last().unwrap() as usize].value);
        self.splay();
        AccessResult {
            found,
            comparisons,
            value,
        }
    }

    pub fn height(&self) -> usize {
        let mut best = 0;
        let mut stack: Vec<(u32, usize)> = self.root.map(|r| (r, 1)).into_iter().collect();
        while let Some((id, d)) = stack.pop() {
            best = best.max(d);
            let n = &self.nodes[id as usize];
            stack.extend(n.left.map(|c| (c, d + 1)));
            stack.extend(n.right.map(|c| (c, d + 1)));
        }
        best
    }

    pub fn validate(&self) -> Result<(), SplayViolation> {
        let mut seen = 0;
        let mut stack: Vec<(u32, Option<Key>, Option<Key>)> =
            self.root.map(|r| (r, None, None)).into_iter().collect();
        while let Some((id, lo, hi)) = stack.pop() {
            seen += 1;
            let n = &self.nodes[id as usize];
            if lo.is_some_and(|lo| n.key <= lo) || hi.is_some_and(|hi| n.key >= hi) {
                return Err(SplayViolation::BstOrder { key: n.key });
            }
            stack.extend(n.left.map(|c| (c, lo, Some(n.key))));
            stack.extend(n.right.map(|c| (c, Some(n.key), hi)));
        }
        if seen != self.nodes.len() {
            return Err(SplayViolation::Count {
                stored: self.nodes.len(),
                actual: seen,
            });
        }
        Ok(())
    }

    /// Fills `path` from the root; true if the last node holds `key`.
    fn descend(&mut self, key: Key) -> bool {
        self.path.clear();
        let mut cur = self.root;
        while let Some(id) = cur {
            self.path.push(id);
            let n = &self.nodes[id as usize];
            cur = match key.cmp(&n.key) {
                std::cmp::Ordering::Less => n.left,
                std::cmp::Ordering::Greater => n.right,
                std::cmp::Ordering::Equal => return true,
            };
        }
        false
    }

    /// Splays the last node of `path` to the root.
    fn splay(&mut self) {
        let Some(&x) = self.path.last() else { return };
        let mut len = self.path.len();
        while len >= 2 {
            let p = self.path[len - 2];
            if len == 2 {
                self.rotate_up(x, p, None);
                break;
            }
            let g = self.path[len - 3];
            let gg = (len >= 4).then(|| self.path[len - 4]);
            let x_is_left = self.nodes[p as usize].left == Some(x);
            let p_is_left = self.nodes[g as usize].left == Some(p);
            if x_is_left == p_is_left {
                // zig-zig
                self.rotate_up(p, g, gg);
                self.rotate_up(x, p, gg);
            } else {
                // zig-zag
                self.rotate_up(x, p, Some(g));
                self.rotate_up(x, g, gg);
            }
            len -= 2;
        }
        self.path.clear();
    }

    fn rotate_up(&mut self, c: u32, p: u32, gp: Option<u32>) {
        let (ci, pi) = (c as usize, p as usize);
        if self.nodes[pi].left == Some(c) {
            self.nodes[pi].left = self.nodes[ci].right;
            self.nodes[ci].right = Some(p);
        } else {
            self.nodes[pi].right = self.nodes[ci].left;
            self.nodes[ci].left = Some(p);
        }
        match gp {
            None => self.root = Some(c),
            Some(g) => {
                let g = &mut self.nodes[g as usize];
                if g.left == Some(p) {
                    g.left = Some(c);
                } else {
                    g.right = Some(c);
                }
            }
        }
        self.rotations += 1;
    }

    #[cfg(test)]
    fn preorder(&self) -> Vec<Key> {
        let mut out = Vec::new();
        let mut stack: Vec<u32> = self.root.into_iter().collect();
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id as usize];
            out.push(n.key);
            stack.extend(n.right);
            stack.extend(n.left);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_access_is_free_of_rotations() {
        let mut t = SplayTree::new();
        for k in [1, 2, 3] {
            t.insert(k, k).unwrap();
        }
        let before = t.preorder();
        t.reset_counters();
        let r = t.access(3);
        assert_eq!(r.comparisons, 1);
        assert_eq!(t.rotations(), 0);
        assert_eq!(t.preorder(), before);
    }

    #[test]
    fn zig_zig_on_left_chain() {
        let mut t = SplayTree::new();
        for k in [1, 2, 3] {
            t.insert(k, k).unwrap();
        }
        // Inserting ascending keys leaves a left chain 3 -> 2 -> 1.
        assert_eq!(t.preorder(), vec![3, 2, 1]);
        let r = t.access(1);
        assert_eq!(r.comparisons, 3);
        assert_eq!(t.preorder(), vec![1, 2, 3]);
        assert_eq!(t.root_key(), Some(1));
        assert_eq!(t.height(), 3);
    }

    #[test]
    fn zig_zag() {
        let node = |key, left, right| Node {
            key,
            value: key,
            left,
            right,
        };
        // root 3, left 1, 1's right 2
        let mut t = SplayTree {
            nodes: vec![node(3, Some(1), None), node(1, None, Some(2)), node(2, None, None)],
            root: Some(0),
            ..SplayTree::default()
        };
        t.access(2);
        assert_eq!(t.preorder(), vec![2, 1, 3]);
        assert_eq!(t.rotations(), 2);
    }

    #[test]
    fn duplicate_and_missing() {
        let mut t = SplayTree::new();
        assert!(!t.access(4).found);
        t.insert(4, 40).unwrap();
        assert_eq!(t.insert(4, 1), Err(BaselineError::DuplicateKey(4)));
        assert_eq!(t.access(4).value, Some(40));
        t.validate().unwrap();
    }
}
