use thiserror::Error;

use super::BaselineError;
use crate::treap::{AccessResult, Key};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Color {
    Red,
    Black,
}

#[derive(Clone, Debug)]
struct Node {
    key: Key,
    value: u64,
    color: Color,
    left: Option<u32>,
    right: Option<u32>,
    parent: Option<u32>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RbViolation {
    #[error("BST order violated at key {key}")]
    BstOrder { key: Key },
    #[error("root is red")]
    RedRoot,
    #[error("red node {key} has a red child")]
    RedRed { key: Key },
    #[error("black height differs below key {key}")]
    BlackHeight { key: Key },
    #[error("parent link of key {key} is wrong")]
    ParentLink { key: Key },
    #[error("stored count {stored} but {actual} nodes reachable")]
    Count { stored: usize, actual: usize },
}

/// Insert-and-search red-black tree (no deletion; the experiments are query-only).
#[derive(Clone, Debug, Default)]
pub struct RedBlackTree {
    nodes: Vec<Node>,
    root: Option<u32>,
    comparisons: u64,
    rotations: u64,
}

impl RedBlackTree {
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

    pub fn insert(&mut self, key: Key, value: u64) -> Result<(), BaselineError> {
        let mut parent = None;
        let mut cur = self.root;
        let mut visited = 0;
        while let Some(id) = cur {
            visited += 1;
            parent = Some(id);
            let n = &self.nodes[id as usize];
            cur = match key.cmp(&n.key) {
                std::cmp::Ordering::Less => n.left,
                std::cmp::Ordering::Greater => n.right,
                std::cmp::Ordering::Equal => return Err(BaselineError::DuplicateKey(key)),
            };
        }
        self.comparisons += visited;
        let z = self.nodes.len() as u32;
        self.nodes.push(Node {
            key,
            value,
            color: Color::Red,
            left: None,
            right: None,
            parent,
        });
        match parent {
            None => self.root = Some(z),
            Some(p) => {
                if key < self.nodes[p as usize].key {
                    self.nodes[p as usize].left = Some(z);
                } else {
                    self.nodes[p as usize].right = Some(z);
                }
            }
        }
        self.fix_insert(z);
        Ok(())
    }

    pub fn access(&mut self, key: Key) -> AccessResult {
        let mut cur = self.root;
        let mut comparisons = 0;
        let mut value = None;
        while let Some(id) = cur {
            comparisons += 1;
            let n = &self.nodes[id as usize];
            cur = match key.cmp(&n.key) {
                std::cmp::Ordering::Less => n.left,
                std::cmp::Ordering::Greater => n.right,
                std::cmp::Ordering::Equal => {
                    value = Some(n.value);
                    break;
                }
            };
        }
        self.comparisons += comparisons;
        AccessResult {
            found: value.is_some(),
            comparisons,
            value,
        }
    }

    /// Nodes on the longest root-to-leaf path.
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

    /// Checks every red-black invariant; returns the number of black nodes on
    /// every root-to-leaf path.
    pub fn validate(&self) -> Result<usize, RbViolation> {
        let Some(root) = self.root else {
            return if self.nodes.is_empty() {
                Ok(0)
            } else {
                Err(RbViolation::Count {
                    stored: self.nodes.len(),
                    actual: 0,
                })
            };
        };
        if self.nodes[root as usize].color == Color::Red {
            return Err(RbViolation::RedRoot);
        }
        if self.nodes[root as usize].parent.is_some() {
            return Err(RbViolation::ParentLink {
                key: self.nodes[root as usize].key,
            });
        }
        let mut seen = 0;
        let bh = self.check(root, None, None, &mut seen)?;
        if seen != self.nodes.len() {
            return Err(RbViolation::Count {
                stored: self.nodes.len(),
                actual: seen,
            });
        }
        Ok(bh)
    }

    fn check(&self, id: u32, lo: Option<Key>, hi: Option<Key>, seen: &mut usize) -> Result<usize, RbViolation> {
        *seen += 1;
        let n = &self.nodes[id as usize];
        if lo.is_some_and(|lo| n.key <= lo) || hi.is_some_and(|hi| n.key >= hi) {
            return Err(RbViolation::BstOrder { key: n.key });
        }
        let mut heights = [0usize; 2];
        for (slot, child, bounds) in [(0, n.left, (lo, Some(n.key))), (1, n.right, (Some(n.key), hi))] {
            let Some(c) = child else {
                continue;
            };
            let cn = &self.nodes[c as usize];
            if cn.parent != Some(id) {
                return Err(RbViolation::ParentLink { key: cn.key });
            }
            if n.color == Color::Red && cn.color == Color::Red {
                return Err(RbViolation::RedRed { key: n.key });
            }
            heights[slot] = self.check(c, bounds.0, bounds.1, seen)?;
        }
        if heights[0] != heights[1] {
            return Err(RbViolation::BlackHeight { key: n.key });
        }
        Ok(heights[0] + usize::from(n.color == Color::Black))
    }

    fn color(&self, id: Option<u32>) -> Color {
        id.map_or(Color::Black, |i| self.nodes[i as usize].color)
    }

    fn fix_insert(&mut self, mut z: u32) {
        while let Some(p) = self.nodes[z as usize].parent {
            if self.nodes[p as usize].color == Color::Black {
                break;
            }
            // A red parent is never the root, so the grandparent exists.
            let g = self.nodes[p as usize].parent.expect("red node has a parent");
            let p_is_left = self.nodes[g as usize].left == Some(p);
            let uncle = if p_is_left {
                self.nodes[g as usize].right
            } else {
                self.nodes[g as usize].left
            };
            if self.color(uncle) == Color::Red {
                self.nodes[p as usize].color = Color::Black;
                self.nodes[uncle.unwrap() as usize].color = Color::Black;
                self.nodes[g as usize].color = Color::Red;
                z = g;
                continue;
            }
            let mut p = p;
            let z_is_left = self.nodes[p as usize].left == Some(z);
            if p_is_left && !z_is_left {
                self.rotate_left(p);
                p = z;
            } else if !p_is_left && z_is_left {
                self.rotate_right(p);
                p = z;
            }
            self.nodes[p as usize].color = Color::Black;
            self.nodes[g as usize].color = Color::Red;
            if p_is_left {
                self.rotate_right(g);
            } else {
                self.rotate_left(g);
            }
            break;
        }
        let root = self.root.expect("tree is non-empty");
        self.nodes[root as usize].color = Color::Black;
    }

    fn replace_child(&mut self, parent: Option<u32>, old: u32, new: u32) {
        match parent {
            None => self.root = Some(new),
            Some(p) => {
                let p = &mut self.nodes[p as usize];
                if p.left == Some(old) {
                    p.left = Some(new);
                } else {
                    p.right = Some(new);
                }
            }
        }
    }

    fn rotate_left(&mut self, x: u32) {
        let y = self.nodes[x as usize].right.expect("rotate_left needs a right child");
        let beta = self.nodes[y as usize].left;
        self.nodes[x as usize].right = beta;
        if let Some(b) = beta {
            self.nodes[b as usize].parent = Some(x);
        }
        let xp = self.nodes[x as usize].parent;
        self.nodes[y as usize].parent = xp;
        self.replace_child(xp, x, y);
        self.nodes[y as usize].left = Some(x);
        self.nodes[x as usize].parent = Some(y);
        self.rotations += 1;
    }

    fn rotate_right(&mut self, x: u32) {
        let y = self.nodes[x as usize].left.expect("rotate_right needs a left child");
        let beta = self.nodes[y as usize].right;
        self.nodes[x as usize].left = beta;
        if let Some(b) = beta {
            self.nodes[b as usize].parent = Some(x);
        }
        let xp = self.nodes[x as usize].parent;
        self.nodes[y as usize].parent = xp;
        self.replace_child(xp, x, y);
        self.nodes[y as usize].right = Some(x);
        self.nodes[x as usize].parent = Some(y);
        self.rotations += 1;
    }
}
