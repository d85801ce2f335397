//! Non-crossing partitions and their nesting structure.
//!
//! Positions are 1-based throughout, matching the block notation `{{1,3},{2}}`
//! used on the command line. Blocks are stored ascending and ordered by their
//! minimal element, so the disjoint-union convention (classes of the right
//! operand placed after those of the left one) is simply position order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ground set for which all of NC(n) is enumerated.
pub const MAX_NC: usize = 14;
/// Largest ground set for pair partitions.
pub const MAX_NC2: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NonCrossingPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl NonCrossingPartition {
    /// Builds a partition from arbitrary blocks, normalising their order and
    /// rejecting anything that is not a non-crossing partition of `1..=n`.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        if blocks.iter().any(Vec::is_empty) {
            return Err(Error::config("empty block"));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        let mut seen = vec![false; n + 1];
        for &x in blocks.iter().flatten() {
            if x == 0 || x > n {
                return Err(Error::config(format!("position {x} outside 1..={n}")));
            }
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::config(format!("position {x} appears twice")));
            }
        }
        if seen[1..].iter().any(|s| !s) {
            return Err(Error::config("blocks do not cover the ground set"));
        }
        let p = Self { n, blocks };
        if p.has_crossing() {
            return Err(Error::config(format!("{p} is crossing")));
        }
        Ok(p)
    }

    pub(crate) fn from_sorted_unchecked(n: usize, blocks: Vec<Vec<usize>>) -> Self {
        Self { n, blocks }
    }

    /// The partition with the single class `{1..k}`.
    pub fn one_block(k: usize) -> Self {
        let blocks = if k == 0 { vec![] } else { vec![(1..=k).collect()] };
        Self { n: k, blocks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn is_one_block(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn is_pairing(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 2)
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Block index of every position (index 0 unused).
    fn labels(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n + 1];
        for (i, b) in self.blocks.iter().enumerate() {
            for &x in b {
                label[x] = i;
            }
        }
        label
    }

    fn has_crossing(&self) -> bool {
        // a < b < c < d with a, c in one block and b, d in another.
        let label = self.labels();
        let mut stack: Vec<usize> = Vec::new();
        let last: Vec<usize> = self.blocks.iter().map(|b| *b.last().unwrap()).collect();
        for x in 1..=self.n {
            let l = label[x];
            if self.blocks[l][0] == x {
                stack.push(l);
            } else if stack.last() != Some(&l) {
                return true;
            }
            if last[l] == x {
                stack.pop();
            }
        }
        false
    }

    /// Opener/closer encoding: an element opening a block of size `s` writes
    /// `s` openers followed by one closer, every other element one closer.
    pub fn dyck_word(&self) -> String {
        let mut out = String::with_capacity(2 * self.n);
        let mut size_at = vec![0usize; self.n + 1];
        for b in &self.blocks {
            size_at[b[0]] = b.len();
        }
        for &s in &size_at[1..] {
            out.extend(std::iter::repeat_n('U', s));
            out.push('D');
        }
        out
    }

    /// `self ⊔ other`: the classes of `other` are shifted past those of `self`.
    pub fn disjoint_union(&self, other: &Self) -> Self {
        let shift = self.n;
        let mut blocks = self.blocks.clone();
        blocks.extend(
            other
                .blocks
                .iter()
                .map(|b| b.iter().map(|x| x + shift).collect::<Vec<_>>()),
        );
        Self {
            n: self.n + other.n,
            blocks,
        }
    }

    /// Inserts `inner` after the `p`-th element of the ground set of `self`.
    pub fn insert_after(&self, p: usize, inner: &Self) -> Self {
        assert!(p <= self.n, "insertion point {p} beyond ground set {}", self.n);
        let q = inner.n;
        let mut blocks: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&x| if x > p { x + q } else { x }).collect())
            .collect();
        blocks.extend(
            inner
                .blocks
                .iter()
                .map(|b| b.iter().map(|x| x + p).collect::<Vec<_>>()),
        );
        blocks.sort_unstable_by_key(|b| b[0]);
        Self {
            n: self.n + q,
            blocks,
        }
    }
}

impl fmt::Display for NonCrossingPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str("{")?;
            for (j, x) in b.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str("}")?;
        }
        f.write_str("}")
    }
}

impl FromStr for NonCrossingPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let inner = s
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| Error::config(format!("malformed partition `{s}`")))?;
        let mut blocks = Vec::new();
        for part in inner.split('}').filter(|p| !p.is_empty()) {
            let part = part.trim_start_matches(',');
            let body = part
                .strip_prefix('{')
                .ok_or_else(|| Error::config(format!("malformed block `{part}`")))?;
            let block = body
                .split(',')
                .map(|x| {
                    x.parse::<usize>()
                        .map_err(|_| Error::config(format!("bad position `{x}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(block);
        }
        let n = blocks.iter().map(Vec::len).sum();
        Self::new(n, blocks)
    }
}

/// Catalan numbers by the convolution recurrence.
pub fn catalan(k: usize) -> u64 {
    let mut c = vec![1u64; k + 1];
    for m in 1..=k {
        c[m] = (0..m).map(|i| c[i] * c[m - 1 - i]).sum();
    }
    c[k]
}

fn check_size(what: &'static str, n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::SizeLimit {
            what,
            value: n,
            min: 0,
            max,
        });
    }
    Ok(())
}

/// All of NC(n), in lexicographic order of the opener/closer encoding
/// (opener before closer). `n = 0` yields the single empty partition.
pub fn enumerate_nc(n: usize) -> Result<Vec<NonCrossingPartition>> {
    check_size("non-crossing partitions", n, MAX_NC)?;
    let mut out = Vec::with_capacity(catalan(n) as usize);
    let mut gen = Generator::new(n, false);
    gen.run(1, &mut out);
    Ok(out)
}

/// All non-crossing pair partitions of `1..=n`; empty for odd `n`.
pub fn enumerate_nc2(n: usize) -> Result<Vec<NonCrossingPartition>> {
    check_size("non-crossing pair partitions", n, MAX_NC2)?;
    if n % 2 == 1 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(catalan(n / 2) as usize);
    let mut gen = Generator::new(n, true);
    gen.run(1, &mut out);
    Ok(out)
}

struct Generator {
    n: usize,
    pairs_only: bool,
    blocks: Vec<Vec<usize>>,
    // (block index, elements still to come)
    open: Vec<(usize, usize)>,
    pending: usize,
}

impl Generator {
    fn new(n: usize, pairs_only: bool) -> Self {
        Self {
            n,
            pairs_only,
            blocks: Vec::new(),
            open: Vec::new(),
            pending: 0,
        }
    }

    fn run(&mut self, x: usize, out: &mut Vec<NonCrossingPartition>) {
        if x > self.n {
            if self.pending == 0 {
                out.push(NonCrossingPartition::from_sorted_unchecked(
                    self.n,
                    self.blocks.clone(),
                ));
            }
            return;
        }
        let after = self.n - x;
        // Open a new block of size s: more openers sort first.
        let max_size = (after + 1).saturating_sub(self.pending);
        let sizes: Vec<usize> = if max_size == 0 {
            vec![]
        } else if self.pairs_only {
            if max_size >= 2 { vec![2] } else { vec![] }
        } else {
            (1..=max_size).rev().collect()
        };
        for s in sizes {
            self.blocks.push(vec![x]);
            if s > 1 {
                self.open.push((self.blocks.len() - 1, s - 1));
                self.pending += s - 1;
            }
            self.run(x + 1, out);
            if s > 1 {
                self.open.pop();
                self.pending -= s - 1;
            }
            self.blocks.pop();
        }
        // Join the innermost open block.
        if let Some(&(b, need)) = self.open.last() {
            self.blocks[b].push(x);
            self.pending -= 1;
            if need == 1 {
                self.open.pop();
            } else {
                self.open.last_mut().unwrap().1 -= 1;
            }
            self.run(x + 1, out);
            if need == 1 {
                self.open.push((b, 1));
            } else {
                self.open.last_mut().unwrap().1 += 1;
            }
            self.pending += 1;
            self.blocks[b].pop();
        }
    }
}

/// One block of a partition together with the blocks nested directly inside it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NestingNode {
    pub block: Vec<usize>,
    pub children: Vec<NestedChild>,
}

/// A child subtree, inserted after the `after`-th element (1-based) of its
/// parent's block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NestedChild {
    pub after: usize,
    pub node: NestingNode,
}

/// Roots in left-to-right order; each root is an outer block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NestingForest {
    pub n: usize,
    pub roots: Vec<NestingNode>,
}

pub fn nesting_forest(pi: &NonCrossingPartition) -> NestingForest {
    let blocks = pi.blocks();
    // parent[i] = (parent block, insertion index) for nested blocks.
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; blocks.len()];
    for (i, b) in blocks.iter().enumerate() {
        let (lo, hi) = (b[0], *b.last().unwrap());
        // innermost enclosing block = the one with the largest minimum
        for (j, w) in blocks.iter().enumerate().take(i).rev() {
            if w[0] < lo && *w.last().unwrap() > hi {
                let after = w.iter().take_while(|&&x| x < lo).count();
                parent[i] = Some((j, after));
                break;
            }
        }
    }
    fn build(i: usize, blocks: &[Vec<usize>], parent: &[Option<(usize, usize)>]) -> NestingNode {
        let children = (i + 1..blocks.len())
            .filter_map(|c| match parent[c] {
                Some((p, after)) if p == i => Some(NestedChild {
                    after,
                    node: build(c, blocks, parent),
                }),
                _ => None,
            })
            .collect();
        NestingNode {
            block: blocks[i].clone(),
            children,
        }
    }
    let roots = (0..blocks.len())
        .filter(|&i| parent[i].is_none())
        .map(|i| build(i, blocks, &parent))
        .collect();
    NestingForest { n: pi.n(), roots }
}

impl NestingNode {
    /// Number of positions covered by this subtree.
    pub fn size(&self) -> usize {
        self.block.len() + self.children.iter().map(|c| c.node.size()).sum::<usize>()
    }

    /// Rebuilds the subtree as a partition of `1..=size` by the insertion rule.
    pub fn reconstruct(&self) -> NonCrossingPartition {
        let mut pi = NonCrossingPartition::one_block(self.block.len());
        let mut p = self.block.len();
        // Insert from the right so earlier insertion points stay valid.
        while p > 0 {
            let group: Vec<NonCrossingPartition> = self
                .children
                .iter()
                .filter(|c| c.after == p)
                .map(|c| c.node.reconstruct())
                .collect();
            if !group.is_empty() {
                let rho = group
                    .iter()
                    .skip(1)
                    .fold(group[0].clone(), |acc, r| acc.disjoint_union(r));
                pi = pi.insert_after(p, &rho);
            }
            p -= 1;
        }
        pi
    }
}

impl NestingForest {
    pub fn reconstruct(&self) -> NonCrossingPartition {
        self.roots
            .iter()
            .map(NestingNode::reconstruct)
            .fold(NonCrossingPartition::one_block(0), |acc, r| {
                acc.disjoint_union(&r)
            })
    }
}
