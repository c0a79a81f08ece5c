//! LZ78 incremental parsing and the prefix tree it builds.
//!
//! Parsing splits the input into phrases, each equal to a previously seen
//! phrase plus one new symbol. Every node keeps, per outgoing edge, how many
//! times that symbol was observed while the cursor sat at the node; the
//! ordered multiset of those observations is the node's subsequence. A
//! symbol observed at a node during a growing parse always leaves behind a
//! child edge labeled with it, so edge counts double as the node's symbol
//! histogram.

use std::collections::HashMap;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::loss::histogram_entropy;
use crate::types::{Alphabet, Symbol};

pub type NodeId = u32;

pub const ROOT: NodeId = 0;

/// Edge maps switch from a sorted array to a hash map past this size.
const SMALL_EDGE_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Edge {
    symbol: Symbol,
    child: NodeId,
    count: u64,
}

#[derive(Debug, Clone)]
enum Edges {
    Small(SmallVec<[Edge; 2]>),
    Large(HashMap<Symbol, (NodeId, u64)>),
}

impl Edges {
    fn new() -> Self {
        Edges::Small(SmallVec::new())
    }

    fn len(&self) -> usize {
        match self {
            Edges::Small(v) => v.len(),
            Edges::Large(m) => m.len(),
        }
    }

    fn find(&self, symbol: Symbol) -> Option<(NodeId, u64)> {
        match self {
            Edges::Small(v) => v
                .binary_search_by_key(&symbol, |e| e.symbol)
                .ok()
                .map(|i| (v[i].child, v[i].count)),
            Edges::Large(m) => m.get(&symbol).copied(),
        }
    }

    fn bump(&mut self, symbol: Symbol) {
        match self {
            Edges::Small(v) => {
                let i = v
                    .binary_search_by_key(&symbol, |e| e.symbol)
                    .expect("bump of a missing edge");
                v[i].count += 1;
            }
            Edges::Large(m) => m.get_mut(&symbol).expect("bump of a missing edge").1 += 1,
        }
    }

    fn insert(&mut self, symbol: Symbol, child: NodeId) {
        self.insert_with_count(symbol, child, 1);
    }

    fn insert_with_count(&mut self, symbol: Symbol, child: NodeId, count: u64) {
        match self {
            Edges::Small(v) => {
                let i = v
                    .binary_search_by_key(&symbol, |e| e.symbol)
                    .expect_err("edge already present");
                v.insert(
                    i,
                    Edge {
                        symbol,
                        child,
                        count,
                    },
                );
                if v.len() > SMALL_EDGE_LIMIT {
                    let m = v
                        .iter()
                        .map(|e| (e.symbol, (e.child, e.count)))
                        .collect::<HashMap<_, _>>();
                    *self = Edges::Large(m);
                }
            }
            Edges::Large(m) => {
                let prev = m.insert(symbol, (child, count));
                debug_assert!(prev.is_none());
            }
        }
    }

    /// Edges in ascending symbol order.
    fn sorted(&self) -> Vec<Edge> {
        match self {
            Edges::Small(v) => v.to_vec(),
            Edges::Large(m) => {
                let mut v: Vec<Edge> = m
                    .iter()
                    .map(|(&symbol, &(child, count))| Edge {
                        symbol,
                        child,
                        count,
                    })
                    .collect();
                v.sort_by_key(|e| e.symbol);
                v
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    edges: Edges,
    /// |Y{x^n, z}|: number of symbols observed while the cursor was here.
    total: u64,
    parent: NodeId,
    edge_symbol: Symbol,
    depth: u32,
}

impl Node {
    fn root() -> Self {
        Node {
            edges: Edges::new(),
            total: 0,
            parent: NodeId::MAX,
            edge_symbol: 0,
            depth: 0,
        }
    }
}

/// Traversal position: the LZ78 context of the next symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseCursor {
    pub node: NodeId,
    pub depth: u32,
}

impl ParseCursor {
    pub fn root() -> Self {
        ParseCursor {
            node: ROOT,
            depth: 0,
        }
    }
}

/// What a single parse step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    /// Node the symbol was attributed to (the cursor position before the step).
    pub visited: NodeId,
    pub created_leaf: bool,
    /// Whether the cursor returned to the root (phrase boundary or, when
    /// frozen, an unseen branch).
    pub reset_to_root: bool,
}

/// Read-only view of a node's visit counts.
#[derive(Debug, Clone, Copy)]
pub struct NodeCounts<'a> {
    node: &'a Node,
}

impl NodeCounts<'_> {
    pub fn total(&self) -> u64 {
        self.node.total
    }

    pub fn count(&self, symbol: Symbol) -> u64 {
        self.node.edges.find(symbol).map_or(0, |(_, c)| c)
    }

    /// `(symbol, count)` pairs with non-zero counts, ascending by symbol.
    pub fn nonzero(&self) -> Vec<(Symbol, u64)> {
        self.node
            .edges
            .sorted()
            .into_iter()
            .map(|e| (e.symbol, e.count))
            .collect()
    }

    /// Visits every non-zero count without allocating. Order is by symbol
    /// for the array representation and unspecified for the hash map.
    pub fn for_each_count(&self, mut f: impl FnMut(Symbol, u64)) {
        match &self.node.edges {
            Edges::Small(v) => {
                for e in v {
                    f(e.symbol, e.count);
                }
            }
            Edges::Large(m) => {
                for (&symbol, &(_, count)) in m {
                    f(symbol, count);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lz78Tree {
    nodes: Vec<Node>,
    alphabet: Alphabet,
    total_observed: u64,
}

impl Lz78Tree {
    pub fn new(alphabet: Alphabet) -> Self {
        Lz78Tree {
            nodes: vec![Node::root()],
            alphabet,
            total_observed: 0,
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Number of nodes including the root. The number of completed phrases
    /// is one less (plus one if a phrase is still open), so asymptotic
    /// claims are insensitive to the difference.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Total symbols attributed to nodes so far: `sum_z |Y{x^n, z}|`.
    pub fn total_observed(&self) -> u64 {
        self.total_observed
    }

    pub fn node_counts(&self, id: NodeId) -> NodeCounts<'_> {
        NodeCounts {
            node: &self.nodes[id as usize],
        }
    }

    pub fn node_total(&self, id: NodeId) -> u64 {
        self.nodes[id as usize].total
    }

    pub fn node_depth(&self, id: NodeId) -> u32 {
        self.nodes[id as usize].depth
    }

    pub fn child(&self, id: NodeId, symbol: Symbol) -> Option<NodeId> {
        self.nodes[id as usize].edges.find(symbol).map(|(c, _)| c)
    }

    pub fn num_children(&self, id: NodeId) -> usize {
        self.nodes[id as usize].edges.len()
    }

    /// One growing parse step: attribute `symbol` to the cursor's node,
    /// then either descend to the matching child or create it as a new
    /// leaf and return to the root (a phrase boundary).
    ///
    /// With `grow = false` the walk is identical but nothing is mutated and
    /// no leaf is created; an unseen branch just resets the cursor.
    pub fn parse_step(
        &mut self,
        cursor: &mut ParseCursor,
        symbol: Symbol,
        grow: bool,
    ) -> Result<StepOutcome> {
        if !grow {
            return self.traverse_step(cursor, symbol);
        }
        self.alphabet.check(symbol)?;
        let at = cursor.node;
        self.total_observed += 1;
        let node = &mut self.nodes[at as usize];
        node.total += 1;
        match node.edges.find(symbol) {
            Some((child, _)) => {
                node.edges.bump(symbol);
                cursor.node = child;
                cursor.depth += 1;
                Ok(StepOutcome {
                    visited: at,
                    created_leaf: false,
                    reset_to_root: false,
                })
            }
            None => {
                let new_id = NodeId::try_from(self.nodes.len())
                    .map_err(|_| Error::Malformed("tree exceeds u32 node limit".into()))?;
                let depth = cursor.depth + 1;
                self.nodes[at as usize].edges.insert(symbol, new_id);
                self.nodes.push(Node {
                    edges: Edges::new(),
                    total: 0,
                    parent: at,
                    edge_symbol: symbol,
                    depth,
                });
                *cursor = ParseCursor::root();
                Ok(StepOutcome {
                    visited: at,
                    created_leaf: true,
                    reset_to_root: true,
                })
            }
        }
    }

    /// Frozen traversal: follow the matching child, or return to the root
    /// when the branch does not exist. Mutates nothing.
    pub fn traverse_step(&self, cursor: &mut ParseCursor, symbol: Symbol) -> Result<StepOutcome> {
        self.alphabet.check(symbol)?;
        let at = cursor.node;
        match self.nodes[at as usize].edges.find(symbol) {
            Some((child, _)) => {
                cursor.node = child;
                cursor.depth += 1;
                Ok(StepOutcome {
                    visited: at,
                    created_leaf: false,
                    reset_to_root: false,
                })
            }
            None => {
                *cursor = ParseCursor::root();
                Ok(StepOutcome {
                    visited: at,
                    created_leaf: false,
                    reset_to_root: true,
                })
            }
        }
    }

    /// Parse a whole block, growing the tree. The cursor continues from
    /// wherever it was, so parsing a concatenation equals parsing the parts
    /// in order with the same cursor.
    pub fn parse_block(&mut self, cursor: &mut ParseCursor, symbols: &[Symbol]) -> Result<()> {
        for &s in symbols {
            self.parse_step(cursor, s, true)?;
        }
        Ok(())
    }

    /// The phrase spelled by the path from the root to `id`.
    pub fn phrase_of(&self, id: NodeId) -> Vec<Symbol> {
        let mut rev = Vec::new();
        let mut cur = id;
        while cur != ROOT {
            let n = &self.nodes[cur as usize];
            rev.push(n.edge_symbol);
            cur = n.parent;
        }
        rev.reverse();
        rev
    }

    /// All phrases in creation order (node ids 1..).
    pub fn phrases(&self) -> Vec<Vec<Symbol>> {
        (1..self.nodes.len() as NodeId)
            .map(|id| self.phrase_of(id))
            .collect()
    }

    /// `(1/n) * sum_z |Y{x^n, z}| * mu_0(Y{x^n, z})`: the per-node
    /// zero-order entropy total, computed from the per-node histograms.
    pub fn subsequence_entropy(&self) -> f64 {
        if self.total_observed == 0 {
            return 0.0;
        }
        let mut bits = 0.0;
        for node in &self.nodes {
            if node.total == 0 {
                continue;
            }
            let counts: Vec<u64> = node.edges.sorted().iter().map(|e| e.count).collect();
            bits += node.total as f64 * histogram_entropy(&counts);
        }
        bits / self.total_observed as f64
    }

    /// Largest `|Y{x^n, z}|` over all nodes; attained at the root, which is
    /// visited once per phrase.
    pub fn max_node_visits(&self) -> u64 {
        self.nodes.iter().map(|n| n.total).max().unwrap_or(0)
    }

    /// Histogram of node depths, indexed by depth.
    pub fn depth_histogram(&self) -> Vec<u64> {
        let max_depth = self.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        let mut hist = vec![0u64; max_depth as usize + 1];
        for n in &self.nodes {
            hist[n.depth as usize] += 1;
        }
        hist
    }

    pub(crate) fn write_nodes(&self, out: &mut Vec<u8>) {
        crate::wire::put_u64(out, self.nodes.len() as u64);
        crate::wire::put_u64(out, self.total_observed);
        for node in &self.nodes {
            let edges = node.edges.sorted();
            crate::wire::put_u32(out, edges.len() as u32);
            for e in edges {
                crate::wire::put_u32(out, e.symbol);
                crate::wire::put_u32(out, e.child);
                crate::wire::put_u64(out, e.count);
            }
        }
    }

    pub(crate) fn read_nodes(r: &mut crate::wire::Reader<'_>, alphabet: Alphabet) -> Result<Self> {
        let node_count = r.take_u64()?;
        let total_observed = r.take_u64()?;
        // Each node costs at least 4 bytes on the wire; reject counts the
        // remaining buffer cannot possibly hold.
        if node_count == 0 || node_count > (r.remaining() as u64 / 4) + 1 {
            return Err(Error::Malformed(format!("implausible node count {node_count}")));
        }
        let node_count = node_count as usize;
        let mut nodes = vec![Node::root(); node_count];
        let mut seen_as_child = vec![false; node_count];
        for id in 0..node_count {
            let edge_count = r.take_u32()? as usize;
            let mut edges = Edges::new();
            let mut total = 0u64;
            let mut last_symbol: Option<Symbol> = None;
            for _ in 0..edge_count {
                let symbol = r.take_u32()?;
                let child = r.take_u32()?;
                let count = r.take_u64()?;
                if !alphabet.contains(symbol) {
                    return Err(Error::Malformed(format!("edge symbol {symbol} out of range")));
                }
                if last_symbol.is_some_and(|prev| symbol <= prev) {
                    return Err(Error::Malformed("edges not strictly ascending".into()));
                }
                last_symbol = Some(symbol);
                let child_idx = child as usize;
                if child_idx <= id || child_idx >= node_count {
                    return Err(Error::Malformed(format!("edge child {child} out of range")));
                }
                if seen_as_child[child_idx] {
                    return Err(Error::Malformed(format!("node {child} has two parents")));
                }
                if count == 0 {
                    return Err(Error::Malformed("zero-count edge".into()));
                }
                seen_as_child[child_idx] = true;
                nodes[child_idx].parent = id as NodeId;
                nodes[child_idx].edge_symbol = symbol;
                total = total
                    .checked_add(count)
                    .ok_or_else(|| Error::Malformed("count overflow".into()))?;
                edges.insert_with_count(symbol, child, count);
            }
            nodes[id].edges = edges;
            nodes[id].total = total;
        }
        if seen_as_child[ROOT as usize] {
            return Err(Error::Malformed("root listed as a child".into()));
        }
        for (id, seen) in seen_as_child.iter().enumerate().skip(1) {
            if !seen {
                return Err(Error::Malformed(format!("orphan node {id}")));
            }
        }
        // Children always carry larger ids than their parent, so one
        // forward pass fixes every depth.
        for id in 1..node_count {
            let parent_depth = nodes[nodes[id].parent as usize].depth;
            nodes[id].depth = parent_depth + 1;
        }
        let sum: u64 = nodes.iter().map(|n| n.total).sum();
        if sum != total_observed {
            return Err(Error::Malformed("visit counts disagree with header".into()));
        }
        Ok(Lz78Tree {
            nodes,
            alphabet,
            total_observed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Sequence;

    fn bin() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    fn parse(digits: &str) -> (Lz78Tree, ParseCursor, Vec<StepOutcome>) {
        let seq = Sequence::from_digits(bin(), digits).unwrap();
        let mut tree = Lz78Tree::new(bin());
        let mut cursor = ParseCursor::root();
        let outcomes = seq
            .tokens()
            .iter()
            .map(|&s| tree.parse_step(&mut cursor, s, true).unwrap())
            .collect();
        (tree, cursor, outcomes)
    }

    #[test]
    fn worked_example_phrases() {
        let (tree, _, _) = parse("00011001");
        let phrases: Vec<String> = tree
            .phrases()
            .iter()
            .map(|p| p.iter().map(|s| s.to_string()).collect())
            .collect();
        assert_eq!(phrases, vec!["0", "00", "1", "10", "01"]);
        assert_eq!(tree.node_count(), 6);
    }

    #[test]
    fn worked_example_node_subsequences() {
        let (tree, _, outcomes) = parse("00011001");
        let seq = Sequence::from_digits(bin(), "00011001").unwrap();
        let mut per_node: Vec<Vec<Symbol>> = vec![Vec::new(); tree.node_count()];
        for (o, &s) in outcomes.iter().zip(seq.tokens()) {
            per_node[o.visited as usize].push(s);
        }
        assert_eq!(per_node[ROOT as usize], vec![0, 0, 1, 1, 0]);
        // Node 1 is the phrase "0".
        assert_eq!(tree.phrase_of(1), vec![0]);
        assert_eq!(per_node[1], vec![0, 1]);
        // Counts recorded in the tree agree with the replayed subsequences.
        for (id, ys) in per_node.iter().enumerate() {
            assert_eq!(tree.node_total(id as NodeId), ys.len() as u64);
            for sym in 0..2 {
                let expect = ys.iter().filter(|&&y| y == sym).count() as u64;
                assert_eq!(tree.node_counts(id as NodeId).count(sym), expect);
            }
        }
    }

    #[test]
    fn single_symbol_creates_one_leaf() {
        let (tree, cursor, outcomes) = parse("0");
        assert_eq!(tree.node_count(), 2);
        assert_eq!(cursor, ParseCursor::root());
        assert!(outcomes[0].created_leaf);
    }

    #[test]
    fn empty_tree_has_only_root() {
        let tree = Lz78Tree::new(bin());
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.total_observed(), 0);
    }

    #[test]
    fn attribution_partitions_the_sequence() {
        let (tree, _, _) = parse("0001100101101");
        assert_eq!(tree.total_observed(), 13);
        let sum: u64 = (0..tree.node_count() as NodeId)
            .map(|id| tree.node_total(id))
            .sum();
        assert_eq!(sum, 13);
    }

    #[test]
    fn depth_increases_within_phrases() {
        let seq = Sequence::from_digits(bin(), "00011001").unwrap();
        let mut tree = Lz78Tree::new(bin());
        let mut cursor = ParseCursor::root();
        for &s in seq.tokens() {
            let before = cursor.depth;
            let o = tree.parse_step(&mut cursor, s, true).unwrap();
            if o.reset_to_root {
                assert_eq!(cursor.depth, 0);
            } else {
                assert_eq!(cursor.depth, before + 1);
            }
        }
    }

    #[test]
    fn completed_phrases_are_unique() {
        let (tree, _, _) = parse("011010111001011010010110");
        let phrases = tree.phrases();
        let mut dedup = phrases.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), phrases.len());
    }

    #[test]
    fn frozen_traversal_mutates_nothing() {
        let (tree, _, _) = parse("00011001");
        let before_total = tree.total_observed();
        let before_nodes = tree.node_count();
        let mut cursor = ParseCursor::root();
        for &s in [0u32, 1, 1, 1, 0, 0].iter() {
            tree.traverse_step(&mut cursor, s).unwrap();
        }
        assert_eq!(tree.total_observed(), before_total);
        assert_eq!(tree.node_count(), before_nodes);
    }

    #[test]
    fn frozen_traversal_resets_at_unseen_branches() {
        let (tree, _, _) = parse("00011001");
        let mut cursor = ParseCursor::root();
        // "11" is not a node: after following 1, another 1 resets.
        tree.traverse_step(&mut cursor, 1).unwrap();
        assert_eq!(cursor.depth, 1);
        let o = tree.traverse_step(&mut cursor, 1).unwrap();
        assert!(o.reset_to_root);
        assert_eq!(cursor, ParseCursor::root());
    }

    #[test]
    fn rejects_out_of_alphabet_symbols() {
        let mut tree = Lz78Tree::new(bin());
        let mut cursor = ParseCursor::root();
        assert!(tree.parse_step(&mut cursor, 2, true).is_err());
        assert!(tree.traverse_step(&mut cursor, 7).is_err());
    }

    #[test]
    fn visit_count_accounting() {
        // visits(z) = sum_child visits(c) + #children(z) + eps_z with
        // eps_z in {0,1} and at most one dangling descent per parse.
        let (tree, _, _) = parse("0000");
        let mut excess_total = 0u64;
        for id in 0..tree.node_count() as NodeId {
            let child_sum: u64 = tree
                .node_counts(id)
                .nonzero()
                .iter()
                .map(|&(s, _)| tree.node_total(tree.child(id, s).unwrap()))
                .sum();
            let expected_min = child_sum + tree.num_children(id) as u64;
            let excess = tree.node_total(id) - expected_min;
            assert!(excess <= 1, "node {id}");
            excess_total += excess;
        }
        assert!(excess_total <= 1);
    }

    #[test]
    fn constant_sequence_has_zero_subsequence_entropy() {
        let (tree, _, _) = parse("000000000000");
        assert_eq!(tree.subsequence_entropy(), 0.0);
    }

    #[test]
    fn subsequence_entropy_of_worked_example() {
        // Y{root} = (0,0,1,1,0) -> 5*H(3/5); Y{"0"} = (0,1) -> 2*1;
        // all other nodes are constant or empty.
        let (tree, _, _) = parse("00011001");
        let h35 = {
            let p: f64 = 3.0 / 5.0;
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        };
        let expected = (5.0 * h35 + 2.0 + 0.0) / 8.0;
        assert!((tree.subsequence_entropy() - expected).abs() < 1e-12);
    }

    #[test]
    fn concatenated_parse_equals_sequential_parse() {
        let a = Sequence::from_digits(bin(), "0001").unwrap();
        let b = Sequence::from_digits(bin(), "1001").unwrap();
        let joined = a.concat(&b).unwrap();

        let mut t1 = Lz78Tree::new(bin());
        let mut c1 = ParseCursor::root();
        t1.parse_block(&mut c1, joined.tokens()).unwrap();

        let mut t2 = Lz78Tree::new(bin());
        let mut c2 = ParseCursor::root();
        t2.parse_block(&mut c2, a.tokens()).unwrap();
        t2.parse_block(&mut c2, b.tokens()).unwrap();

        assert_eq!(c1, c2);
        assert_eq!(t1.node_count(), t2.node_count());
        assert_eq!(t1.phrases(), t2.phrases());
    }

    #[test]
    fn edge_map_upgrade_preserves_lookups() {
        let a = Alphabet::new(256).unwrap();
        let mut tree = Lz78Tree::new(a);
        let mut cursor = ParseCursor::root();
        // 200 distinct symbols at the root forces the hash-map representation.
        for s in 0..200u32 {
            tree.parse_step(&mut cursor, s, true).unwrap();
        }
        assert_eq!(tree.node_count(), 201);
        for s in 0..200u32 {
            assert!(tree.child(ROOT, s).is_some());
            assert_eq!(tree.node_counts(ROOT).count(s), 1);
        }
        assert_eq!(tree.node_counts(ROOT).nonzero().len(), 200);
    }
}
