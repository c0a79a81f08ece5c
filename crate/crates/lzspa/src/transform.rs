//! The LZ78 transform: one copy of an inner SPA per prefix-tree node, each
//! predicting on the disjoint subsequence of symbols parsed at its node.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::loss::LogLossReport;
use crate::spa::{DirichletSpa, Spa, UniformSpa};
use crate::tree::{Lz78Tree, NodeCounts, ParseCursor};
use crate::types::{Alphabet, Pmf, Sequence, Symbol};
use crate::wire;

/// The per-node model family wrapped by the transform. The tree itself
/// maintains each node's symbol counts; a family that needs more than
/// counts (a context-tree or n-gram model, say) hangs its extra state off
/// [`InnerSpa::NodeState`].
pub trait InnerSpa: Clone + Send + Sync {
    type NodeState: Clone + Default + Send + Sync;

    fn alphabet(&self) -> Alphabet;

    /// Next-symbol distribution at a node.
    fn node_dist(&self, counts: NodeCounts<'_>, state: &Self::NodeState) -> Pmf;

    /// Probability of one symbol at a node; O(1) for count-based families.
    fn node_prob(&self, counts: NodeCounts<'_>, state: &Self::NodeState, symbol: Symbol) -> f64;

    /// Allocation-free variant of [`InnerSpa::node_dist`].
    fn node_dist_into(&self, counts: NodeCounts<'_>, state: &Self::NodeState, out: &mut [f64]) {
        out.copy_from_slice(self.node_dist(counts, state).probs());
    }

    /// Hook for updating auxiliary per-node state on an observation. Count
    /// bookkeeping is the tree's job, so count-based families do nothing.
    fn node_observe(&self, _state: &mut Self::NodeState, _symbol: Symbol) {}
}

impl InnerSpa for DirichletSpa {
    type NodeState = ();

    fn alphabet(&self) -> Alphabet {
        Spa::alphabet(self)
    }

    fn node_dist(&self, counts: NodeCounts<'_>, _state: &()) -> Pmf {
        self.dist_for_counts(counts.total(), |s| counts.count(s))
    }

    fn node_prob(&self, counts: NodeCounts<'_>, _state: &(), symbol: Symbol) -> f64 {
        let a = Spa::alphabet(self).size() as f64;
        (counts.count(symbol) as f64 + self.gamma())
            / (counts.total() as f64 + a * self.gamma())
    }

    fn node_dist_into(&self, counts: NodeCounts<'_>, _state: &(), out: &mut [f64]) {
        let a = Spa::alphabet(self).size() as f64;
        let denom = counts.total() as f64 + a * self.gamma();
        out.fill(self.gamma() / denom);
        counts.for_each_count(|sym, count| {
            out[sym as usize] = (count as f64 + self.gamma()) / denom;
        });
    }
}

impl InnerSpa for UniformSpa {
    type NodeState = ();

    fn alphabet(&self) -> Alphabet {
        Spa::alphabet(self)
    }

    fn node_dist(&self, _counts: NodeCounts<'_>, _state: &()) -> Pmf {
        Pmf::uniform(Spa::alphabet(self))
    }

    fn node_prob(&self, _counts: NodeCounts<'_>, _state: &(), _symbol: Symbol) -> f64 {
        1.0 / Spa::alphabet(self).size() as f64
    }
}

/// Costs of a trained transform, for an O(1)-memory / O(n)-time inner SPA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport {
    /// Nodes in the tree; memory is proportional to this for O(1) inner SPAs.
    pub node_count: usize,
    /// Total symbols processed; time is proportional to this for O(n) inner
    /// SPAs, because node subsequence lengths partition the input.
    pub total_symbols: u64,
    /// Largest node subsequence, attained at the root.
    pub max_node_visits: u64,
    /// node_count / (n / log2 n), the phrase-sublinearity ratio.
    pub nodes_per_n_over_log2n: f64,
}

/// An inner-SPA family lifted through the LZ78 tree. Training parses with
/// growth; a frozen model only walks existing branches, returning to the
/// root at unseen ones.
#[derive(Debug, Clone)]
pub struct Lz78Spa<F: InnerSpa = DirichletSpa> {
    tree: Lz78Tree,
    node_states: Vec<F::NodeState>,
    family: F,
    frozen: bool,
    epochs_trained: u32,
    training_loss_bits: f64,
    training_symbols: u64,
}

impl<F: InnerSpa> Lz78Spa<F> {
    pub fn new(family: F) -> Self {
        let tree = Lz78Tree::new(family.alphabet());
        Lz78Spa {
            tree,
            node_states: vec![F::NodeState::default()],
            family,
            frozen: false,
            epochs_trained: 0,
            training_loss_bits: 0.0,
            training_symbols: 0,
        }
    }

    pub fn tree(&self) -> &Lz78Tree {
        &self.tree
    }

    pub fn family(&self) -> &F {
        &self.family
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn epochs_trained(&self) -> u32 {
        self.epochs_trained
    }

    /// Per-symbol self-entropy log loss accumulated across all training.
    pub fn normalized_training_loss(&self) -> f64 {
        if self.training_symbols == 0 {
            0.0
        } else {
            self.training_loss_bits / self.training_symbols as f64
        }
    }

    /// Parse the sequences into the tree for the given number of epochs,
    /// in order and without reshuffling. The cursor returns to the root at
    /// every sequence boundary. Returns the self-entropy log loss in bits
    /// incurred over everything parsed by this call.
    pub fn train(&mut self, sequences: &[Sequence], epochs: u32) -> Result<f64> {
        if self.frozen {
            return Err(Error::ModelFrozen);
        }
        for seq in sequences {
            self.family.alphabet().check_matches(seq.alphabet())?;
        }
        let mut bits = 0.0;
        for _ in 0..epochs {
            for seq in sequences {
                let mut cursor = ParseCursor::root();
                bits += self.train_block(&mut cursor, seq.tokens())?;
            }
        }
        self.epochs_trained += epochs;
        Ok(bits)
    }

    /// Parse one block from the given cursor, growing the tree. Exposed so
    /// callers can keep context across blocks of the same stream.
    pub fn train_block(&mut self, cursor: &mut ParseCursor, symbols: &[Symbol]) -> Result<f64> {
        if self.frozen {
            return Err(Error::ModelFrozen);
        }
        let mut bits = 0.0;
        for &sym in symbols {
            let node = cursor.node;
            let p = self
                .family
                .node_prob(self.tree.node_counts(node), &self.node_states[node as usize], sym);
            bits += -p.log2();
            self.family
                .node_observe(&mut self.node_states[node as usize], sym);
            let outcome = self.tree.parse_step(cursor, sym, true)?;
            if outcome.created_leaf {
                self.node_states.push(F::NodeState::default());
            }
        }
        self.training_loss_bits += bits;
        self.training_symbols += symbols.len() as u64;
        Ok(bits)
    }

    /// Log loss of the model on `seq`, walking from the root with frozen
    /// traversal. Mutates nothing, so repeated evaluation is bit-identical.
    pub fn evaluate_log_loss(&self, seq: &Sequence) -> Result<LogLossReport> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        self.family.alphabet().check_matches(seq.alphabet())?;
        let mut cursor = ParseCursor::root();
        let mut bits = 0.0;
        for &sym in seq.tokens() {
            let node = cursor.node;
            let p = self
                .family
                .node_prob(self.tree.node_counts(node), &self.node_states[node as usize], sym);
            bits += -p.log2();
            self.tree.traverse_step(&mut cursor, sym)?;
        }
        Ok(LogLossReport::from_total(bits, seq.len()))
    }

    pub fn complexity_report(&self) -> ComplexityReport {
        let n = self.tree.total_observed();
        let denom = if n >= 2 {
            n as f64 / (n as f64).log2()
        } else {
            1.0
        };
        ComplexityReport {
            node_count: self.tree.node_count(),
            total_symbols: n,
            max_node_visits: self.tree.max_node_visits(),
            nodes_per_n_over_log2n: self.tree.node_count() as f64 / denom,
        }
    }
}

impl<F: InnerSpa> Spa for Lz78Spa<F> {
    type State = ParseCursor;

    fn alphabet(&self) -> Alphabet {
        self.family.alphabet()
    }

    fn initial_state(&self) -> ParseCursor {
        ParseCursor::root()
    }

    fn next_dist(&self, state: &ParseCursor) -> Pmf {
        self.family
            .node_dist(self.tree.node_counts(state.node), &self.node_states[state.node as usize])
    }

    fn next_dist_into(&self, state: &ParseCursor, out: &mut [f64]) {
        self.family.node_dist_into(
            self.tree.node_counts(state.node),
            &self.node_states[state.node as usize],
            out,
        );
    }

    fn advance(&self, state: &mut ParseCursor, symbol: Symbol) -> Result<()> {
        self.tree.traverse_step(state, symbol)?;
        Ok(())
    }

    fn observe(&mut self, state: &mut ParseCursor, symbol: Symbol) -> Result<()> {
        if self.frozen {
            return self.advance(state, symbol);
        }
        let node = state.node;
        let p = self
            .family
            .node_prob(self.tree.node_counts(node), &self.node_states[node as usize], symbol);
        self.training_loss_bits += -p.log2();
        self.training_symbols += 1;
        self.family
            .node_observe(&mut self.node_states[node as usize], symbol);
        let outcome = self.tree.parse_step(state, symbol, true)?;
        if outcome.created_leaf {
            self.node_states.push(F::NodeState::default());
        }
        Ok(())
    }
}

const MODEL_MAGIC: &[u8; 4] = b"LZSP";
const MODEL_VERSION: u16 = 1;

impl Lz78Spa<DirichletSpa> {
    pub fn new_dirichlet(alphabet: Alphabet, gamma: f64) -> Result<Self> {
        Ok(Lz78Spa::new(DirichletSpa::new(alphabet, gamma)?))
    }

    pub fn gamma(&self) -> f64 {
        self.family.gamma()
    }

    /// Serializes the model: magic, version, alphabet size, gamma, epoch
    /// count, frozen flag, the node array (per node: its outgoing edges as
    /// symbol/child/count triples), and a trailing CRC32 of everything.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        wire::put_u16(&mut out, MODEL_VERSION);
        wire::put_u32(&mut out, self.alphabet().size());
        wire::put_f64(&mut out, self.family.gamma());
        wire::put_u32(&mut out, self.epochs_trained);
        wire::put_u8(&mut out, self.frozen as u8);
        wire::put_f64(&mut out, self.training_loss_bits);
        wire::put_u64(&mut out, self.training_symbols);
        self.tree.write_nodes(&mut out);
        let crc = crc32fast::hash(&out);
        wire::put_u32(&mut out, crc);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated);
        }
        if &bytes[..4] != MODEL_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < 8 {
            return Err(Error::Truncated);
        }
        let body_len = bytes.len() - 4;
        let stored_crc = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
        if crc32fast::hash(&bytes[..body_len]) != stored_crc {
            return Err(Error::ChecksumMismatch);
        }
        let mut r = wire::Reader::new(&bytes[4..body_len]);
        let version = r.take_u16()?;
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let alphabet = Alphabet::new(r.take_u32()?)?;
        let gamma = r.take_f64()?;
        let family = DirichletSpa::new(alphabet, gamma)?;
        let epochs_trained = r.take_u32()?;
        let frozen = match r.take_u8()? {
            0 => false,
            1 => true,
            v => return Err(Error::Malformed(format!("bad frozen flag {v}"))),
        };
        let training_loss_bits = r.take_f64()?;
        if !training_loss_bits.is_finite() || training_loss_bits < 0.0 {
            return Err(Error::Malformed("bad training loss".into()));
        }
        let training_symbols = r.take_u64()?;
        let tree = Lz78Tree::read_nodes(&mut r, alphabet)?;
        if r.remaining() != 0 {
            return Err(Error::Malformed("trailing bytes".into()));
        }
        if tree.total_observed() != training_symbols {
            return Err(Error::Malformed("symbol totals disagree".into()));
        }
        let node_states = vec![(); tree.node_count()];
        Ok(Lz78Spa {
            tree,
            node_states,
            family,
            frozen,
            epochs_trained,
            training_loss_bits,
            training_symbols,
        })
    }

    /// SHA-256 of the serialized model; identifies the exact model a static
    /// encoded stream was produced with.
    pub fn model_hash(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.to_bytes());
        digest.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::log_loss;
    use crate::spa::CountState;

    fn bin() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    fn worked() -> Sequence {
        Sequence::from_digits(bin(), "00011001").unwrap()
    }

    fn trained(gamma: f64) -> Lz78Spa {
        let mut m = Lz78Spa::new_dirichlet(bin(), gamma).unwrap();
        m.train(&[worked()], 1).unwrap();
        m
    }

    #[test]
    fn fresh_model_predicts_the_prior() {
        let m = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
        let d = m.next_dist(&m.initial_state());
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn root_dist_after_worked_example() {
        // Y{root} = (0,0,1,1,0): counts (3,2), gamma 0.5 ->
        // ((3.5)/6, (2.5)/6).
        let m = trained(0.5);
        let d = m.next_dist(&m.initial_state());
        assert!((d.prob(0) - 3.5 / 6.0).abs() < 1e-12);
        assert!((d.prob(1) - 2.5 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_epochs_changes_nothing() {
        let mut m = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
        m.train(&[worked()], 0).unwrap();
        assert_eq!(m.tree().node_count(), 1);
        assert_eq!(m.epochs_trained(), 0);
    }

    #[test]
    fn more_epochs_never_shrink_the_tree() {
        let mut one = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
        one.train(&[worked()], 1).unwrap();
        let mut many = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
        many.train(&[worked()], 20).unwrap();
        assert!(many.tree().node_count() >= one.tree().node_count());
    }

    #[test]
    fn frozen_evaluation_is_pure() {
        let mut m = trained(0.5);
        m.freeze();
        let before = m.to_bytes();
        let test = Sequence::from_digits(bin(), "0110011101").unwrap();
        let a = m.evaluate_log_loss(&test).unwrap();
        let b = m.evaluate_log_loss(&test).unwrap();
        assert_eq!(a.total_bits.to_bits(), b.total_bits.to_bits());
        assert_eq!(m.to_bytes(), before);
    }

    #[test]
    fn frozen_observe_does_not_grow() {
        let mut m = trained(0.5);
        m.freeze();
        let nodes = m.tree().node_count();
        let mut st = m.initial_state();
        for &s in [1u32, 1, 1, 0, 0, 1].iter() {
            m.observe(&mut st, s).unwrap();
        }
        assert_eq!(m.tree().node_count(), nodes);
        assert!(m.train(&[worked()], 1).is_err());
    }

    #[test]
    fn training_loss_decomposes_over_nodes() {
        // The transform's log loss equals the sum over nodes of a fresh
        // Dirichlet SPA's loss on that node's subsequence.
        let gamma = 0.5;
        let seq = Sequence::from_digits(bin(), "0001100101101000110").unwrap();
        let mut m = Lz78Spa::new_dirichlet(bin(), gamma).unwrap();
        let total = m.train(std::slice::from_ref(&seq), 1).unwrap();

        // Replay the parse to collect per-node subsequences.
        let mut replay = Lz78Tree::new(bin());
        let mut cursor = ParseCursor::root();
        let mut subsequences: Vec<Vec<Symbol>> = vec![Vec::new()];
        for &s in seq.tokens() {
            subsequences[cursor.node as usize].push(s);
            let o = replay.parse_step(&mut cursor, s, true).unwrap();
            if o.created_leaf {
                subsequences.push(Vec::new());
            }
        }
        let inner = DirichletSpa::new(bin(), gamma).unwrap();
        let mut per_node_sum = 0.0;
        for ys in &subsequences {
            if ys.is_empty() {
                continue;
            }
            let mut st = CountState::new(bin());
            for &y in ys {
                per_node_sum += -inner.next_dist(&st).prob(y).log2();
                inner.advance(&mut st, y).unwrap();
            }
        }
        assert!((total - per_node_sum).abs() < 1e-9);
    }

    #[test]
    fn trained_model_beats_uniform_on_its_training_data() {
        let seq = Sequence::from_digits(bin(), "01010101010101010101010101").unwrap();
        let mut m = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
        m.train(std::slice::from_ref(&seq), 5).unwrap();
        m.freeze();
        let r = m.evaluate_log_loss(&seq).unwrap();
        assert!(r.per_symbol_bits < 1.0);
    }

    #[test]
    fn evaluate_matches_generic_log_loss_helper() {
        let mut m = trained(0.5);
        m.freeze();
        let test = Sequence::from_digits(bin(), "1100101").unwrap();
        let direct = m.evaluate_log_loss(&test).unwrap();
        let generic = log_loss(&m, &test).unwrap();
        assert!((direct.total_bits - generic.total_bits).abs() < 1e-12);
    }

    #[test]
    fn complexity_identities() {
        let m = trained(0.5);
        let c = m.complexity_report();
        assert_eq!(c.node_count, 6);
        assert_eq!(c.total_symbols, 8);
        // The root is the most-visited node, once per phrase.
        assert_eq!(c.max_node_visits, m.tree().node_total(crate::tree::ROOT));
        assert_eq!(c.max_node_visits, 5);
    }

    #[test]
    fn serialization_round_trips_exactly() {
        let mut m = trained(0.25);
        m.freeze();
        let bytes = m.to_bytes();
        let back = Lz78Spa::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.gamma(), 0.25);
        assert_eq!(back.epochs_trained(), 1);
        assert!(back.is_frozen());
        assert_eq!(back.tree().node_count(), m.tree().node_count());
        // Identical next_dist at every node.
        for id in 0..m.tree().node_count() as u32 {
            let cur = ParseCursor {
                node: id,
                depth: m.tree().node_depth(id),
            };
            assert_eq!(m.next_dist(&cur).probs(), back.next_dist(&cur).probs());
        }
    }

    #[test]
    fn deserialize_error_paths_are_distinct() {
        let m = trained(0.5);
        let bytes = m.to_bytes();

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert_eq!(Lz78Spa::from_bytes(&wrong_magic).err(), Some(Error::BadMagic));

        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        // Version byte is covered by the checksum, so recompute it.
        let len = wrong_version.len() - 4;
        let crc = crc32fast::hash(&wrong_version[..len]);
        wrong_version[len..].copy_from_slice(&crc.to_le_bytes());
        assert_eq!(
            Lz78Spa::from_bytes(&wrong_version).err(),
            Some(Error::UnsupportedVersion(9))
        );

        let truncated = &bytes[..bytes.len() - 7];
        assert!(matches!(
            Lz78Spa::from_bytes(truncated),
            Err(Error::ChecksumMismatch) | Err(Error::Truncated)
        ));

        let mut corrupt = bytes.clone();
        let mid = corrupt.len() / 2;
        corrupt[mid] ^= 0xff;
        assert_eq!(Lz78Spa::from_bytes(&corrupt).err(), Some(Error::ChecksumMismatch));
    }

    #[test]
    fn frozen_models_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Lz78Spa>();
        assert_send_sync::<crate::tree::Lz78Tree>();
    }

    #[test]
    fn multi_sequence_training_resets_cursor_between_sequences() {
        let a = Sequence::from_digits(bin(), "000").unwrap();
        let b = Sequence::from_digits(bin(), "111").unwrap();
        let mut m = Lz78Spa::new_dirichlet(bin(), 0.5).unwrap();
        m.train(&[a, b], 1).unwrap();
        // "000" -> nodes 0, 00 with cursor mid-phrase at "0"; the reset means
        // "111" starts at the root, so node "1" exists.
        assert!(m.tree().child(crate::tree::ROOT, 1).is_some());
    }
}
