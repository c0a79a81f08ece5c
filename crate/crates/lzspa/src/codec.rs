//! Arithmetic coding driven by any SPA: the compressed size tracks the
//! model's log loss, which is the whole point of the transform.
//!
//! The coder is a 64-bit low/high arithmetic coder with pending-bit carry
//! propagation and a 32-bit probability scale, so no symbol interval ever
//! falls below 2^-32. The container wraps the raw bits with enough header
//! to decode: magic, version, mode, alphabet size, length, an optional
//! model hash for the static mode, and a CRC32.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spa::Spa;
use crate::types::{Alphabet, Pmf, Sequence};
use crate::wire;

const STREAM_MAGIC: &[u8; 4] = b"LZAC";
const STREAM_VERSION: u16 = 1;

/// Probability scale: symbol frequencies are quantized to sum to 2^32.
const PROB_BITS: u32 = 32;
const PROB_SCALE: u64 = 1 << PROB_BITS;

const STATE_BITS: u32 = 64;
const HALF: u64 = 1 << (STATE_BITS - 1);
const QUARTER: u64 = 1 << (STATE_BITS - 2);
const THREE_QUARTERS: u64 = HALF + QUARTER;

/// Whether the model travels with the stream or is rebuilt from scratch on
/// both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecMode {
    /// Encoder and decoder both start from an empty adaptive model and
    /// replay identical updates.
    Adaptive,
    /// A pre-trained frozen model, shipped out of band and referenced by
    /// its hash.
    Static,
}

/// A self-describing encoded stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedStream {
    pub mode: CodecMode,
    pub alphabet: Alphabet,
    pub len: u64,
    pub model_hash: Option<[u8; 32]>,
    pub payload: Vec<u8>,
}

impl EncodedStream {
    pub fn payload_bits(&self) -> u64 {
        self.payload.len() as u64 * 8
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + 64);
        out.extend_from_slice(STREAM_MAGIC);
        wire::put_u16(&mut out, STREAM_VERSION);
        wire::put_u8(&mut out, matches!(self.mode, CodecMode::Static) as u8);
        wire::put_u32(&mut out, self.alphabet.size());
        wire::put_u64(&mut out, self.len);
        match &self.model_hash {
            Some(h) => {
                wire::put_u8(&mut out, 1);
                out.extend_from_slice(h);
            }
            None => wire::put_u8(&mut out, 0),
        }
        wire::put_u64(&mut out, self.payload.len() as u64);
        out.extend_from_slice(&self.payload);
        let crc = crc32fast::hash(&out);
        wire::put_u32(&mut out, crc);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated);
        }
        if &bytes[..4] != STREAM_MAGIC {
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
        if version != STREAM_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let mode = match r.take_u8()? {
            0 => CodecMode::Adaptive,
            1 => CodecMode::Static,
            v => return Err(Error::Malformed(format!("bad mode flag {v}"))),
        };
        let alphabet = Alphabet::new(r.take_u32()?)?;
        let len = r.take_u64()?;
        let model_hash = match r.take_u8()? {
            0 => None,
            1 => Some(r.take_bytes(32)?.try_into().unwrap()),
            v => return Err(Error::Malformed(format!("bad hash flag {v}"))),
        };
        if matches!(mode, CodecMode::Static) && model_hash.is_none() {
            return Err(Error::Malformed("static stream without model hash".into()));
        }
        let payload_len = r.take_u64()?;
        if payload_len != r.remaining() as u64 {
            return Err(Error::Malformed(format!(
                "payload length {payload_len} disagrees with container"
            )));
        }
        let payload = r.take_bytes(payload_len as usize)?.to_vec();
        Ok(EncodedStream {
            mode,
            alphabet,
            len,
            model_hash,
            payload,
        })
    }
}

/// Quantized cumulative frequencies for one coding step: `bounds[s]..bounds[s+1]`
/// out of 2^32, every symbol interval non-empty.
fn cumulative_freqs(pmf: &Pmf) -> Vec<u64> {
    let a = pmf.len();
    let budget = PROB_SCALE - a as u64;
    let mut freqs: Vec<u64> = pmf
        .probs()
        .iter()
        .map(|&p| 1 + (p * budget as f64).floor() as u64)
        .collect();
    let assigned: u64 = freqs.iter().sum();
    // Rounding slack lands on the most probable symbol (lowest index wins).
    // A PMF may sum to 1 +/- 1e-9, so the assigned total can also overshoot
    // the scale by a few counts; the top symbol's frequency is at least
    // budget/A and absorbs either direction.
    let top = pmf.argmax() as usize;
    if assigned <= PROB_SCALE {
        freqs[top] += PROB_SCALE - assigned;
    } else {
        freqs[top] -= assigned - PROB_SCALE;
    }
    let mut bounds = Vec::with_capacity(a + 1);
    let mut acc = 0u64;
    bounds.push(0);
    for f in freqs {
        acc += f;
        bounds.push(acc);
    }
    debug_assert_eq!(acc, PROB_SCALE);
    bounds
}

struct BitWriter {
    bytes: Vec<u8>,
    current: u8,
    filled: u8,
}

impl BitWriter {
    fn new() -> Self {
        BitWriter {
            bytes: Vec::new(),
            current: 0,
            filled: 0,
        }
    }

    fn push(&mut self, bit: bool) {
        self.current = (self.current << 1) | bit as u8;
        self.filled += 1;
        if self.filled == 8 {
            self.bytes.push(self.current);
            self.current = 0;
            self.filled = 0;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        while self.filled != 0 {
            self.push(false);
        }
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    /// Reads the next bit; past the end of the payload the stream reads as
    /// zeros, which the finish sequence of the encoder accounts for.
    fn next(&mut self) -> bool {
        let byte = self.pos / 8;
        if byte >= self.bytes.len() {
            self.pos += 1;
            return false;
        }
        let bit = (self.bytes[byte] >> (7 - (self.pos % 8))) & 1;
        self.pos += 1;
        bit == 1
    }
}

struct ArithmeticEncoder {
    low: u64,
    high: u64,
    pending: u64,
    out: BitWriter,
}

impl ArithmeticEncoder {
    fn new() -> Self {
        ArithmeticEncoder {
            low: 0,
            high: u64::MAX,
            pending: 0,
            out: BitWriter::new(),
        }
    }

    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    fn encode(&mut self, cum_lo: u64, cum_hi: u64) {
        let span = (self.high - self.low) as u128 + 1;
        self.high = self.low + (((span * cum_hi as u128) >> PROB_BITS) - 1) as u64;
        self.low += ((span * cum_lo as u128) >> PROB_BITS) as u64;
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        // Pin a value inside [low, high] for the zero-padding decoder.
        self.pending += 1;
        let bit = self.low >= QUARTER;
        self.emit(bit);
        self.out.finish()
    }
}

struct ArithmeticDecoder<'a> {
    low: u64,
    high: u64,
    code: u64,
    bits: BitReader<'a>,
}

impl<'a> ArithmeticDecoder<'a> {
    fn new(payload: &'a [u8]) -> Self {
        let mut bits = BitReader::new(payload);
        let mut code = 0u64;
        for _ in 0..STATE_BITS {
            code = (code << 1) | bits.next() as u64;
        }
        ArithmeticDecoder {
            low: 0,
            high: u64::MAX,
            code,
            bits,
        }
    }

    fn decode(&mut self, bounds: &[u64]) -> usize {
        let span = (self.high - self.low) as u128 + 1;
        let offset = (self.code - self.low) as u128;
        let scaled = (((offset + 1) << PROB_BITS) - 1) / span;
        let scaled = scaled as u64;
        // bounds is ascending; find s with bounds[s] <= scaled < bounds[s+1].
        let sym = match bounds.binary_search(&scaled) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let (cum_lo, cum_hi) = (bounds[sym], bounds[sym + 1]);
        self.high = self.low + (((span * cum_hi as u128) >> PROB_BITS) - 1) as u64;
        self.low += ((span * cum_lo as u128) >> PROB_BITS) as u64;
        loop {
            if self.high < HALF {
                // nothing
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.code -= HALF;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.code -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.code = (self.code << 1) | self.bits.next() as u64;
        }
        sym
    }
}

fn encode_with<S: Spa>(spa: &mut S, seq: &Sequence) -> Result<Vec<u8>> {
    if seq.is_empty() {
        return Ok(Vec::new());
    }
    let mut state = spa.initial_state();
    let mut enc = ArithmeticEncoder::new();
    for &sym in seq.tokens() {
        let dist = spa.next_dist(&state);
        if dist.prob(sym) <= 0.0 {
            return Err(Error::ZeroProbabilitySymbol);
        }
        let bounds = cumulative_freqs(&dist);
        enc.encode(bounds[sym as usize], bounds[sym as usize + 1]);
        spa.observe(&mut state, sym)?;
    }
    Ok(enc.finish())
}

fn decode_with<S: Spa>(spa: &mut S, payload: &[u8], len: u64) -> Result<Sequence> {
    let mut state = spa.initial_state();
    let mut dec = ArithmeticDecoder::new(payload);
    let mut out = Sequence::empty(spa.alphabet());
    for _ in 0..len {
        let dist = spa.next_dist(&state);
        let bounds = cumulative_freqs(&dist);
        let sym = dec.decode(&bounds) as u32;
        out.push(sym)?;
        spa.observe(&mut state, sym)?;
    }
    Ok(out)
}

/// Encodes `seq` with the given model. The model is consumed statefully: in
/// adaptive mode pass a fresh model and the decoder will rebuild the same
/// one; in static mode pass the frozen model plus its hash.
pub fn encode<S: Spa>(
    spa: &mut S,
    seq: &Sequence,
    mode: CodecMode,
    model_hash: Option<[u8; 32]>,
) -> Result<EncodedStream> {
    spa.alphabet().check_matches(seq.alphabet())?;
    let payload = encode_with(spa, seq)?;
    Ok(EncodedStream {
        mode,
        alphabet: seq.alphabet(),
        len: seq.len() as u64,
        model_hash: match mode {
            CodecMode::Static => Some(model_hash.ok_or_else(|| {
                Error::Malformed("static mode requires a model hash".into())
            })?),
            CodecMode::Adaptive => None,
        },
        payload,
    })
}

/// Decodes a stream with a model in the same starting state as the
/// encoder's. `model_hash` must match for static streams.
pub fn decode<S: Spa>(
    spa: &mut S,
    stream: &EncodedStream,
    model_hash: Option<[u8; 32]>,
) -> Result<Sequence> {
    spa.alphabet().check_matches(stream.alphabet)?;
    if let Some(expected) = &stream.model_hash {
        if model_hash.as_ref() != Some(expected) {
            return Err(Error::ModelHashMismatch);
        }
    }
    decode_with(spa, &stream.payload, stream.len)
}

/// SHA-256 of raw bytes; used to fingerprint models referenced by static
/// streams.
pub fn hash_bytes(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}
