//! SHA-256 as a one-shot digest and as a word-fed streaming engine.
//!
//! The streaming engine models the hardware digest unit that scans BRAM:
//! one 32-bit word enters the 512-bit input buffer per clock cycle, and the
//! compression of a full buffer overlaps with filling the next one, so a
//! block costs exactly 16 cycles. Padding words are pushed through the same
//! buffer when the stream is closed, which is why the padding block is
//! charged like any other block.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fuzzy::DerivedKey;

const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

const H0: [u32; 8] = [
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
];

/// Words per 512-bit block.
pub const BLOCK_WORDS: usize = 16;

/// Cycles the engine spends per absorbed 32-bit word.
pub const CYCLES_PER_WORD: u64 = 1;

fn compress(state: &mut [u32; 8], block: &[u32; 16]) {
    let mut w = [0u32; 64];
    w[..16].copy_from_slice(block);
    for t in 16..64 {
        let s0 = w[t - 15].rotate_right(7) ^ w[t - 15].rotate_right(18) ^ (w[t - 15] >> 3);
        let s1 = w[t - 2].rotate_right(17) ^ w[t - 2].rotate_right(19) ^ (w[t - 2] >> 10);
        w[t] = w[t - 16]
            .wrapping_add(s0)
            .wrapping_add(w[t - 7])
            .wrapping_add(s1);
    }

    let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut h] = *state;
    for t in 0..64 {
        let big_s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
        let ch = (e & f) ^ (!e & g);
        let t1 = h
            .wrapping_add(big_s1)
            .wrapping_add(ch)
            .wrapping_add(K[t])
            .wrapping_add(w[t]);
        let big_s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
        let maj = (a & b) ^ (a & c) ^ (b & c);
        let t2 = big_s0.wrapping_add(maj);
        h = g;
        g = f;
        f = e;
        e = d.wrapping_add(t1);
        d = c;
        c = b;
        b = a;
        a = t1.wrapping_add(t2);
    }

    for (s, v) in state.iter_mut().zip([a, b, c, d, e, f, g, h]) {
        *s = s.wrapping_add(v);
    }
}

fn state_to_digest(state: &[u32; 8]) -> Digest256 {
    let mut out = [0u8; 32];
    for (chunk, word) in out.chunks_exact_mut(4).zip(state) {
        chunk.copy_from_slice(&word.to_be_bytes());
    }
    Digest256(out)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DigestError {
    #[error("expected 64 hex characters, got {0}")]
    BadLength(usize),
    #[error("invalid hex digit in digest")]
    BadHex,
}

/// A 256-bit SHA-256 output. Renders as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest256(pub [u8; 32]);

impl Digest256 {
    pub const ZERO: Digest256 = Digest256([0; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Big-endian 32-bit words, most significant first.
    pub fn to_words(&self) -> [u32; 8] {
        let mut words = [0u32; 8];
        for (w, chunk) in words.iter_mut().zip(self.0.chunks_exact(4)) {
            *w = u32::from_be_bytes(chunk.try_into().unwrap());
        }
        words
    }

    pub fn from_words(words: &[u32; 8]) -> Self {
        state_to_digest(words)
    }

    pub fn xor(&self, other: &Digest256) -> Digest256 {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0) {
            *o ^= b;
        }
        Digest256(out)
    }

    /// Flip bit `index`, where bit 0 is the most significant bit.
    pub fn flip_bit(&mut self, index: usize) {
        assert!(index < 256, "bit index {index} out of range");
        self.0[index / 8] ^= 0x80 >> (index % 8);
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest256({})", self.to_hex())
    }
}

impl FromStr for Digest256 {
    type Err = DigestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 {
            return Err(DigestError::BadLength(s.len()));
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            let pair = s.get(2 * i..2 * i + 2).ok_or(DigestError::BadHex)?;
            if !pair.bytes().all(|c| c.is_ascii_hexdigit()) {
                return Err(DigestError::BadHex);
            }
            *byte = u8::from_str_radix(pair, 16).map_err(|_| DigestError::BadHex)?;
        }
        Ok(Digest256(out))
    }
}

/// Standard SHA-256 over an arbitrary byte string.
pub fn sha256(message: &[u8]) -> Digest256 {
    let mut state = H0;
    let mut chunks = message.chunks_exact(64);
    let mut block = [0u32; 16];
    for chunk in &mut chunks {
        for (w, b) in block.iter_mut().zip(chunk.chunks_exact(4)) {
            *w = u32::from_be_bytes(b.try_into().unwrap());
        }
        compress(&mut state, &block);
    }

    let rest = chunks.remainder();
    let mut tail = [0u8; 128];
    tail[..rest.len()].copy_from_slice(rest);
    tail[rest.len()] = 0x80;
    let tail_len = if rest.len() + 9 <= 64 { 64 } else { 128 };
    let bit_len = (message.len() as u64).wrapping_mul(8);
    tail[tail_len - 8..tail_len].copy_from_slice(&bit_len.to_be_bytes());
    for chunk in tail[..tail_len].chunks_exact(64) {
        for (w, b) in block.iter_mut().zip(chunk.chunks_exact(4)) {
            *w = u32::from_be_bytes(b.try_into().unwrap());
        }
        compress(&mut state, &block);
    }

    state_to_digest(&state)
}

/// Word-granular streaming digest with a cycle counter.
///
/// `cycles_consumed` always equals the number of words pushed through the
/// input buffer, including padding words once the stream is closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamState {
    chaining: [u32; 8],
    buffer: [u32; 16],
    buffered_words: usize,
    message_words: u64,
    cycles_consumed: u64,
    compressions: u64,
}

impl Default for StreamState {
    fn default() -> Self {
        Self::new()
    }
}

impl StreamState {
    pub fn new() -> Self {
        StreamState {
            chaining: H0,
            buffer: [0; 16],
            buffered_words: 0,
            message_words: 0,
            cycles_consumed: 0,
            compressions: 0,
        }
    }

    pub fn cycles_consumed(&self) -> u64 {
        self.cycles_consumed
    }

    pub fn compressions(&self) -> u64 {
        self.compressions
    }

    /// Message bits absorbed so far (padding excluded).
    pub fn total_length_bits(&self) -> u64 {
        self.message_words * 32
    }

    pub fn buffered_bits(&self) -> usize {
        self.buffered_words * 32
    }

    pub fn chaining_state(&self) -> [u32; 8] {
        self.chaining
    }

    fn push(&mut self, word: u32) {
        self.buffer[self.buffered_words] = word;
        self.buffered_words += 1;
        self.cycles_consumed += CYCLES_PER_WORD;
        if self.buffered_words == BLOCK_WORDS {
            compress(&mut self.chaining, &self.buffer);
            self.compressions += 1;
            self.buffered_words = 0;
        }
    }

    /// Absorb one message word.
    pub fn absorb_word(&mut self, word: u32) {
        self.push(word);
        self.message_words += 1;
    }

    pub fn absorb_words(&mut self, words: &[u32]) {
        for &w in words {
            self.absorb_word(w);
        }
    }

    /// Value-passing form of [`StreamState::absorb_word`].
    pub fn with_word(mut self, word: u32) -> Self {
        self.absorb_word(word);
        self
    }

    /// The padding words that close a stream of `message_words` words.
    pub fn padding_for(message_words: u64) -> Vec<u32> {
        let used = (message_words % BLOCK_WORDS as u64) as usize;
        // 0x80000000 marker, zeros, then a 64-bit length in the last two words.
        let pad_len = if used + 3 <= BLOCK_WORDS {
            BLOCK_WORDS - used
        } else {
            2 * BLOCK_WORDS - used
        };
        let bits = message_words.wrapping_mul(32);
        let mut pad = vec![0u32; pad_len];
        pad[0] = 0x8000_0000;
        pad[pad_len - 2] = (bits >> 32) as u32;
        pad[pad_len - 1] = bits as u32;
        pad
    }

    /// Push one padding word. Used by engines that close the stream a cycle
    /// at a time; the message length is unaffected.
    pub fn absorb_padding_word(&mut self, word: u32) {
        self.push(word);
    }

    /// Read the digest once every padding word has been absorbed.
    /// Returns `None` if the buffer still holds a partial block.
    pub fn digest_if_closed(&self) -> Option<Digest256> {
        (self.buffered_words == 0).then(|| state_to_digest(&self.chaining))
    }

    /// Apply standard padding and return the digest along with the closed
    /// state, whose counters include the padding words.
    pub fn finalize_traced(mut self) -> (Digest256, StreamState) {
        for w in Self::padding_for(self.message_words) {
            self.push(w);
        }
        debug_assert_eq!(self.buffered_words, 0);
        (state_to_digest(&self.chaining), self)
    }

    pub fn finalize(self) -> Digest256 {
        self.finalize_traced().0
    }
}

/// Digest of a 448-bit derived key: standard SHA-256 over its 56 bytes.
pub fn digest_key(key: &DerivedKey) -> Digest256 {
    sha256(key.as_bytes())
}

/// Digest of a key given as a raw bit length and bytes.
pub fn digest_key_bits(bits: usize, bytes: &[u8]) -> Result<Digest256, crate::fuzzy::FuzzyError> {
    let key = DerivedKey::from_bits(bits, bytes)?;
    Ok(digest_key(&key))
}

pub fn hmac_sha256(key: &[u8], message: &[u8]) -> Digest256 {
    let mut block_key = [0u8; 64];
    if key.len() > 64 {
        block_key[..32].copy_from_slice(sha256(key).as_bytes());
    } else {
        block_key[..key.len()].copy_from_slice(key);
    }
    let mut inner = Vec::with_capacity(64 + message.len());
    inner.extend(block_key.iter().map(|b| b ^ 0x36));
    inner.extend_from_slice(message);
    let inner_digest = sha256(&inner);

    let mut outer = Vec::with_capacity(96);
    outer.extend(block_key.iter().map(|b| b ^ 0x5c));
    outer.extend_from_slice(inner_digest.as_bytes());
    sha256(&outer)
}

/// Serialize words big-endian, address order.
pub fn words_to_bytes(words: &[u32]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_be_bytes()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex(d: Digest256) -> String {
        d.to_hex()
    }

    #[test]
    fn standard_vectors() {
        assert_eq!(
            hex(sha256(b"")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            hex(sha256(b"abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            hex(sha256(b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")),
            "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1"
        );
        let million_a = vec![b'a'; 1_000_000];
        assert_eq!(
            hex(sha256(&million_a)),
            "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0"
        );
    }

    #[test]
    fn empty_stream_is_empty_digest() {
        let s = StreamState::new();
        assert_eq!(s.cycles_consumed(), 0);
        assert_eq!(s.clone().finalize(), sha256(b""));
        assert_eq!(s, StreamState::new());
    }

    #[test]
    fn sixteen_words_one_compression() {
        let mut s = StreamState::new();
        for i in 0..16u32 {
            s.absorb_word(i.wrapping_mul(0x9e37_79b9));
        }
        assert_eq!(s.compressions(), 1);
        assert_eq!(s.cycles_consumed(), 16);
        assert_eq!(s.buffered_bits(), 0);
    }

    #[test]
    fn thousand_words_sixty_four_compressions() {
        let mut s = StreamState::new();
        for i in 0..1024u32 {
            s.absorb_word(i);
        }
        assert_eq!(s.compressions(), 64);
        assert_eq!(s.cycles_consumed(), 1024);
    }

    #[test]
    fn program_region_closes_in_block_64() {
        let words: Vec<u32> = (0..1016u32).collect();
        let mut s = StreamState::new();
        s.absorb_words(&words);
        assert_eq!(s.compressions(), 63);
        assert_eq!(s.buffered_bits(), 8 * 32);
        let (d, closed) = s.finalize_traced();
        assert_eq!(closed.compressions(), 64);
        assert_eq!(closed.cycles_consumed(), 1024);
        assert_eq!(d, sha256(&words_to_bytes(&words)));
    }

    #[test]
    fn padding_word_counts() {
        // 13 message words leave room for marker + length: 3 pad words.
        assert_eq!(StreamState::padding_for(13).len(), 3);
        // 14 words do not: pad into a fresh block.
        assert_eq!(StreamState::padding_for(14).len(), 18);
        assert_eq!(StreamState::padding_for(0).len(), 16);
        assert_eq!(StreamState::padding_for(1016).len(), 8);
    }

    #[test]
    fn digest_hex_round_trip_and_errors() {
        let d = sha256(b"abc");
        assert_eq!(d.to_hex().parse::<Digest256>().unwrap(), d);
        assert_eq!("ab".parse::<Digest256>(), Err(DigestError::BadLength(2)));
        let bad = "g".repeat(64);
        assert_eq!(bad.parse::<Digest256>(), Err(DigestError::BadHex));
    }

    #[test]
    fn flip_bit_is_msb_first() {
        let mut d = Digest256::ZERO;
        d.flip_bit(0);
        assert_eq!(d.0[0], 0x80);
        d.flip_bit(255);
        assert_eq!(d.0[31], 0x01);
        assert_eq!(d.to_words()[0], 0x8000_0000);
    }

    #[test]
    fn hmac_rfc4231_case_2() {
        let mac = hmac_sha256(b"Jefe", b"what do ya want for nothing?");
        assert_eq!(
            mac.to_hex(),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
        );
    }
}
