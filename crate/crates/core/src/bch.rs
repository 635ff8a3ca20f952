//! Narrow-sense binary BCH codes of length 2^m - 1 (m ≤ 7).
//!
//! Codewords are packed into a `u128` with the coefficient of x^j in bit j.
//! Decoding is Berlekamp-Massey over GF(2^m) followed by a Chien search.

use thiserror::Error;

/// Primitive polynomials indexed by m, written with the x^m term.
const PRIMITIVE_POLYS: [u32; 8] = [0, 0, 0b111, 0b1011, 0b10011, 0b100101, 0b1000011, 0b10001001];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BchError {
    #[error("field degree {0} unsupported (need 2..=7)")]
    UnsupportedField(u32),
    #[error("designed correction {0} leaves no message bits")]
    NoMessageBits(usize),
    #[error("message does not fit in {0} bits")]
    MessageTooWide(usize),
}

/// GF(2^m) by log/antilog tables.
#[derive(Clone, Debug)]
pub struct GaloisField {
    order: usize,
    exp: Vec<u8>,
    log: Vec<u8>,
}

impl GaloisField {
    pub fn new(m: u32) -> Result<Self, BchError> {
        if !(2..=7).contains(&m) {
            return Err(BchError::UnsupportedField(m));
        }
        let poly = PRIMITIVE_POLYS[m as usize];
        let size = 1usize << m;
        let order = size - 1;
        let mut exp = vec![0u8; 2 * order];
        let mut log = vec![0u8; size];
        let mut x = 1u32;
        for i in 0..order {
            exp[i] = x as u8;
            log[x as usize] = i as u8;
            x <<= 1;
            if x & size as u32 != 0 {
                x ^= poly;
            }
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(GaloisField { order, exp, log })
    }

    /// Multiplicative group order, 2^m - 1.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha_pow(&self, e: usize) -> u8 {
        self.exp[e % self.order]
    }

    pub fn mul(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    pub fn inv(&self, a: u8) -> u8 {
        assert!(a != 0, "zero has no inverse");
        self.exp[(self.order - self.log[a as usize] as usize) % self.order]
    }
}

/// Degree of a GF(2) polynomial packed in a u128; -1 for zero.
fn degree(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

fn gf2_mul(a: u128, b: u128) -> u128 {
    let mut out = 0u128;
    let mut b = b;
    let mut shift = 0;
    while b != 0 {
        if b & 1 != 0 {
            out ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    out
}

fn gf2_rem(mut a: u128, m: u128) -> u128 {
    let dm = degree(m);
    while degree(a) >= dm {
        a ^= m << (degree(a) - dm);
    }
    a
}

/// Minimal polynomial of alpha^i over GF(2), as product over its cyclotomic coset.
fn minimal_polynomial(field: &GaloisField, coset: &[usize]) -> u128 {
    // Coefficients in GF(2^m), lowest degree first.
    let mut poly: Vec<u8> = vec![1];
    for &j in coset {
        let root = field.alpha_pow(j);
        let mut next = vec![0u8; poly.len() + 1];
        for (d, &c) in poly.iter().enumerate() {
            next[d + 1] ^= c;
            next[d] ^= field.mul(c, root);
        }
        poly = next;
    }
    poly.iter().enumerate().fold(0u128, |acc, (d, &c)| {
        debug_assert!(c <= 1, "minimal polynomial must be binary");
        acc | ((c as u128) << d)
    })
}

fn cyclotomic_coset(i: usize, n: usize) -> Vec<usize> {
    let mut coset = vec![i % n];
    let mut j = (2 * i) % n;
    while j != i % n {
        coset.push(j);
        j = (2 * j) % n;
    }
    coset
}

/// A binary narrow-sense BCH code.
#[derive(Clone, Debug)]
pub struct BchCode {
    field: GaloisField,
    generator: u128,
    n: usize,
    k: usize,
    t: usize,
}

impl BchCode {
    /// Build the code whose generator has roots alpha^1 ..= alpha^(2 * designed_t).
    /// The realized correction radius can exceed `designed_t` when the
    /// generator happens to contain a longer run of consecutive roots.
    pub fn new(m: u32, designed_t: usize) -> Result<Self, BchError> {
        let field = GaloisField::new(m)?;
        let n = field.order();
        let mut covered = vec![false; n];
        let mut generator = 1u128;
        for i in 1..=2 * designed_t {
            if covered[i % n] {
                continue;
            }
            let coset = cyclotomic_coset(i, n);
            for &j in &coset {
                covered[j] = true;
            }
            generator = gf2_mul(generator, minimal_polynomial(&field, &coset));
        }
        let parity = degree(generator) as usize;
        if parity >= n {
            return Err(BchError::NoMessageBits(designed_t));
        }
        // BCH bound: length of the run of consecutive roots from alpha^1.
        let run = (1..n).take_while(|&i| covered[i]).count();
        Ok(BchCode {
            field,
            generator,
            n,
            k: n - parity,
            t: run / 2,
        })
    }

    pub fn length(&self) -> usize {
        self.n
    }

    pub fn message_bits(&self) -> usize {
        self.k
    }

    /// Guaranteed number of correctable errors.
    pub fn correction_radius(&self) -> usize {
        self.t
    }

    /// Lower bound on minimum distance from the BCH bound.
    pub fn designed_distance(&self) -> usize {
        2 * self.t + 1
    }

    pub fn generator(&self) -> u128 {
        self.generator
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    /// Systematic encoding: message in the high k positions.
    pub fn encode(&self, message: u128) -> Result<u128, BchError> {
        if self.k < 128 && message >> self.k != 0 {
            return Err(BchError::MessageTooWide(self.k));
        }
        let shifted = message << (self.n - self.k);
        Ok(shifted ^ gf2_rem(shifted, self.generator))
    }

    pub fn message_of(&self, codeword: u128) -> u128 {
        codeword >> (self.n - self.k)
    }

    pub fn is_codeword(&self, word: u128) -> bool {
        gf2_rem(word, self.generator) == 0
    }

    fn syndromes(&self, word: u128) -> Vec<u8> {
        let f = &self.field;
        (1..=2 * self.t)
            .map(|j| {
                let mut s = 0u8;
                let mut bits = word;
                while bits != 0 {
                    let pos = bits.trailing_zeros() as usize;
                    s ^= f.alpha_pow(pos * j);
                    bits &= bits - 1;
                }
                s
            })
            .collect()
    }

    /// Berlekamp-Massey: error locator Lambda(x), lowest degree first.
    fn error_locator(&self, syndromes: &[u8]) -> Vec<u8> {
        let f = &self.field;
        let mut lambda = vec![1u8];
        let mut prev = vec![1u8];
        let mut len = 0usize;
        let mut shift = 1usize;
        let mut prev_disc = 1u8;

        for r in 0..syndromes.len() {
            let mut disc = syndromes[r];
            for i in 1..=len.min(lambda.len() - 1) {
                disc ^= f.mul(lambda[i], syndromes[r - i]);
            }
            if disc == 0 {
                shift += 1;
                continue;
            }
            let scale = f.mul(disc, f.inv(prev_disc));
            let mut next = lambda.clone();
            if next.len() < prev.len() + shift {
                next.resize(prev.len() + shift, 0);
            }
            for (i, &c) in prev.iter().enumerate() {
                next[i + shift] ^= f.mul(scale, c);
            }
            if 2 * len <= r {
                prev = lambda;
                len = r + 1 - len;
                prev_disc = disc;
                shift = 1;
            } else {
                shift += 1;
            }
            lambda = next;
        }
        lambda.resize(len + 1, 0);
        lambda
    }

    /// Correct up to `correction_radius()` errors. Returns the codeword and
    /// the number of corrected bits, or `None` if the word is not within
    /// the radius of any codeword the decoder can find.
    pub fn decode(&self, word: u128) -> Option<(u128, usize)> {
        let word = word & self.length_mask();
        let syn = self.syndromes(word);
        if syn.iter().all(|&s| s == 0) {
            return Some((word, 0));
        }
        let lambda = self.error_locator(&syn);
        let errors = lambda.len() - 1;
        if errors > self.t || lambda[errors] == 0 {
            return None;
        }

        // Chien search: position i is in error iff Lambda(alpha^-i) = 0.
        let f = &self.field;
        let mut fixed = word;
        let mut found = 0usize;
        for pos in 0..self.n {
            let x = f.alpha_pow(self.n - pos);
            let mut acc = 0u8;
            let mut xp = 1u8;
            for &c in &lambda {
                acc ^= f.mul(c, xp);
                xp = f.mul(xp, x);
            }
            if acc == 0 {
                fixed ^= 1u128 << pos;
                found += 1;
            }
        }
        (found == errors && self.is_codeword(fixed)).then_some((fixed, found))
    }

    fn length_mask(&self) -> u128 {
        if self.n >= 128 {
            u128::MAX
        } else {
            (1u128 << self.n) - 1
        }
    }
}
