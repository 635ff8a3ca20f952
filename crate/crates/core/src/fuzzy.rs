//! Code-offset fuzzy extractor over 128-bit PUF responses.
//!
//! The response is masked with a random codeword of an extended
//! BCH(127, 29) code (an overall parity bit in the MSB brings the length to
//! 128). The BCH part corrects up to 21 errors, and a flipped parity position
//! is repaired by recomputing parity, so any pattern with at most 21 errors
//! among the first 127 cells decodes. The recovered response is then expanded
//! to a 448-bit key with HMAC-SHA-256 keyed by a per-enrollment salt.
//!
//! Decoding is total: a failed correction still yields a key, just the wrong
//! one. Callers detect failure by comparing key digests.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bch::BchCode;
use crate::puf::{parse_bits128, PufResponse, CELLS};
use crate::sha256::hmac_sha256;

pub const RESPONSE_BITS: usize = CELLS;
pub const DEFAULT_BUDGET: usize = 13;
pub const KEY_BITS: usize = 448;
pub const KEY_BYTES: usize = KEY_BITS / 8;

/// Field degree and designed radius of the inner BCH code.
const CODE_FIELD_DEGREE: u32 = 7;
const CODE_DESIGNED_T: usize = 21;
const PARITY_MASK: u128 = 1 << 127;
const BODY_MASK: u128 = !PARITY_MASK;

const HELPER_HEADER: &str = "PUFBIND-HELPER v1";
const KEY_LABEL: &[u8] = b"pufbind key expansion";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FuzzyError {
    #[error("response width {0} bits, expected {RESPONSE_BITS}")]
    ResponseWidth(usize),
    #[error("helper data declares n={0}, expected {RESPONSE_BITS}")]
    HelperWidth(usize),
    #[error("error budget k={k} invalid (need 0 < k < 64 and k <= code radius {radius})")]
    Budget { k: usize, radius: usize },
    #[error("key must be {KEY_BITS} bits, got {0}")]
    KeyWidth(usize),
    #[error("helper data line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// The extended BCH code shared by encode and decode.
pub fn code() -> &'static BchCode {
    static CODE: OnceLock<BchCode> = OnceLock::new();
    CODE.get_or_init(|| {
        BchCode::new(CODE_FIELD_DEGREE, CODE_DESIGNED_T).expect("fixed code parameters are valid")
    })
}

/// Guaranteed correction radius of the extractor, in bits.
pub fn correction_radius() -> usize {
    code().correction_radius()
}

fn extend(codeword: u128) -> u128 {
    let parity = (codeword.count_ones() & 1) as u128;
    codeword | (parity << 127)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FuzzyParams {
    pub n: usize,
    pub k: usize,
    pub key_bits: usize,
}

impl Default for FuzzyParams {
    fn default() -> Self {
        FuzzyParams {
            n: RESPONSE_BITS,
            k: DEFAULT_BUDGET,
            key_bits: KEY_BITS,
        }
    }
}

impl FuzzyParams {
    pub fn with_budget(k: usize) -> Result<Self, FuzzyError> {
        let p = FuzzyParams {
            k,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FuzzyError> {
        if self.n != RESPONSE_BITS {
            return Err(FuzzyError::HelperWidth(self.n));
        }
        if self.key_bits != KEY_BITS {
            return Err(FuzzyError::KeyWidth(self.key_bits));
        }
        let radius = correction_radius();
        if self.k == 0 || self.k >= self.n / 2 || self.k > radius {
            return Err(FuzzyError::Budget { k: self.k, radius });
        }
        Ok(())
    }
}

/// Public helper data HD0.
#[derive(Clone, PartialEq, Eq)]
pub struct HelperData {
    pub code_offset: u128,
    pub extractor_salt: [u8; 16],
    pub params_echo: FuzzyParams,
}

impl fmt::Debug for HelperData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HelperData")
            .field("code_offset", &format_args!("{:032x}", self.code_offset))
            .field("extractor_salt", &format_args!("{}", hex(&self.extractor_salt)))
            .field("params_echo", &self.params_echo)
            .finish()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl HelperData {
    pub fn to_file_string(&self) -> String {
        format!(
            "{HELPER_HEADER}\nn={}\nk={}\noffset={:032x}\nsalt={}\n",
            self.params_echo.n,
            self.params_echo.k,
            self.code_offset,
            hex(&self.extractor_salt)
        )
    }

    /// Parse `n`, `k`, `offset` and `salt` values without the header; shared
    /// with the registry's single-line records.
    pub(crate) fn from_fields(n: &str, k: &str, offset: &str, salt: &str) -> Result<Self, String> {
        let n: usize = n.parse().map_err(|_| "n is not decimal".to_string())?;
        let k: usize = k.parse().map_err(|_| "k is not decimal".to_string())?;
        let code_offset = parse_bits128(offset).map_err(|e| format!("offset: {e}"))?;
        let salt_bits = parse_bits128(salt).map_err(|e| format!("salt: {e}"))?;
        Ok(HelperData {
            code_offset,
            extractor_salt: salt_bits.to_be_bytes(),
            params_echo: FuzzyParams {
                n,
                k,
                key_bits: KEY_BITS,
            },
        })
    }

    pub fn salt_hex(&self) -> String {
        hex(&self.extractor_salt)
    }
}

impl FromStr for HelperData {
    type Err = FuzzyError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        let err = |line: usize, reason: &str| FuzzyError::Format {
            line,
            reason: reason.to_string(),
        };
        if lines.len() != 5 {
            return Err(err(lines.len(), "expected exactly 5 lines"));
        }
        if lines[0] != HELPER_HEADER {
            return Err(err(1, "bad header"));
        }
        let mut values = [""; 4];
        for (i, key) in ["n", "k", "offset", "salt"].iter().enumerate() {
            values[i] = lines[i + 1]
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| err(i + 2, &format!("expected `{key}=`")))?;
        }
        HelperData::from_fields(values[0], values[1], values[2], values[3])
            .map_err(|reason| FuzzyError::Format { line: 0, reason })
    }
}

/// A 448-bit key (K0 at enrollment, K1 in the field).
#[derive(Clone, PartialEq, Eq)]
pub struct DerivedKey([u8; KEY_BYTES]);

impl DerivedKey {
    pub fn from_bits(bits: usize, bytes: &[u8]) -> Result<Self, FuzzyError> {
        if bits != KEY_BITS || bytes.len() * 8 != KEY_BITS {
            return Err(FuzzyError::KeyWidth(bits));
        }
        Ok(DerivedKey(bytes.try_into().unwrap()))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_BYTES] {
        &self.0
    }

    pub fn bit_len(&self) -> usize {
        KEY_BITS
    }

    pub fn flip_bit(&mut self, index: usize) {
        self.0[index / 8] ^= 0x80 >> (index % 8);
    }
}

impl fmt::Debug for DerivedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DerivedKey({})", hex(&self.0))
    }
}

/// HMAC-SHA-256 in counter mode, truncated to 448 bits.
fn expand_key(stable: u128, salt: &[u8; 16]) -> DerivedKey {
    let mut out = [0u8; KEY_BYTES];
    let mut msg = Vec::with_capacity(1 + KEY_LABEL.len() + 16);
    for (counter, chunk) in out.chunks_mut(32).enumerate() {
        msg.clear();
        msg.push(counter as u8 + 1);
        msg.extend_from_slice(KEY_LABEL);
        msg.extend_from_slice(&stable.to_be_bytes());
        let block = hmac_sha256(salt, &msg);
        chunk.copy_from_slice(&block.as_bytes()[..chunk.len()]);
    }
    DerivedKey(out)
}

/// Enrollment-side encoding: returns (K0, HD0). Pure in its inputs.
pub fn encode(
    response: &PufResponse,
    params: &FuzzyParams,
    encode_seed: u64,
) -> Result<(DerivedKey, HelperData), FuzzyError> {
    params.validate()?;
    let code = code();
    let mut rng = ChaCha8Rng::seed_from_u64(encode_seed);
    let message = rng.gen::<u128>() & ((1u128 << code.message_bits()) - 1);
    let mut salt = [0u8; 16];
    rng.fill(&mut salt);

    let codeword = extend(code.encode(message).expect("message masked to k bits"));
    let helper = HelperData {
        code_offset: response.bits ^ codeword,
        extractor_salt: salt,
        params_echo: *params,
    };
    Ok((expand_key(response.bits, &salt), helper))
}

/// Response-width-checked form of [`encode`] for raw bit strings.
pub fn encode_bits(
    width: usize,
    bits: u128,
    params: &FuzzyParams,
    encode_seed: u64,
) -> Result<(DerivedKey, HelperData), FuzzyError> {
    if width != RESPONSE_BITS {
        return Err(FuzzyError::ResponseWidth(width));
    }
    encode(&PufResponse::new(bits, ""), params, encode_seed)
}

/// Field-side decoding. Always yields a key once the helper data is well
/// formed; the key equals K0 iff correction succeeded.
pub fn decode(noisy: &PufResponse, helper: &HelperData) -> Result<DerivedKey, FuzzyError> {
    helper.params_echo.validate()?;
    Ok(expand_key(recover(noisy.bits, helper), &helper.extractor_salt))
}

/// Recover the enrollment-time response from a noisy read, or return the
/// read unchanged if it is outside the decoder's reach.
pub fn recover(noisy: u128, helper: &HelperData) -> u128 {
    let shifted = noisy ^ helper.code_offset;
    match code().decode(shifted & BODY_MASK) {
        Some((codeword, _)) => helper.code_offset ^ extend(codeword),
        None => noisy,
    }
}
