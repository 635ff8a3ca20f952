//! Behavioral model of a 128-cell Butterfly PUF array.
//!
//! Each cell settles to a preferred value fixed at "manufacture" (drawn from
//! the creation seed) and flips on a given read with a per-cell probability.
//! Bit strings are carried in a `u128` with cell 0 in the most significant bit.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const CELLS: usize = 128;

/// Default per-read flip probability.
pub const DEFAULT_NOISE: f64 = 0.05;

const DEVICE_HEADER: &str = "PUFBIND-DEVICE v1";

#[derive(Debug, Error, PartialEq)]
pub enum PufError {
    #[error("noise level {0} outside [0, 0.5)")]
    NoiseOutOfRange(f64),
    #[error("device id must be non-empty and free of whitespace")]
    BadDeviceId,
    #[error("device file line {line}: {reason}")]
    Format { line: usize, reason: String },
}

fn format_err(line: usize, reason: impl Into<String>) -> PufError {
    PufError::Format {
        line,
        reason: reason.into(),
    }
}

/// Mask for cell `i` (cell 0 is the MSB).
#[inline]
pub fn cell_mask(i: usize) -> u128 {
    debug_assert!(i < CELLS);
    1u128 << (CELLS - 1 - i)
}

/// One simulated device: stable cell biases plus per-cell flip probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    device_id: String,
    cell_biases: u128,
    flip_probabilities: [f64; CELLS],
    creation_seed: u64,
}

impl DeviceModel {
    /// Manufacture a device. Biases are uniform Bernoulli(1/2) per cell and
    /// every cell shares the same flip probability.
    pub fn create(creation_seed: u64, noise_level: f64) -> Result<Self, PufError> {
        Self::create_with_id(default_device_id(creation_seed), creation_seed, noise_level)
    }

    pub fn create_with_id(
        device_id: impl Into<String>,
        creation_seed: u64,
        noise_level: f64,
    ) -> Result<Self, PufError> {
        check_noise(noise_level)?;
        let device_id = device_id.into();
        check_id(&device_id)?;
        let mut rng = ChaCha8Rng::seed_from_u64(creation_seed);
        let cell_biases: u128 = rng.gen();
        Ok(DeviceModel {
            device_id,
            cell_biases,
            flip_probabilities: [noise_level; CELLS],
            creation_seed,
        })
    }

    pub fn id(&self) -> &str {
        &self.device_id
    }

    pub fn cell_biases(&self) -> u128 {
        self.cell_biases
    }

    pub fn flip_probabilities(&self) -> &[f64; CELLS] {
        &self.flip_probabilities
    }

    pub fn creation_seed(&self) -> u64 {
        self.creation_seed
    }

    /// The shared flip probability of the uniform noise model.
    pub fn noise_level(&self) -> f64 {
        self.flip_probabilities[0]
    }

    /// Same silicon under different operating conditions.
    pub fn with_noise(&self, noise_level: f64) -> Result<Self, PufError> {
        check_noise(noise_level)?;
        Ok(DeviceModel {
            flip_probabilities: [noise_level; CELLS],
            ..self.clone()
        })
    }

    /// Sample the array once. The noise draw is a pure function of the
    /// device and `read_seed`.
    pub fn read_response(&self, read_seed: u64) -> PufResponse {
        let mut rng = ChaCha8Rng::seed_from_u64(read_seed);
        // Separate streams keep reads of different devices uncorrelated even
        // when callers reuse read seeds.
        rng.set_stream(self.creation_seed);
        let mut flips = 0u128;
        for (i, &p) in self.flip_probabilities.iter().enumerate() {
            if p > 0.0 && rng.gen_bool(p) {
                flips |= cell_mask(i);
            }
        }
        PufResponse {
            bits: self.cell_biases ^ flips,
            device_id: self.device_id.clone(),
        }
    }

    /// Read at nominal conditions with noise suppressed: the stable pattern.
    pub fn read_nominal(&self) -> PufResponse {
        PufResponse {
            bits: self.cell_biases,
            device_id: self.device_id.clone(),
        }
    }

    pub fn to_file_string(&self) -> String {
        format!(
            "{DEVICE_HEADER}\nid={}\nseed={}\nnoise={}\nbiases={:032x}\n",
            self.device_id,
            self.creation_seed,
            self.noise_level(),
            self.cell_biases
        )
    }
}

impl FromStr for DeviceModel {
    type Err = PufError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let lines: Vec<&str> = text.lines().map(|l| l.trim_end()).collect();
        let lines: Vec<&str> = match lines.iter().rposition(|l| !l.is_empty()) {
            Some(last) => lines[..=last].to_vec(),
            None => return Err(format_err(1, "empty device file")),
        };
        if lines.len() != 5 {
            return Err(format_err(lines.len(), "expected exactly 5 lines"));
        }
        if lines[0] != DEVICE_HEADER {
            return Err(format_err(1, format!("expected header `{DEVICE_HEADER}`")));
        }
        let field = |idx: usize, key: &str| -> Result<&str, PufError> {
            lines[idx]
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| format_err(idx + 1, format!("expected `{key}=`")))
        };

        let id = field(1, "id")?;
        check_id(id).map_err(|_| format_err(2, "bad device id"))?;
        let seed: u64 = field(2, "seed")?
            .parse()
            .map_err(|_| format_err(3, "seed is not a decimal u64"))?;
        let noise: f64 = field(3, "noise")?
            .parse()
            .map_err(|_| format_err(4, "noise is not a decimal"))?;
        check_noise(noise).map_err(|e| format_err(4, e.to_string()))?;
        let biases = parse_bits128(field(4, "biases")?).map_err(|r| format_err(5, r))?;

        Ok(DeviceModel {
            device_id: id.to_string(),
            cell_biases: biases,
            flip_probabilities: [noise; CELLS],
            creation_seed: seed,
        })
    }
}

/// Parse exactly 32 hex characters into 128 bits, MSB first.
pub(crate) fn parse_bits128(s: &str) -> Result<u128, String> {
    if s.len() != 32 {
        return Err(format!("expected 32 hex characters, got {}", s.len()));
    }
    if !s.bytes().all(|c| c.is_ascii_hexdigit()) {
        return Err("non-hex character".into());
    }
    u128::from_str_radix(s, 16).map_err(|e| e.to_string())
}

pub fn default_device_id(creation_seed: u64) -> String {
    format!("fpga-{creation_seed:016x}")
}

fn check_noise(noise_level: f64) -> Result<(), PufError> {
    if (0.0..0.5).contains(&noise_level) {
        Ok(())
    } else {
        Err(PufError::NoiseOutOfRange(noise_level))
    }
}

fn check_id(id: &str) -> Result<(), PufError> {
    if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == '=') {
        Err(PufError::BadDeviceId)
    } else {
        Ok(())
    }
}

/// A 128-bit raw readout (R0 at enrollment, R1 in the field).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PufResponse {
    pub bits: u128,
    pub device_id: String,
}

impl PufResponse {
    pub fn new(bits: u128, device_id: impl Into<String>) -> Self {
        PufResponse {
            bits,
            device_id: device_id.into(),
        }
    }

    pub fn hamming_distance(&self, other: &PufResponse) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }

    pub fn fractional_hd(&self, other: &PufResponse) -> f64 {
        self.hamming_distance(other) as f64 / CELLS as f64
    }

    pub fn with_flips(&self, mask: u128) -> PufResponse {
        PufResponse {
            bits: self.bits ^ mask,
            device_id: self.device_id.clone(),
        }
    }
}

impl fmt::Debug for PufResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PufResponse({}: {:032x})", self.device_id, self.bits)
    }
}
