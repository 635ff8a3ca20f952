//! Simulated hardware authenticator for a bound BRAM image.
//!
//! [`AuthEngine`] advances one clock cycle per [`AuthEngine::tick`]: each
//! cycle moves one word (program or padding) into the digest buffer, and a
//! final cycle compares `SHA_Prog_Bin ^ SHA_BPUF` with the piggybacked
//! reference. The execution gate can only open on that last cycle.

use std::fmt;

use thiserror::Error;

use crate::fuzzy::{self, FuzzyError, HelperData};
use crate::image::{BramGeometry, BramImage, GoldenSignature, SIGNATURE_WORDS, WORD_BITS};
use crate::puf::DeviceModel;
use crate::sha256::{digest_key, Digest256, StreamState, BLOCK_WORDS};

pub const DEFAULT_CLOCK_HZ: u64 = 100_000_000;

/// Cycles spent comparing the hardware value with the reference.
pub const COMPARE_CYCLES: u64 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuthError {
    #[error(transparent)]
    Helper(#[from] FuzzyError),
    #[error("image has {image} words but the authenticator is built for {expected}")]
    GeometryMismatch { image: usize, expected: usize },
    #[error("BRAM of {0} words is smaller than the signature")]
    GeometryTooSmall(usize),
    #[error("clock frequency must be positive")]
    BadClock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// Hardware enable for instruction fetch. Starts closed; only the
/// authenticator's compare cycle can open it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExecutionGate {
    enabled: bool,
}

impl ExecutionGate {
    pub fn closed() -> Self {
        ExecutionGate { enabled: false }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    fn open(&mut self) {
        self.enabled = true;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuthReport {
    pub sha_bpuf: Digest256,
    pub sha_prog_bin: Digest256,
    pub sha_exor_hardware: Digest256,
    pub sha_exor_reference: GoldenSignature,
    pub verdict: Verdict,
    pub cycles: u64,
    pub clock_hz: u64,
}

impl AuthReport {
    pub fn latency_seconds(&self) -> f64 {
        self.cycles as f64 / self.clock_hz as f64
    }

    /// `sha_exor_hardware ^ sha_bpuf == sha_prog_bin` and the verdict agrees
    /// with a bitwise comparison.
    pub fn is_consistent(&self) -> bool {
        self.sha_exor_hardware.xor(&self.sha_bpuf) == self.sha_prog_bin
            && (self.verdict == Verdict::Pass) == (self.sha_exor_hardware == self.sha_exor_reference)
    }

    pub fn render(&self) -> String {
        format!(
            "sha_bpuf={}\nsha_prog_bin={}\nsha_exor_hardware={}\nsha_exor_reference={}\n\
             verdict={}\ncycles={}\nclock_hz={}\nlatency_us={:.3}\n",
            self.sha_bpuf,
            self.sha_prog_bin,
            self.sha_exor_hardware,
            self.sha_exor_reference,
            self.verdict,
            self.cycles,
            self.clock_hz,
            self.latency_seconds() * 1e6,
        )
    }
}

/// Closed-form cycle count for a BRAM of `total_words` words: 16 cycles per
/// compression block of the padded program region, plus the compare cycle.
pub fn cycle_model(total_words: usize) -> Result<u64, AuthError> {
    if total_words < SIGNATURE_WORDS {
        return Err(AuthError::GeometryTooSmall(total_words));
    }
    let region_bits = ((total_words - SIGNATURE_WORDS) * WORD_BITS) as u64;
    let blocks = (region_bits + 1 + 64).div_ceil(512);
    Ok(BLOCK_WORDS as u64 * blocks + COMPARE_CYCLES)
}

#[derive(Clone, Debug)]
enum Phase {
    Program { next: usize },
    Padding { words: Vec<u32>, next: usize },
    Compare { sha_prog_bin: Digest256 },
    Done,
}

/// Cycle-stepped authenticator state machine over one image.
#[derive(Clone, Debug)]
pub struct AuthEngine<'a> {
    image: &'a BramImage,
    sha_bpuf: Digest256,
    stream: StreamState,
    phase: Phase,
    cycles: u64,
    gate: ExecutionGate,
    report: Option<AuthReport>,
    clock_hz: u64,
}

impl<'a> AuthEngine<'a> {
    pub fn new(image: &'a BramImage, sha_bpuf: Digest256, clock_hz: u64) -> Self {
        let phase = if image.program_region().is_empty() {
            Phase::Padding {
                words: StreamState::padding_for(0),
                next: 0,
            }
        } else {
            Phase::Program { next: 0 }
        };
        AuthEngine {
            image,
            sha_bpuf,
            stream: StreamState::new(),
            phase,
            cycles: 0,
            gate: ExecutionGate::closed(),
            report: None,
            clock_hz,
        }
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn gate(&self) -> ExecutionGate {
        self.gate
    }

    pub fn is_done(&self) -> bool {
        matches!(self.phase, Phase::Done)
    }

    /// Advance one clock cycle. Returns `false` once the run has finished.
    pub fn tick(&mut self) -> bool {
        let region = self.image.program_region();
        match &mut self.phase {
            Phase::Program { next } => {
                self.stream.absorb_word(region[*next]);
                *next += 1;
                if *next == region.len() {
                    self.phase = Phase::Padding {
                        words: StreamState::padding_for(region.len() as u64),
                        next: 0,
                    };
                }
            }
            Phase::Padding { words, next } => {
                self.stream.absorb_padding_word(words[*next]);
                *next += 1;
                if *next == words.len() {
                    let sha_prog_bin = self
                        .stream
                        .digest_if_closed()
                        .expect("padding ends on a block boundary");
                    self.phase = Phase::Compare { sha_prog_bin };
                }
            }
            Phase::Compare { sha_prog_bin } => {
                let sha_prog_bin = *sha_prog_bin;
                let sha_exor_hardware = sha_prog_bin.xor(&self.sha_bpuf);
                let sha_exor_reference = self.image.signature();
                let verdict = if sha_exor_hardware == sha_exor_reference {
                    self.gate.open();
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
                self.report = Some(AuthReport {
                    sha_bpuf: self.sha_bpuf,
                    sha_prog_bin,
                    sha_exor_hardware,
                    sha_exor_reference,
                    verdict,
                    cycles: self.cycles + 1,
                    clock_hz: self.clock_hz,
                });
                self.phase = Phase::Done;
            }
            Phase::Done => return false,
        }
        self.cycles += 1;
        true
    }

    /// Run to completion.
    pub fn finish(mut self) -> (AuthReport, ExecutionGate) {
        while self.tick() {}
        let report = self.report.expect("finished engine has a report");
        debug_assert_eq!(report.cycles, self.cycles);
        (report, self.gate)
    }
}

/// SHA_BPUF: fresh read, fuzzy decode with the enrollment helper data, digest.
pub fn device_key_digest(
    device: &DeviceModel,
    helper: &HelperData,
    read_seed: u64,
) -> Result<Digest256, FuzzyError> {
    let r1 = device.read_response(read_seed);
    let k1 = fuzzy::decode(&r1, helper)?;
    Ok(digest_key(&k1))
}

/// An authentication unit built for one BRAM size and clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Authenticator {
    geometry: BramGeometry,
    clock_hz: u64,
}

impl Default for Authenticator {
    fn default() -> Self {
        Authenticator {
            geometry: BramGeometry::default(),
            clock_hz: DEFAULT_CLOCK_HZ,
        }
    }
}

impl Authenticator {
    pub fn new(geometry: BramGeometry, clock_hz: u64) -> Result<Self, AuthError> {
        if clock_hz == 0 {
            return Err(AuthError::BadClock);
        }
        Ok(Authenticator { geometry, clock_hz })
    }

    pub fn geometry(&self) -> BramGeometry {
        self.geometry
    }

    pub fn clock_hz(&self) -> u64 {
        self.clock_hz
    }

    pub fn authenticate(
        &self,
        image: &BramImage,
        device: &DeviceModel,
        helper: &HelperData,
        read_seed: u64,
    ) -> Result<(AuthReport, ExecutionGate), AuthError> {
        if image.geometry() != self.geometry {
            return Err(AuthError::GeometryMismatch {
                image: image.geometry().total_words(),
                expected: self.geometry.total_words(),
            });
        }
        let sha_bpuf = device_key_digest(device, helper, read_seed)?;
        Ok(AuthEngine::new(image, sha_bpuf, self.clock_hz).finish())
    }
}

/// Authenticate with an authenticator sized to the image.
pub fn authenticate(
    image: &BramImage,
    device: &DeviceModel,
    helper: &HelperData,
    read_seed: u64,
    clock_hz: u64,
) -> Result<(AuthReport, ExecutionGate), AuthError> {
    Authenticator::new(image.geometry(), clock_hz)?.authenticate(image, device, helper, read_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::FuzzyParams;
    use crate::image::{bind_image, ProgramHex};

    fn setup(seed: u64) -> (DeviceModel, HelperData, BramImage) {
        let device = DeviceModel::create(seed, 0.05).unwrap();
        let (k0, hd0) = fuzzy::encode(&device.read_nominal(), &FuzzyParams::default(), seed).unwrap();
        let prog = ProgramHex::new(vec![0x01001, 0x2d000, 0x22001]).unwrap();
        let image = bind_image(&prog, BramGeometry::default(), &digest_key(&k0)).unwrap();
        (device, hd0, image)
    }

    #[test]
    fn cycle_model_values() {
        assert_eq!(cycle_model(1024).unwrap(), 1025);
        assert_eq!(cycle_model(2048).unwrap(), 2049);
        assert_eq!(cycle_model(24).unwrap(), 33);
        assert_eq!(cycle_model(8).unwrap(), 17);
        assert_eq!(cycle_model(7), Err(AuthError::GeometryTooSmall(7)));
    }

    #[test]
    fn authentic_pass_1025_cycles() {
        let (device, hd0, image) = setup(21);
        let (report, gate) = authenticate(&image, &device, &hd0, 5, DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert!(gate.is_enabled());
        assert_eq!(report.cycles, 1025);
        // 1025 cycles at 10 ns each.
        assert!((report.latency_seconds() - 10.25e-6).abs() < 1e-15);
        assert!(report.is_consistent());
    }

    #[test]
    fn gate_stays_closed_until_compare() {
        let (device, hd0, image) = setup(22);
        let bpuf = device_key_digest(&device, &hd0, 1).unwrap();
        let mut engine = AuthEngine::new(&image, bpuf, DEFAULT_CLOCK_HZ);
        while engine.cycles() < 1024 {
            assert!(engine.tick());
            assert!(!engine.gate().is_enabled(), "open at cycle {}", engine.cycles());
        }
        assert!(engine.tick());
        assert!(engine.gate().is_enabled());
        assert!(engine.is_done());
        assert!(!engine.tick());
        assert_eq!(engine.cycles(), 1025);
    }

    #[test]
    fn tamper_cases_fail() {
        let (device, hd0, image) = setup(23);

        let mut case1 = image.clone();
        case1.flip_bit(1, 20);
        let (r, g) = authenticate(&case1, &device, &hd0, 5, DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(!g.is_enabled());
        assert!(r.is_consistent());

        let other = DeviceModel::create(999, 0.05).unwrap();
        let (r, g) = authenticate(&image, &other, &hd0, 5, DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(!g.is_enabled());

        let mut case3 = image.clone();
        case3.flip_bit(1016, 0);
        let (r, _) = authenticate(&case3, &device, &hd0, 5, DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn errors() {
        let (device, mut hd0, image) = setup(24);
        let small = Authenticator::new(BramGeometry::new(512).unwrap(), DEFAULT_CLOCK_HZ).unwrap();
        assert_eq!(
            small.authenticate(&image, &device, &hd0, 0),
            Err(AuthError::GeometryMismatch { image: 1024, expected: 512 })
        );
        assert_eq!(
            Authenticator::new(BramGeometry::default(), 0),
            Err(AuthError::BadClock)
        );
        hd0.params_echo.n = 64;
        assert!(matches!(
            authenticate(&image, &device, &hd0, 0, DEFAULT_CLOCK_HZ),
            Err(AuthError::Helper(FuzzyError::HelperWidth(64)))
        ));
    }

    #[test]
    fn report_rendering() {
        let (device, hd0, image) = setup(25);
        let (report, _) = authenticate(&image, &device, &hd0, 5, DEFAULT_CLOCK_HZ).unwrap();
        let text = report.render();
        assert!(text.contains("verdict=PASS\n"));
        assert!(text.contains("cycles=1025\n"));
        assert!(text.contains("latency_us=10.250\n"));
        assert_eq!(text.lines().count(), 8);
    }
}
