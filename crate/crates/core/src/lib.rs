//! Binding program binaries to simulated PUF-bearing FPGAs, and refusing to
//! execute them anywhere else.
//!
//! The flow mirrors a manufacturer/integrator/field split:
//!
//! 1. [`puf`] manufactures a device; [`registry`] enrolls it by fuzzy-encoding
//!    a nominal response into `<SHA256_K0, HD0>`.
//! 2. [`image`] packs an assembled program into a BRAM image and piggybacks
//!    `SHA-256(program region) ^ SHA256_K0` at its tail.
//! 3. [`authenticator`] re-derives the device digest from a fresh noisy read,
//!    streams the program region through [`sha256`], and opens the
//!    [`authenticator::ExecutionGate`] only if the XOR matches the tail.
//! 4. [`picoblaze`] fetches instructions only through an open gate.

pub mod authenticator;
pub mod bch;
pub mod fuzzy;
pub mod image;
pub mod picoblaze;
pub mod puf;
pub mod registry;
pub mod sha256;

pub use authenticator::{authenticate, cycle_model, AuthReport, Authenticator, ExecutionGate, Verdict};
pub use fuzzy::{DerivedKey, FuzzyParams, HelperData};
pub use image::{bind_image, parse_hex, BramGeometry, BramImage, ProgramHex};
pub use puf::{DeviceModel, PufResponse};
pub use registry::{EnrollmentRecord, Registry};
pub use sha256::{sha256, Digest256, StreamState};
