//! Append-only enrollment registry of `<device id, SHA256_K0, HD0>` tuples.
//!
//! One record per line:
//!
//! ```text
//! id=<id> sha256_k0=<64 hex> n=128 k=<dec> offset=<32 hex> salt=<32 hex>
//! ```
//!
//! Records are never rewritten. Enrollment takes an exclusive lock on the
//! file while it checks for duplicates and appends.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::authenticator::{device_key_digest, Verdict};
use crate::fuzzy::{self, FuzzyError, FuzzyParams, HelperData};
use crate::puf::DeviceModel;
use crate::sha256::{digest_key, Digest256};

const FIELDS: [&str; 6] = ["id", "sha256_k0", "n", "k", "offset", "salt"];

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("device `{0}` is already enrolled")]
    Duplicate(String),
    #[error("device `{0}` is not enrolled")]
    UnknownDevice(String),
    #[error("registry line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnrollmentRecord {
    pub device_id: String,
    pub sha256_k0: Digest256,
    pub helper: HelperData,
}

impl EnrollmentRecord {
    pub fn to_line(&self) -> String {
        format!(
            "id={} sha256_k0={} n={} k={} offset={:032x} salt={}",
            self.device_id,
            self.sha256_k0,
            self.helper.params_echo.n,
            self.helper.params_echo.k,
            self.helper.code_offset,
            self.helper.salt_hex()
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
        if tokens.len() != FIELDS.len() {
            return Err(format!("expected {} fields, got {}", FIELDS.len(), tokens.len()));
        }
        let mut values = [""; 6];
        for (i, (tok, key)) in tokens.iter().zip(FIELDS).enumerate() {
            values[i] = tok
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .filter(|v| !v.is_empty())
                .ok_or_else(|| format!("expected `{key}=`"))?;
        }
        let sha256_k0 = values[1]
            .parse::<Digest256>()
            .map_err(|e| format!("sha256_k0: {e}"))?;
        let helper = HelperData::from_fields(values[2], values[3], values[4], values[5])?;
        helper.params_echo.validate().map_err(|e| e.to_string())?;
        Ok(EnrollmentRecord {
            device_id: values[0].to_string(),
            sha256_k0,
            helper,
        })
    }
}

fn parse_records(text: &str) -> Result<Vec<EnrollmentRecord>, RegistryError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            EnrollmentRecord::parse_line(l).map_err(|reason| RegistryError::Format { line: i + 1, reason })
        })
        .collect()
}

/// Enroll a device: nominal read R0, fuzzy encode, store the tuple.
pub fn enrollment_record(
    device: &DeviceModel,
    params: &FuzzyParams,
    encode_seed: u64,
) -> Result<EnrollmentRecord, FuzzyError> {
    let r0 = device.read_nominal();
    let (k0, helper) = fuzzy::encode(&r0, params, encode_seed)?;
    Ok(EnrollmentRecord {
        device_id: device.id().to_string(),
        sha256_k0: digest_key(&k0),
        helper,
    })
}

/// Platform check: fresh read, decode with HD0, compare against SHA256_K0.
pub fn authenticate_platform(
    device: &DeviceModel,
    record: &EnrollmentRecord,
    read_seed: u64,
) -> Result<Verdict, FuzzyError> {
    let sha256_k1 = device_key_digest(device, &record.helper, read_seed)?;
    Ok(if sha256_k1 == record.sha256_k0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    })
}

#[derive(Clone, Debug)]
pub struct Registry {
    path: PathBuf,
}

impl Registry {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Registry { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All records; a missing file is an empty registry.
    pub fn records(&self) -> Result<Vec<EnrollmentRecord>, RegistryError> {
        match fs::read_to_string(&self.path) {
            Ok(text) => parse_records(&text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn lookup(&self, device_id: &str) -> Result<EnrollmentRecord, RegistryError> {
        self.records()?
            .into_iter()
            .find(|r| r.device_id == device_id)
            .ok_or_else(|| RegistryError::UnknownDevice(device_id.to_string()))
    }

    /// Append a record unless its id is already present.
    pub fn append(&self, record: &EnrollmentRecord) -> Result<(), RegistryError> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&self.path)?;
        file.lock()?;
        let result = Self::append_locked(&mut file, record);
        file.unlock()?;
        result
    }

    fn append_locked(file: &mut File, record: &EnrollmentRecord) -> Result<(), RegistryError> {
        let mut text = String::new();
        file.seek(SeekFrom::Start(0))?;
        file.read_to_string(&mut text)?;
        if parse_records(&text)?
            .iter()
            .any(|r| r.device_id == record.device_id)
        {
            return Err(RegistryError::Duplicate(record.device_id.clone()));
        }
        let mut line = String::new();
        if !text.is_empty() && !text.ends_with('\n') {
            line.push('\n');
        }
        line.push_str(&record.to_line());
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    pub fn enroll(
        &self,
        device: &DeviceModel,
        params: &FuzzyParams,
        encode_seed: u64,
    ) -> Result<EnrollmentRecord, RegistryError> {
        let record = enrollment_record(device, params, encode_seed)?;
        self.append(&record)?;
        Ok(record)
    }

    pub fn auth_device(&self, device: &DeviceModel, read_seed: u64) -> Result<Verdict, RegistryError> {
        let record = self.lookup(device.id())?;
        Ok(authenticate_platform(device, &record, read_seed)?)
    }
}
