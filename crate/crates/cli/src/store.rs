//! `<msisdn>.device` files in a state directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use smsguard_core::device::{self, DeviceState, ParseError};
use smsguard_core::Msisdn;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: holds device {found}, expected {expected}")]
    WrongDevice {
        path: PathBuf,
        found: Msisdn,
        expected: Msisdn,
    },
}

pub fn device_path(dir: &Path, msisdn: &Msisdn) -> PathBuf {
    dir.join(format!("{}.device", msisdn.as_str()))
}

/// A stored device comes back powered off; its next boot runs the SIM check.
pub fn load_device(dir: &Path, msisdn: &Msisdn) -> Result<Option<DeviceState>, StoreError> {
    let path = device_path(dir, msisdn);
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(source) => return Err(StoreError::Io { path, source }),
    };
    let mut state = device::load(&text).map_err(|source| StoreError::Parse {
        path: path.clone(),
        source,
    })?;
    if state.msisdn != *msisdn {
        return Err(StoreError::WrongDevice {
            path,
            found: state.msisdn,
            expected: msisdn.clone(),
        });
    }
    state.booted = false;
    Ok(Some(state))
}

pub fn save_device(dir: &Path, state: &DeviceState) -> Result<PathBuf, StoreError> {
    let path = device_path(dir, &state.msisdn);
    let io_err = |source| StoreError::Io {
        path: path.clone(),
        source,
    };
    fs::create_dir_all(dir).map_err(io_err)?;
    fs::write(&path, device::save(state)).map_err(io_err)?;
    Ok(path)
}
