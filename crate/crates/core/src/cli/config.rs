//! Flat `key = value` experiment files.
//!
//! ```text
//! # transmit probability sweep
//! m-devices = 10
//! p-transmit = 0.05, 0.15, 0.25
//! perfect-detection = true
//! ```
//!
//! Keys are the long flag names without the leading dashes; underscores are
//! accepted in place of hyphens. List-valued keys take comma separated values.

use std::path::Path;
use std::str::FromStr;

use super::Overrides;
use crate::{Error, Result};

pub fn load(path: &Path) -> Result<Overrides> {
    let text = std::fs::read_to_string(path)?;
    parse(&text, path)
}

pub fn parse(text: &str, path: &Path) -> Result<Overrides> {
    let mut out = Overrides::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| Error::ConfigFile {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "m-devices" => out.m_devices = Some(scalar(value).map_err(err)?),
            "p-transmit" => out.p_transmit = Some(list(value).map_err(err)?),
            "sic-degree" => out.sic_degree = Some(list(value).map_err(err)?),
            "attempts" => out.attempts = Some(list(value).map_err(err)?),
            "pfa" => out.pfa = Some(scalar(value).map_err(err)?),
            "train-len" => out.train_len = Some(scalar(value).map_err(err)?),
            "snr-db" => out.snr_db = Some(list(value).map_err(err)?),
            "frames" => out.frames = Some(scalar(value).map_err(err)?),
            "trials" => out.trials = Some(scalar(value).map_err(err)?),
            "seed" => out.seed = Some(scalar(value).map_err(err)?),
            "perfect-detection" => out.perfect_detection = Some(scalar(value).map_err(err)?),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    Ok(out)
}

fn scalar<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("bad value `{value}`: {e}"))
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| scalar(v.trim())).collect()
}
