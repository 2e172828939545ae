//! Small structured text documents: intrinsics and pose files.

use std::collections::HashMap;
use std::path::Path;

use crate::camera::Intrinsics;
use crate::view::Pose;
use crate::{Error, Result};

/// Parses `key value` lines (`:` or `=` separators also accepted).
/// Unknown keys are ignored. `#` starts a comment.
fn parse_key_values(text: &str) -> Result<HashMap<String, f64>> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let normalized = line.replace([':', '='], " ");
        let mut parts = normalized.split_whitespace();
        let key = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing key", lineno + 1)))?;
        let value: f64 = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing value for {key}", lineno + 1)))?
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: bad value for {key}: {e}", lineno + 1)))?;
        map.insert(key.to_string(), value);
    }
    Ok(map)
}

pub fn parse_intrinsics(text: &str) -> Result<Intrinsics> {
    let map = parse_key_values(text)?;
    let get = |key: &str| {
        map.get(key)
            .copied()
            .ok_or_else(|| Error::Parse(format!("intrinsics missing key {key}")))
    };
    Intrinsics::new(get("fx")?, get("fy")?, get("cx")?, get("cy")?)
}

pub fn read_intrinsics(path: impl AsRef<Path>) -> Result<Intrinsics> {
    parse_intrinsics(&std::fs::read_to_string(path)?)
}

/// Optional width/height keys from an intrinsics file, for cross-checking
/// against associated rasters.
pub fn read_intrinsics_dims(path: impl AsRef<Path>) -> Result<Option<(usize, usize)>> {
    let map = parse_key_values(&std::fs::read_to_string(path)?)?;
    match (map.get("width"), map.get("height")) {
        (Some(&w), Some(&h)) => Ok(Some((w as usize, h as usize))),
        _ => Ok(None),
    }
}

/// Pose file: 12 whitespace-separated numbers, 9 row-major rotation entries
/// then 3 translation entries.
pub fn parse_pose(text: &str) -> Result<Pose> {
    let nums: Vec<f64> = text
        .lines()
        .flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace())
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad pose entry {t:?}: {e}"))))
        .collect::<Result<_>>()?;
    if nums.len() != 12 {
        return Err(Error::Parse(format!("pose file needs 12 numbers, got {}", nums.len())));
    }
    let r = [
        [nums[0], nums[1], nums[2]],
        [nums[3], nums[4], nums[5]],
        [nums[6], nums[7], nums[8]],
    ];
    Pose::new(r, [nums[9], nums[10], nums[11]])
}

pub fn read_pose(path: impl AsRef<Path>) -> Result<Pose> {
    parse_pose(&std::fs::read_to_string(path)?)
}
