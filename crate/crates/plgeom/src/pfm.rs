//! Portable float map reader/writer.
//!
//! "Pf" is 1-channel, "PF" is 3-channel; a negative scale marks little-endian
//! payload. Rows are stored bottom-to-top. Writes always emit little-endian
//! with scale -1.0; round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::raster::Raster;
use crate::{Error, Result};

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Raster> {
    let mut reader = BufReader::new(File::open(path)?);
    read_pfm_from(&mut reader)
}

pub fn write_pfm(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_pfm_to(raster, &mut writer)
}

/// Reads one whitespace-delimited header token, honoring `#` comments.
fn read_token(r: &mut impl Read) -> Result<String> {
    let mut tok = Vec::new();
    let mut in_comment = false;
    loop {
        let mut byte = [0u8];
        if r.read(&mut byte)? == 0 {
            return Err(Error::Parse("unexpected end of PFM header".into()));
        }
        let b = byte[0];
        if in_comment {
            if b == b'\n' {
                in_comment = false;
            }
            continue;
        }
        if b == b'#' && tok.is_empty() {
            in_comment = true;
            continue;
        }
        if b.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            // The single whitespace byte after the scale token terminates the
            // header; payload starts immediately after it.
            return Ok(String::from_utf8_lossy(&tok).into_owned());
        }
        tok.push(b);
    }
}

pub fn read_pfm_from(r: &mut impl Read) -> Result<Raster> {
    let magic = read_token(r)?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::Parse(format!("bad PFM magic {other:?}"))),
    };
    let width: usize = read_token(r)?
        .parse()
        .map_err(|e| Error::Parse(format!("bad PFM width: {e}")))?;
    let height: usize = read_token(r)?
        .parse()
        .map_err(|e| Error::Parse(format!("bad PFM height: {e}")))?;
    let scale: f64 = read_token(r)?
        .parse()
        .map_err(|e| Error::Parse(format!("bad PFM scale: {e}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Parse(format!("bad PFM scale {scale}")));
    }
    let little_endian = scale < 0.0;

    let n = width * height * channels;
    let mut payload = vec![0u8; n * 4];
    r.read_exact(&mut payload)
        .map_err(|_| Error::Parse("truncated PFM payload".into()))?;

    let mut data = vec![0.0f32; n];
    // Rows are bottom-to-top on disk.
    for row in 0..height {
        let src_row = height - 1 - row;
        for i in 0..width * channels {
            let off = (src_row * width * channels + i) * 4;
            let bytes = [payload[off], payload[off + 1], payload[off + 2], payload[off + 3]];
            let v = if little_endian {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
            data[row * width * channels + i] = v;
        }
    }
    Ok(Raster { width, height, channels, data })
}

pub fn write_pfm_to(raster: &Raster, w: &mut impl Write) -> Result<()> {
    let magic = match raster.channels {
        1 => "Pf",
        3 => "PF",
        n => return Err(Error::Dimension(format!("PFM supports 1 or 3 channels, got {n}"))),
    };
    write!(w, "{}\n{} {}\n-1.0\n", magic, raster.width, raster.height)?;
    let row_len = raster.width * raster.channels;
    for row in (0..raster.height).rev() {
        for i in 0..row_len {
            w.write_all(&raster.data[row * row_len + i].to_le_bytes())?;
        }
    }
    Ok(())
}
