//! Binary PGM (P5) reader and writer, 8- and 16-bit.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples; one entry per pixel regardless of bit depth.
    pub samples: Vec<u16>,
}

fn read_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    // skip whitespace and '#' comments
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Data("truncated PGM header".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let magic = read_token(&bytes, &mut pos)?;
    if magic != "P5" {
        return Err(Error::Data(format!(
            "{}: expected P5 magic, got {magic:?}",
            path.display()
        )));
    }
    let parse = |tok: String| -> Result<usize> {
        tok.parse()
            .map_err(|_| Error::Data(format!("{}: bad header value {tok:?}", path.display())))
    };
    let width = parse(read_token(&bytes, &mut pos)?)?;
    let height = parse(read_token(&bytes, &mut pos)?)?;
    let maxval = parse(read_token(&bytes, &mut pos)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Data(format!("{}: bad maxval {maxval}", path.display())));
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let n = width * height;
    let samples = if maxval < 256 {
        if bytes.len() < pos + n {
            return Err(Error::Data(format!("{}: truncated raster", path.display())));
        }
        bytes[pos..pos + n].iter().map(|&b| u16::from(b)).collect()
    } else {
        if bytes.len() < pos + 2 * n {
            return Err(Error::Data(format!("{}: truncated raster", path.display())));
        }
        bytes[pos..pos + 2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Pgm { width, height, maxval: maxval as u16, samples })
}

pub fn write_pgm8(path: &Path, width: usize, height: usize, samples: &[u8]) -> Result<()> {
    if samples.len() != width * height {
        return Err(Error::Dimension(format!(
            "expected {} samples, got {}",
            width * height,
            samples.len()
        )));
    }
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(samples)?;
    Ok(())
}

pub fn write_pgm16(path: &Path, width: usize, height: usize, samples: &[u16]) -> Result<()> {
    if samples.len() != width * height {
        return Err(Error::Dimension(format!(
            "expected {} samples, got {}",
            width * height,
            samples.len()
        )));
    }
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n65535\n")?;
    let mut raw = Vec::with_capacity(2 * samples.len());
    for s in samples {
        raw.extend_from_slice(&s.to_be_bytes());
    }
    f.write_all(&raw)?;
    Ok(())
}
