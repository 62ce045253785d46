//! Plain-text and binary grayscale formats for patterns and masks.
//!
//! PGM files written here carry a `# max <value>` comment holding the
//! intensity that maps to the file's maxval, so that reading them back
//! restores the original scale. Files without the comment are read as raw
//! grey levels.

use std::io::{BufRead, Read, Write};

use super::pattern::PatternMatrix;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// ASCII (`P2`).
    Plain,
    /// Binary (`P5`).
    Raw,
}

struct PgmImage {
    width: usize,
    height: usize,
    maxval: u32,
    scale: Option<f64>,
    pixels: Vec<u32>,
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

// Reads the next header token, collecting `# max` comments along the way.
fn header_token(bytes: &[u8], pos: &mut usize, scale: &mut Option<f64>) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            let start = *pos;
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            let line = String::from_utf8_lossy(&bytes[start + 1..*pos]);
            if let Some(v) = line.trim().strip_prefix("max ") {
                *scale = v.trim().parse().ok();
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(parse_err("truncated PGM header"));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_pgm(bytes: &[u8]) -> Result<PgmImage> {
    let mut pos = 0;
    let mut scale = None;
    let magic = header_token(bytes, &mut pos, &mut scale)?;
    let num = |pos: &mut usize, scale: &mut Option<f64>, what: &str| -> Result<u32> {
        header_token(bytes, pos, scale)?
            .parse::<u32>()
            .map_err(|_| parse_err(format!("bad PGM {what}")))
    };
    let width = num(&mut pos, &mut scale, "width")? as usize;
    let height = num(&mut pos, &mut scale, "height")? as usize;
    let maxval = num(&mut pos, &mut scale, "maxval")?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(parse_err("PGM dimensions or maxval out of range"));
    }
    let n = width * height;
    let pixels = match magic.as_str() {
        "P2" => {
            let text = std::str::from_utf8(&bytes[pos..]).map_err(|_| parse_err("P2 body is not text"))?;
            let px: Vec<u32> = text
                .split_ascii_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| parse_err(format!("bad pixel `{t}`"))))
                .collect::<Result<_>>()?;
            if px.len() != n {
                return Err(parse_err(format!("expected {n} pixels, found {}", px.len())));
            }
            px
        }
        "P5" => {
            // Exactly one whitespace byte separates the header from the data.
            let body = &bytes[(pos + 1).min(bytes.len())..];
            let wide = maxval > 255;
            let need = if wide { 2 * n } else { n };
            if body.len() < need {
                return Err(parse_err(format!("expected {need} data bytes, found {}", body.len())));
            }
            if wide {
                body[..need]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                    .collect()
            } else {
                body[..n].iter().map(|&b| b as u32).collect()
            }
        }
        other => return Err(parse_err(format!("unsupported magic `{other}`"))),
    };
    if let Some(&p) = pixels.iter().find(|&&p| p > maxval) {
        return Err(parse_err(format!("pixel {p} exceeds maxval {maxval}")));
    }
    Ok(PgmImage {
        width,
        height,
        maxval,
        scale,
        pixels,
    })
}

/// Reads a `P2` or `P5` grayscale image as a fully unmasked pattern.
pub fn read_pgm<R: Read>(mut r: R) -> Result<PatternMatrix> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let img = parse_pgm(&bytes)?;
    let factor = img.scale.map_or(1.0, |s| s / img.maxval as f64);
    let values = img.pixels.iter().map(|&p| p as f64 * factor).collect();
    PatternMatrix::new(img.height, img.width, values)
}

/// Writes unmasked values scaled so the pattern maximum maps to `maxval`
/// (255 or 65535 for 8 or 16 bit). Masked pixels are written as 0.
pub fn write_pgm<W: Write>(pattern: &PatternMatrix, format: PgmFormat, maxval: u32, mut w: W) -> Result<()> {
    if maxval == 0 || maxval > 65535 {
        return Err(invalid("maxval", "must be in 1..=65535"));
    }
    let vmax = pattern.max();
    let scale = if vmax > 0.0 { maxval as f64 / vmax } else { 0.0 };
    let pixels: Vec<u32> = pattern
        .values()
        .iter()
        .zip(pattern.mask())
        .map(|(&v, &m)| {
            if m {
                (v * scale).round().min(maxval as f64) as u32
            } else {
                0
            }
        })
        .collect();
    write_pixels(
        &pixels,
        pattern.width(),
        pattern.height(),
        format,
        maxval,
        Some(vmax),
        &mut w,
    )
}

fn write_pixels<W: Write>(
    pixels: &[u32],
    width: usize,
    height: usize,
    format: PgmFormat,
    maxval: u32,
    scale: Option<f64>,
    w: &mut W,
) -> Result<()> {
    let magic = match format {
        PgmFormat::Plain => "P2",
        PgmFormat::Raw => "P5",
    };
    writeln!(w, "{magic}")?;
    if let Some(s) = scale {
        writeln!(w, "# max {s:e}")?;
    }
    writeln!(w, "{width} {height}")?;
    writeln!(w, "{maxval}")?;
    match format {
        PgmFormat::Plain => {
            for row in pixels.chunks(width) {
                let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        PgmFormat::Raw => {
            if maxval > 255 {
                let bytes: Vec<u8> = pixels.iter().flat_map(|&p| (p as u16).to_be_bytes()).collect();
                w.write_all(&bytes)?;
            } else {
                let bytes: Vec<u8> = pixels.iter().map(|&p| p as u8).collect();
                w.write_all(&bytes)?;
            }
        }
    }
    Ok(())
}

/// Reads a mask image: nonzero pixels are inside.
pub fn read_mask_pgm<R: Read>(mut r: R) -> Result<(usize, usize, Vec<bool>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let img = parse_pgm(&bytes)?;
    Ok((img.height, img.width, img.pixels.iter().map(|&p| p != 0).collect()))
}

/// Writes the pattern's mask as a plain 0/1 PGM.
pub fn write_mask_pgm<W: Write>(pattern: &PatternMatrix, mut w: W) -> Result<()> {
    let pixels: Vec<u32> = pattern.mask().iter().map(|&m| m as u32).collect();
    write_pixels(
        &pixels,
        pattern.width(),
        pattern.height(),
        PgmFormat::Plain,
        1,
        None,
        &mut w,
    )
}

/// Reads a comma-separated matrix, one row per line. Blank lines and lines
/// starting with `#` are skipped; `nan` entries become masked pixels.
pub fn read_csv_matrix<R: BufRead>(r: R) -> Result<PatternMatrix> {
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(format!("line {}: bad number `{}`", lineno + 1, t.trim())))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(format!(
                    "line {}: {} columns, expected {w}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| parse_err("empty matrix"))?;
    let mask: Vec<bool> = values.iter().map(|v| !v.is_nan()).collect();
    let values = values.into_iter().map(|v| if v.is_nan() { 0.0 } else { v }).collect();
    PatternMatrix::with_mask(height, width, values, mask)
}

/// Writes the matrix as CSV with masked pixels as `nan`.
pub fn write_csv_matrix<W: Write>(pattern: &PatternMatrix, mut w: W) -> Result<()> {
    for r in 0..pattern.height() {
        let row: Vec<String> = (0..pattern.width())
            .map(|c| {
                let i = r * pattern.width() + c;
                if pattern.mask()[i] {
                    format!("{:e}", pattern.values()[i])
                } else {
                    "nan".to_string()
                }
            })
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Loads a pattern from a `.pgm` or `.csv` path, optionally applying a
/// mask image of the same size.
pub fn load_pattern(path: &std::path::Path, mask: Option<&std::path::Path>) -> Result<PatternMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let mut pattern = match ext.as_str() {
        "pgm" => read_pgm(std::io::BufReader::new(file))?,
        "csv" | "txt" => read_csv_matrix(std::io::BufReader::new(file))?,
        _ => return Err(invalid("path", format!("unknown pattern format `{}`", path.display()))),
    };
    if let Some(mpath) = mask {
        let mfile = std::fs::File::open(mpath).map_err(|e| Error::Io(format!("{}: {e}", mpath.display())))?;
        let (h, w, m) = read_mask_pgm(std::io::BufReader::new(mfile))?;
        if h != pattern.height() || w != pattern.width() {
            return Err(Error::DimensionMismatch {
                expected: pattern.height() * pattern.width(),
                actual: h * w,
            });
        }
        let combined = m.iter().zip(pattern.mask()).map(|(a, b)| *a && *b).collect();
        pattern = pattern.masked(combined)?;
    }
    pattern.meta.label = path.display().to_string();
    Ok(pattern)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PatternMatrix {
        PatternMatrix::new(2, 3, vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn pgm_round_trips() {
        let p = sample();
        for (fmt, maxval) in [
            (PgmFormat::Plain, 255),
            (PgmFormat::Raw, 255),
            (PgmFormat::Raw, 65535),
            (PgmFormat::Plain, 65535),
        ] {
            let mut buf = Vec::new();
            write_pgm(&p, fmt, maxval, &mut buf).unwrap();
            let q = read_pgm(&buf[..]).unwrap();
            assert_eq!((q.height(), q.width()), (2, 3));
            for (a, b) in p.values().iter().zip(q.values()) {
                assert!((a - b).abs() <= 3.0 / maxval as f64, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn pgm_without_scale_comment() {
        let text = b"P2\n# a comment\n3 1\n# another\n10\n0 5 10\n";
        let p = read_pgm(&text[..]).unwrap();
        assert_eq!(p.values(), &[0.0, 5.0, 10.0]);
        assert!(read_pgm(&b"P2\n3 1\n10\n0 5 11\n"[..]).is_err());
        assert!(read_pgm(&b"P3\n1 1\n10\n0\n"[..]).is_err());
    }

    #[test]
    fn mask_and_csv_round_trip() {
        let p = sample().masked(vec![true, false, true, true, true, false]).unwrap();
        let mut buf = Vec::new();
        write_mask_pgm(&p, &mut buf).unwrap();
        let (h, w, m) = read_mask_pgm(&buf[..]).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(m, p.mask());
        let mut csv = Vec::new();
        write_csv_matrix(&p, &mut csv).unwrap();
        let q = read_csv_matrix(&csv[..]).unwrap();
        assert_eq!(q.mask(), p.mask());
        assert_eq!(q.unmasked().collect::<Vec<_>>(), p.unmasked().collect::<Vec<_>>());
        assert!(read_csv_matrix(&b"1,2\n3\n"[..]).is_err());
    }
}
