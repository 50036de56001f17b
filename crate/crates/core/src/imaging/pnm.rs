//! Binary PGM (P5) and PPM (P6) reading and writing.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Frame, ImagingError, RgbFrame};

fn io_err(path: &Path, source: std::io::Error) -> ImagingError {
    ImagingError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> ImagingError {
    ImagingError::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Parses the netpbm header, returning (width, height, maxval, payload offset).
fn parse_header(
    bytes: &[u8],
    magic: &[u8; 2],
    path: &Path,
) -> Result<(usize, usize, usize, usize), ImagingError> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(format_err(
            path,
            format!("expected magic {}", String::from_utf8_lossy(magic)),
        ));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while let Some(&c) = bytes.get(pos) {
                        pos += 1;
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(format_err(path, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| c.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "non-numeric header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(path, "header field out of range"))?;
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(|c| c.is_ascii_whitespace()) {
        return Err(format_err(path, "missing separator after maxval"));
    }
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(format_err(path, format!("unsupported maxval {maxval}")));
    }
    Ok((w, h, maxval, pos + 1))
}

fn rescale(v: u8, maxval: usize) -> u8 {
    if maxval == 255 {
        v
    } else {
        ((v as usize * 255 + maxval / 2) / maxval).min(255) as u8
    }
}

pub fn read_pgm(path: &Path) -> Result<Frame, ImagingError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let (w, h, maxval, off) = parse_header(&bytes, b"P5", path)?;
    let raster = bytes
        .get(off..off + w * h)
        .ok_or_else(|| format_err(path, "truncated raster"))?;
    let data = raster.iter().map(|&v| rescale(v, maxval)).collect();
    Frame::new(w, h, data)
}

pub fn write_pgm(path: &Path, frame: &Frame) -> Result<(), ImagingError> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.data());
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_ppm(path: &Path) -> Result<RgbFrame, ImagingError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let (w, h, maxval, off) = parse_header(&bytes, b"P6", path)?;
    let raster = bytes
        .get(off..off + 3 * w * h)
        .ok_or_else(|| format_err(path, "truncated raster"))?;
    let data = raster
        .chunks_exact(3)
        .map(|c| {
            [
                rescale(c[0], maxval),
                rescale(c[1], maxval),
                rescale(c[2], maxval),
            ]
        })
        .collect();
    RgbFrame::new(w, h, data)
}

pub fn write_ppm(path: &Path, frame: &RgbFrame) -> Result<(), ImagingError> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    for px in frame.data() {
        out.extend_from_slice(px);
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Ordered list of `frame_%06d.pgm` files found in a directory.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    entries: Vec<(u64, PathBuf)>,
}

impl FrameSequence {
    pub fn file_name(index: u64) -> String {
        format!("frame_{index:06}.pgm")
    }

    pub fn color_file_name(index: u64) -> String {
        format!("frame_{index:06}.ppm")
    }

    pub fn scan(dir: &Path) -> Result<Self, ImagingError> {
        let mut entries = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
            let entry = entry.map_err(|e| io_err(dir, e))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            let Some(num) = name
                .strip_prefix("frame_")
                .and_then(|s| s.strip_suffix(".pgm"))
            else {
                continue;
            };
            if num.len() == 6 && num.bytes().all(|c| c.is_ascii_digit()) {
                entries.push((num.parse().expect("six digits"), entry.path()));
            }
        }
        entries.sort();
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|(i, _)| *i)
    }

    /// Loads every frame, stamping each with its file index and `fps`.
    pub fn load(&self, fps: f64) -> Result<Vec<Frame>, ImagingError> {
        self.entries
            .iter()
            .map(|(idx, path)| read_pgm(path)?.with_timing(*idx, fps))
            .collect()
    }

    /// Loads the sibling color frame `frame_%06d.ppm` for each entry, if present.
    pub fn load_color(&self) -> Result<Vec<Option<RgbFrame>>, ImagingError> {
        self.entries
            .iter()
            .map(|(idx, path)| {
                let color = path.with_file_name(Self::color_file_name(*idx));
                if color.exists() {
                    read_ppm(&color).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect()
    }
}
