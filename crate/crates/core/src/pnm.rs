//! Binary netpbm codecs: P5 label masks and P6 RGB images.
//!
//! Writers emit `P5\n<w> <h>\n255\n` (resp. `P6`) followed by raw samples.
//! Readers accept any whitespace and `#` comments in the header but require
//! maxval 255 and an exact payload length.

use std::fs;
use std::path::Path;

use crate::mask::{Mask, PixelLabel};
use crate::synth::ImageBuffer;
use crate::{Error, Result};

struct Header {
    width: usize,
    height: usize,
    data_offset: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::Parse(format!(
            "expected magic {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("malformed netpbm header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("header value out of range".into()))?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Parse("missing whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Parse(format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Parse("zero image dimension".into()));
    }
    Ok(Header {
        width,
        height,
        data_offset: pos,
    })
}

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.labels().iter().map(|l| l.code()));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let header = parse_header(bytes, b"P5")?;
    let payload = &bytes[header.data_offset..];
    let expected = header.width * header.height;
    if payload.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} mask bytes, found {}",
            payload.len()
        )));
    }
    let labels = payload
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            PixelLabel::from_code(b)
                .ok_or_else(|| Error::Parse(format!("illegal mask byte {b} at offset {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Mask::from_labels(header.width, header.height, labels)
}

pub fn encode_image(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer> {
    let header = parse_header(bytes, b"P6")?;
    let payload = &bytes[header.data_offset..];
    let expected = header.width * header.height * 3;
    if payload.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} image bytes, found {}",
            payload.len()
        )));
    }
    ImageBuffer::from_raw(header.width, header.height, payload.to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    decode_mask(&read(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    Ok(fs::write(path, encode_mask(mask))?)
}

pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    decode_image(&read(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_image(path: &Path, img: &ImageBuffer) -> Result<()> {
    Ok(fs::write(path, encode_image(img))?)
}
