use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const F32_MAGIC: &[u8; 8] = b"MESBIMG1";

fn dims(img: &Tensor) -> Result<(usize, usize)> {
    match *img.shape() {
        [r, c] => Ok((r, c)),
        _ => Err(Error::invalid(format!("expected a 2-D image, got shape {:?}", img.shape()))),
    }
}

/// 16-bit binary PGM. Values are mapped linearly from `[min, max]` of the
/// image onto `[0, 65535]`; the header comment records both ends.
pub fn encode_pgm(img: &Tensor) -> Result<Vec<u8>> {
    let (rows, cols) = dims(img)?;
    if !img.is_finite() {
        return Err(Error::invalid("cannot write an image with non-finite pixels"));
    }
    let data = img.as_slice();
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n# min={lo:e} max={hi:e}\n{cols} {rows}\n65535\n").into_bytes();
    out.reserve(2 * data.len());
    for &v in data {
        let q = if span > 0.0 { ((v - lo) / span * 65535.0).round() as u16 } else { 0 };
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

/// Raw little-endian float32 pixels behind a 16-byte header: magic, rows, cols.
pub fn encode_f32(img: &Tensor) -> Result<Vec<u8>> {
    let (rows, cols) = dims(img)?;
    let mut out = Vec::with_capacity(16 + 4 * img.len());
    out.extend_from_slice(F32_MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for &v in img.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_f32(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 16 || &bytes[..8] != F32_MAGIC {
        return Err(Error::invalid("not a MESBIMG1 file"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(8), word(12));
    let body = &bytes[16..];
    if body.len() != 4 * rows * cols {
        return Err(Error::invalid(format!(
            "MESBIMG1 header says {rows}x{cols} but carries {} bytes of pixels",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Tensor::new(vec![rows, cols], data)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.flush()
}

pub fn write_pgm(path: &Path, img: &Tensor) -> Result<()> {
    Ok(write_bytes(path, &encode_pgm(img)?)?)
}

pub fn write_f32(path: &Path, img: &Tensor) -> Result<()> {
    Ok(write_bytes(path, &encode_f32(img)?)?)
}

pub fn read_f32(path: &Path) -> Result<Tensor> {
    decode_f32(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout() {
        let img = Tensor::new(vec![2, 3], vec![0.0, 0.5, 1.0, 1.0, 0.25, 0.0]).unwrap();
        let bytes = encode_pgm(&img).unwrap();
        let header = b"P5\n# min=0e0 max=1e0\n3 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let px: Vec<u16> = bytes[header.len()..]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(px, vec![0, 32768, 65535, 65535, 16384, 0]);
    }

    #[test]
    fn flat_image_maps_to_zero() {
        let img = Tensor::full(&[2, 2], 3.0).unwrap();
        let bytes = encode_pgm(&img).unwrap();
        assert!(bytes.ends_with(&[0; 8]));
    }

    #[test]
    fn f32_round_trip() {
        let img = Tensor::from_fn(&[3, 5], |i| i as f64 * 0.125 - 0.5).unwrap();
        let bytes = encode_f32(&img).unwrap();
        assert_eq!(bytes.len(), 16 + 60);
        assert_eq!(&bytes[8..16], &[3, 0, 0, 0, 5, 0, 0, 0]);
        assert_eq!(decode_f32(&bytes).unwrap(), img);
        assert!(decode_f32(&bytes[..20]).is_err());
        assert!(decode_f32(b"NOTANIMGxxxxxxxx").is_err());
    }

    #[test]
    fn rejects_non_images() {
        assert!(encode_pgm(&Tensor::zeros(&[4]).unwrap()).is_err());
        assert!(encode_pgm(&Tensor::full(&[1, 1], f64::NAN).unwrap()).is_err());
    }
}
