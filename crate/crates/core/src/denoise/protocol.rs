//! Binary framing for the external denoiser.
//!
//! All integers are little-endian `u32`, `t` is little-endian `f64` and the
//! image payloads are little-endian `f32`.
//!
//! ```text
//! request:  "MESBDNZ1" | 1 | ndim | dims[ndim] | t | X_t | X_corrupt
//! reply:    "MESBDNZ1" | 2 | ndim | dims[ndim] | eps
//! error:    "MESBDNZ1" | 3 | len  | utf8[len]
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"MESBDNZ1";
pub const MSG_DENOISE: u32 = 1;
pub const MSG_EPS_REPLY: u32 = 2;
pub const MSG_ERROR: u32 = 3;
pub const MAX_NDIM: usize = 4;
/// Upper bound on payload elements and error message bytes, to refuse
/// absurd allocations from a corrupt header.
const MAX_ELEMENTS: u64 = 1 << 28;

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseRequest {
    pub t: f64,
    pub x_t: Tensor,
    pub x_corrupt: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    Eps(Tensor),
    Error(String),
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_dims(w: &mut impl Write, shape: &[usize]) -> Result<()> {
    if shape.len() > MAX_NDIM {
        return Err(Error::Protocol(format!("{} dimensions exceed the limit of {MAX_NDIM}", shape.len())));
    }
    write_u32(w, shape.len() as u32)?;
    for &d in shape {
        let d = u32::try_from(d).map_err(|_| Error::Protocol(format!("dimension {d} does not fit in u32")))?;
        write_u32(w, d)?;
    }
    Ok(())
}

fn write_payload(w: &mut impl Write, x: &Tensor) -> Result<()> {
    let mut buf = Vec::with_capacity(4 * x.len());
    for &v in x.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_request(w: &mut impl Write, req: &DenoiseRequest) -> Result<()> {
    req.x_corrupt.check_same_shape(&req.x_t)?;
    w.write_all(MAGIC)?;
    write_u32(w, MSG_DENOISE)?;
    write_dims(w, req.x_t.shape())?;
    w.write_all(&req.t.to_le_bytes())?;
    write_payload(w, &req.x_t)?;
    write_payload(w, &req.x_corrupt)?;
    w.flush()?;
    Ok(())
}

pub fn write_response(w: &mut impl Write, resp: &Response) -> Result<()> {
    w.write_all(MAGIC)?;
    match resp {
        Response::Eps(eps) => {
            write_u32(w, MSG_EPS_REPLY)?;
            write_dims(w, eps.shape())?;
            write_payload(w, eps)?;
        }
        Response::Error(msg) => {
            write_u32(w, MSG_ERROR)?;
            write_u32(w, msg.len() as u32)?;
            w.write_all(msg.as_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Protocol(format!("stream ended while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_magic(r: &mut impl Read) -> Result<()> {
    let mut m = [0u8; 8];
    read_exact(r, &mut m, "magic")?;
    if &m != MAGIC {
        return Err(Error::Protocol(format!("bad magic {:?}", String::from_utf8_lossy(&m))));
    }
    Ok(())
}

fn read_dims(r: &mut impl Read) -> Result<Vec<usize>> {
    let ndim = read_u32(r, "ndim")? as usize;
    if ndim == 0 || ndim > MAX_NDIM {
        return Err(Error::Protocol(format!("ndim {ndim} outside 1..={MAX_NDIM}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut total: u64 = 1;
    for _ in 0..ndim {
        let d = read_u32(r, "dims")?;
        if d == 0 {
            return Err(Error::Protocol("zero-length dimension".into()));
        }
        total = total.saturating_mul(d as u64);
        dims.push(d as usize);
    }
    if total > MAX_ELEMENTS {
        return Err(Error::Protocol(format!("payload of {total} elements is too large")));
    }
    Ok(dims)
}

fn read_payload(r: &mut impl Read, shape: &[usize], what: &str) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    let mut buf = vec![0u8; 4 * n];
    read_exact(r, &mut buf, what)?;
    let data = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Tensor::new(shape.to_vec(), data)
}

pub fn read_request(r: &mut impl Read) -> Result<DenoiseRequest> {
    read_magic(r)?;
    let ty = read_u32(r, "message type")?;
    if ty != MSG_DENOISE {
        return Err(Error::Protocol(format!("expected request type {MSG_DENOISE}, got {ty}")));
    }
    let dims = read_dims(r)?;
    let mut tb = [0u8; 8];
    read_exact(r, &mut tb, "t")?;
    let t = f64::from_le_bytes(tb);
    let x_t = read_payload(r, &dims, "X_t")?;
    let x_corrupt = read_payload(r, &dims, "X_corrupt")?;
    Ok(DenoiseRequest { t, x_t, x_corrupt })
}

pub fn read_response(r: &mut impl Read) -> Result<Response> {
    read_magic(r)?;
    match read_u32(r, "message type")? {
        MSG_EPS_REPLY => {
            let dims = read_dims(r)?;
            Ok(Response::Eps(read_payload(r, &dims, "eps")?))
        }
        MSG_ERROR => {
            let len = read_u32(r, "message length")? as u64;
            if len > MAX_ELEMENTS {
                return Err(Error::Protocol(format!("error message of {len} bytes is too large")));
            }
            let mut buf = vec![0u8; len as usize];
            read_exact(r, &mut buf, "error message")?;
            let msg = String::from_utf8(buf).map_err(|_| Error::Protocol("error message is not UTF-8".into()))?;
            Ok(Response::Error(msg))
        }
        ty => Err(Error::Protocol(format!("unknown response type {ty}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_layout_is_exact() {
        let req = DenoiseRequest {
            t: 0.5,
            x_t: Tensor::new(vec![1, 2], vec![1.0, -2.0]).unwrap(),
            x_corrupt: Tensor::new(vec![1, 2], vec![0.25, 0.0]).unwrap(),
        };
        let mut buf = Vec::new();
        write_request(&mut buf, &req).unwrap();
        let mut want = b"MESBDNZ1".to_vec();
        for v in [1u32, 2, 1, 2] {
            want.extend_from_slice(&v.to_le_bytes());
        }
        want.extend_from_slice(&0.5f64.to_le_bytes());
        for v in [1.0f32, -2.0, 0.25, 0.0] {
            want.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(buf, want);
        assert_eq!(read_request(&mut buf.as_slice()).unwrap(), req);
    }

    #[test]
    fn responses_round_trip() {
        for resp in [
            Response::Eps(Tensor::new(vec![2, 2, 1], vec![0.5, 1.5, -3.0, 8.0]).unwrap()),
            Response::Error("no model loaded".into()),
        ] {
            let mut buf = Vec::new();
            write_response(&mut buf, &resp).unwrap();
            assert_eq!(read_response(&mut buf.as_slice()).unwrap(), resp);
        }
    }

    #[test]
    fn malformed_frames() {
        assert!(matches!(read_response(&mut &b"NOTMAGIC"[..]), Err(Error::Protocol(_))));
        let mut short = MAGIC.to_vec();
        short.extend_from_slice(&2u32.to_le_bytes());
        assert!(matches!(read_response(&mut short.as_slice()), Err(Error::Protocol(_))));
        let mut wide = MAGIC.to_vec();
        for v in [2u32, 5] {
            wide.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(read_response(&mut wide.as_slice()), Err(Error::Protocol(_))));
        let mut unknown = MAGIC.to_vec();
        unknown.extend_from_slice(&9u32.to_le_bytes());
        assert!(matches!(read_response(&mut unknown.as_slice()), Err(Error::Protocol(_))));
        let too_many = Tensor::zeros(&[1, 1, 1, 1, 1]).unwrap();
        assert!(write_response(&mut Vec::new(), &Response::Eps(too_many)).is_err());
    }
}
