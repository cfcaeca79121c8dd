//! Binary network checkpoints.
//!
//! Layout (little endian):
//!
//! ```text
//! magic   8 bytes  "CMLPNET\0"
//! version u32      = 1
//! has_rff u8
//!   [n u32, D u32, sigma f64, L: n*D f64 row-major]
//! hidden  u32
//!   per layer: act_tag u8, act_param f64, rows u32, cols u32,
//!              weight rows*cols f64, bias rows f64
//! output: rows u32, cols u32, weight f64*, bias f64*
//! ```
//!
//! Floats are stored via `to_bits`, so a round trip is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use super::{ActivationKind, Layer, Linear, Network, RffEmbedding};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

const MAGIC: &[u8; 8] = b"CMLPNET\0";
const VERSION: u32 = 1;

pub fn write_network<W: Write>(net: &Network, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    match &net.embedding {
        Some(e) => {
            w.write_all(&[1])?;
            put_u32(&mut w, e.l.rows() as u32)?;
            put_u32(&mut w, e.l.cols() as u32)?;
            put_f64(&mut w, e.sigma)?;
            put_f64s(&mut w, e.l.as_slice())?;
        }
        None => w.write_all(&[0])?,
    }
    put_u32(&mut w, net.hidden.len() as u32)?;
    for layer in &net.hidden {
        let (tag, param) = layer.activation.tag();
        w.write_all(&[tag])?;
        put_f64(&mut w, param)?;
        put_affine(&mut w, &layer.weight, &layer.bias)?;
    }
    put_affine(&mut w, &net.output.weight, &net.output.bias)?;
    Ok(())
}

pub fn read_network<R: Read>(mut r: R) -> Result<Network> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a network checkpoint".into()));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let embedding = match get_u8(&mut r)? {
        0 => None,
        1 => {
            let n = get_u32(&mut r)? as usize;
            let d = get_u32(&mut r)? as usize;
            let sigma = get_f64(&mut r)?;
            let l = Matrix::from_vec(n, d, get_f64s(&mut r, n * d)?)?;
            Some(RffEmbedding::new(l, sigma)?)
        }
        t => return Err(Error::Format(format!("bad embedding flag {t}"))),
    };
    let layers = get_u32(&mut r)? as usize;
    let mut hidden = Vec::with_capacity(layers);
    for _ in 0..layers {
        let tag = get_u8(&mut r)?;
        let param = get_f64(&mut r)?;
        let activation = ActivationKind::from_tag(tag, param)?;
        let (weight, bias) = get_affine(&mut r)?;
        hidden.push(Layer {
            weight,
            bias,
            activation,
        });
    }
    let (weight, bias) = get_affine(&mut r)?;
    Network::new(embedding, hidden, Linear { weight, bias })
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_network(net, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let bytes = std::fs::read(path)?;
    read_network(bytes.as_slice())
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_bits().to_le_bytes())?;
    Ok(())
}

fn put_f64s<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    for &v in vs {
        put_f64(w, v)?;
    }
    Ok(())
}

fn put_affine<W: Write>(w: &mut W, weight: &Matrix, bias: &Matrix) -> Result<()> {
    put_u32(w, weight.rows() as u32)?;
    put_u32(w, weight.cols() as u32)?;
    put_f64s(w, weight.as_slice())?;
    put_f64s(w, bias.as_slice())
}

fn get_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_bits(u64::from_le_bytes(b)))
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| get_f64(r)).collect()
}

fn get_affine<R: Read>(r: &mut R) -> Result<(Matrix, Matrix)> {
    let rows = get_u32(r)? as usize;
    let cols = get_u32(r)? as usize;
    let weight = Matrix::from_vec(rows, cols, get_f64s(r, rows * cols)?)?;
    let bias = Matrix::from_vec(1, rows, get_f64s(r, rows)?)?;
    Ok((weight, bias))
}
