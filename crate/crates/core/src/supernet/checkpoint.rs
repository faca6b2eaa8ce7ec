//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic    b"HSNT"
//! version  u32
//! layers   u32          encoder layers + 1 (classifier is last)
//! per layer:
//!   activation u8       0 = ReLU, 1 = Identity
//!   out_dim    u32
//!   in_dim     u32
//!   weights    out*in f64 (IEEE bits)
//!   bias       out f64
//! ```

use std::io::{Read, Write};

use super::SuperNet;
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, Tensor};

const MAGIC: &[u8; 4] = b"HSNT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(net: &SuperNet, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let layers = net.full_path();
    out.write_all(&(layers.len() as u32).to_le_bytes())?;
    for layer in layers {
        let act: u8 = match layer.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        };
        out.write_all(&[act])?;
        out.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
        out.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
        for v in layer.params() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<SuperNet> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = read_u32(&mut input)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut input)? as usize;
    if count < 3 {
        return Err(Error::Checkpoint(format!("{count} layers is too few")));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let mut act = [0u8; 1];
        input.read_exact(&mut act)?;
        let activation = match act[0] {
            0 => Activation::Relu,
            1 => Activation::Identity,
            other => return Err(Error::Checkpoint(format!("unknown activation tag {other}"))),
        };
        let out_dim = read_u32(&mut input)? as usize;
        let in_dim = read_u32(&mut input)? as usize;
        let weights = read_f64s(&mut input, out_dim * in_dim)?;
        let bias = read_f64s(&mut input, out_dim)?;
        layers.push(DenseLayer::new(
            Tensor::new(vec![out_dim, in_dim], weights)?,
            Tensor::new(vec![out_dim], bias)?,
            activation,
        )?);
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last layer".into()));
    }
    let classifier = layers.pop().unwrap();
    SuperNet::from_parts(layers, classifier)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = [0u8; 8];
    (0..n)
        .map(|_| {
            input.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = SuperNet::build(&[6, 5, 4, 3], 3, 99).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.checksum(), net.checksum());
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOPE\x01\0\0\0"[..]).is_err());
        let net = SuperNet::build(&[6, 5, 4, 3], 3, 99).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(buf.as_slice()).is_err());
        buf.extend_from_slice(&[0; 10]);
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
