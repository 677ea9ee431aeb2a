//! Versioned binary checkpoints: a header naming each tensor and its shape,
//! followed by row-major little-endian f64 payloads. Loading a saved file
//! reproduces every value bit-exactly.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::tensor::Tensor;

const MAGIC: &[u8; 4] = b"L2TC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes (not a checkpoint file)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("tensor '{name}' has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("missing tensor '{0}'")]
    Missing(String),
}

pub fn save<W: Write>(mut w: W, tensors: &[(String, &Tensor)]) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_file(path: &Path, tensors: &[(String, &Tensor)]) -> Result<(), CheckpointError> {
    let file = std::fs::File::create(path)?;
    save(io::BufWriter::new(file), tensors)
}

pub fn load<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > 4096 {
            return Err(CheckpointError::Corrupt("tensor name too long".into()));
        }
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::Corrupt("tensor name is not utf-8".into()))?;
        let ndim = read_u32(&mut r)? as usize;
        if ndim == 0 || ndim > 8 {
            return Err(CheckpointError::Corrupt(format!(
                "tensor '{name}' has {ndim} dimensions"
            )));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut buf = [0u8; 8];
        for _ in 0..numel {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        out.push((name, Tensor::from_vec(&shape, data)));
    }
    Ok(out)
}

pub fn load_file(path: &Path) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    let file = std::fs::File::open(path)?;
    load(io::BufReader::new(file))
}

/// Copies loaded values into an existing set of named tensors, enforcing
/// name and shape agreement.
pub fn restore_into(
    loaded: &[(String, Tensor)],
    targets: Vec<(String, &mut Tensor)>,
) -> Result<(), CheckpointError> {
    for (name, target) in targets {
        let source = loaded
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| CheckpointError::Missing(name.clone()))?;
        if source.1.shape() != target.shape() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: target.shape().to_vec(),
                found: source.1.shape().to_vec(),
            });
        }
        target.data_mut().copy_from_slice(source.1.data());
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let a = Tensor::from_vec(&[2, 3], vec![0.1, -0.2, 1.0 / 3.0, f64::MIN_POSITIVE, 1e300, -0.0]);
        let b = Tensor::from_vec(&[4], vec![std::f64::consts::PI, -1.5, 2.5, 0.7]);
        let mut buf = Vec::new();
        save(&mut buf, &[("net.w".to_string(), &a), ("net.b".to_string(), &b)]).unwrap();
        let loaded = load(buf.as_slice()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "net.w");
        assert_eq!(loaded[0].1.shape(), &[2, 3]);
        for (x, y) in loaded[0].1.data().iter().zip(a.data().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in loaded[1].1.data().iter().zip(b.data().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let err = load(&b"NOPE"[..]).unwrap_err();
        assert!(matches!(err, CheckpointError::BadMagic));
    }

    #[test]
    fn restore_enforces_shapes() {
        let a = Tensor::from_vec(&[2], vec![1.0, 2.0]);
        let mut buf = Vec::new();
        save(&mut buf, &[("w".to_string(), &a)]).unwrap();
        let loaded = load(buf.as_slice()).unwrap();
        let mut wrong = Tensor::zeros(&[3]);
        let err = restore_into(&loaded, vec![("w".to_string(), &mut wrong)]).unwrap_err();
        assert!(matches!(err, CheckpointError::ShapeMismatch { .. }));
        let mut right = Tensor::zeros(&[2]);
        restore_into(&loaded, vec![("w".to_string(), &mut right)]).unwrap();
        assert_eq!(right.data(), &[1.0, 2.0]);
    }
}
