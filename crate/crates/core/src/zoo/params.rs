use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use super::graph::NetworkGraph;
use crate::engine::ParamMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

const MAGIC: &[u8; 4] = b"AEDL";
const FORMAT_VERSION: u16 = 1;
/// Reserved rank-0 entry carrying the epoch tag in serialized form.
const EPOCH_ENTRY: &str = "@epoch_tag";

/// Named parameter tensors of one network state, tagged with the epoch
/// at which it was captured.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T> {
    pub entries: ParamMap<T>,
    pub epoch_tag: i64,
}

impl<T: Scalar> ParameterSet<T> {
    /// Fan-in-scaled uniform initialization: weights are drawn from
    /// `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, biases and BN shifts start at
    /// zero, BN scales and running variances at one.
    pub fn initialize<R: Rng + ?Sized>(graph: &NetworkGraph, rng: &mut R) -> Self {
        let mut entries = BTreeMap::new();
        for spec in graph.parameter_specs() {
            let suffix = spec.name.rsplit('.').next().unwrap_or("");
            let t = match suffix {
                "weight" => {
                    let limit = (6.0 / spec.fan_in.max(1) as f64).sqrt();
                    Tensor::from_fn(spec.shape.clone(), |_| T::from_f64_lossy(rng.random_range(-limit..limit)))
                }
                "gamma" | "running_var" => Tensor::filled(spec.shape.clone(), T::one()),
                _ => Tensor::zeros(spec.shape.clone()),
            };
            entries.insert(spec.name, t);
        }
        Self { entries, epoch_tag: 0 }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name}")))
    }

    /// Checks names and shapes against the graph, in both directions.
    pub fn check_against(&self, graph: &NetworkGraph) -> Result<()> {
        let specs = graph.parameter_specs();
        if specs.len() != self.entries.len() {
            return Err(Error::shape(
                "parameters",
                format!("graph declares {} tensors, set holds {}", specs.len(), self.entries.len()),
            ));
        }
        for spec in specs {
            let t = self.get(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::shape(
                    "parameters",
                    format!("{} is {:?}, graph expects {:?}", spec.name, t.shape(), spec.shape),
                ));
            }
        }
        Ok(())
    }

    /// Serializes to the `AEDL` binary format: magic, version `u16`, entry
    /// count `u32`, then per entry a `u16`-prefixed UTF-8 name, `u8` rank,
    /// `u32` dims, and little-endian `f64` values. The epoch tag travels as
    /// a reserved rank-0 entry.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&((self.entries.len() + 1) as u32).to_le_bytes());
        let epoch = Tensor::<f64>::scalar(self.epoch_tag as f64);
        write_entry(&mut out, EPOCH_ENTRY, epoch.shape(), epoch.data().iter().copied());
        for (name, t) in &self.entries {
            write_entry(&mut out, name, t.shape(), t.data().iter().map(|v| v.to_f64_lossy()));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::parse(bytes, Path::new("<memory>"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes, path)
    }

    fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, at: 0, path };
        if r.take(4)? != MAGIC {
            return Err(r.fail(0, "bad magic, expected AEDL"));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(r.fail(4, format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut entries = BTreeMap::new();
        let mut epoch_tag = None;
        for _ in 0..count {
            let start = r.at;
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| r.fail(start, "entry name is not UTF-8"))?
                .to_string();
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let len: usize = shape.iter().product();
            let raw = r.take(len.checked_mul(8).ok_or_else(|| r.fail(start, "entry too large"))?)?;
            let data: Vec<T> = raw
                .chunks_exact(8)
                .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
                .collect();
            if name == EPOCH_ENTRY {
                if len != 1 {
                    return Err(r.fail(start, "epoch tag entry must hold one value"));
                }
                epoch_tag = Some(data[0].to_f64_lossy() as i64);
            } else if entries.insert(name.clone(), Tensor::new(shape, data)?).is_some() {
                return Err(r.fail(start, format!("duplicate entry {name}")));
            }
        }
        if r.at != bytes.len() {
            return Err(r.fail(r.at as u64 as usize, "trailing bytes after last entry"));
        }
        Ok(Self {
            entries,
            epoch_tag: epoch_tag.unwrap_or(0),
        })
    }
}

fn write_entry(out: &mut Vec<u8>, name: &str, shape: &[usize], values: impl Iterator<Item = f64>) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) struct Reader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) at: usize,
    pub(crate) path: &'a Path,
}

impl<'a> Reader<'a> {
    pub(crate) fn fail(&self, offset: usize, detail: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            detail: detail.into(),
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(self.fail(
                self.at,
                format!("truncated: need {n} bytes, {} remain", self.bytes.len() - self.at),
            ));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::build_wcrn;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn initialized_set_matches_graph() {
        let g = build_wcrn(6, 11).unwrap();
        let p = ParameterSet::<f64>::initialize(&g, &mut ChaCha8Rng::seed_from_u64(1));
        p.check_against(&g).unwrap();
        let limit = (6.0f64 / 6.0).sqrt();
        assert!(p.entries["conv1a.weight"].data().iter().all(|v| v.abs() <= limit));
        assert!(p.entries["conv1a.bias"].data().iter().all(|&v| v == 0.0));
        assert!(p.entries["bn4.gamma"].data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let g = build_wcrn(3, 4).unwrap();
        let mut p = ParameterSet::<f64>::initialize(&g, &mut ChaCha8Rng::seed_from_u64(9));
        p.epoch_tag = 42;
        let back = ParameterSet::<f64>::from_bytes(&p.to_bytes()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn header_layout() {
        let mut entries = BTreeMap::new();
        entries.insert("w".to_string(), Tensor::new(vec![2], vec![1.0f64, -2.0]).unwrap());
        let p = ParameterSet { entries, epoch_tag: 0 };
        let b = p.to_bytes();
        assert_eq!(&b[..4], b"AEDL");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(u32::from_le_bytes([b[6], b[7], b[8], b[9]]), 2);
        // Last entry: name "w", rank 1, dim 2, then two f64 values.
        let tail = &b[b.len() - (2 + 1 + 1 + 4 + 16)..];
        assert_eq!(&tail[..3], &[1, 0, b'w']);
        assert_eq!(tail[3], 1);
        assert_eq!(&tail[4..8], &2u32.to_le_bytes());
        assert_eq!(&tail[8..16], &1.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let g = build_wcrn(2, 2).unwrap();
        let p = ParameterSet::<f64>::initialize(&g, &mut ChaCha8Rng::seed_from_u64(0));
        let mut b = p.to_bytes();
        let short = &b[..b.len() - 3];
        assert!(matches!(ParameterSet::<f64>::from_bytes(short), Err(Error::Format { .. })));
        b[0] = b'X';
        assert!(matches!(ParameterSet::<f64>::from_bytes(&b), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn check_against_rejects_wrong_shape() {
        let g = build_wcrn(2, 3).unwrap();
        let mut p = ParameterSet::<f64>::initialize(&g, &mut ChaCha8Rng::seed_from_u64(0));
        p.entries.insert("fc.bias".into(), Tensor::zeros(vec![4]));
        assert!(p.check_against(&g).is_err());
    }
}
