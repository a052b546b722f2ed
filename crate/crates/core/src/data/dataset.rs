use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::zoo::Reader;
use crate::Tensor;

const MAGIC: &[u8; 4] = b"PSAR";
const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 2 * 4;

/// Labeled pool `L`, candidate pool `U`, and test set, as disjoint index sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub labeled: BTreeSet<usize>,
    pub candidates: BTreeSet<usize>,
    pub test: BTreeSet<usize>,
}

impl Split {
    pub fn is_disjoint(&self) -> bool {
        self.labeled.is_disjoint(&self.candidates)
            && self.labeled.is_disjoint(&self.test)
            && self.candidates.is_disjoint(&self.test)
    }

    /// New split with `indices` moved from the candidate pool to the labeled pool.
    pub fn move_to_labeled(&self, indices: &[usize]) -> Result<Split> {
        let mut next = self.clone();
        for &i in indices {
            if !next.candidates.remove(&i) {
                let why = if self.candidates.contains(&i) {
                    "listed twice"
                } else if self.labeled.contains(&i) {
                    "already labeled"
                } else {
                    "not in the candidate pool"
                };
                return Err(Error::InvalidArgument(format!("cannot label instance {i}: {why}")));
            }
            next.labeled.insert(i);
        }
        Ok(next)
    }
}

/// Labeled `N x H x W x C` patches plus the current pool split.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset<T> {
    patches: Tensor<T>,
    labels: Vec<usize>,
    class_count: usize,
    pub split: Split,
}

impl<T: Scalar> PatchDataset<T> {
    pub fn new(patches: Tensor<T>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let n = match *patches.shape() {
            [n, _, _, _] => n,
            _ => return Err(Error::shape("dataset", format!("patches must be N x H x W x C, got {:?}", patches.shape()))),
        };
        if labels.len() != n {
            return Err(Error::shape("dataset", format!("{} labels for {n} patches", labels.len())));
        }
        if class_count < 2 {
            return Err(Error::InvalidArgument(format!("class count {class_count} < 2")));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::InvalidArgument(format!("label {l} of instance {i} outside [0, {class_count})")));
        }
        Ok(Self {
            patches,
            labels,
            class_count,
            split: Split::default(),
        })
    }

    pub fn patches(&self) -> &Tensor<T> {
        &self.patches
    }

    pub(crate) fn patches_mut(&mut self) -> &mut Tensor<T> {
        &mut self.patches
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[H, W, C]` of one patch.
    pub fn patch_shape(&self) -> [usize; 3] {
        let s = self.patches.shape();
        [s[1], s[2], s[3]]
    }

    /// Patches and labels of the given instances, in the given order.
    pub fn gather(&self, indices: &[usize]) -> (Tensor<T>, Vec<usize>) {
        (
            self.patches.gather_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn with_split(mut self, split: Split) -> Result<Self> {
        let n = self.len();
        let in_range = |s: &BTreeSet<usize>| s.iter().next_back().is_none_or(|&m| m < n);
        if !split.is_disjoint() || !in_range(&split.labeled) || !in_range(&split.candidates) || !in_range(&split.test) {
            return Err(Error::InvalidArgument("split must be disjoint subsets of [0, N)".into()));
        }
        self.split = split;
        Ok(self)
    }

    /// Moves `indices` from the candidate pool into the labeled pool.
    pub fn move_to_labeled(mut self, indices: &[usize]) -> Result<Self> {
        self.split = self.split.move_to_labeled(indices)?;
        Ok(self)
    }

    /// Serializes to the `PSAR` format: magic, version `u16`, `N` as `u32`,
    /// `H`, `W`, `C`, `K` as `u16`, then `N*H*W*C` little-endian `f32`
    /// values and `N` `u16` labels.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let [h, w, c] = self.patch_shape();
        let too_big = |what: &str| Error::InvalidArgument(format!("{what} does not fit the file header"));
        let n = u32::try_from(self.len()).map_err(|_| too_big("N"))?;
        let dims = [h, w, c, self.class_count]
            .map(|d| u16::try_from(d).map_err(|_| too_big("patch dimension or class count")));
        let mut out = Vec::with_capacity(HEADER_LEN + self.patches.len() * 4 + self.len() * 2);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&n.to_le_bytes());
        for d in dims {
            out.extend_from_slice(&d?.to_le_bytes());
        }
        for v in self.patches.data() {
            out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
        for &l in &self.labels {
            out.extend_from_slice(&(l as u16).to_le_bytes());
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        parse(bytes, Path::new("<memory>"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        parse(&bytes, path)
    }
}

/// Header fields of a `PSAR` file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub instances: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub class_count: usize,
}

pub fn read_header(bytes: &[u8], path: &Path) -> Result<DatasetHeader> {
    let mut r = Reader { bytes, at: 0, path };
    if r.take(4)? != MAGIC {
        return Err(r.fail(0, "bad magic, expected PSAR"));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(r.fail(4, format!("unsupported version {version}")));
    }
    Ok(DatasetHeader {
        instances: r.u32()? as usize,
        height: r.u16()? as usize,
        width: r.u16()? as usize,
        channels: r.u16()? as usize,
        class_count: r.u16()? as usize,
    })
}

fn parse<T: Scalar>(bytes: &[u8], path: &Path) -> Result<PatchDataset<T>> {
    let h = read_header(bytes, path)?;
    let mut r = Reader { bytes, at: HEADER_LEN, path };
    let values = h.instances * h.height * h.width * h.channels;
    let raw = r.take(values * 4)?;
    let data: Vec<T> = raw
        .chunks_exact(4)
        .map(|c| T::from_f64_lossy(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
        .collect();
    let mut labels = Vec::with_capacity(h.instances);
    for i in 0..h.instances {
        let at = r.at;
        let l = r.u16()? as usize;
        if l >= h.class_count {
            return Err(r.fail(at, format!("label {l} of instance {i} is not below K = {}", h.class_count)));
        }
        labels.push(l);
    }
    if r.at != bytes.len() {
        return Err(r.fail(r.at, format!("{} trailing bytes", bytes.len() - r.at)));
    }
    let patches = Tensor::new(vec![h.instances, h.height, h.width, h.channels], data)?;
    PatchDataset::new(patches, labels, h.class_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PatchDataset<f64> {
        let patches = Tensor::from_fn(vec![4, 2, 2, 3], |i| i as f64 * 0.25 - 3.0);
        PatchDataset::new(patches, vec![0, 1, 2, 1], 3).unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        let d = tiny();
        let back = PatchDataset::<f64>::from_bytes(&d.to_bytes().unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_label_equal_to_class_count() {
        let mut b = tiny().to_bytes().unwrap();
        let last = b.len() - 2;
        b[last..].copy_from_slice(&3u16.to_le_bytes());
        let err = PatchDataset::<f64>::from_bytes(&b).unwrap_err();
        match err {
            Error::Format { offset, detail, .. } => {
                assert_eq!(offset as usize, last);
                assert!(detail.contains("instance 3"), "{detail}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let b = tiny().to_bytes().unwrap();
        assert!(PatchDataset::<f64>::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[1] = b'X';
        assert!(matches!(PatchDataset::<f64>::from_bytes(&bad), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn moving_candidates_updates_pools() {
        let split = Split {
            labeled: [0].into(),
            candidates: [1, 2, 3].into(),
            test: BTreeSet::new(),
        };
        let d = tiny().with_split(split).unwrap();
        let d = d.move_to_labeled(&[3, 1]).unwrap();
        assert_eq!(d.split.labeled, [0, 1, 3].into());
        assert_eq!(d.split.candidates, [2].into());
        let same = d.clone().move_to_labeled(&[]).unwrap();
        assert_eq!(same, d);
        assert!(d.clone().move_to_labeled(&[0]).is_err());
        assert!(d.move_to_labeled(&[2, 2]).is_err());
    }

    #[test]
    fn with_split_rejects_overlap() {
        let split = Split {
            labeled: [0, 1].into(),
            candidates: [1].into(),
            test: BTreeSet::new(),
        };
        assert!(tiny().with_split(split).is_err());
    }
}
