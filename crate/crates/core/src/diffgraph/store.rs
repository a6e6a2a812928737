use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use ndarray::{Array2, ArcArray2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT: &str = "neural-parts/tensors-v1";

/// Named trainable tensors in a fixed, insertion-defined order.
///
/// The order of entries is the canonical serialization order: the binary blob
/// is the concatenation of every entry's row-major values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    entries: IndexMap<String, ArcArray2<f64>>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::usage(format!("duplicate parameter `{name}`")));
        }
        self.entries.insert(name, value.into_shared());
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ArcArray2<f64>> {
        self.entries.get(name)
    }

    /// Overwrites the values of `name`; the shape must not change.
    pub fn assign(&mut self, name: &str, value: &Array2<f64>) -> Result<()> {
        let slot = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::usage(format!("unknown parameter `{name}`")))?;
        if slot.dim() != value.dim() {
            return Err(Error::usage(format!(
                "shape of `{name}` is immutable: {:?} vs {:?}",
                slot.dim(),
                value.dim()
            )));
        }
        slot.assign(value);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArcArray2<f64>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ArcArray2<f64>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars across all entries.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(|v| v.len()).sum()
    }

    /// All values concatenated in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for v in self.entries.values() {
            out.extend(v.iter().copied());
        }
        out
    }

    /// Overwrites every value from a flat vector in canonical order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::usage(format!(
                "flat vector has {} values, store holds {}",
                flat.len(),
                self.num_scalars()
            )));
        }
        let mut off = 0;
        for v in self.entries.values_mut() {
            let n = v.len();
            for (dst, src) in v.iter_mut().zip(&flat[off..off + n]) {
                *dst = *src;
            }
            off += n;
        }
        Ok(())
    }

    pub fn manifest(&self, blob: &str) -> TensorManifest {
        let mut entries = Vec::with_capacity(self.len());
        let mut offset = 0;
        for (name, v) in self.iter() {
            entries.push(TensorEntry {
                name: name.to_string(),
                shape: vec![v.nrows(), v.ncols()],
                offset,
            });
            offset += v.len() * 8;
        }
        TensorManifest {
            format: FORMAT.to_string(),
            blob: blob.to_string(),
            total_bytes: offset,
            entries,
        }
    }

    /// Writes `<stem>.json` (manifest) and `<stem>.bin` (little-endian f64
    /// blob) into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let blob_name = format!("{stem}.bin");
        let manifest = self.manifest(&blob_name);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let mpath = dir.join(format!("{stem}.json"));
        fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
        let bpath = dir.join(&blob_name);
        fs::write(&bpath, encode_f64(&self.to_flat())).map_err(|e| Error::io(&bpath, e))
    }

    /// Reads a store written by [`ParameterStore::save`].
    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let mpath = dir.join(format!("{stem}.json"));
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: TensorManifest =
            serde_json::from_str(&text).map_err(|e| Error::parse(&mpath, e.to_string()))?;
        if manifest.format != FORMAT {
            return Err(Error::parse(&mpath, format!("unknown format `{}`", manifest.format)));
        }
        let bpath = dir.join(&manifest.blob);
        let bytes = fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;
        if bytes.len() != manifest.total_bytes {
            return Err(Error::parse(
                &bpath,
                format!(
                    "corrupted blob: {} bytes, manifest expects {}",
                    bytes.len(),
                    manifest.total_bytes
                ),
            ));
        }
        let flat = decode_f64(&bytes);
        let mut store = ParameterStore::new();
        let mut expected_offset = 0;
        for e in &manifest.entries {
            let [r, c] = e.shape[..] else {
                return Err(Error::parse(&mpath, format!("`{}` is not rank 2", e.name)));
            };
            let n = r * c;
            if e.offset != expected_offset || e.offset + n * 8 > bytes.len() {
                return Err(Error::parse(&mpath, format!("bad offset for `{}`", e.name)));
            }
            let start = e.offset / 8;
            let value = Array2::from_shape_vec((r, c), flat[start..start + n].to_vec())
                .expect("shape checked");
            store.insert(e.name.clone(), value)?;
            expected_offset += n * 8;
        }
        if expected_offset != manifest.total_bytes {
            return Err(Error::parse(&mpath, "entries do not cover the blob"));
        }
        Ok(store)
    }

    /// `true` when both stores hold the same names with the same shapes.
    pub fn same_layout(&self, other: &ParameterStore) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|((a, x), (b, y))| a == b && x.dim() == y.dim())
    }
}

/// One tensor in a [`TensorManifest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

/// Structured-text index of a flat binary tensor blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorManifest {
    pub format: String,
    pub blob: String,
    pub total_bytes: usize,
    pub entries: Vec<TensorEntry>,
}

pub(crate) fn encode_f64(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn decode_f64(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect()
}

/// Gradient (or any per-parameter tensor) keyed like a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    entries: IndexMap<String, Array2<f64>>,
}

impl GradientMap {
    pub fn zeros_like(store: &ParameterStore) -> Self {
        GradientMap {
            entries: store
                .iter()
                .map(|(k, v)| (k.to_string(), Array2::zeros(v.dim())))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array2<f64>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.entries.values().flat_map(|v| v.iter().copied()).collect()
    }

    /// Adds `other` entry-wise; both maps must share a layout.
    pub fn accumulate(&mut self, other: &GradientMap) {
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(other.entries.iter()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.entries.values_mut() {
            *v *= c;
        }
    }

    /// Copies the entries into a store, e.g. for saving.
    pub fn to_store(&self) -> ParameterStore {
        let mut out = ParameterStore::new();
        for (k, v) in &self.entries {
            out.insert(k.clone(), v.clone()).expect("names are unique");
        }
        out
    }

    pub fn from_store(store: &ParameterStore) -> Self {
        GradientMap {
            entries: store.iter().map(|(k, v)| (k.to_string(), v.to_owned())).collect(),
        }
    }

    /// Name of the first entry holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.iter()
            .find(|(_, v)| !v.iter().all(|x| x.is_finite()))
            .map(|(k, _)| k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("w", array![[1.0, -2.0], [0.5, 1e-300]]).unwrap();
        s.insert("b", array![[f64::MIN_POSITIVE, 3.0]]).unwrap();
        s
    }

    #[test]
    fn save_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample();
        s.save(dir.path(), "params").unwrap();
        let back = ParameterStore::load(dir.path(), "params").unwrap();
        assert_eq!(s, back);
        let bytes = std::fs::read(dir.path().join("params.bin")).unwrap();
        assert_eq!(bytes, encode_f64(&s.to_flat()));
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        sample().save(dir.path(), "params").unwrap();
        let path = dir.path().join("params.bin");
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = ParameterStore::load(dir.path(), "params").unwrap_err();
        assert!(err.to_string().contains("corrupted"), "{err}");
    }

    #[test]
    fn duplicate_names_and_reshape_rejected() {
        let mut s = sample();
        assert!(s.insert("w", array![[0.0]]).is_err());
        assert!(s.assign("b", &array![[1.0]]).is_err());
        s.assign("b", &array![[1.0, 2.0]]).unwrap();
        assert_eq!(s.get("b").unwrap()[[0, 1]], 2.0);
    }

    #[test]
    fn manifest_offsets_follow_insertion_order() {
        let m = sample().manifest("x.bin");
        assert_eq!(m.entries[0].name, "w");
        assert_eq!(m.entries[1].offset, 32);
        assert_eq!(m.total_bytes, 48);
    }
}
