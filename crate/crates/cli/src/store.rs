//! On-disk stripe layout: a `manifest.json` plus one `s{stripe}_n{node}.dat`
//! file per node. Reads go through [`NodeStore`], which counts every node and
//! symbol it loads.

use std::cell::Cell;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use convertible_codes::{Field, FieldElement, FieldSpec, GfMatrix, MdsCode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub field: FieldSpec,
    pub n: usize,
    pub k: usize,
    pub stripes: usize,
    /// Length of the original input in bytes.
    pub payload_len: u64,
    pub seed: u64,
    /// Symbols per node file.
    pub chunk_len: usize,
    /// k×(n−k) parity block of the stored code.
    pub parity: Vec<Vec<u16>>,
    /// One period of the slot→chunk permutation; empty means identity. Slot
    /// `s·k + c` is systematic column `c` of stripe `s`.
    #[serde(default)]
    pub order: Vec<usize>,
    /// Zero stripes the last conversion appended to fill its final batch.
    #[serde(default)]
    pub padding_stripes: usize,
}

pub fn symbol_bytes(spec: &FieldSpec) -> usize {
    if spec.w <= 8 {
        1
    } else {
        2
    }
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::Verification(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Verification(format!("manifest: {m}")).into());
        if self.version != FORMAT_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if !(self.n > self.k && self.k >= 1) {
            return bad(format!("need n > k >= 1, got [{}, {}]", self.n, self.k));
        }
        if self.field.w != 8 && self.field.w != 16 {
            return bad(format!("field width {} is not 8 or 16", self.field.w));
        }
        if self.chunk_len == 0 {
            return bad("chunk_len is 0".into());
        }
        if self.parity.len() != self.k || self.parity.iter().any(|row| row.len() != self.n - self.k) {
            return bad("parity block does not match n and k".into());
        }
        let mut seen = vec![false; self.order.len()];
        for &o in &self.order {
            if o >= seen.len() || std::mem::replace(&mut seen[o], true) {
                return bad("order is not a permutation".into());
            }
        }
        if self.data_chunks() > self.stripes * self.k {
            return bad("stripes cannot hold payload_len bytes".into());
        }
        Ok(())
    }

    pub fn field(&self) -> Result<Field> {
        Ok(Field::new(self.field)?)
    }

    pub fn code(&self) -> Result<MdsCode> {
        let field = self.field()?;
        Ok(MdsCode::from_parity(GfMatrix::from_rows(&self.parity)?, field)?)
    }

    pub fn symbol_bytes(&self) -> usize {
        symbol_bytes(&self.field)
    }

    pub fn symbols(&self) -> usize {
        (self.payload_len as usize).div_ceil(self.symbol_bytes())
    }

    /// Chunks holding input data; later slots are zero padding.
    pub fn data_chunks(&self) -> usize {
        self.symbols().div_ceil(self.chunk_len)
    }

    /// Logical chunk held by systematic slot `slot`.
    pub fn logical(&self, slot: usize) -> usize {
        if self.order.is_empty() {
            return slot;
        }
        let period = self.order.len();
        slot / period * period + self.order[slot % period]
    }
}

pub fn node_path(dir: &Path, stripe: usize, node: usize) -> PathBuf {
    dir.join(format!("s{stripe}_n{node}.dat"))
}

pub fn symbols_from_bytes(bytes: &[u8], width: usize) -> Vec<FieldElement> {
    match width {
        1 => bytes.iter().map(|&b| FieldElement(b as u16)).collect(),
        _ => {
            bytes.chunks(2).map(|c| FieldElement(u16::from_le_bytes([c[0], c.get(1).copied().unwrap_or(0)]))).collect()
        }
    }
}

pub fn bytes_from_symbols(symbols: &[FieldElement], width: usize) -> Vec<u8> {
    match width {
        1 => symbols.iter().map(|s| s.0 as u8).collect(),
        _ => symbols.iter().flat_map(|s| s.0.to_le_bytes()).collect(),
    }
}

pub fn write_node(dir: &Path, stripe: usize, node: usize, payload: &[FieldElement], width: usize) -> Result<()> {
    let path = node_path(dir, stripe, node);
    fs::write(&path, bytes_from_symbols(payload, width)).with_context(|| format!("writing {}", path.display()))
}

/// Counts of node loads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadStats {
    /// Node files read from disk.
    pub disk_nodes: usize,
    /// Symbols in those files.
    pub disk_symbols: usize,
    /// Nodes of zero padding stripes, served without touching disk.
    pub virtual_nodes: usize,
}

/// Read access to a stripe directory.
pub struct NodeStore {
    dir: PathBuf,
    manifest: Manifest,
    virtual_stripes: usize,
    disk_nodes: Cell<usize>,
    disk_symbols: Cell<usize>,
    virtual_nodes: Cell<usize>,
}

impl NodeStore {
    pub fn open(dir: &Path) -> Result<NodeStore> {
        Ok(NodeStore {
            dir: dir.to_path_buf(),
            manifest: Manifest::load(dir)?,
            virtual_stripes: 0,
            disk_nodes: Cell::new(0),
            disk_symbols: Cell::new(0),
            virtual_nodes: Cell::new(0),
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Serves `count` all-zero stripes after the stored ones.
    pub fn with_padding(mut self, count: usize) -> NodeStore {
        self.virtual_stripes = count;
        self
    }

    pub fn is_virtual(&self, stripe: usize) -> bool {
        stripe >= self.manifest.stripes
    }

    pub fn stats(&self) -> ReadStats {
        ReadStats {
            disk_nodes: self.disk_nodes.get(),
            disk_symbols: self.disk_symbols.get(),
            virtual_nodes: self.virtual_nodes.get(),
        }
    }

    /// Loads a node, or `None` if its file is missing.
    pub fn try_read(&self, stripe: usize, node: usize) -> Result<Option<Vec<FieldElement>>> {
        let m = &self.manifest;
        if node >= m.n || stripe >= m.stripes + self.virtual_stripes {
            return Err(CliError::Parameter(format!("no node {node} in stripe {stripe}")).into());
        }
        if self.is_virtual(stripe) {
            self.virtual_nodes.set(self.virtual_nodes.get() + 1);
            return Ok(Some(vec![FieldElement::ZERO; m.chunk_len]));
        }
        let path = node_path(&self.dir, stripe, node);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
        };
        let symbols = symbols_from_bytes(&bytes, m.symbol_bytes());
        self.disk_nodes.set(self.disk_nodes.get() + 1);
        self.disk_symbols.set(self.disk_symbols.get() + symbols.len());
        if bytes.len() != m.chunk_len * m.symbol_bytes() {
            return Err(CliError::Corrupt {
                stripe,
                node,
                reason: format!("{} bytes, expected {}", bytes.len(), m.chunk_len * m.symbol_bytes()),
            }
            .into());
        }
        Ok(Some(symbols))
    }

    pub fn read(&self, stripe: usize, node: usize) -> Result<Vec<FieldElement>> {
        self.try_read(stripe, node)?
            .ok_or_else(|| CliError::Corrupt { stripe, node, reason: "file missing".into() }.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> Manifest {
        Manifest {
            version: FORMAT_VERSION,
            field: FieldSpec::GF256,
            n: 3,
            k: 2,
            stripes: 1,
            payload_len: 3,
            seed: 0,
            chunk_len: 2,
            parity: vec![vec![1], vec![1]],
            order: vec![],
            padding_stripes: 0,
        }
    }

    #[test]
    fn symbol_round_trip() {
        let bytes = [1u8, 2, 3, 250];
        assert_eq!(bytes_from_symbols(&symbols_from_bytes(&bytes, 1), 1), bytes);
        assert_eq!(symbols_from_bytes(&bytes, 2), vec![FieldElement(0x0201), FieldElement(0xFA03)]);
        assert_eq!(bytes_from_symbols(&symbols_from_bytes(&bytes, 2), 2), bytes);
        assert_eq!(symbols_from_bytes(&[7], 2), vec![FieldElement(7)]);
    }

    #[test]
    fn manifest_validation() {
        assert!(manifest().validate().is_ok());
        let mut m = manifest();
        m.order = vec![0, 0];
        assert!(m.validate().is_err());
        let mut m = manifest();
        m.payload_len = 5;
        assert!(m.validate().is_err());
        let mut m = manifest();
        m.parity = vec![vec![1]];
        assert!(m.validate().is_err());
    }

    #[test]
    fn periodic_order() {
        let mut m = manifest();
        m.order = vec![1, 0, 2];
        assert_eq!((0..6).map(|s| m.logical(s)).collect::<Vec<_>>(), vec![1, 0, 2, 4, 3, 5]);
    }

    #[test]
    fn store_counts_and_checks_lengths() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest();
        m.save(dir.path()).unwrap();
        fs::write(node_path(dir.path(), 0, 0), [1, 2]).unwrap();
        fs::write(node_path(dir.path(), 0, 1), [3]).unwrap();
        let store = NodeStore::open(dir.path()).unwrap().with_padding(1);
        assert_eq!(store.read(0, 0).unwrap(), vec![FieldElement(1), FieldElement(2)]);
        assert!(store.read(0, 1).is_err());
        assert!(store.try_read(0, 2).unwrap().is_none());
        assert_eq!(store.read(1, 2).unwrap(), vec![FieldElement::ZERO; 2]);
        assert!(store.read(2, 0).is_err());
        assert_eq!(store.stats(), ReadStats { disk_nodes: 2, disk_symbols: 3, virtual_nodes: 1 });
    }
}
