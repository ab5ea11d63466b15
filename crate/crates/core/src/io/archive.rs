//! Binary weight archive.
//!
//! Layout (little-endian): magic `WSRGANW\0`, `u32` version, `u32` config
//! length and UTF-8 config text, `u32` tensor count, then per tensor a `u16`
//! name length and name, `u8` dtype (0 = f32), `u8` rank, `u32` dims and the
//! raw values.

use std::collections::HashSet;
use std::path::Path;

use crate::discriminator::Discriminator;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::params::ParamStore;
use crate::tensor::Tensor;

use super::config::RunConfig;

pub const ARCHIVE_MAGIC: &[u8; 8] = b"WSRGANW\0";
pub const ARCHIVE_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightArchive {
    /// Run configuration text the tensors were produced with.
    pub config: String,
    pub tensors: Vec<ArchiveTensor>,
}

fn arc_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Archive(msg.into()))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return arc_err(format!("truncated archive while reading {what}"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn store_tensors(store: &ParamStore<f32>, out: &mut Vec<ArchiveTensor>) {
    for e in store.entries() {
        out.push(ArchiveTensor {
            name: e.name.clone(),
            shape: e.tensor.shape().to_vec(),
            data: e.tensor.data().to_vec(),
        });
    }
}

/// Models reconstructed from an archive.
pub struct LoadedModels {
    pub config: RunConfig,
    pub generator: Generator<f32>,
    pub discriminator: Option<Discriminator<f32>>,
    /// Archive tensors no model claimed.
    pub ignored: Vec<String>,
}

impl WeightArchive {
    pub fn from_models(cfg: &RunConfig, gen: &Generator<f32>, disc: Option<&Discriminator<f32>>) -> Self {
        let mut tensors = Vec::new();
        store_tensors(&gen.store, &mut tensors);
        if let Some(d) = disc {
            store_tensors(&d.store, &mut tensors);
        }
        Self {
            config: cfg.to_text(),
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ARCHIVE_MAGIC);
        out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8, "magic")? != ARCHIVE_MAGIC {
            return arc_err("not a weight archive (bad magic)");
        }
        let version = r.u32("version")?;
        if version != ARCHIVE_VERSION {
            return arc_err(format!("archive version {version} is not supported (expected {ARCHIVE_VERSION})"));
        }
        let clen = r.u32("config length")? as usize;
        let config = std::str::from_utf8(r.take(clen, "config")?)
            .map_err(|_| Error::Archive("config text is not UTF-8".into()))?
            .to_string();
        let count = r.u32("tensor count")? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        let mut seen = HashSet::new();
        for i in 0..count {
            let nlen = r.u16("tensor name length")? as usize;
            let name = std::str::from_utf8(r.take(nlen, "tensor name")?)
                .map_err(|_| Error::Archive(format!("tensor {i}: name is not UTF-8")))?
                .to_string();
            let dtype = r.u8("dtype")?;
            if dtype != DTYPE_F32 {
                return arc_err(format!("tensor {name}: unsupported dtype {dtype}"));
            }
            let rank = r.u8("rank")? as usize;
            let shape = (0..rank)
                .map(|_| r.u32("dims").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let bytes = r.take(n * 4, &format!("data of tensor {name}"))?;
            let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
            if !seen.insert(name.clone()) {
                return arc_err(format!("duplicate tensor {name}"));
            }
            tensors.push(ArchiveTensor { name, shape, data });
        }
        if r.pos != buf.len() {
            return arc_err(format!("{} trailing bytes after the last tensor", buf.len() - r.pos));
        }
        Ok(Self { config, tensors })
    }

    pub fn get(&self, name: &str) -> Option<&ArchiveTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    fn fill(&self, store: &mut ParamStore<f32>) -> Result<()> {
        for i in 0..store.len() {
            let id = crate::params::ParamId(i);
            let name = store.name(id).to_string();
            let Some(t) = self.get(&name) else {
                return arc_err(format!("tensor {name} is missing"));
            };
            let want = store.get(id).shape().to_vec();
            if t.shape != want {
                return arc_err(format!("tensor {name}: shape {:?} does not match expected {want:?}", t.shape));
            }
            store.set(id, Tensor::new(&want, t.data.clone())?)?;
        }
        Ok(())
    }

    /// Builds the models described by the embedded configuration and fills
    /// them. A discriminator is loaded when the archive carries one.
    pub fn into_models(&self) -> Result<LoadedModels> {
        let config = RunConfig::parse(&self.config)?;
        let mut generator = Generator::<f32>::new(config.generator.clone(), 0)?;
        self.fill(&mut generator.store)?;
        let has_disc = self.tensors.iter().any(|t| t.name.starts_with("disc."));
        let discriminator = if has_disc {
            let mut d = Discriminator::<f32>::new(config.discriminator.clone(), 0)?;
            self.fill(&mut d.store)?;
            Some(d)
        } else {
            None
        };
        let known: HashSet<&str> = generator
            .store
            .entries()
            .iter()
            .chain(discriminator.iter().flat_map(|d| d.store.entries()))
            .map(|e| e.name.as_str())
            .collect();
        let ignored: Vec<String> = self
            .tensors
            .iter()
            .filter(|t| !known.contains(t.name.as_str()))
            .map(|t| t.name.clone())
            .collect();
        for name in &ignored {
            log::warn!("ignoring unknown tensor {name} in weight archive");
        }
        Ok(LoadedModels {
            config,
            generator,
            discriminator,
            ignored,
        })
    }
}

pub fn save_weights(archive: &WeightArchive, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, archive.to_bytes())?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightArchive> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    WeightArchive::from_bytes(&bytes).map_err(|e| match e {
        Error::Archive(m) => Error::Archive(format!("{}: {m}", path.display())),
        other => other,
    })
}
