//! `SPMD` model container: one binary envelope for every persisted model.
//!
//! Layout (little-endian): magic `SPMD`, `u32` version, `u32` kind tag,
//! `u32` dimension count followed by that many `u64` dimensions, `u32` block
//! count, then per block a `u64` length and that many `f64` values.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use crate::encoding::{FrameFvs, GmmModel, PcaModel};
use crate::error::{Error, Result};
use crate::models::{LssvmModel, SvrModel};

const MAGIC: &[u8; 4] = b"SPMD";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum ModelKind {
    Pca = 1,
    Gmm = 2,
    Lssvm = 3,
    LssvmSet = 4,
    Svr = 5,
    FrameFvs = 6,
    FeatureMatrix = 7,
}

impl ModelKind {
    fn from_tag(tag: u32) -> Result<Self> {
        Ok(match tag {
            1 => ModelKind::Pca,
            2 => ModelKind::Gmm,
            3 => ModelKind::Lssvm,
            4 => ModelKind::LssvmSet,
            5 => ModelKind::Svr,
            6 => ModelKind::FrameFvs,
            7 => ModelKind::FeatureMatrix,
            other => return Err(Error::ModelFormat(format!("unknown model kind {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: ModelKind,
    pub dims: Vec<u64>,
    pub blocks: Vec<Vec<f64>>,
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.kind as u32)?;
        w.write_u32::<LittleEndian>(self.dims.len() as u32)?;
        for &d in &self.dims {
            w.write_u64::<LittleEndian>(d)?;
        }
        w.write_u32::<LittleEndian>(self.blocks.len() as u32)?;
        for b in &self.blocks {
            w.write_u64::<LittleEndian>(b.len() as u64)?;
            for &v in b {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let bad = |e: std::io::Error| Error::ModelFormat(e.to_string());
        let r = &mut bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(bad)?;
        if version != VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let kind = ModelKind::from_tag(r.read_u32::<LittleEndian>().map_err(bad)?)?;
        let n_dims = r.read_u32::<LittleEndian>().map_err(bad)? as usize;
        let dims = (0..n_dims)
            .map(|_| r.read_u64::<LittleEndian>().map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        let n_blocks = r.read_u32::<LittleEndian>().map_err(bad)? as usize;
        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let len = r.read_u64::<LittleEndian>().map_err(bad)? as usize;
            if len > r.len() / 8 {
                return Err(Error::ModelFormat("block length exceeds file size".into()));
            }
            let mut b = vec![0.0; len];
            r.read_f64_into::<LittleEndian>(&mut b).map_err(bad)?;
            blocks.push(b);
        }
        if !r.is_empty() {
            return Err(Error::ModelFormat("trailing bytes".into()));
        }
        Ok(Container { kind, dims, blocks })
    }

    fn expect(&self, kind: ModelKind, n_dims: usize, n_blocks: usize) -> Result<()> {
        if self.kind != kind {
            return Err(Error::ModelFormat(format!("expected {kind:?}, found {:?}", self.kind)));
        }
        if self.dims.len() < n_dims || self.blocks.len() < n_blocks {
            return Err(Error::ModelFormat(format!("truncated {kind:?} container")));
        }
        Ok(())
    }

    fn block_len(&self, i: usize, len: usize) -> Result<&[f64]> {
        let b = &self.blocks[i];
        if b.len() != len {
            return Err(Error::ModelFormat(format!("block {i} has length {}, expected {len}", b.len())));
        }
        Ok(b)
    }
}

/// Types persisted in an `SPMD` container.
pub trait ModelFile: Sized {
    fn to_container(&self) -> Container;
    fn from_container(c: &Container) -> Result<Self>;

    fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_container().to_bytes()).map_err(|e| Error::io(path, e))
    }

    fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_container(&Container::from_bytes(&bytes)?)
    }
}

impl ModelFile for PcaModel {
    fn to_container(&self) -> Container {
        let (d, dim) = self.components.shape();
        let components: Vec<f64> = (0..d).flat_map(|r| self.components.row(r).iter().copied().collect::<Vec<_>>()).collect();
        Container {
            kind: ModelKind::Pca,
            dims: vec![dim as u64, d as u64, u64::from(self.whiten)],
            blocks: vec![self.mean.clone(), components, self.eigenvalues.clone()],
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(ModelKind::Pca, 3, 3)?;
        let (dim, d) = (c.dims[0] as usize, c.dims[1] as usize);
        Ok(PcaModel {
            mean: c.block_len(0, dim)?.to_vec(),
            components: DMatrix::from_row_slice(d, dim, c.block_len(1, d * dim)?),
            eigenvalues: c.block_len(2, d)?.to_vec(),
            whiten: c.dims[2] != 0,
        })
    }
}

impl ModelFile for GmmModel {
    fn to_container(&self) -> Container {
        Container {
            kind: ModelKind::Gmm,
            dims: vec![self.k() as u64, self.dim() as u64],
            blocks: vec![self.weights.clone(), self.means.clone(), self.variances.clone()],
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(ModelKind::Gmm, 2, 3)?;
        let (k, d) = (c.dims[0] as usize, c.dims[1] as usize);
        GmmModel::new(
            c.block_len(0, k)?.to_vec(),
            c.block_len(1, k * d)?.to_vec(),
            c.block_len(2, k * d)?.to_vec(),
        )
    }
}

impl ModelFile for LssvmModel {
    fn to_container(&self) -> Container {
        Container {
            kind: ModelKind::Lssvm,
            dims: vec![self.dim() as u64],
            blocks: vec![self.weights.clone(), vec![self.bias, self.gamma]],
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(ModelKind::Lssvm, 1, 2)?;
        let d = c.dims[0] as usize;
        let extra = c.block_len(1, 2)?;
        Ok(LssvmModel {
            weights: c.block_len(0, d)?.to_vec(),
            bias: extra[0],
            gamma: extra[1],
            dual: None,
        })
    }
}

impl ModelFile for Vec<LssvmModel> {
    fn to_container(&self) -> Container {
        let dim = self.first().map_or(0, |m| m.dim());
        Container {
            kind: ModelKind::LssvmSet,
            dims: vec![self.len() as u64, dim as u64],
            blocks: vec![
                self.iter().flat_map(|m| m.weights.iter().copied()).collect(),
                self.iter().map(|m| m.bias).collect(),
                self.iter().map(|m| m.gamma).collect(),
            ],
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(ModelKind::LssvmSet, 2, 3)?;
        let (n, d) = (c.dims[0] as usize, c.dims[1] as usize);
        let w = c.block_len(0, n * d)?;
        let b = c.block_len(1, n)?;
        let g = c.block_len(2, n)?;
        Ok((0..n)
            .map(|i| LssvmModel {
                weights: w[i * d..(i + 1) * d].to_vec(),
                bias: b[i],
                gamma: g[i],
                dual: None,
            })
            .collect())
    }
}

impl ModelFile for SvrModel {
    fn to_container(&self) -> Container {
        Container {
            kind: ModelKind::Svr,
            dims: vec![self.weights.len() as u64],
            blocks: vec![self.weights.clone(), vec![self.lambda]],
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(ModelKind::Svr, 1, 2)?;
        Ok(SvrModel {
            weights: c.block_len(0, c.dims[0] as usize)?.to_vec(),
            lambda: c.block_len(1, 1)?[0],
        })
    }
}

/// Frame-wise Fisher Vectors of every local channel of one video.
impl ModelFile for (u32, Vec<FrameFvs>) {
    fn to_container(&self) -> Container {
        let (n_frames, channels) = self;
        let mut dims = vec![u64::from(*n_frames), channels.len() as u64];
        let mut blocks = Vec::new();
        for ch in channels {
            dims.push(ch.dim as u64);
            blocks.push(ch.frames.iter().map(|&f| f as f64).collect());
            blocks.push(ch.counts.iter().map(|&c| c as f64).collect());
            blocks.push(ch.values.clone());
        }
        Container {
            kind: ModelKind::FrameFvs,
            dims,
            blocks,
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(ModelKind::FrameFvs, 2, 0)?;
        let n_channels = c.dims[1] as usize;
        c.expect(ModelKind::FrameFvs, 2 + n_channels, 3 * n_channels)?;
        let mut channels = Vec::with_capacity(n_channels);
        for i in 0..n_channels {
            let dim = c.dims[2 + i] as usize;
            let frames: Vec<u32> = c.blocks[3 * i].iter().map(|&f| f as u32).collect();
            let n = frames.len();
            let counts = c.block_len(3 * i + 1, n)?.iter().map(|&v| v as usize).collect();
            let values = c.block_len(3 * i + 2, n * dim)?.to_vec();
            channels.push(FrameFvs { dim, frames, values, counts });
        }
        Ok((c.dims[0] as u32, channels))
    }
}

impl ModelFile for DMatrix<f64> {
    fn to_container(&self) -> Container {
        let (r, c) = self.shape();
        Container {
            kind: ModelKind::FeatureMatrix,
            dims: vec![r as u64, c as u64],
            blocks: vec![self.transpose().as_slice().to_vec()],
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(ModelKind::FeatureMatrix, 2, 1)?;
        let (r, cols) = (c.dims[0] as usize, c.dims[1] as usize);
        Ok(DMatrix::from_row_slice(r, cols, c.block_len(0, r * cols)?))
    }
}
