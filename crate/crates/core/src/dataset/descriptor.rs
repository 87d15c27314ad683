use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SPFD";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    /// Sets of local descriptors, each pre-assigned to one frame (trajectory-style).
    Local,
    /// At most one vector per sampled frame (CNN-style).
    Dense,
}

/// Per-frame descriptors of one channel of one video.
///
/// Rows are kept in file order; `frames[i]` is the frame of row `i`, stored in
/// `data[i * dim..(i + 1) * dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatureStream {
    pub kind: ChannelKind,
    pub dim: usize,
    pub frames: Vec<u32>,
    pub data: Vec<f32>,
}

impl FrameFeatureStream {
    pub fn new(kind: ChannelKind, dim: usize) -> Self {
        FrameFeatureStream {
            kind,
            dim,
            frames: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn push(&mut self, frame: u32, row: &[f32]) {
        assert_eq!(row.len(), self.dim, "descriptor dimension");
        self.frames.push(frame);
        self.data.extend_from_slice(row);
    }

    pub fn n_rows(&self) -> usize {
        self.frames.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (u32, &[f32])> {
        self.frames.iter().copied().zip(self.data.chunks_exact(self.dim.max(1)))
    }

    /// Checks frame indices against `[1, n_frames]`, and uniqueness for dense channels.
    pub fn check_frames(&self, n_frames: u32) -> std::result::Result<(), String> {
        if let Some(&f) = self.frames.iter().find(|&&f| f == 0 || f > n_frames) {
            return Err(format!("frame index {f} outside [1, {n_frames}]"));
        }
        if self.kind == ChannelKind::Dense {
            let mut seen = self.frames.clone();
            seen.sort_unstable();
            if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
                return Err(format!("dense channel has two rows for frame {}", w[0]));
            }
        }
        Ok(())
    }
}

/// Reads an `SPFD` file: magic, `u32` version, `u32` dim, `u32` row count, then
/// rows of (`u32` frame index, `dim` x `f32`), all little-endian.
pub fn read_descriptor_file(path: impl AsRef<Path>, kind: ChannelKind) -> Result<FrameFeatureStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_descriptors(BufReader::new(file), kind).map_err(|message| Error::DescriptorFormat {
        path: path.to_path_buf(),
        message,
    })
}

fn read_descriptors(mut r: impl Read, kind: ChannelKind) -> std::result::Result<FrameFeatureStream, String> {
    let io = |e: std::io::Error| e.to_string();
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let dim = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    let n_rows = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    let mut stream = FrameFeatureStream::new(kind, dim);
    stream.frames.reserve(n_rows);
    stream.data.resize(n_rows * dim, 0.0);
    for i in 0..n_rows {
        let frame = r.read_u32::<LittleEndian>().map_err(|e| format!("row {i}: {e}"))?;
        stream.frames.push(frame);
        r.read_f32_into::<LittleEndian>(&mut stream.data[i * dim..(i + 1) * dim])
            .map_err(|e| format!("row {i}: {e}"))?;
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io)? != 0 {
        return Err("trailing bytes after last row".into());
    }
    Ok(stream)
}

pub fn write_descriptor_file(path: impl AsRef<Path>, stream: &FrameFeatureStream) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_descriptors(&mut w, stream)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_descriptors(w: &mut impl Write, stream: &FrameFeatureStream) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(stream.dim as u32)?;
    w.write_u32::<LittleEndian>(stream.n_rows() as u32)?;
    for (frame, row) in stream.rows() {
        w.write_u32::<LittleEndian>(frame)?;
        for &v in row {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}
