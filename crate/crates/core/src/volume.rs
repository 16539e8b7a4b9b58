//! Intensity and label grids, slicing, and the VXF/PGM file formats.
//!
//! All grids use one linear layout, x fastest: `i = x + nx * (y + ny * z)`.
//! Every other module goes through [`Dims`] for index arithmetic.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VXF1";
const DTYPE_INTENSITY: u8 = 1;
const DTYPE_LABEL: u8 = 2;

/// Grid extent in voxels along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::validation(format!(
                "dims must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        Ok(Dims { nx, ny, nz })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let x = i % self.nx;
        let rest = i / self.nx;
        (x, rest % self.ny, rest / self.ny)
    }

    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::Z => self.nz,
        }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn min_extent(&self) -> usize {
        self.nx.min(self.ny).min(self.nz)
    }

    /// Dims of the plane obtained by slicing along `axis`.
    pub fn sliced(&self, axis: Axis) -> Dims {
        match axis {
            Axis::X => Dims { nx: 1, ..*self },
            Axis::Y => Dims { ny: 1, ..*self },
            Axis::Z => Dims { nz: 1, ..*self },
        }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

impl FromStr for Dims {
    type Err = Error;

    /// Parses `nx,ny,nz` (also accepts `x` as separator).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split([',', 'x']).map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::validation(format!(
                "bad dims '{s}', expected nx,ny,nz"
            )));
        }
        let mut v = [0usize; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::validation(format!("bad dims '{s}'")))?;
        }
        Dims::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn name(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// One plane of a volume: `axis` plus the index along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SliceRef {
    pub axis: Axis,
    pub index: usize,
}

impl SliceRef {
    pub fn new(axis: Axis, index: usize) -> Self {
        SliceRef { axis, index }
    }

    pub fn z(index: usize) -> Self {
        SliceRef::new(Axis::Z, index)
    }

    pub fn check(&self, dims: Dims) -> Result<()> {
        let extent = dims.extent(self.axis);
        if self.index >= extent {
            return Err(Error::Bounds {
                axis: self.axis.name(),
                index: self.index,
                extent,
            });
        }
        Ok(())
    }

    /// Linear indices (in the source grid) of the plane, in the order the
    /// sliced grid stores them.
    pub fn plane_indices(&self, dims: Dims) -> Vec<usize> {
        let out = dims.sliced(self.axis);
        (0..out.len())
            .map(|j| {
                let (a, b, c) = out.coords(j);
                match self.axis {
                    Axis::X => dims.index(self.index, b, c),
                    Axis::Y => dims.index(a, self.index, c),
                    Axis::Z => dims.index(a, b, self.index),
                }
            })
            .collect()
    }
}

impl fmt::Display for SliceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.axis.name(), self.index)
    }
}

impl FromStr for SliceRef {
    type Err = Error;

    /// Parses `axis:index`, e.g. `z:60`.
    fn from_str(s: &str) -> Result<Self> {
        let (axis, index) = s
            .split_once(':')
            .ok_or_else(|| Error::validation(format!("bad slice '{s}', expected axis:index")))?;
        let axis = match axis.trim().to_ascii_lowercase().as_str() {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            other => return Err(Error::validation(format!("unknown axis '{other}'"))),
        };
        let index = index
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("bad slice index in '{s}'")))?;
        Ok(SliceRef { axis, index })
    }
}

/// Scalar intensity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims,
    data: Vec<f32>,
    intensity_max: f32,
}

impl Volume {
    pub fn new(dims: Dims, data: Vec<f32>, intensity_max: f32) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::validation(format!(
                "data length {} does not match dims {dims}",
                data.len()
            )));
        }
        if !(intensity_max.is_finite() && intensity_max > 0.0) {
            return Err(Error::validation(format!(
                "intensity_max must be finite and positive, got {intensity_max}"
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(format!(
                    "voxel {i} has invalid intensity {v}"
                )));
            }
            if v > intensity_max {
                return Err(Error::validation(format!(
                    "voxel {i} intensity {v} exceeds intensity_max {intensity_max}"
                )));
            }
        }
        Ok(Volume {
            dims,
            data,
            intensity_max,
        })
    }

    pub fn from_fn(
        dims: Dims,
        intensity_max: f32,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let data = (0..dims.len())
            .map(|i| {
                let (x, y, z) = dims.coords(i);
                f(x, y, z)
            })
            .collect();
        Volume::new(dims, data, intensity_max)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn intensity_max(&self) -> f32 {
        self.intensity_max
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.dims.index(x, y, z)]
    }

    /// Intensities widened to f64, in storage order.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_planar(&self) -> bool {
        let [a, b, c] = self.dims.as_array();
        a == 1 || b == 1 || c == 1
    }
}

/// Per-voxel cluster index grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    dims: Dims,
    labels: Vec<u8>,
}

impl LabelVolume {
    pub fn new(dims: Dims, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != dims.len() {
            return Err(Error::validation(format!(
                "label length {} does not match dims {dims}",
                labels.len()
            )));
        }
        Ok(LabelVolume { dims, labels })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.labels[self.dims.index(x, y, z)]
    }

    /// Number of distinct label values, i.e. `max + 1`.
    pub fn num_labels(&self) -> usize {
        self.labels
            .iter()
            .copied()
            .max()
            .map_or(0, |m| m as usize + 1)
    }

    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; 256];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h.truncate(self.num_labels());
        h
    }

    pub fn extract_slice(&self, s: SliceRef) -> Result<LabelVolume> {
        s.check(self.dims)?;
        let labels = s
            .plane_indices(self.dims)
            .into_iter()
            .map(|i| self.labels[i])
            .collect();
        LabelVolume::new(self.dims.sliced(s.axis), labels)
    }

    /// Checks every label against a cluster count.
    pub fn check_labels(&self, clusters: usize) -> Result<()> {
        if let Some(&bad) = self.labels.iter().find(|&&l| l as usize >= clusters) {
            return Err(Error::validation(format!(
                "label {bad} out of range for {clusters} clusters"
            )));
        }
        Ok(())
    }
}

pub fn extract_slice(v: &Volume, s: SliceRef) -> Result<Volume> {
    s.check(v.dims)?;
    let data = s
        .plane_indices(v.dims)
        .into_iter()
        .map(|i| v.data[i])
        .collect();
    Ok(Volume {
        dims: v.dims.sliced(s.axis),
        data,
        intensity_max: v.intensity_max,
    })
}

fn encode_header(dtype: u8, dims: Dims) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(32);
    buf.extend_from_slice(MAGIC);
    buf.push(dtype);
    for d in dims.as_array() {
        let d = u32::try_from(d)
            .map_err(|_| Error::validation(format!("dimension {d} exceeds u32")))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    Ok(buf)
}

pub fn encode_volume(v: &Volume) -> Result<Vec<u8>> {
    let mut buf = encode_header(DTYPE_INTENSITY, v.dims)?;
    buf.reserve(4 + 4 * v.data.len());
    buf.extend_from_slice(&v.intensity_max.to_le_bytes());
    for x in &v.data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    Ok(buf)
}

pub fn encode_labels(l: &LabelVolume) -> Result<Vec<u8>> {
    let mut buf = encode_header(DTYPE_LABEL, l.dims)?;
    buf.extend_from_slice(&l.labels);
    Ok(buf)
}

struct Header {
    dtype: u8,
    dims: Dims,
    body: usize,
}

fn decode_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 17 {
        return Err(Error::Format("file shorter than VXF header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"VXF1\"",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let dtype = bytes[4];
    let mut d = [0usize; 3];
    for (k, slot) in d.iter_mut().enumerate() {
        let off = 5 + 4 * k;
        let raw = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        *slot = raw as usize;
    }
    let dims = Dims::new(d[0], d[1], d[2]).map_err(|e| Error::Format(e.to_string()))?;
    match dtype {
        DTYPE_INTENSITY | DTYPE_LABEL => Ok(Header {
            dtype,
            dims,
            body: 17,
        }),
        other => Err(Error::Format(format!("unknown dtype code {other}"))),
    }
}

fn truncated(need: usize, have: usize) -> Error {
    Error::Io(io::Error::new(
        io::ErrorKind::UnexpectedEof,
        format!("truncated VXF payload: need {need} bytes, have {have}"),
    ))
}

pub fn decode_volume(bytes: &[u8]) -> Result<Volume> {
    let h = decode_header(bytes)?;
    if h.dtype != DTYPE_INTENSITY {
        return Err(Error::Format(
            "expected an intensity volume (dtype 1)".into(),
        ));
    }
    if bytes.len() < h.body + 4 {
        return Err(Error::Format("missing intensity_max in header".into()));
    }
    let intensity_max = f32::from_le_bytes(bytes[h.body..h.body + 4].try_into().unwrap());
    let payload = &bytes[h.body + 4..];
    let need = 4 * h.dims.len();
    if payload.len() < need {
        return Err(truncated(need, payload.len()));
    }
    if payload.len() > need {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            payload.len() - need
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Volume::new(h.dims, data, intensity_max)
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelVolume> {
    let h = decode_header(bytes)?;
    if h.dtype != DTYPE_LABEL {
        return Err(Error::Format("expected a label volume (dtype 2)".into()));
    }
    let payload = &bytes[h.body..];
    let need = h.dims.len();
    if payload.len() < need {
        return Err(truncated(need, payload.len()));
    }
    if payload.len() > need {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            payload.len() - need
        )));
    }
    LabelVolume::new(h.dims, payload.to_vec())
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    decode_volume(&fs::read(path)?)
}

pub fn save_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_volume(v)?)?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    decode_labels(&fs::read(path)?)
}

pub fn save_labels(l: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_labels(l)?)?;
    Ok(())
}

fn plane_shape(dims: Dims) -> Result<(usize, usize)> {
    match dims.as_array() {
        [w, h, 1] => Ok((w, h)),
        [w, 1, h] => Ok((w, h)),
        [1, w, h] => Ok((w, h)),
        _ => Err(Error::validation(format!(
            "PGM export needs a planar grid, got {dims}"
        ))),
    }
}

/// Binary PGM (P5, maxval 255). Values are scaled by `255 / scale_max` and
/// rounded half-up.
pub fn write_pgm<W: Write>(mut out: W, dims: Dims, values: &[f32], scale_max: f32) -> Result<()> {
    let (w, h) = plane_shape(dims)?;
    write!(out, "P5\n{w} {h}\n255\n")?;
    let scale = 255.0 / f64::from(scale_max);
    let bytes: Vec<u8> = values
        .iter()
        .map(|&v| (f64::from(v) * scale + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}

pub fn save_pgm(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_pgm(&mut buf, v.dims, &v.data, v.intensity_max)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Renders labels so that label `clusters - 1` maps to 255.
pub fn save_labels_pgm(l: &LabelVolume, clusters: usize, path: impl AsRef<Path>) -> Result<()> {
    let values: Vec<f32> = l.labels.iter().map(|&x| f32::from(x)).collect();
    let top = clusters.saturating_sub(1).max(1) as f32;
    let mut buf = Vec::new();
    write_pgm(&mut buf, l.dims, &values, top)?;
    fs::write(path, buf)?;
    Ok(())
}
