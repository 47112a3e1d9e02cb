//! Voxel grids and their little-endian binary file formats.
//!
//! Voxels are stored x-fastest: index = x + H·(y + W·z) for dims (H, W, D).
//!
//! ```text
//! RVOL: "RVOL" | version u32 = 1 | H W D u32 | sx sy sz f32 | H·W·D f32
//! RMSK: "RMSK" | version u32 = 1 | H W D u32 | sx sy sz f32 | H·W·D u8
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

pub const VOLUME_MAGIC: &[u8; 4] = b"RVOL";
pub const MASK_MAGIC: &[u8; 4] = b"RMSK";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload: header declares {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("dimension {0} is not positive")]
    NonPositiveDim(usize),
    #[error("spacing must be finite and positive, got {0:?}")]
    BadSpacing([f32; 3]),
    #[error("voxel count {actual} does not match dims {dims:?}")]
    VoxelCount { dims: [usize; 3], actual: usize },
    #[error("non-finite intensity at voxel {0}")]
    NonFinite(usize),
    #[error("mask voxel {index} has value {value}, expected 0 or 1")]
    BadMaskValue { index: usize, value: u8 },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimMismatch { left: [usize; 3], right: [usize; 3] },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = VolumeError> = std::result::Result<T, E>;

/// Grid geometry shared by volumes, masks and probability maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dims: [usize; 3],
    spacing: [f32; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f32; 3]) -> Result<Self> {
        for (axis, &d) in dims.iter().enumerate() {
            if d == 0 {
                return Err(VolumeError::NonPositiveDim(axis));
            }
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(VolumeError::NonPositiveDim(usize::MAX));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(VolumeError::BadSpacing(spacing));
        }
        Ok(Grid { dims, spacing })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn spacing_f64(&self) -> [f64; 3] {
        self.spacing.map(f64::from)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        let s = self.spacing_f64();
        s[0] * s[1] * s[2]
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn contains(&self, p: [i64; 3]) -> bool {
        (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < self.dims[a])
    }

    /// Voxel-center position in mm (voxel i sits at i·spacing).
    pub fn position_mm(&self, c: [usize; 3]) -> [f64; 3] {
        let s = self.spacing_f64();
        [c[0] as f64 * s[0], c[1] as f64 * s[1], c[2] as f64 * s[2]]
    }

    /// Linear index of `p + offset` when it stays inside the grid.
    pub fn offset(&self, c: [usize; 3], offset: [i64; 3]) -> Option<usize> {
        let p = [
            c[0] as i64 + offset[0],
            c[1] as i64 + offset[1],
            c[2] as i64 + offset[2],
        ];
        self.contains(p)
            .then(|| self.index(p[0] as usize, p[1] as usize, p[2] as usize))
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self.dims != other.dims {
            return Err(VolumeError::DimMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        Ok(())
    }
}

/// A scalar intensity volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: Grid,
    voxels: Vec<f32>,
}

impl Volume {
    pub fn new(dims: [usize; 3], spacing: [f32; 3], voxels: Vec<f32>) -> Result<Self> {
        let grid = Grid::new(dims, spacing)?;
        if voxels.len() != grid.len() {
            return Err(VolumeError::VoxelCount {
                dims,
                actual: voxels.len(),
            });
        }
        if let Some(i) = voxels.iter().position(|v| !v.is_finite()) {
            return Err(VolumeError::NonFinite(i));
        }
        Ok(Volume { grid, voxels })
    }

    pub fn filled(dims: [usize; 3], spacing: [f32; 3], value: f32) -> Result<Self> {
        let grid = Grid::new(dims, spacing)?;
        Volume::new(dims, spacing, vec![value; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.grid.spacing
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.voxels[self.grid.index(x, y, z)]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.voxels.len());
        write_header(&mut out, VOLUME_MAGIC, &self.grid);
        for v in &self.voxels {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let grid = read_header(bytes, VOLUME_MAGIC)?;
        let payload = &bytes[HEADER_LEN..];
        let expected = grid.len() * 4;
        if payload.len() != expected {
            return Err(VolumeError::TruncatedPayload {
                expected,
                actual: payload.len(),
            });
        }
        let voxels = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Volume::new(grid.dims, grid.spacing, voxels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Volume::from_bytes(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }
}

/// Decode an RVOL byte stream.
pub fn load_volume(bytes: &[u8]) -> Result<Volume> {
    Volume::from_bytes(bytes)
}

/// Encode a volume as an RVOL byte stream.
pub fn save_volume(v: &Volume) -> Vec<u8> {
    v.to_bytes()
}

/// A binary voxel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: Grid,
    voxels: Vec<u8>,
}

impl Mask {
    pub fn new(dims: [usize; 3], spacing: [f32; 3], voxels: Vec<u8>) -> Result<Self> {
        let grid = Grid::new(dims, spacing)?;
        if voxels.len() != grid.len() {
            return Err(VolumeError::VoxelCount {
                dims,
                actual: voxels.len(),
            });
        }
        if let Some(index) = voxels.iter().position(|&v| v > 1) {
            return Err(VolumeError::BadMaskValue {
                index,
                value: voxels[index],
            });
        }
        Ok(Mask { grid, voxels })
    }

    pub fn empty_like(grid: &Grid) -> Self {
        Mask {
            grid: *grid,
            voxels: vec![0; grid.len()],
        }
    }

    /// Build a mask for `volume`; fails when the voxel count does not match it.
    pub fn for_volume(volume: &Volume, voxels: Vec<u8>) -> Result<Self> {
        Mask::new(volume.dims(), volume.spacing(), voxels)
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let voxels = (0..grid.len()).map(|i| f(grid.coords(i)) as u8).collect();
        Mask {
            grid: *grid,
            voxels,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.grid.spacing
    }

    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    pub fn is_set(&self, index: usize) -> bool {
        self.voxels[index] != 0
    }

    pub fn set(&mut self, index: usize, on: bool) {
        self.voxels[index] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_blank(&self) -> bool {
        self.voxels.iter().all(|&v| v == 0)
    }

    /// Indices of foreground voxels in ascending order.
    pub fn foreground(&self) -> impl Iterator<Item = usize> + '_ {
        self.voxels
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| i)
    }

    /// Errors unless this mask has the same dims as `volume`.
    pub fn check_matches(&self, volume: &Volume) -> Result<()> {
        self.grid.check_same(&volume.grid)
    }

    pub fn check_same_dims(&self, other: &Mask) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.check_same_dims(other)?;
        let voxels = self
            .voxels
            .iter()
            .zip(&other.voxels)
            .map(|(a, b)| a | b)
            .collect();
        Ok(Mask {
            grid: self.grid,
            voxels,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.voxels.len());
        write_header(&mut out, MASK_MAGIC, &self.grid);
        out.extend_from_slice(&self.voxels);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let grid = read_header(bytes, MASK_MAGIC)?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != grid.len() {
            return Err(VolumeError::TruncatedPayload {
                expected: grid.len(),
                actual: payload.len(),
            });
        }
        Mask::new(grid.dims, grid.spacing, payload.to_vec())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Mask::from_bytes(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }
}

/// Voxel-wise foreground probabilities, clamped to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    grid: Grid,
    values: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(grid: Grid, values: Vec<f32>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(VolumeError::VoxelCount {
                dims: grid.dims,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(VolumeError::NonFinite(i));
        }
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(ProbabilityMap { grid, values })
    }

    pub fn from_mask(mask: &Mask) -> Self {
        ProbabilityMap {
            grid: mask.grid,
            values: mask.voxels.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Foreground where probability ≥ `threshold`.
    pub fn binarize(&self, threshold: f32) -> Mask {
        Mask {
            grid: self.grid,
            voxels: self.values.iter().map(|&p| (p >= threshold) as u8).collect(),
        }
    }
}

fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], grid: &Grid) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for d in grid.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in grid.spacing {
        out.extend_from_slice(&s.to_le_bytes());
    }
}

fn read_header(bytes: &[u8], magic: &[u8; 4]) -> Result<Grid> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        let found = bytes.get(..4.min(bytes.len())).unwrap_or_default();
        return Err(VolumeError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(found).into_owned(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(VolumeError::TruncatedPayload {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let version = u32::from_le_bytes(word(4));
    if version != FORMAT_VERSION {
        return Err(VolumeError::UnsupportedVersion(version));
    }
    let dims = [8, 12, 16].map(|o| u32::from_le_bytes(word(o)) as usize);
    let spacing = [20, 24, 28].map(|o| f32::from_le_bytes(word(o)));
    Grid::new(dims, spacing)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| VolumeError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| VolumeError::Io {
        path: path.display().to_string(),
        source,
    })
}
