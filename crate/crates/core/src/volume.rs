//! Volume and mask storage: a plain-text header next to a little-endian raw
//! payload, bit-exact on round trips.
//!
//! Header (UTF-8, five lines, exactly this order):
//!
//! ```text
//! dims=nx ny nz
//! spacing=dx dy dz
//! type=int16|uint8
//! order=little
//! raw=<filename>
//! ```
//!
//! The raw file lives next to the header and holds `nx*ny*nz` elements,
//! x-fastest, then y, then z. Volumes are `int16` Hounsfield units; masks are
//! `uint8` label codes.

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::IntensitySlice;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Physical size of one voxel in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VoxelSpacing {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl VoxelSpacing {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        for (name, v) in [("dx", dx), ("dy", dy), ("dz", dz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Param(format!(
                    "spacing {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { dx, dy, dz })
    }

    /// Volume of one voxel in cubic millimeters.
    pub fn voxel_mm3(&self) -> f64 {
        self.dx * self.dy * self.dz
    }
}

/// Voxel label codes used by [`MaskGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[repr(u8)]
pub enum MaskLabel {
    Background = 0,
    Sat = 1,
    Vat = 2,
    /// Fat detected but not yet split into SAT/VAT (stage dumps).
    FatUndivided = 3,
}

impl MaskLabel {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(MaskLabel::Background),
            1 => Ok(MaskLabel::Sat),
            2 => Ok(MaskLabel::Vat),
            3 => Ok(MaskLabel::FatUndivided),
            other => Err(Error::Format(format!("unknown mask label code {other}"))),
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

/// A 3D grid of signed Hounsfield intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    dims: (usize, usize, usize),
    spacing: VoxelSpacing,
    data: Vec<i16>,
}

impl VolumeGrid {
    pub fn new(dims: (usize, usize, usize), spacing: VoxelSpacing, data: Vec<i16>) -> Result<Self> {
        check_dims(dims)?;
        let expect = dims.0 * dims.1 * dims.2;
        if data.len() != expect {
            return Err(Error::Format(format!(
                "volume data length {} does not match dims {:?} ({expect})",
                data.len(),
                dims
            )));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> VoxelSpacing {
        self.spacing
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    /// Copy of the z-th xy-plane.
    pub fn extract_slice(&self, z: usize) -> Result<IntensitySlice> {
        let (nx, ny, nz) = self.dims;
        if z >= nz {
            return Err(Error::Param(format!("slice index {z} out of range 0..{nz}")));
        }
        let plane = nx * ny;
        Ok(Grid2::from_vec(
            nx,
            ny,
            self.data[z * plane..(z + 1) * plane].to_vec(),
        ))
    }
}

/// A 3D grid of [`MaskLabel`] values matching a source volume's geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    dims: (usize, usize, usize),
    spacing: VoxelSpacing,
    data: Vec<MaskLabel>,
}

impl MaskGrid {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: VoxelSpacing,
        data: Vec<MaskLabel>,
    ) -> Result<Self> {
        check_dims(dims)?;
        let expect = dims.0 * dims.1 * dims.2;
        if data.len() != expect {
            return Err(Error::Format(format!(
                "mask data length {} does not match dims {:?} ({expect})",
                data.len(),
                dims
            )));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn background(dims: (usize, usize, usize), spacing: VoxelSpacing) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims,
            spacing,
            data: vec![MaskLabel::Background; dims.0 * dims.1 * dims.2],
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> VoxelSpacing {
        self.spacing
    }

    pub fn data(&self) -> &[MaskLabel] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [MaskLabel] {
        &mut self.data
    }

    pub fn count(&self, label: MaskLabel) -> usize {
        self.data.iter().filter(|&&l| l == label).count()
    }

    /// Write one slice's labels into the grid.
    pub fn set_slice(&mut self, z: usize, labels: &Grid2<MaskLabel>) -> Result<()> {
        let (nx, ny, nz) = self.dims;
        if z >= nz {
            return Err(Error::Param(format!("slice index {z} out of range 0..{nz}")));
        }
        if labels.width() != nx || labels.height() != ny {
            return Err(Error::Misaligned("slice dims do not match mask".into()));
        }
        let plane = nx * ny;
        self.data[z * plane..(z + 1) * plane].copy_from_slice(labels.data());
        Ok(())
    }

    pub fn extract_slice(&self, z: usize) -> Result<Grid2<MaskLabel>> {
        let (nx, ny, nz) = self.dims;
        if z >= nz {
            return Err(Error::Param(format!("slice index {z} out of range 0..{nz}")));
        }
        let plane = nx * ny;
        Ok(Grid2::from_vec(
            nx,
            ny,
            self.data[z * plane..(z + 1) * plane].to_vec(),
        ))
    }
}

fn check_dims(dims: (usize, usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(Error::Param(format!("dims must be positive, got {dims:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ElemType {
    Int16,
    Uint8,
}

impl ElemType {
    fn name(self) -> &'static str {
        match self {
            ElemType::Int16 => "int16",
            ElemType::Uint8 => "uint8",
        }
    }

    fn size(self) -> usize {
        match self {
            ElemType::Int16 => 2,
            ElemType::Uint8 => 1,
        }
    }
}

struct Header {
    dims: (usize, usize, usize),
    spacing: VoxelSpacing,
    elem: ElemType,
    raw_name: String,
}

fn raw_path_for(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

fn raw_file_name(header_path: &Path) -> Result<String> {
    raw_path_for(header_path)
        .file_name()
        .and_then(|n| n.to_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Format(format!("cannot derive raw name from {header_path:?}")))
}

fn write_pair(header_path: &Path, header: &Header, payload: &[u8]) -> Result<()> {
    let mut text = String::new();
    let (nx, ny, nz) = header.dims;
    let s = header.spacing;
    writeln!(text, "dims={nx} {ny} {nz}").unwrap();
    writeln!(text, "spacing={} {} {}", s.dx, s.dy, s.dz).unwrap();
    writeln!(text, "type={}", header.elem.name()).unwrap();
    writeln!(text, "order=little").unwrap();
    writeln!(text, "raw={}", header.raw_name).unwrap();
    fs::write(header_path, text).map_err(|e| Error::io(header_path.display().to_string(), e))?;
    let raw_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.raw_name);
    fs::write(&raw_path, payload).map_err(|e| Error::io(raw_path.display().to_string(), e))
}

fn parse_header(header_path: &Path) -> Result<Header> {
    let text = fs::read_to_string(header_path)
        .map_err(|e| Error::io(header_path.display().to_string(), e))?;
    let mut lines = text.lines();
    let mut field = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing header line '{key}='")))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header line {line:?}")))?;
        if k != key {
            return Err(Error::Format(format!("expected key '{key}', found '{k}'")));
        }
        Ok(v.trim().to_string())
    };

    let dims_v = field("dims")?;
    let spacing_v = field("spacing")?;
    let type_v = field("type")?;
    let order_v = field("order")?;
    let raw_v = field("raw")?;

    let dims_parts: Vec<usize> = dims_v
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| bad_num("dims", t)))
        .collect::<Result<_>>()?;
    if dims_parts.len() != 3 {
        return Err(Error::Format(format!("dims needs 3 values, got {dims_v:?}")));
    }
    let dims = (dims_parts[0], dims_parts[1], dims_parts[2]);
    check_dims(dims)?;

    let sp: Vec<f64> = spacing_v
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad_num("spacing", t)))
        .collect::<Result<_>>()?;
    if sp.len() != 3 {
        return Err(Error::Format(format!(
            "spacing needs 3 values, got {spacing_v:?}"
        )));
    }
    let spacing = VoxelSpacing::new(sp[0], sp[1], sp[2])?;

    let elem = match type_v.as_str() {
        "int16" => ElemType::Int16,
        "uint8" => ElemType::Uint8,
        other => return Err(Error::Format(format!("unsupported element type {other:?}"))),
    };

    if order_v != "little" {
        return Err(Error::Format(format!("unsupported byte order {order_v:?}")));
    }
    if raw_v.is_empty() || raw_v.contains('/') || raw_v.contains('\\') {
        return Err(Error::Format(format!("raw name must be a bare file name, got {raw_v:?}")));
    }

    Ok(Header {
        dims,
        spacing,
        elem,
        raw_name: raw_v,
    })
}

fn bad_num(key: &str, tok: &str) -> Error {
    Error::Format(format!("cannot parse {key} value {tok:?}"))
}

fn read_payload(header_path: &Path, header: &Header) -> Result<Vec<u8>> {
    let raw_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.raw_name);
    let payload =
        fs::read(&raw_path).map_err(|e| Error::io(raw_path.display().to_string(), e))?;
    let expect = header.dims.0 * header.dims.1 * header.dims.2 * header.elem.size();
    if payload.len() != expect {
        return Err(Error::Format(format!(
            "payload size {} does not match header ({} bytes expected)",
            payload.len(),
            expect
        )));
    }
    Ok(payload)
}

/// Load a volume from its header path.
pub fn load_volume(path: impl AsRef<Path>) -> Result<VolumeGrid> {
    let path = path.as_ref();
    let header = parse_header(path)?;
    if header.elem != ElemType::Int16 {
        return Err(Error::Format(format!(
            "volume must be int16, header says {}",
            header.elem.name()
        )));
    }
    let payload = read_payload(path, &header)?;
    let data: Vec<i16> = payload
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    VolumeGrid::new(header.dims, header.spacing, data)
}

/// Write a volume as a header + raw pair; the raw sits next to the header.
pub fn save_volume(vol: &VolumeGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let payload: Vec<u8> = vol.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_pair(
        path,
        &Header {
            dims: vol.dims,
            spacing: vol.spacing,
            elem: ElemType::Int16,
            raw_name: raw_file_name(path)?,
        },
        &payload,
    )
}

/// Load a label mask from its header path.
pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskGrid> {
    let path = path.as_ref();
    let header = parse_header(path)?;
    if header.elem != ElemType::Uint8 {
        return Err(Error::Format(format!(
            "mask must be uint8, header says {}",
            header.elem.name()
        )));
    }
    let payload = read_payload(path, &header)?;
    let data: Vec<MaskLabel> = payload
        .iter()
        .map(|&b| MaskLabel::from_code(b))
        .collect::<Result<_>>()?;
    MaskGrid::new(header.dims, header.spacing, data)
}

/// Write a mask as a header + raw pair; round trips are bit-exact.
pub fn save_mask(mask: &MaskGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let payload: Vec<u8> = mask.data.iter().map(|l| l.code()).collect();
    write_pair(
        path,
        &Header {
            dims: mask.dims,
            spacing: mask.spacing,
            elem: ElemType::Uint8,
            raw_name: raw_file_name(path)?,
        },
        &payload,
    )
}
