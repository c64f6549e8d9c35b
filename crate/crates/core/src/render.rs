//! Lattice rasters, indexed-colour PNG encoding and raw raster dumps.
//!
//! Pixel value 0 is bare substrate and value `k` is species `k`. Orientation
//! is not drawn. The PNG writer is assembled here from a zlib stream so that
//! its output bytes depend only on the raster and the palette.

use std::io::{self, Read, Write};

use flate2::write::ZlibEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::lattice::Lattice;

pub const RAW_MAGIC: &[u8; 8] = b"TKMCRAST";
pub const RAW_HEADER_LEN: usize = 16;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("png encoding failed: {0}")]
    EncodingFailure(String),
    #[error("malformed raw raster: {0}")]
    MalformedRaw(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RenderError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(RenderError::MalformedRaw(format!(
                "{} pixels do not fill {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Raster { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Raster {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn max_index(&self) -> u8 {
        self.pixels.iter().copied().max().unwrap_or(0)
    }

    pub fn nonzero(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }
}

/// One `scale x scale` block per site, coloured by species.
pub fn rasterize(lat: &Lattice, scale: usize) -> Raster {
    let scale = scale.max(1);
    let n = lat.side();
    let w = n * scale;
    let mut pixels = vec![0u8; w * w];
    for tile in lat.tiles() {
        let (r, c) = (tile.pos.row as usize, tile.pos.col as usize);
        for dy in 0..scale {
            let row = (r * scale + dy) * w + c * scale;
            pixels[row..row + scale].fill(tile.species);
        }
    }
    Raster {
        width: w,
        height: w,
        pixels,
    }
}

/// The raster's pixels, row-major, without any header. Input for compression.
pub fn canonical_bytes(raster: &Raster) -> &[u8] {
    &raster.pixels
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Palette {
    colors: Vec<[u8; 3]>,
}

const SPECIES_COLORS: [[u8; 3]; 8] = [
    [236, 196, 32],
    [40, 96, 214],
    [204, 60, 52],
    [52, 160, 84],
    [142, 78, 180],
    [240, 130, 40],
    [40, 170, 180],
    [120, 90, 60],
];

impl Palette {
    pub fn new(colors: Vec<[u8; 3]>) -> Result<Self, RenderError> {
        if colors.is_empty() || colors.len() > 256 {
            return Err(RenderError::EncodingFailure(format!(
                "palette needs 1..=256 entries, got {}",
                colors.len()
            )));
        }
        Ok(Palette { colors })
    }

    /// White substrate, then yellow, blue and further fixed species colours.
    pub fn for_species(species: usize) -> Self {
        let mut colors = vec![[255, 255, 255]];
        for k in 0..species.min(255) {
            let base = SPECIES_COLORS[k % SPECIES_COLORS.len()];
            // darken repeats so large species sets stay distinguishable
            let shade = (k / SPECIES_COLORS.len()) as u8;
            colors.push(base.map(|c| c.saturating_sub(shade.saturating_mul(40))));
        }
        Palette { colors }
    }

    /// Appends a grey separator entry and returns its index.
    pub fn with_separator(mut self) -> (Self, u8) {
        let idx = self.colors.len().min(255);
        if self.colors.len() < 256 {
            self.colors.push([128, 128, 128]);
        }
        (self, idx as u8)
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }
}

fn write_chunk(out: &mut Vec<u8>, kind: &[u8; 4], data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    out.extend_from_slice(kind);
    out.extend_from_slice(data);
    let mut crc = crc32fast::Hasher::new();
    crc.update(kind);
    crc.update(data);
    out.extend_from_slice(&crc.finalize().to_be_bytes());
}

/// Indexed-colour PNG: bit depth 8, no interlace, filter type 0 on every
/// scanline, one IDAT chunk compressed at the maximum zlib level.
pub fn encode_png(raster: &Raster, palette: &Palette) -> Result<Vec<u8>, RenderError> {
    if raster.max_index() as usize >= palette.len() {
        return Err(RenderError::EncodingFailure(format!(
            "pixel index {} outside a palette of {}",
            raster.max_index(),
            palette.len()
        )));
    }
    let (w, h) = (raster.width, raster.height);
    if w > u32::MAX as usize || h > u32::MAX as usize {
        return Err(RenderError::EncodingFailure("raster too large".into()));
    }
    let mut ihdr = Vec::with_capacity(13);
    ihdr.extend_from_slice(&(w as u32).to_be_bytes());
    ihdr.extend_from_slice(&(h as u32).to_be_bytes());
    ihdr.extend_from_slice(&[8, 3, 0, 0, 0]);

    let plte: Vec<u8> = palette.colors.iter().flatten().copied().collect();

    let mut scanlines = Vec::with_capacity((w + 1) * h);
    for row in raster.pixels.chunks_exact(w) {
        scanlines.push(0);
        scanlines.extend_from_slice(row);
    }
    let mut enc = ZlibEncoder::new(Vec::with_capacity(scanlines.len() / 4 + 64), Compression::best());
    enc.write_all(&scanlines).map_err(|e| RenderError::EncodingFailure(e.to_string()))?;
    let idat = enc.finish().map_err(|e| RenderError::EncodingFailure(e.to_string()))?;

    let mut out = Vec::with_capacity(idat.len() + plte.len() + 64);
    out.extend_from_slice(&PNG_SIGNATURE);
    write_chunk(&mut out, b"IHDR", &ihdr);
    write_chunk(&mut out, b"PLTE", &plte);
    write_chunk(&mut out, b"IDAT", &idat);
    write_chunk(&mut out, b"IEND", &[]);
    Ok(out)
}

/// Raw dump: `TKMCRAST`, width and height as little-endian u32, then pixels.
pub fn write_raw(raster: &Raster, mut out: impl Write) -> io::Result<()> {
    out.write_all(RAW_MAGIC)?;
    out.write_all(&(raster.width as u32).to_le_bytes())?;
    out.write_all(&(raster.height as u32).to_le_bytes())?;
    out.write_all(&raster.pixels)
}

pub fn read_raw(mut input: impl Read) -> Result<Raster, RenderError> {
    let mut header = [0u8; RAW_HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|e| RenderError::MalformedRaw(format!("short header: {e}")))?;
    if &header[..8] != RAW_MAGIC {
        return Err(RenderError::MalformedRaw("bad magic".into()));
    }
    let w = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut pixels = Vec::with_capacity(w * h);
    input.read_to_end(&mut pixels)?;
    Raster::new(w, h, pixels)
}

/// Tiles `rasters` left to right, top to bottom, separated by `gap` pixels of
/// `separator`. Cells are sized to the largest raster.
pub fn contact_sheet(rasters: &[Raster], columns: usize, gap: usize, separator: u8) -> Raster {
    let columns = columns.max(1);
    if rasters.is_empty() {
        return Raster::filled(1, 1, separator);
    }
    let cw = rasters.iter().map(Raster::width).max().unwrap();
    let ch = rasters.iter().map(Raster::height).max().unwrap();
    let cols = columns.min(rasters.len());
    let rows = rasters.len().div_ceil(cols);
    let width = cols * cw + (cols + 1) * gap;
    let height = rows * ch + (rows + 1) * gap;
    let mut sheet = Raster::filled(width, height, separator);
    for (i, r) in rasters.iter().enumerate() {
        let x0 = gap + (i % cols) * (cw + gap);
        let y0 = gap + (i / cols) * (ch + gap);
        for y in 0..ch {
            let dst = (y0 + y) * width + x0;
            if y < r.height {
                sheet.pixels[dst..dst + r.width].copy_from_slice(&r.pixels[y * r.width..(y + 1) * r.width]);
                sheet.pixels[dst + r.width..dst + cw].fill(0);
            } else {
                sheet.pixels[dst..dst + cw].fill(0);
            }
        }
    }
    sheet
}
