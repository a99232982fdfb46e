use std::fs::File;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use super::DigitizeError;
use crate::corpus::GraphMetadata;

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const MIN_SIDE: u32 = 64;

/// An RGB raster, row-major, origin at the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
    pub provenance: Option<GraphMetadata>,
}

impl PlotImage {
    /// A white canvas.
    pub fn blank(width: u32, height: u32) -> Result<Self, DigitizeError> {
        Self::from_pixels(width, height, vec![WHITE; width as usize * height as usize])
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self, DigitizeError> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(DigitizeError::InvalidImage(format!("{width}x{height} is smaller than {MIN_SIDE}x{MIN_SIDE}")));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(DigitizeError::InvalidImage(format!("{} pixels for a {width}x{height} image", pixels.len())));
        }
        Ok(Self { width, height, pixels, provenance: None })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: Rgb) {
        let i = self.index(x, y);
        self.pixels[i] = rgb;
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, DigitizeError> {
        let bad = |e: png::DecodingError| DigitizeError::InvalidImage(e.to_string());
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(bad)?;
        let mut buf =
            vec![0; reader.output_buffer_size().ok_or_else(|| DigitizeError::InvalidImage("image too large".into()))?];
        let info = reader.next_frame(&mut buf).map_err(bad)?;
        let data = &buf[..info.buffer_size()];
        let pixels: Vec<Rgb> = match info.color_type {
            png::ColorType::Rgb => data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            // composite over white
            png::ColorType::Rgba => data
                .chunks_exact(4)
                .map(|c| {
                    let a = c[3] as u32;
                    let f = |v: u8| ((v as u32 * a + 255 * (255 - a) + 127) / 255) as u8;
                    [f(c[0]), f(c[1]), f(c[2])]
                })
                .collect(),
            png::ColorType::Grayscale => data.iter().map(|&g| [g, g, g]).collect(),
            png::ColorType::GrayscaleAlpha => data
                .chunks_exact(2)
                .map(|c| {
                    let a = c[1] as u32;
                    let g = ((c[0] as u32 * a + 255 * (255 - a) + 127) / 255) as u8;
                    [g, g, g]
                })
                .collect(),
            png::ColorType::Indexed => unreachable!("expanded by the decoder"),
        };
        Self::from_pixels(info.width, info.height, pixels)
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header().expect("in-memory png header");
            let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
            writer.write_image_data(&flat).expect("in-memory png data");
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, DigitizeError> {
        let bytes = std::fs::read(path).map_err(|e| DigitizeError::Io(format!("{}: {e}", path.display())))?;
        Self::decode_png(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), DigitizeError> {
        let io = |e: std::io::Error| DigitizeError::Io(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        std::io::Write::write_all(&mut w, &self.encode_png()).map_err(io)
    }

    /// Copy of this image placed at (`dx`, `dy`) on a larger white canvas.
    pub fn translated(&self, dx: u32, dy: u32) -> Self {
        let mut out = Self::blank(self.width + dx, self.height + dy).expect("larger than the source");
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(x + dx, y + dy, self.get(x, y));
            }
        }
        out.provenance = self.provenance.clone();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let mut img = PlotImage::blank(64, 70).unwrap();
        img.set(3, 5, [10, 20, 30]);
        img.set(63, 69, [0, 0, 0]);
        let back = PlotImage::decode_png(&img.encode_png()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn too_small_rejected() {
        assert!(matches!(PlotImage::blank(63, 100), Err(DigitizeError::InvalidImage(_))));
    }
}
