//! PNG and PNM reading/writing at 8 or 16 bits per channel.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Rgb};

use crate::error::{Error, Result};
use crate::image::{BitDepth, Image};

fn from_dynamic(img: DynamicImage) -> Result<Image<f32>> {
    use image::ColorType::*;
    let depth = match img.color() {
        L8 | La8 | Rgb8 | Rgba8 => BitDepth::Eight,
        _ => BitDepth::Sixteen,
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let n = w * h;
    let mut data = vec![0.0f32; 3 * n];
    match depth {
        BitDepth::Eight => {
            let buf = img.into_rgb8();
            for (i, px) in buf.pixels().enumerate() {
                for c in 0..3 {
                    data[c * n + i] = px.0[c] as f32 / 255.0;
                }
            }
        }
        BitDepth::Sixteen => {
            let buf = img.into_rgb16();
            for (i, px) in buf.pixels().enumerate() {
                for c in 0..3 {
                    data[c * n + i] = px.0[c] as f32 / 65535.0;
                }
            }
        }
    }
    Image::from_planar(w, h, depth, data)
}

pub fn decode_image(bytes: &[u8]) -> Result<Image<f32>> {
    from_dynamic(image::load_from_memory(bytes)?)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image<f32>> {
    from_dynamic(image::open(path)?)
}

#[inline]
fn quantize(v: f32, max: f32) -> f32 {
    (v.clamp(0.0, 1.0) * max).round()
}

fn to_dynamic(img: &Image<f32>) -> Result<DynamicImage> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let n = img.pixel_count();
    let d = img.data();
    Ok(match img.depth() {
        BitDepth::Eight => {
            let mut raw = Vec::with_capacity(3 * n);
            for i in 0..n {
                for c in 0..3 {
                    raw.push(quantize(d[c * n + i], 255.0) as u8);
                }
            }
            let buf: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(w, h, raw)
                .ok_or_else(|| Error::invalid("pixel buffer size mismatch"))?;
            DynamicImage::ImageRgb8(buf)
        }
        BitDepth::Sixteen => {
            let mut raw = Vec::with_capacity(3 * n);
            for i in 0..n {
                for c in 0..3 {
                    raw.push(quantize(d[c * n + i], 65535.0) as u16);
                }
            }
            let buf: ImageBuffer<Rgb<u16>, _> = ImageBuffer::from_raw(w, h, raw)
                .ok_or_else(|| Error::invalid("pixel buffer size mismatch"))?;
            DynamicImage::ImageRgb16(buf)
        }
    })
}

/// Encodes at the image's declared bit depth; values are clamped to `[0, 1]`.
pub fn encode_image(img: &Image<f32>, format: ImageFormat) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    to_dynamic(img)?.write_to(&mut out, format)?;
    Ok(out.into_inner())
}

pub fn encode_png(img: &Image<f32>) -> Result<Vec<u8>> {
    encode_image(img, ImageFormat::Png)
}

/// Writes PNG or PNM depending on the file extension.
pub fn save_image(img: &Image<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = ImageFormat::from_path(path)?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(Error::invalid(format!(
            "unsupported output format for {}",
            path.display()
        )));
    }
    std::fs::write(path, encode_image(img, format)?)?;
    Ok(())
}
