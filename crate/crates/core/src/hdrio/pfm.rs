//! PFM (portable float map) codec: lossless 32-bit float interchange.
//!
//! `PF` streams carry interleaved RGB, `Pf` a single channel. The sign of
//! the scale line selects endianness (negative = little), and scanlines are
//! stored bottom-to-top per the PFM convention.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::hdrio::HdrImage;
use crate::raster::Raster;
use crate::scalar::Real;

/// Reads a PFM file. Grayscale (`Pf`) data is replicated onto all three
/// channels so the result is usable wherever an [`HdrImage`] is expected.
pub fn read_pfm<T: Real>(path: impl AsRef<Path>) -> Result<HdrImage<T>> {
    let path = path.as_ref();
    let (header, samples) = read_samples(path)?;
    let (width, height) = (header.width, header.height);
    let mut image = HdrImage::new(width, height);
    match header.channels {
        3 => {
            for y in 0..height {
                for x in 0..width {
                    let i = (y * width + x) * 3;
                    image.set_pixel(
                        x,
                        y,
                        [
                            T::of(samples[i] as f64),
                            T::of(samples[i + 1] as f64),
                            T::of(samples[i + 2] as f64),
                        ],
                    );
                }
            }
        }
        _ => {
            for y in 0..height {
                for x in 0..width {
                    let v = T::of(samples[y * width + x] as f64);
                    image.set_pixel(x, y, [v, v, v]);
                }
            }
        }
    }
    Ok(image)
}

/// Reads a grayscale (`Pf`) file as a single-channel raster.
pub fn read_pfm_gray<T: Real>(path: impl AsRef<Path>) -> Result<Raster<T>> {
    let path = path.as_ref();
    let (header, samples) = read_samples(path)?;
    if header.channels != 1 {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "expected grayscale `Pf`, found color `PF`".into(),
        });
    }
    let data = samples.iter().map(|&v| T::of(v as f64)).collect();
    Ok(Raster::from_vec(header.width, header.height, data))
}

/// Writes interleaved RGB as `PF`, little-endian.
pub fn write_pfm<T: Real>(image: &HdrImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write!(w, "PF\n{} {}\n-1.0\n", image.width(), image.height())?;
    let mut buf = vec![0u8; image.width() * 12];
    for y in (0..image.height()).rev() {
        for x in 0..image.width() {
            let px = image.pixel(x, y);
            for c in 0..3 {
                LittleEndian::write_f32(
                    &mut buf[(x * 3 + c) * 4..],
                    px[c].to_f64() as f32,
                );
            }
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a single-channel raster as `Pf`, little-endian.
pub fn write_pfm_gray<T: Real>(raster: &Raster<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write!(w, "Pf\n{} {}\n-1.0\n", raster.width(), raster.height())?;
    let mut buf = vec![0u8; raster.width() * 4];
    for y in (0..raster.height()).rev() {
        for (x, &v) in raster.row(y).iter().enumerate() {
            LittleEndian::write_f32(&mut buf[x * 4..], v.to_f64() as f32);
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

struct PfmHeader {
    width: usize,
    height: usize,
    channels: usize,
}

/// Parses header and raw samples, reordering rows to a top-left origin.
fn read_samples(path: &Path) -> Result<(PfmHeader, Vec<f32>)> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);

    let magic = read_token(&mut reader, path)?;
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => {
            return Err(malformed(path, &format!("bad magic `{other}`")));
        }
    };
    let width: usize = read_token(&mut reader, path)?
        .parse()
        .map_err(|_| malformed(path, "bad width"))?;
    let height: usize = read_token(&mut reader, path)?
        .parse()
        .map_err(|_| malformed(path, "bad height"))?;
    if width == 0 || height == 0 {
        return Err(malformed(path, "zero dimension"));
    }
    let scale: f64 = read_token(&mut reader, path)?
        .parse()
        .map_err(|_| malformed(path, "bad scale factor"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(malformed(path, "scale factor must be finite and nonzero"));
    }
    let little_endian = scale < 0.0;

    let expected = width * height * channels;
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw)?;
    if raw.len() < expected * 4 {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: raw.len() / 4,
        });
    }

    // bottom-to-top storage: flip to row-major top-left
    let row_samples = width * channels;
    let mut samples = vec![0f32; expected];
    for file_row in 0..height {
        let out_row = height - 1 - file_row;
        let src = &raw[file_row * row_samples * 4..(file_row + 1) * row_samples * 4];
        let dst = &mut samples[out_row * row_samples..(out_row + 1) * row_samples];
        if little_endian {
            LittleEndian::read_f32_into(src, dst);
        } else {
            BigEndian::read_f32_into(src, dst);
        }
    }

    Ok((
        PfmHeader {
            width,
            height,
            channels,
        },
        samples,
    ))
}

/// Reads one whitespace-delimited header token.
fn read_token(reader: &mut impl Read, path: &Path) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            return Err(malformed(path, "unexpected end of header"));
        }
        if byte[0].is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(byte[0]);
        if token.len() > 32 {
            return Err(malformed(path, "header token too long"));
        }
    }
    String::from_utf8(token).map_err(|_| malformed(path, "non-utf8 header token"))
}

fn malformed(path: &Path, reason: &str) -> Error {
    Error::MalformedHeader {
        path: PathBuf::from(path),
        reason: reason.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_endian_scale_sign_is_honored() {
        // hand-built 1x1 Pf file, big-endian (positive scale)
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.pfm");
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        std::fs::write(&path, bytes).unwrap();
        let raster = read_pfm_gray::<f32>(&path).unwrap();
        assert_eq!(raster.get(0, 0), 2.5);
    }

    #[test]
    fn gray_file_rejected_as_color_only_by_read_pfm_gray() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pfm");
        let img = HdrImage::<f32>::from_fn(2, 2, |x, y| [x as f32, y as f32, 1.0]);
        write_pfm(&img, &path).unwrap();
        assert!(matches!(
            read_pfm_gray::<f32>(&path),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn truncated_payload_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pfm");
        let mut bytes = b"Pf\n4 4\n-1.0\n".to_vec();
        bytes.extend_from_slice(&[0u8; 16]); // 4 of 16 samples
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_pfm_gray::<f32>(&path),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn rows_are_flipped_to_top_left_origin() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.pfm");
        let mut raster = Raster::<f32>::zeros(2, 2);
        raster.set(0, 0, 1.0); // top-left
        write_pfm_gray(&raster, &path).unwrap();
        let back = read_pfm_gray::<f32>(&path).unwrap();
        assert_eq!(back.get(0, 0), 1.0);
        assert_eq!(back.get(1, 1), 0.0);
    }
}
