//! Radiance RGBE (.hdr) codec.
//!
//! Pixels are stored as four bytes: three mantissas sharing one exponent.
//! Decoding follows the dominant Radiance convention c = m/256 * 2^(E-128)
//! with no half-bit mantissa bias. Both flat and run-length-encoded
//! scanlines are handled, including old-style repeat markers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hdrio::HdrImage;
use crate::scalar::Real;

const MIN_RLE_WIDTH: usize = 8;
const MAX_RLE_WIDTH: usize = 0x7fff;

/// Reads a Radiance RGBE stream into linear RGB, top-left row-major.
pub fn read_hdr<T: Real>(path: impl AsRef<Path>) -> Result<HdrImage<T>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);

    let (width, height, flip_vertical) = read_header(&mut reader, path)?;

    let mut rows: Vec<Vec<[u8; 4]>> = Vec::with_capacity(height);
    for row in 0..height {
        rows.push(read_scanline(&mut reader, width, path, row)?);
    }
    if flip_vertical {
        rows.reverse();
    }

    let mut data = Vec::with_capacity(width * height * 3);
    for row in &rows {
        for px in row {
            let [r, g, b] = decode_rgbe::<T>(*px);
            data.push(r);
            data.push(g);
            data.push(b);
        }
    }
    Ok(HdrImage::from_vec(width, height, data))
}

/// Writes an image as RGBE with shared-exponent encoding, RLE where legal.
pub fn write_hdr<T: Real>(image: &HdrImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);

    write!(w, "#?RADIANCE\n")?;
    write!(w, "FORMAT=32-bit_rle_rgbe\n")?;
    write!(w, "\n")?;
    write!(w, "-Y {} +X {}\n", image.height(), image.width())?;

    let width = image.width();
    let use_rle = (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&width);
    let mut scanline = vec![[0u8; 4]; width];
    for y in 0..image.height() {
        for (x, px) in scanline.iter_mut().enumerate() {
            *px = encode_rgbe(image.pixel(x, y));
        }
        if use_rle {
            write_scanline_rle(&mut w, &scanline)?;
        } else {
            for px in &scanline {
                w.write_all(px)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// c = m/256 * 2^(E-128); zero exponent decodes to black.
fn decode_rgbe<T: Real>(px: [u8; 4]) -> [T; 3] {
    let e = px[3];
    if e == 0 {
        return [T::zero(); 3];
    }
    let scale = T::of(exp2i(e as i32 - 136));
    [
        T::of_usize(px[0] as usize) * scale,
        T::of_usize(px[1] as usize) * scale,
        T::of_usize(px[2] as usize) * scale,
    ]
}

fn exp2i(e: i32) -> f64 {
    (e as f64).exp2()
}

fn encode_rgbe<T: Real>(rgb: [T; 3]) -> [u8; 4] {
    let r = rgb[0].to_f64().max(0.0);
    let g = rgb[1].to_f64().max(0.0);
    let b = rgb[2].to_f64().max(0.0);
    let v = r.max(g).max(b);
    if v < 1e-32 {
        return [0, 0, 0, 0];
    }
    // frexp: v = m * 2^e with m in [0.5, 1)
    let mut e = v.log2().floor() as i32 + 1;
    while v * exp2i(-e) >= 1.0 {
        e += 1;
    }
    while v * exp2i(-e) < 0.5 {
        e -= 1;
    }
    if e + 128 <= 0 {
        return [0, 0, 0, 0]; // below representable range
    }
    let e = e.min(127);
    let scale = 256.0 * exp2i(-e);
    [
        ((r * scale) as u32).min(255) as u8,
        ((g * scale) as u32).min(255) as u8,
        ((b * scale) as u32).min(255) as u8,
        (e + 128) as u8,
    ]
}

/// Parses magic, header variables and the resolution line.
/// Returns (width, height, flip_vertical).
fn read_header(reader: &mut impl BufRead, path: &Path) -> Result<(usize, usize, bool)> {
    let magic = read_line(reader, path)?;
    if !(magic.starts_with("#?RADIANCE") || magic.starts_with("#?RGBE")) {
        return Err(malformed(path, "missing #?RADIANCE / #?RGBE magic"));
    }

    // Header variables until the blank separator line.
    loop {
        let line = read_line(reader, path)?;
        if line.is_empty() {
            break;
        }
        if line.starts_with('#') {
            continue;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(malformed(path, &format!("unsupported format `{fmt}`")));
            }
        }
        // EXPOSURE / GAMMA / PRIMARIES are metadata; reference decoders do
        // not bake them into pixel values and neither do we.
    }

    let res = read_line(reader, path)?;
    let tokens: Vec<&str> = res.split_whitespace().collect();
    if tokens.len() != 4 {
        return Err(malformed(path, "resolution line must have four tokens"));
    }
    let flip_vertical = match (tokens[0], tokens[2]) {
        ("-Y", "+X") => false,
        ("+Y", "+X") => true,
        _ => {
            return Err(Error::UnsupportedOrientation {
                path: path.to_path_buf(),
                orientation: res.clone(),
            })
        }
    };
    let height: usize = tokens[1]
        .parse()
        .map_err(|_| malformed(path, "bad height in resolution line"))?;
    let width: usize = tokens[3]
        .parse()
        .map_err(|_| malformed(path, "bad width in resolution line"))?;
    if width == 0 || height == 0 {
        return Err(malformed(path, "zero dimension"));
    }
    Ok((width, height, flip_vertical))
}

fn read_line(reader: &mut impl BufRead, path: &Path) -> Result<String> {
    let mut buf = Vec::new();
    let n = reader.read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Err(malformed(path, "unexpected end of header"));
    }
    while buf.last().is_some_and(|&c| c == b'\n' || c == b'\r') {
        buf.pop();
    }
    String::from_utf8(buf).map_err(|_| malformed(path, "non-utf8 header line"))
}

fn read_scanline(
    reader: &mut impl Read,
    width: usize,
    path: &Path,
    row: usize,
) -> Result<Vec<[u8; 4]>> {
    let mut first = [0u8; 4];
    read_exact_or_truncated(reader, &mut first, path, row)?;

    let is_new_rle = first[0] == 2
        && first[1] == 2
        && ((first[2] as usize) << 8 | first[3] as usize) == width
        && (MIN_RLE_WIDTH..=MAX_RLE_WIDTH).contains(&width);

    if is_new_rle {
        let mut planes = vec![0u8; width * 4];
        for c in 0..4 {
            let mut filled = 0usize;
            while filled < width {
                let mut code = [0u8; 1];
                read_exact_or_truncated(reader, &mut code, path, row)?;
                if code[0] > 128 {
                    // run
                    let count = (code[0] - 128) as usize;
                    if filled + count > width {
                        return Err(Error::TruncatedScanline {
                            path: path.to_path_buf(),
                            row,
                        });
                    }
                    let mut value = [0u8; 1];
                    read_exact_or_truncated(reader, &mut value, path, row)?;
                    planes[c * width + filled..c * width + filled + count].fill(value[0]);
                    filled += count;
                } else {
                    let count = code[0] as usize;
                    if count == 0 || filled + count > width {
                        return Err(Error::TruncatedScanline {
                            path: path.to_path_buf(),
                            row,
                        });
                    }
                    read_exact_or_truncated(
                        reader,
                        &mut planes[c * width + filled..c * width + filled + count],
                        path,
                        row,
                    )?;
                    filled += count;
                }
            }
        }
        let mut out = Vec::with_capacity(width);
        for x in 0..width {
            out.push([
                planes[x],
                planes[width + x],
                planes[2 * width + x],
                planes[3 * width + x],
            ]);
        }
        return Ok(out);
    }

    // Flat scanline, possibly with old-style (1,1,1,n) repeat markers.
    let mut out: Vec<[u8; 4]> = Vec::with_capacity(width);
    let mut pending = Some(first);
    let mut repeat_shift = 0u32;
    while out.len() < width {
        let px = match pending.take() {
            Some(p) => p,
            None => {
                let mut p = [0u8; 4];
                read_exact_or_truncated(reader, &mut p, path, row)?;
                p
            }
        };
        if px[0] == 1 && px[1] == 1 && px[2] == 1 {
            let prev = *out.last().ok_or_else(|| Error::TruncatedScanline {
                path: path.to_path_buf(),
                row,
            })?;
            let count = (px[3] as usize) << repeat_shift;
            if out.len() + count > width {
                return Err(Error::TruncatedScanline {
                    path: path.to_path_buf(),
                    row,
                });
            }
            out.extend(std::iter::repeat(prev).take(count));
            repeat_shift += 8;
        } else {
            out.push(px);
            repeat_shift = 0;
        }
    }
    Ok(out)
}

fn read_exact_or_truncated(
    reader: &mut impl Read,
    buf: &mut [u8],
    path: &Path,
    row: usize,
) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::TruncatedScanline {
                path: path.to_path_buf(),
                row,
            }
        } else {
            Error::Io(e)
        }
    })
}

/// New-style RLE: header (2, 2, hi, lo), then each byte plane separately.
fn write_scanline_rle(w: &mut impl Write, scanline: &[[u8; 4]]) -> Result<()> {
    let width = scanline.len();
    w.write_all(&[2, 2, (width >> 8) as u8, (width & 0xff) as u8])?;
    let mut plane = vec![0u8; width];
    for c in 0..4 {
        for (x, px) in scanline.iter().enumerate() {
            plane[x] = px[c];
        }
        write_plane_rle(w, &plane)?;
    }
    Ok(())
}

fn write_plane_rle(w: &mut impl Write, plane: &[u8]) -> Result<()> {
    const MIN_RUN: usize = 4;
    let len = plane.len();
    let mut pos = 0;
    while pos < len {
        // find next run of at least MIN_RUN
        let mut run_start = pos;
        let mut run_len = 0;
        while run_start < len {
            run_len = 1;
            while run_start + run_len < len
                && run_len < 127
                && plane[run_start + run_len] == plane[run_start]
            {
                run_len += 1;
            }
            if run_len >= MIN_RUN {
                break;
            }
            run_start += run_len;
        }
        // literals up to the run (or end)
        let lit_end = if run_len >= MIN_RUN { run_start } else { len };
        let mut lit = pos;
        while lit < lit_end {
            let n = (lit_end - lit).min(128);
            w.write_all(&[n as u8])?;
            w.write_all(&plane[lit..lit + n])?;
            lit += n;
        }
        pos = lit_end;
        if run_len >= MIN_RUN {
            w.write_all(&[128 + run_len as u8, plane[run_start]])?;
            pos = run_start + run_len;
        }
    }
    Ok(())
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
    fn zero_exponent_decodes_to_black() {
        assert_eq!(decode_rgbe::<f64>([0, 0, 0, 0]), [0.0, 0.0, 0.0]);
        // nonzero mantissa with zero exponent is still black
        assert_eq!(decode_rgbe::<f64>([12, 200, 3, 0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn decode_matches_shared_exponent_formula() {
        // c = m/256 * 2^(E-128): E=136 gives scale 1
        assert_eq!(decode_rgbe::<f64>([128, 64, 32, 136]), [128.0, 64.0, 32.0]);
        // E=128 gives scale 2^-8
        let [r, _, _] = decode_rgbe::<f64>([128, 0, 0, 128]);
        assert_eq!(r, 0.5);
    }

    #[test]
    fn encode_subnormal_is_black() {
        assert_eq!(encode_rgbe([1e-40f64, 0.0, 0.0]), [0, 0, 0, 0]);
    }

    #[test]
    fn encode_decode_error_within_mantissa_step() {
        // deterministic sweep across many magnitudes
        let mut v = 1.37e-12f64;
        while v < 1e12 {
            let rgb = [v, v * 0.63, v * 0.11];
            let dec = decode_rgbe::<f64>(encode_rgbe(rgb));
            for c in 0..3 {
                assert!(
                    (dec[c] - rgb[c]).abs() <= v / 128.0,
                    "value {v:e} channel {c}: {} vs {}",
                    dec[c],
                    rgb[c]
                );
            }
            v *= 3.7;
        }
    }

    #[test]
    fn encode_never_overflows_mantissa() {
        for &v in &[0.9999999f64, 1.0, 2.0_f64.powi(60) * 0.99999999] {
            let px = encode_rgbe([v, v, v]);
            assert!(px[0] <= 255);
            let dec = decode_rgbe::<f64>(px);
            assert!((dec[0] - v).abs() <= v / 128.0);
        }
    }

    #[test]
    fn old_style_repeat_marker_expands() {
        // 1x? flat line: pixel, then (1,1,1,3) repeats it three more times
        let bytes: Vec<u8> = vec![10, 20, 30, 136, 1, 1, 1, 3];
        let mut cursor = std::io::Cursor::new(bytes);
        let row = read_scanline(&mut cursor, 4, Path::new("mem"), 0).unwrap();
        assert_eq!(row.len(), 4);
        assert!(row.iter().all(|px| *px == [10, 20, 30, 136]));
    }
}
