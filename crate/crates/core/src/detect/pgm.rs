//! Binary (P5) PGM reading and writing, maxval 255 or 65535.

use std::io::{Read, Write};
use std::path::Path;

use super::ImageGrid;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(format!("pgm: {}", msg.into()))
}

/// Pulls the next whitespace-delimited header token, skipping `#` comments.
fn next_token(data: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(bad("truncated header"));
    }
    Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

pub fn parse_pgm<T: Scalar>(data: &[u8]) -> Result<ImageGrid<T>> {
    let mut pos = 0;
    if next_token(data, &mut pos)? != "P5" {
        return Err(bad("only binary P5 is supported"));
    }
    let mut num = |what: &str| -> Result<usize> {
        next_token(data, &mut pos)?
            .parse::<usize>()
            .map_err(|_| bad(format!("bad {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 && maxval != 65535 {
        return Err(bad(format!("maxval {maxval} not supported (255 or 65535)")));
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let bpp = if maxval == 255 { 1 } else { 2 };
    let need = width * height * bpp;
    let raster = data.get(pos..pos + need).ok_or_else(|| bad("truncated raster"))?;
    let values = if bpp == 1 {
        raster.iter().map(|&b| T::from_u8(b).unwrap()).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| T::from_u16(u16::from_be_bytes([c[0], c[1]])).unwrap())
            .collect()
    };
    ImageGrid::new(width, height, values)
}

pub fn read_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<ImageGrid<T>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    parse_pgm(&buf)
}

/// Writes values rounded and clamped to `0..=maxval`.
pub fn encode_pgm<T: Scalar>(img: &ImageGrid<T>, maxval: u16) -> Result<Vec<u8>> {
    if maxval != 255 && maxval != 65535 {
        return Err(bad("maxval must be 255 or 65535"));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    let top = T::from_u16(maxval).unwrap();
    for &v in img.values() {
        let q = v.round().max(T::zero()).min(top).to_u16().unwrap_or(0);
        if maxval == 255 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn write_pgm<T: Scalar>(img: &ImageGrid<T>, maxval: u16, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_pgm(img, maxval)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_8_and_16_bit() {
        let img = ImageGrid::new(3, 2, vec![0.0f64, 1.0, 2.0, 100.0, 254.0, 255.0]).unwrap();
        let back: ImageGrid<f64> = parse_pgm(&encode_pgm(&img, 255).unwrap()).unwrap();
        assert_eq!(back, img);

        let img = ImageGrid::new(2, 2, vec![0.0f32, 300.0, 65535.0, 4096.0]).unwrap();
        let back: ImageGrid<f32> = parse_pgm(&encode_pgm(&img, 65535).unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn header_comments_and_errors() {
        let mut data = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        data.extend_from_slice(&[7, 9]);
        let img: ImageGrid<f64> = parse_pgm(&data).unwrap();
        assert_eq!(img.values(), &[7.0, 9.0]);

        assert!(parse_pgm::<f64>(b"P2\n1 1\n255\n0").is_err());
        assert!(parse_pgm::<f64>(b"P5\n2 2\n255\n\x01").is_err());
        assert!(parse_pgm::<f64>(b"P5\n1 1\n1000\n\x01\x01").is_err());
    }
}
