use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::recon::ImageTensor;

fn token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Format("truncated image header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let t = token(bytes, pos)?;
    t.parse().map_err(|_| Error::Format(format!("bad header number {t:?}")))
}

/// Binary PGM (P5, one channel) or PPM (P6, three channels), 8-bit.
pub fn load_image(path: &Path) -> Result<ImageTensor> {
    let bytes = fs::read(path)?;
    let mut pos = 0;
    let channels = match token(&bytes, &mut pos)?.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::Format(format!("unsupported image format {other:?}; only P5 and P6"))),
    };
    let width = number(&bytes, &mut pos)?;
    let height = number(&bytes, &mut pos)?;
    let maxval = number(&bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported maxval {maxval}; only 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let body = bytes.get(pos..).unwrap_or(&[]);
    let want = width * height * channels;
    if body.len() != want {
        return Err(Error::Format(format!("raster has {} bytes, expected {want}", body.len())));
    }
    ImageTensor::new(height, width, channels, body.iter().map(|&b| f64::from(b) / 255.0).collect())
}

/// Writes P5 or P6 by channel count; values are rounded to the nearest
/// 1/255 step.
pub fn save_image(path: &Path, image: &ImageTensor) -> Result<()> {
    let magic = match image.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Format(format!("cannot store {c} channels as PGM/PPM"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::SeededRng;

    #[test]
    fn scales_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 128, 64]);
        fs::write(&p, bytes).unwrap();
        let im = load_image(&p).unwrap();
        assert_eq!(im.data, vec![0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        assert_eq!(im.shape(), [2, 2, 1]);
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = SeededRng::new(5);
        for channels in [1, 3] {
            let data = (0..5 * 7 * channels).map(|_| rng.below(256) as f64 / 255.0).collect();
            let im = ImageTensor::new(5, 7, channels, data).unwrap();
            let p = dir.path().join(format!("x{channels}"));
            save_image(&p, &im).unwrap();
            let bytes = fs::read(&p).unwrap();
            let back = load_image(&p).unwrap();
            assert_eq!(back, im);
            save_image(&p, &back).unwrap();
            assert_eq!(fs::read(&p).unwrap(), bytes);
        }
    }

    #[test]
    fn rejects_ascii_and_deep_images() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b");
        fs::write(&p, b"P2\n1 1\n255\n0\n").unwrap();
        assert!(matches!(load_image(&p), Err(Error::Format(_))));
        fs::write(&p, b"P5\n1 1\n65535\n\0\0").unwrap();
        assert!(matches!(load_image(&p), Err(Error::Format(_))));
        fs::write(&p, b"P5\n2 2\n255\n\0").unwrap();
        assert!(matches!(load_image(&p), Err(Error::Format(_))));
    }
}
