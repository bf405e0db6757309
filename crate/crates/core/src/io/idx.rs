use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nncore::Tensor;
use crate::rib::LabeledDataset;

/// Unsigned-byte IDX header: big-endian dimension sizes after a
/// `00 00 08 ndim` magic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxHeader {
    pub dims: Vec<usize>,
}

impl IdxHeader {
    fn parse(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
            return Err(Error::Format("bad IDX magic".into()));
        }
        if bytes[2] != 0x08 {
            return Err(Error::Format(format!("unsupported IDX element type 0x{:02x}", bytes[2])));
        }
        let ndim = bytes[3] as usize;
        let header_len = 4 + 4 * ndim;
        if ndim == 0 || bytes.len() < header_len {
            return Err(Error::Format("truncated IDX header".into()));
        }
        let dims: Vec<usize> = bytes[4..header_len]
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let body: usize = dims.iter().product();
        if bytes.len() != header_len + body {
            return Err(Error::Format(format!(
                "IDX body has {} bytes, header declares {body}",
                bytes.len() - header_len
            )));
        }
        Ok((IdxHeader { dims }, header_len))
    }
}

/// Images as `[count, rows, cols]` scaled to [0, 1].
pub fn load_idx_images(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path)?;
    let (h, off) = IdxHeader::parse(&bytes)?;
    if h.dims.len() != 3 {
        return Err(Error::Format(format!("image file has {} dimensions, expected 3", h.dims.len())));
    }
    let data = bytes[off..].iter().map(|&b| f64::from(b) / 255.0).collect();
    Tensor::new(h.dims, data)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path)?;
    let (h, off) = IdxHeader::parse(&bytes)?;
    if h.dims.len() != 1 {
        return Err(Error::Format(format!("label file has {} dimensions, expected 1", h.dims.len())));
    }
    Ok(bytes[off..].iter().map(|&b| b as usize).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
}

impl MnistSplit {
    fn prefix(self) -> &'static str {
        match self {
            MnistSplit::Train => "train",
            MnistSplit::Test => "t10k",
        }
    }
}

/// Uncompressed MNIST files from `dir`, flattened to 784 features.
pub fn load_mnist(dir: &Path, split: MnistSplit) -> Result<LabeledDataset> {
    let p = split.prefix();
    let images = load_idx_images(&dir.join(format!("{p}-images-idx3-ubyte")))?;
    let labels = load_idx_labels(&dir.join(format!("{p}-labels-idx1-ubyte")))?;
    let [n, r, c] = [images.shape()[0], images.shape()[1], images.shape()[2]];
    if n != labels.len() {
        return Err(Error::Format(format!("{n} images but {} labels", labels.len())));
    }
    if labels.iter().any(|&l| l > 9) {
        return Err(Error::Format("MNIST label outside 0–9".into()));
    }
    LabeledDataset::new(images.reshape(&[n, r * c])?, labels, 10)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(dims: &[u32], body: &[u8]) -> Vec<u8> {
        let mut v = vec![0, 0, 8, dims.len() as u8];
        for d in dims {
            v.extend(d.to_be_bytes());
        }
        v.extend(body);
        v
    }

    #[test]
    fn parses_and_scales() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img");
        fs::write(&p, idx(&[2, 1, 2], &[0, 255, 51, 102])).unwrap();
        let t = load_idx_images(&p).unwrap();
        assert_eq!(t.shape(), &[2, 1, 2]);
        assert_eq!(t.data(), &[0.0, 1.0, 0.2, 0.4]);
    }

    #[test]
    fn rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        let mut bytes = idx(&[3], &[1, 2, 3]);
        bytes[0] = 1;
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_idx_labels(&p), Err(Error::Format(_))));
        fs::write(&p, idx(&[4], &[1, 2, 3])).unwrap();
        assert!(matches!(load_idx_labels(&p), Err(Error::Format(_))));
        fs::write(&p, idx(&[3], &[1, 2, 3])).unwrap();
        assert!(matches!(load_idx_images(&p), Err(Error::Format(_))));
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t10k-images-idx3-ubyte"), idx(&[2, 1, 1], &[0, 1])).unwrap();
        fs::write(dir.path().join("t10k-labels-idx1-ubyte"), idx(&[3], &[0, 1, 2])).unwrap();
        assert!(matches!(load_mnist(dir.path(), MnistSplit::Test), Err(Error::Format(_))));
    }
}
