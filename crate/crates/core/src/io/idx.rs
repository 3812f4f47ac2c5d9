//! Big-endian IDX reader for MNIST-style image and label files. Files that
//! start with the gzip magic are decompressed transparently.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{LabeledImage, IMAGE_PIXELS};
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn load(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, kind: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Format {
            kind,
            detail: "truncated header".into(),
        })
}

/// Parses in-memory IDX image and label payloads.
pub fn parse_idx(images: &[u8], labels: &[u8], limit: Option<usize>) -> Result<Vec<LabeledImage>> {
    let magic = be_u32(images, 0, "IDX image")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format {
            kind: "IDX image",
            detail: format!("magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        });
    }
    let n_images = be_u32(images, 4, "IDX image")? as usize;
    let rows = be_u32(images, 8, "IDX image")? as usize;
    let cols = be_u32(images, 12, "IDX image")? as usize;
    if rows * cols != IMAGE_PIXELS {
        return Err(Error::Format {
            kind: "IDX image",
            detail: format!("images are {rows}×{cols}, expected 28×28"),
        });
    }
    let magic = be_u32(labels, 0, "IDX label")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format {
            kind: "IDX label",
            detail: format!("magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        });
    }
    let n_labels = be_u32(labels, 4, "IDX label")? as usize;
    if n_images != n_labels {
        return Err(Error::Format {
            kind: "IDX",
            detail: format!("{n_images} images but {n_labels} labels"),
        });
    }
    let pixels = &images[16..];
    let label_bytes = &labels[8..];
    if pixels.len() < n_images * IMAGE_PIXELS {
        return Err(Error::Format {
            kind: "IDX image",
            detail: format!(
                "{} pixel bytes for {n_images} images",
                pixels.len()
            ),
        });
    }
    if label_bytes.len() < n_labels {
        return Err(Error::Format {
            kind: "IDX label",
            detail: format!("{} label bytes for {n_labels} labels", label_bytes.len()),
        });
    }
    let n = limit.map_or(n_images, |l| l.min(n_images));
    Ok((0..n)
        .map(|i| LabeledImage {
            pixels: pixels[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS].to_vec(),
            label: label_bytes[i],
        })
        .collect())
}

/// Reads an image file and its label file, keeping at most `limit` examples.
pub fn read_idx(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Vec<LabeledImage>> {
    parse_idx(&load(images)?, &load(labels)?, limit)
}

/// Reads `train` or `t10k` split files from a directory using the standard
/// MNIST file names, with or without a `.gz` suffix.
pub fn read_mnist_dir(dir: &Path, prefix: &str, limit: Option<usize>) -> Result<Vec<LabeledImage>> {
    let pick = |stem: String| {
        let gz = dir.join(format!("{stem}.gz"));
        if gz.exists() {
            gz
        } else {
            dir.join(stem)
        }
    };
    read_idx(
        &pick(format!("{prefix}-images-idx3-ubyte")),
        &pick(format!("{prefix}-labels-idx1-ubyte")),
        limit,
    )
}

#[cfg(test)]
pub(crate) fn encode_idx(images: &[LabeledImage]) -> (Vec<u8>, Vec<u8>) {
    let n = images.len() as u32;
    let mut img = Vec::new();
    for v in [IMAGE_MAGIC, n, 28, 28] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    let mut lab = Vec::new();
    for v in [LABEL_MAGIC, n] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    for x in images {
        img.extend_from_slice(&x.pixels);
        lab.push(x.label);
    }
    (img, lab)
}
