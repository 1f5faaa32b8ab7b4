use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{Dataset, FeatureKind, Target};
use crate::error::{Error, Result};

pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

/// Magic number and big-endian dimension sizes of an IDX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxHeader {
    pub magic: u32,
    pub dims: Vec<u32>,
}

impl IdxHeader {
    fn header_len(&self) -> usize {
        4 + 4 * self.dims.len()
    }

    fn payload_len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    fn parse(bytes: &[u8], expected_magic: u32, path: &Path) -> Result<IdxHeader> {
        let ndims = match expected_magic {
            IDX_IMAGES_MAGIC => 3,
            IDX_LABELS_MAGIC => 1,
            _ => unreachable!("only image and label files are supported"),
        };
        if bytes.len() < 4 {
            return Err(Error::parse_at_byte(path, bytes.len() as u64, "file too short for magic number"));
        }
        let magic = be_u32(bytes, 0);
        if magic != expected_magic {
            return Err(Error::parse_at_byte(
                path,
                0,
                format!("bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"),
            ));
        }
        let header_len = 4 + 4 * ndims;
        if bytes.len() < header_len {
            return Err(Error::parse_at_byte(path, bytes.len() as u64, "truncated header"));
        }
        let dims = (0..ndims).map(|i| be_u32(bytes, 4 + 4 * i)).collect();
        let header = IdxHeader { magic, dims };
        let expected = header.header_len() + header.payload_len();
        if bytes.len() < expected {
            return Err(Error::parse_at_byte(
                path,
                bytes.len() as u64,
                format!("truncated payload: expected {} bytes in total", expected),
            ));
        }
        if bytes.len() > expected {
            return Err(Error::parse_at_byte(path, expected as u64, "trailing bytes after payload"));
        }
        Ok(header)
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.magic.to_be_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Parses an image file: returns (count x rows*cols pixels scaled to [0,1], rows, cols).
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(DMatrix<f64>, usize, usize)> {
    let header = IdxHeader::parse(bytes, IDX_IMAGES_MAGIC, path)?;
    let (count, rows, cols) = (header.dims[0] as usize, header.dims[1] as usize, header.dims[2] as usize);
    let p = rows * cols;
    let payload = &bytes[header.header_len()..];
    let pixels = DMatrix::from_row_iterator(count, p, payload.iter().map(|&b| b as f64 / 255.0));
    Ok((pixels, rows, cols))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let header = IdxHeader::parse(bytes, IDX_LABELS_MAGIC, path)?;
    Ok(bytes[header.header_len()..].to_vec())
}

/// Reads an IDX image/label file pair into a dataset with one target,
/// `label`, whose class count is the largest label plus one.
pub fn read_idx_pair(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let lab_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let (pixels, _, _) = parse_idx_images(&img_bytes, images_path)?;
    let labels = parse_idx_labels(&lab_bytes, labels_path)?;
    if labels.len() != pixels.nrows() {
        return Err(Error::parse_at_byte(
            labels_path,
            4,
            format!("label count {} does not match image count {}", labels.len(), pixels.nrows()),
        ));
    }
    let class_count = labels.iter().copied().max().map_or(1, |m| m as usize + 1);
    let values = labels.iter().map(|&l| l as usize).collect();
    Dataset::new(pixels, FeatureKind::ImagePixelsUnitInterval)?.with_target(Target::new("label", values, class_count)?)
}

/// Writes the dataset's pixels and active target as an IDX pair. Pixels are
/// stored as `round(255 x)`.
pub fn write_idx_pair(ds: &Dataset, rows: usize, cols: usize, images_path: &Path, labels_path: &Path) -> Result<()> {
    crate::error::check_width(rows * cols, ds.p())?;
    let target = ds.target()?;
    if target.class_count > 256 {
        return Err(Error::Config("IDX labels hold at most 256 classes".into()));
    }
    let mut img = Vec::with_capacity(16 + ds.n() * ds.p());
    IdxHeader {
        magic: IDX_IMAGES_MAGIC,
        dims: vec![ds.n() as u32, rows as u32, cols as u32],
    }
    .write(&mut img);
    let x = ds.features();
    for i in 0..ds.n() {
        for j in 0..ds.p() {
            let v = x[(i, j)];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("pixel {v} outside [0, 1] at row {i}")));
            }
            img.push((v * 255.0).round() as u8);
        }
    }
    let mut lab = Vec::with_capacity(8 + ds.n());
    IdxHeader {
        magic: IDX_LABELS_MAGIC,
        dims: vec![ds.n() as u32],
    }
    .write(&mut lab);
    lab.extend(target.values.iter().map(|&v| v as u8));
    fs::write(images_path, img).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, lab).map_err(|e| Error::io(labels_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Location;

    fn images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        IdxHeader {
            magic: IDX_IMAGES_MAGIC,
            dims: vec![count, rows, cols],
        }
        .write(&mut v);
        v.extend_from_slice(pixels);
        v
    }

    fn labels(values: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        IdxHeader {
            magic: IDX_LABELS_MAGIC,
            dims: vec![values.len() as u32],
        }
        .write(&mut v);
        v.extend_from_slice(values);
        v
    }

    #[test]
    fn two_by_two_image_scales_to_unit_interval() {
        let bytes = images(1, 2, 2, &[0, 255, 0, 255]);
        let (x, r, c) = parse_idx_images(&bytes, Path::new("t")).unwrap();
        assert_eq!((r, c), (2, 2));
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn image_magic_in_labels_file_fails_at_offset_zero() {
        let bytes = images(1, 1, 1, &[3]);
        let err = parse_idx_labels(&bytes, Path::new("labels")).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, Location::Byte(0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_reports_end_offset() {
        let mut bytes = images(2, 2, 2, &[1; 8]);
        bytes.truncate(20);
        match parse_idx_images(&bytes, Path::new("t")).unwrap_err() {
            Error::Parse { location, message, .. } => {
                assert_eq!(location, Location::Byte(20));
                assert!(message.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        fs::write(&ip, images(2, 1, 1, &[1, 2])).unwrap();
        fs::write(&lp, labels(&[0, 1, 1])).unwrap();
        let err = read_idx_pair(&ip, &lp).unwrap_err();
        assert!(matches!(err, Error::Parse { location: Location::Byte(4), .. }), "{err}");
    }

    #[test]
    fn round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        let px: Vec<u8> = (0..3 * 6).map(|i| (i * 37 % 256) as u8).collect();
        fs::write(&ip, images(3, 2, 3, &px)).unwrap();
        fs::write(&lp, labels(&[4, 0, 9])).unwrap();
        let ds = read_idx_pair(&ip, &lp).unwrap();
        assert_eq!(ds.p(), 6);
        assert_eq!(ds.target().unwrap().class_count, 10);
        let ip2 = dir.path().join("i2");
        let lp2 = dir.path().join("l2");
        write_idx_pair(&ds, 2, 3, &ip2, &lp2).unwrap();
        assert_eq!(fs::read(&ip).unwrap(), fs::read(&ip2).unwrap());
        assert_eq!(fs::read(&lp).unwrap(), fs::read(&lp2).unwrap());
        let again = read_idx_pair(&ip2, &lp2).unwrap();
        assert_eq!(again, ds);
    }
}
