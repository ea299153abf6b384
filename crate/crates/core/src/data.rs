//! MNIST IDX and CIFAR binary readers, class-balanced subsets and seeded
//! shuffling.
//!
//! Pixels are kept as the raw bytes read from disk and scaled by 1/255 on
//! access, so a loaded dataset round-trips bit-exactly and a full CIFAR
//! training set stays around 150 MB.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ReadBytesExt};
use ndarray::{Array3, Array4, ArrayView3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};

pub const DATA_DIR_ENV: &str = "OPLIXNET_DATA";

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

const CIFAR_PIXELS: usize = 32 * 32 * 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CifarVariant {
    Cifar10,
    Cifar100,
}

impl CifarVariant {
    fn label_bytes(&self) -> usize {
        match self {
            CifarVariant::Cifar10 => 1,
            CifarVariant::Cifar100 => 2,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            CifarVariant::Cifar10 => 10,
            CifarVariant::Cifar100 => 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `N x H x W x C` raw bytes.
    pixels: Array4<u8>,
    labels: Vec<usize>,
    pub classes: usize,
    pub name: String,
    pub split: String,
}

impl Dataset {
    pub fn new(pixels: Array4<u8>, labels: Vec<usize>, classes: usize, name: &str, split: &str) -> Result<Self> {
        if pixels.len_of(Axis(0)) != labels.len() {
            return Err(Error::InvalidShape(format!(
                "{} images but {} labels",
                pixels.len_of(Axis(0)),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidShape(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Dataset {
            pixels,
            labels,
            classes,
            name: name.to_string(),
            split: split.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(H, W, C)`.
    pub fn image_shape(&self) -> (usize, usize, usize) {
        let (_, h, w, c) = self.pixels.dim();
        (h, w, c)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn raw(&self) -> &Array4<u8> {
        &self.pixels
    }

    pub fn raw_image(&self, i: usize) -> ArrayView3<'_, u8> {
        self.pixels.index_axis(Axis(0), i)
    }

    /// Image `i` scaled to [0, 1].
    pub fn image(&self, i: usize) -> Array3<f64> {
        self.raw_image(i).mapv(|p| p as f64 / 255.0)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// The samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            pixels: self.pixels.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            name: self.name.clone(),
            split: self.split.clone(),
        }
    }

    /// First `n` samples (or all, if fewer).
    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// `n_per_class` samples of every class, drawn by a seeded shuffle and
    /// kept in their original order.
    pub fn subset(&self, n_per_class: usize, seed: u64) -> Result<Dataset> {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.classes];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = Vec::with_capacity(n_per_class * self.classes);
        for (class, members) in by_class.iter_mut().enumerate() {
            if members.len() < n_per_class {
                return Err(Error::InsufficientSamples {
                    class,
                    have: members.len(),
                    need: n_per_class,
                });
            }
            members.shuffle(&mut rng);
            chosen.extend_from_slice(&members[..n_per_class]);
        }
        chosen.sort_unstable();
        Ok(self.select(&chosen))
    }

    pub fn shuffled(&self, seed: u64) -> Dataset {
        self.select(&permutation(seed, self.len()))
    }
}

/// Permutation of `0..n` determined by `seed` alone.
pub fn permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

fn format_err(path: &Path, kind: FormatError) -> Error {
    Error::Format {
        path: path.display().to_string(),
        kind,
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Reads the magic number and `dims` big-endian sizes, returning them with
/// the payload offset.
fn idx_header(path: &Path, bytes: &[u8], magic: u32, dims: usize) -> Result<(Vec<usize>, usize)> {
    let header = 4 * (1 + dims);
    if bytes.len() < header {
        return Err(format_err(path, FormatError::Truncated { needed: header, actual: bytes.len() }));
    }
    let mut cur = Cursor::new(bytes);
    let found = cur.read_u32::<BigEndian>()?;
    if found != magic {
        return Err(format_err(path, FormatError::BadMagic { expected: magic, found }));
    }
    let sizes = (0..dims)
        .map(|_| cur.read_u32::<BigEndian>().map(|v| v as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    let needed = header + sizes.iter().product::<usize>();
    if bytes.len() < needed {
        return Err(format_err(path, FormatError::Truncated { needed, actual: bytes.len() }));
    }
    Ok((sizes, header))
}

/// Parses an IDX image/label pair (MNIST layout) with 10 classes.
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<Dataset> {
    let img = read_file(image_path)?;
    let lab = read_file(label_path)?;
    let (isz, ioff) = idx_header(image_path, &img, IDX_IMAGE_MAGIC, 3)?;
    let (lsz, loff) = idx_header(label_path, &lab, IDX_LABEL_MAGIC, 1)?;
    let (n, h, w) = (isz[0], isz[1], isz[2]);
    if n != lsz[0] {
        return Err(format_err(image_path, FormatError::CountMismatch { images: n, labels: lsz[0] }));
    }
    if n == 0 {
        return Err(format_err(image_path, FormatError::Empty));
    }
    let classes = 10;
    let labels = lab[loff..loff + n]
        .iter()
        .map(|&l| {
            if (l as usize) < classes {
                Ok(l as usize)
            } else {
                Err(format_err(label_path, FormatError::LabelOutOfRange { label: l, classes }))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let pixels = Array4::from_shape_vec((n, h, w, 1), img[ioff..ioff + n * h * w].to_vec())
        .map_err(|e| Error::InvalidShape(e.to_string()))?;
    let split = image_path
        .file_name()
        .map(|f| f.to_string_lossy().split('-').next().unwrap_or("").to_string())
        .unwrap_or_default();
    Dataset::new(pixels, labels, classes, "mnist", &split)
}

/// Parses CIFAR binary batches: one label byte (two for CIFAR-100, coarse
/// then fine) followed by 3072 channel-planar RGB bytes per row.
pub fn load_cifar(paths: &[PathBuf], variant: CifarVariant) -> Result<Dataset> {
    let row = variant.label_bytes() + CIFAR_PIXELS;
    let classes = variant.classes();
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let bytes = read_file(path)?;
        if bytes.is_empty() {
            return Err(format_err(path, FormatError::Empty));
        }
        if bytes.len() % row != 0 {
            return Err(format_err(path, FormatError::RowSize { len: bytes.len(), row }));
        }
        for record in bytes.chunks_exact(row) {
            let label = record[variant.label_bytes() - 1];
            if label as usize >= classes {
                return Err(format_err(path, FormatError::LabelOutOfRange { label, classes }));
            }
            labels.push(label as usize);
            let planes = &record[variant.label_bytes()..];
            for p in 0..1024 {
                pixels.extend_from_slice(&[planes[p], planes[1024 + p], planes[2048 + p]]);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Format {
            path: "<no files>".into(),
            kind: FormatError::Empty,
        });
    }
    let n = labels.len();
    let pixels = Array4::from_shape_vec((n, 32, 32, 3), pixels).map_err(|e| Error::InvalidShape(e.to_string()))?;
    let name = match variant {
        CifarVariant::Cifar10 => "cifar10",
        CifarVariant::Cifar100 => "cifar100",
    };
    let split = paths
        .first()
        .and_then(|p| p.file_stem())
        .map(|s| if s.to_string_lossy().contains("test") { "test" } else { "train" })
        .unwrap_or("train");
    Dataset::new(pixels, labels, classes, name, split)
}

/// `--data-dir` if given, else `$OPLIXNET_DATA`.
pub fn resolve_data_dir(flag: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.to_path_buf());
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(v) if !v.is_empty() => Ok(PathBuf::from(v)),
        _ => Err(Error::Config(format!(
            "no data directory: pass --data-dir or set {DATA_DIR_ENV}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    Mnist,
    Cifar10,
    Cifar100,
}

impl std::str::FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetName::Mnist),
            "cifar10" | "cifar-10" => Ok(DatasetName::Cifar10),
            "cifar100" | "cifar-100" => Ok(DatasetName::Cifar100),
            other => Err(Error::Config(format!("unknown dataset '{other}'"))),
        }
    }
}

impl DatasetName {
    /// The dataset a model input shape is trained on.
    pub fn for_input(input: (usize, usize, usize), classes: usize) -> Option<Self> {
        match (input, classes) {
            ((28, 28, 1), 10) | ((14, 14, 1), 10) => Some(DatasetName::Mnist),
            ((32, 32, 3), 10) => Some(DatasetName::Cifar10),
            ((32, 32, 3), 100) => Some(DatasetName::Cifar100),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::Cifar10 => "cifar10",
            DatasetName::Cifar100 => "cifar100",
        }
    }
}

fn first_existing(candidates: &[PathBuf]) -> Option<PathBuf> {
    candidates.iter().find(|p| p.exists()).cloned()
}

/// Loads a standard split from `dir`. MNIST files may sit in `dir` or
/// `dir/mnist`; CIFAR batches in `dir/cifar-10-batches-bin` and
/// `dir/cifar-100-binary`.
pub fn load_standard(dir: &Path, name: DatasetName, train: bool) -> Result<Dataset> {
    let missing = |what: &str| {
        Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{what} not found under {}", dir.display()),
        ))
    };
    match name {
        DatasetName::Mnist => {
            let prefix = if train { "train" } else { "t10k" };
            let find = |suffix: &str| {
                let f = format!("{prefix}-{suffix}");
                first_existing(&[dir.join(&f), dir.join("mnist").join(&f)]).ok_or_else(|| missing(&f))
            };
            load_idx(&find("images-idx3-ubyte")?, &find("labels-idx1-ubyte")?)
        }
        DatasetName::Cifar10 => {
            let base = first_existing(&[dir.join("cifar-10-batches-bin"), dir.join("cifar10")])
                .ok_or_else(|| missing("cifar-10-batches-bin"))?;
            let files: Vec<PathBuf> = if train {
                (1..=5).map(|i| base.join(format!("data_batch_{i}.bin"))).collect()
            } else {
                vec![base.join("test_batch.bin")]
            };
            load_cifar(&files, CifarVariant::Cifar10)
        }
        DatasetName::Cifar100 => {
            let base = first_existing(&[dir.join("cifar-100-binary"), dir.join("cifar100")])
                .ok_or_else(|| missing("cifar-100-binary"))?;
            let file = base.join(if train { "train.bin" } else { "test.bin" });
            load_cifar(&[file], CifarVariant::Cifar100)
        }
    }
}

/// 2x2 average pooling of every image (28x28 MNIST to the 14x14 inputs of
/// the small zoo models). Rounds half up to stay in bytes.
pub fn downsample2(ds: &Dataset) -> Result<Dataset> {
    let (n, h, w, c) = ds.pixels.dim();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::InvalidShape(format!("cannot halve {h}x{w} images")));
    }
    let out = Array4::from_shape_fn((n, h / 2, w / 2, c), |(i, r, col, ch)| {
        let s: u32 = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(dr, dc)| ds.pixels[[i, 2 * r + dr, 2 * col + dc, ch]] as u32)
            .sum();
        s.div_ceil(4).min(255) as u8
    });
    Dataset::new(out, ds.labels.clone(), ds.classes, &ds.name, &ds.split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use byteorder::WriteBytesExt;
    use std::io::Write;

    fn idx_images(n: u32, h: u32, w: u32, pixels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.write_u32::<BigEndian>(IDX_IMAGE_MAGIC).unwrap();
        for d in [n, h, w] {
            v.write_u32::<BigEndian>(d).unwrap();
        }
        v.extend_from_slice(pixels);
        v
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.write_u32::<BigEndian>(IDX_LABEL_MAGIC).unwrap();
        v.write_u32::<BigEndian>(labels.len() as u32).unwrap();
        v.extend_from_slice(labels);
        v
    }

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    #[test]
    fn idx_fixture_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..2 * 2 * 3).map(|i| (i * 20) as u8).collect();
        let ip = write(dir.path(), "train-images", &idx_images(2, 2, 3, &pixels));
        let lp = write(dir.path(), "train-labels", &idx_labels(&[7, 1]));
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.image_shape(), (2, 3, 1));
        assert_eq!(ds.labels(), &[7, 1]);
        assert_eq!(ds.raw().iter().copied().collect::<Vec<_>>(), pixels);
        assert_eq!(ds.image(1)[[1, 2, 0]], 220.0 / 255.0);
        assert_eq!(ds.split, "train");
    }

    #[test]
    fn idx_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let good_img = idx_images(2, 2, 2, &[0; 8]);
        let lp = write(dir.path(), "l", &idx_labels(&[0, 1]));

        let mut bad = good_img.clone();
        bad[3] = 0x02;
        let ip = write(dir.path(), "bad", &bad);
        match load_idx(&ip, &lp) {
            Err(Error::Format { kind: FormatError::BadMagic { found, .. }, .. }) => assert_eq!(found, 0x802),
            other => panic!("{other:?}"),
        }

        let ip = write(dir.path(), "short", &good_img[..good_img.len() - 1]);
        assert!(matches!(
            load_idx(&ip, &lp),
            Err(Error::Format { kind: FormatError::Truncated { .. }, .. })
        ));

        let ip = write(dir.path(), "ok", &good_img);
        let lp3 = write(dir.path(), "l3", &idx_labels(&[0, 1, 2]));
        assert!(matches!(
            load_idx(&ip, &lp3),
            Err(Error::Format { kind: FormatError::CountMismatch { images: 2, labels: 3 }, .. })
        ));

        let lbad = write(dir.path(), "lbad", &idx_labels(&[0, 10]));
        assert!(matches!(
            load_idx(&ip, &lbad),
            Err(Error::Format { kind: FormatError::LabelOutOfRange { label: 10, .. }, .. })
        ));
    }

    #[test]
    fn idx_truncation_at_every_boundary() {
        let dir = tempfile::tempdir().unwrap();
        let img = idx_images(1, 2, 2, &[1, 2, 3, 4]);
        let lp = write(dir.path(), "l", &idx_labels(&[3]));
        for cut in 0..img.len() {
            let ip = write(dir.path(), "i", &img[..cut]);
            assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { .. })), "cut {cut}");
        }
    }

    fn cifar_row(label: &[u8], f: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut v = label.to_vec();
        v.extend((0..CIFAR_PIXELS).map(f));
        v
    }

    #[test]
    fn cifar_planar_to_interleaved() {
        let dir = tempfile::tempdir().unwrap();
        let row = cifar_row(&[4], |i| (i % 251) as u8);
        let p = write(dir.path(), "data_batch_1.bin", &row);
        let ds = load_cifar(&[p], CifarVariant::Cifar10).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.labels(), &[4]);
        let img = ds.raw_image(0);
        for r in 0..32 {
            for c in 0..32 {
                for ch in 0..3 {
                    assert_eq!(img[[r, c, ch]], row[1 + ch * 1024 + r * 32 + c]);
                }
            }
        }
    }

    #[test]
    fn cifar100_uses_fine_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "train.bin", &cifar_row(&[3, 87], |_| 0));
        let ds = load_cifar(&[p], CifarVariant::Cifar100).unwrap();
        assert_eq!(ds.labels(), &[87]);
        assert_eq!(ds.classes, 100);
    }

    #[test]
    fn cifar_errors() {
        let dir = tempfile::tempdir().unwrap();
        let empty = write(dir.path(), "empty.bin", &[]);
        assert!(matches!(
            load_cifar(&[empty], CifarVariant::Cifar10),
            Err(Error::Format { kind: FormatError::Empty, .. })
        ));
        let short = write(dir.path(), "short.bin", &[0; 3072]);
        assert!(matches!(
            load_cifar(&[short], CifarVariant::Cifar10),
            Err(Error::Format { kind: FormatError::RowSize { len: 3072, row: 3073 }, .. })
        ));
        let label = write(dir.path(), "label.bin", &cifar_row(&[10], |_| 0));
        assert!(matches!(
            load_cifar(&[label], CifarVariant::Cifar10),
            Err(Error::Format { kind: FormatError::LabelOutOfRange { label: 10, classes: 10 }, .. })
        ));
    }

    fn toy(n_per_class: usize, classes: usize) -> Dataset {
        let n = n_per_class * classes;
        let pixels = Array4::from_shape_fn((n, 2, 2, 1), |(i, _, _, _)| (i % 256) as u8);
        let labels = (0..n).map(|i| i % classes).collect();
        Dataset::new(pixels, labels, classes, "toy", "train").unwrap()
    }

    #[test]
    fn subset_balanced_and_deterministic() {
        let ds = toy(150, 10);
        let s = ds.subset(100, 3).unwrap();
        assert_eq!(s.len(), 1000);
        assert!(s.class_counts().iter().all(|&c| c == 100));
        assert_eq!(s, ds.subset(100, 3).unwrap());
        assert_ne!(s, ds.subset(100, 4).unwrap());
        assert_eq!(ds.subset(150, 9).unwrap(), ds);
        assert!(matches!(
            ds.subset(151, 0),
            Err(Error::InsufficientSamples { have: 150, need: 151, .. })
        ));
    }

    #[test]
    fn permutation_is_pure() {
        let p = permutation(11, 50);
        assert_eq!(p, permutation(11, 50));
        let mut sorted = p.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn downsample_averages_blocks() {
        let pixels = Array4::from_shape_vec((1, 2, 2, 1), vec![0u8, 1, 2, 4]).unwrap();
        let ds = Dataset::new(pixels, vec![0], 10, "t", "train").unwrap();
        assert_eq!(downsample2(&ds).unwrap().raw()[[0, 0, 0, 0]], 2);
    }
}
