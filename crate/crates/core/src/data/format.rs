//! On-disk formats: `SWAB-MAT v1` matrices, CSV fallback, and bundle
//! directories.
//!
//! A `SWAB-MAT` file is a single JSON header line followed by
//! `rows * cols` little-endian `f32` values in row-major order. A bundle is
//! a directory with a `manifest.json` that lists the vocabulary, the models
//! and every matrix file by role.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bundle::{AssetBundle, ClassVocabulary, ModelAssets};
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAT_MAGIC: &str = "SWAB-MAT";
pub const MAT_VERSION: u32 = 1;
pub const BUNDLE_FORMAT: &str = "SWAB-BUNDLE";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Matrix roles understood by the bundle reader.
pub mod role {
    pub const CLASSNAME_EMBEDDINGS: &str = "classname_embeddings";
    pub const CLASSIFIER_EMBEDDINGS: &str = "classifier_embeddings";
    pub const CAPTION_EMBEDDINGS: &str = "caption_embeddings";
    pub const SYNONYM_EMBEDDINGS: &str = "synonym_embeddings";
    pub const IMAGE_EMBEDDINGS: &str = "image_embeddings";
    pub const CLASS_ACCURACIES: &str = "class_accuracies";
    pub const GAP_TABLE: &str = "gap_table";
    pub const TRANSPORT_PLAN: &str = "transport_plan";
}

/// JSON header line of a `SWAB-MAT` file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatHeader {
    pub magic: String,
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub role: String,
    pub dataset_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
}

impl MatHeader {
    pub fn new(role: &str, dataset_id: &str, rows: usize, cols: usize) -> Self {
        Self {
            magic: MAT_MAGIC.into(),
            version: MAT_VERSION,
            rows,
            cols,
            dtype: "f32".into(),
            role: role.into(),
            dataset_id: dataset_id.into(),
            model_id: None,
            class_index: None,
            level: None,
        }
    }

    pub fn model(mut self, model_id: &str) -> Self {
        self.model_id = Some(model_id.into());
        self
    }

    pub fn class(mut self, class_index: usize) -> Self {
        self.class_index = Some(class_index);
        self
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), message: message.into() }
}

/// Writes `m` as a `SWAB-MAT` file. Values are stored as `f32`.
pub fn write_mat<T: Scalar>(path: &Path, header: &MatHeader, m: &DenseMatrix<T>) -> Result<()> {
    let mut header = header.clone();
    header.rows = m.rows();
    header.cols = m.cols();
    let mut buf = serde_json::to_vec(&header)?;
    buf.push(b'\n');
    buf.reserve(m.values().len() * 4);
    for v in m.values() {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Reads a `SWAB-MAT` file.
pub fn read_mat<T: Scalar>(path: &Path) -> Result<(MatHeader, DenseMatrix<T>)> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(format_err(path, "missing newline-terminated header"));
    }
    let header: MatHeader =
        serde_json::from_slice(&line[..line.len() - 1]).map_err(|e| format_err(path, format!("bad header: {e}")))?;
    if header.magic != MAT_MAGIC {
        return Err(format_err(path, format!("bad magic {:?}", header.magic)));
    }
    if header.version != MAT_VERSION {
        return Err(format_err(path, format!("unsupported version {}", header.version)));
    }
    if header.dtype != "f32" {
        return Err(format_err(path, format!("unsupported dtype {:?}", header.dtype)));
    }
    let expected = header.rows * header.cols * 4;
    let mut payload = Vec::with_capacity(expected);
    reader.read_to_end(&mut payload)?;
    if payload.len() < expected {
        return Err(format_err(
            path,
            format!("payload shorter than header rows·cols ({} of {expected} bytes)", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(format_err(path, "trailing bytes after payload"));
    }
    let values = payload.chunks_exact(4).map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect();
    let m = DenseMatrix::new(header.rows, header.cols, values).map_err(|e| format_err(path, e.to_string()))?;
    Ok((header, m))
}

/// Writes `m` as CSV with a `c0,c1,...` header row.
pub fn write_csv<T: Scalar>(path: &Path, m: &DenseMatrix<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..m.cols()).map(|c| format!("c{c}")))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| (v.as_f64() as f32).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV matrix with a header row.
pub fn read_csv<T: Scalar>(path: &Path) -> Result<DenseMatrix<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let cols = r.headers()?.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != cols {
            return Err(format_err(path, format!("row {rows} has {} fields, expected {cols}", rec.len())));
        }
        for field in rec.iter() {
            let v: f32 =
                field.trim().parse().map_err(|_| format_err(path, format!("bad number {field:?} in row {rows}")))?;
            values.push(T::of(v as f64));
        }
        rows += 1;
    }
    DenseMatrix::new(rows, cols, values).map_err(|e| format_err(path, e.to_string()))
}

/// Reads a matrix file, dispatching on extension (`.csv` or `SWAB-MAT`).
pub fn read_matrix_file<T: Scalar>(path: &Path) -> Result<(Option<MatHeader>, DenseMatrix<T>)> {
    if is_csv(path) {
        Ok((None, read_csv(path)?))
    } else {
        let (h, m) = read_mat(path)?;
        Ok((Some(h), m))
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Storage encoding for bundle matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixEncoding {
    SwabMat,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestModel {
    pub model_id: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imagenet_accuracy: Option<f32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_gap_rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub role: String,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_index: Option<usize>,
}

/// `manifest.json` of a bundle directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub version: u32,
    pub dataset_id: String,
    pub classes: Vec<String>,
    pub models: Vec<ManifestModel>,
    pub files: Vec<FileEntry>,
}

/// Summary of what [`read_bundle`] loaded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BundleReadInfo {
    pub csv_files: usize,
    pub swab_mat_files: usize,
}

impl BundleReadInfo {
    pub fn format_note(&self) -> &'static str {
        match (self.swab_mat_files, self.csv_files) {
            (_, 0) => "SWAB-MAT",
            (0, _) => "CSV",
            _ => "mixed SWAB-MAT/CSV",
        }
    }
}

/// Role, file-name tag and optional per-class blocks.
type PerClassFiles<'a, T> = (&'static str, &'static str, Option<&'a Vec<DenseMatrix<T>>>);

/// Writes a bundle directory (created if needed).
pub fn write_bundle<T: Scalar>(dir: &Path, bundle: &AssetBundle<T>, encoding: MatrixEncoding) -> Result<()> {
    fs::create_dir_all(dir)?;
    let ext = match encoding {
        MatrixEncoding::SwabMat => "swab",
        MatrixEncoding::Csv => "csv",
    };
    let ds = &bundle.dataset_id;
    let mut files = Vec::new();
    let mut emit = |name: String, header: MatHeader, m: &DenseMatrix<T>| -> Result<()> {
        let path = dir.join(&name);
        match encoding {
            MatrixEncoding::SwabMat => write_mat(&path, &header, m)?,
            MatrixEncoding::Csv => write_csv(&path, m)?,
        }
        files.push(FileEntry {
            role: header.role.clone(),
            path: name,
            model_id: header.model_id.clone(),
            class_index: header.class_index,
        });
        Ok(())
    };

    emit(
        format!("classnames.{ext}"),
        MatHeader::new(role::CLASSNAME_EMBEDDINGS, ds, 0, 0),
        &bundle.classname_embeddings,
    )?;
    let mut models = Vec::new();
    for (idx, (model_id, m)) in bundle.models.iter().enumerate() {
        let stem = format!("m{idx:03}");
        emit(
            format!("{stem}_classifiers.{ext}"),
            MatHeader::new(role::CLASSIFIER_EMBEDDINGS, ds, 0, 0).model(model_id),
            &m.classifier_embeddings,
        )?;
        let per_class: [PerClassFiles<T>; 3] = [
            (role::CAPTION_EMBEDDINGS, "cap", Some(&m.caption_embeddings)),
            (role::SYNONYM_EMBEDDINGS, "syn", Some(&m.synonym_embeddings)),
            (role::IMAGE_EMBEDDINGS, "img", m.image_embeddings.as_ref()),
        ];
        for (role_name, short, blocks) in per_class {
            for (c, block) in blocks.into_iter().flatten().enumerate() {
                emit(
                    format!("{stem}_{short}_{c:04}.{ext}"),
                    MatHeader::new(role_name, ds, 0, 0).model(model_id).class(c),
                    block,
                )?;
            }
        }
        if let Some(g) = &m.class_gap_vectors {
            let mut h = MatHeader::new(role::GAP_TABLE, ds, 0, 0).model(model_id);
            h.level = Some("class_mean".into());
            emit(format!("{stem}_gap.{ext}"), h, g)?;
        }
        if let Some(acc) = &m.class_accuracies {
            let col = DenseMatrix::new(acc.len(), 1, acc.clone())?;
            emit(format!("{stem}_acc.{ext}"), MatHeader::new(role::CLASS_ACCURACIES, ds, 0, 0).model(model_id), &col)?;
        }
        models.push(ManifestModel {
            model_id: model_id.clone(),
            dim: m.dim(),
            imagenet_accuracy: m.imagenet_accuracy.map(|a| a.as_f64() as f32),
            missing_gap_rows: m.missing_gap_rows.clone(),
        });
    }
    let manifest = BundleManifest {
        format: BUNDLE_FORMAT.into(),
        version: 1,
        dataset_id: ds.clone(),
        classes: bundle.vocabulary.names.clone(),
        models,
        files,
    };
    let mut f = fs::File::create(dir.join(MANIFEST_FILE))?;
    f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<BundleManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)?;
    let manifest: BundleManifest =
        serde_json::from_str(&text).map_err(|e| format_err(&path, format!("bad manifest: {e}")))?;
    if manifest.format != BUNDLE_FORMAT || manifest.version != 1 {
        return Err(format_err(&path, format!("unsupported bundle format {} v{}", manifest.format, manifest.version)));
    }
    Ok(manifest)
}

#[derive(Default)]
struct PartialModel<T> {
    classifiers: Option<DenseMatrix<T>>,
    captions: BTreeMap<usize, DenseMatrix<T>>,
    synonyms: BTreeMap<usize, DenseMatrix<T>>,
    images: BTreeMap<usize, DenseMatrix<T>>,
    gap: Option<DenseMatrix<T>>,
    accuracies: Option<Vec<T>>,
}

fn dense_blocks<T: Scalar>(
    map: BTreeMap<usize, DenseMatrix<T>>,
    k: usize,
    dim: usize,
    fill_missing: bool,
) -> Vec<DenseMatrix<T>> {
    if map.is_empty() {
        return Vec::new();
    }
    if fill_missing {
        (0..k).map(|c| map.get(&c).cloned().unwrap_or_else(|| DenseMatrix::zeros(0, dim))).collect()
    } else {
        map.into_values().collect()
    }
}

/// Reads a bundle directory written by [`write_bundle`] or by an external
/// exporter following the same manifest contract.
fn model_entry<'a, T: Scalar>(
    parts: &'a mut BTreeMap<String, PartialModel<T>>,
    entry: &FileEntry,
    path: &Path,
) -> Result<&'a mut PartialModel<T>> {
    let id =
        entry.model_id.clone().ok_or_else(|| format_err(path, format!("role {} requires model_id", entry.role)))?;
    Ok(parts.entry(id).or_default())
}

pub fn read_bundle<T: Scalar>(dir: &Path) -> Result<(AssetBundle<T>, BundleReadInfo)> {
    let manifest = read_manifest(dir)?;
    let mut info = BundleReadInfo::default();
    let k = manifest.classes.len();
    let mut classnames = None;
    let mut parts: BTreeMap<String, PartialModel<T>> = BTreeMap::new();

    for entry in &manifest.files {
        let path: PathBuf = dir.join(&entry.path);
        let (header, m) = read_matrix_file::<T>(&path)?;
        match &header {
            Some(h) => {
                info.swab_mat_files += 1;
                if h.role != entry.role {
                    return Err(format_err(
                        &path,
                        format!("header role {:?} but manifest says {:?}", h.role, entry.role),
                    ));
                }
            }
            None => info.csv_files += 1,
        }
        let class_idx =
            || entry.class_index.ok_or_else(|| format_err(&path, format!("role {} requires class_index", entry.role)));
        match entry.role.as_str() {
            role::CLASSNAME_EMBEDDINGS => classnames = Some(m),
            role::CLASSIFIER_EMBEDDINGS => model_entry(&mut parts, entry, &path)?.classifiers = Some(m),
            role::CAPTION_EMBEDDINGS => {
                let c = class_idx()?;
                model_entry(&mut parts, entry, &path)?.captions.insert(c, m);
            }
            role::SYNONYM_EMBEDDINGS => {
                let c = class_idx()?;
                model_entry(&mut parts, entry, &path)?.synonyms.insert(c, m);
            }
            role::IMAGE_EMBEDDINGS => {
                let c = class_idx()?;
                model_entry(&mut parts, entry, &path)?.images.insert(c, m);
            }
            role::GAP_TABLE => model_entry(&mut parts, entry, &path)?.gap = Some(m),
            role::CLASS_ACCURACIES => {
                if m.cols() != 1 && m.rows() != 1 {
                    return Err(format_err(&path, "class_accuracies must be a single row or column"));
                }
                model_entry(&mut parts, entry, &path)?.accuracies = Some(m.into_values());
            }
            other => return Err(format_err(&path, format!("unknown role {other:?}"))),
        }
    }

    let classname_embeddings = classnames
        .ok_or_else(|| Error::MissingAssets(vec![format!("{}/{}", manifest.dataset_id, role::CLASSNAME_EMBEDDINGS)]))?;
    let mut models = BTreeMap::new();
    for mm in &manifest.models {
        let part = parts.remove(&mm.model_id).unwrap_or_default();
        let classifiers = part.classifiers.ok_or_else(|| {
            Error::MissingAssets(vec![format!(
                "{}/{}/{}",
                manifest.dataset_id,
                mm.model_id,
                role::CLASSIFIER_EMBEDDINGS
            )])
        })?;
        let images = dense_blocks(part.images, k, mm.dim, true);
        models.insert(
            mm.model_id.clone(),
            ModelAssets {
                classifier_embeddings: classifiers,
                caption_embeddings: dense_blocks(part.captions, k, mm.dim, true),
                synonym_embeddings: dense_blocks(part.synonyms, k, mm.dim, true),
                class_gap_vectors: part.gap,
                missing_gap_rows: mm.missing_gap_rows.clone(),
                image_embeddings: (!images.is_empty()).then_some(images),
                class_accuracies: part.accuracies,
                imagenet_accuracy: mm.imagenet_accuracy.map(|a| T::of(a as f64)),
            },
        );
    }
    if let Some(orphan) = parts.keys().next() {
        return Err(format_err(
            &dir.join(MANIFEST_FILE),
            format!("files reference model {orphan:?} absent from the model list"),
        ));
    }
    let bundle = AssetBundle {
        dataset_id: manifest.dataset_id.clone(),
        vocabulary: ClassVocabulary { dataset_id: manifest.dataset_id, names: manifest.classes },
        classname_embeddings,
        models,
    };
    Ok((bundle, info))
}
