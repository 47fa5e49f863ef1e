//! Dataset ingestion from directory layouts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::is_supported_image;

/// How images and class labels are arranged on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetLayout {
    /// One directory per class, images directly inside.
    ClassDirs,
    /// One directory per class, one subdirectory per physical sample group
    /// inside each class (KTH-style).
    GroupDirs,
    /// All images in one directory; the class label is the file-stem prefix
    /// before the first underscore.
    Flat,
}

impl DatasetLayout {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "uiuc" | "class-dirs" => Ok(DatasetLayout::ClassDirs),
            "kth" | "group-dirs" => Ok(DatasetLayout::GroupDirs),
            "flat" => Ok(DatasetLayout::Flat),
            other => Err(Error::InvalidParameter(format!(
                "unknown dataset layout '{other}' (expected uiuc, kth or flat)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DatasetLayout::ClassDirs => "uiuc",
            DatasetLayout::GroupDirs => "kth",
            DatasetLayout::Flat => "flat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub path: PathBuf,
    pub class_id: usize,
    /// Physical sample group for group-holdout protocols; `None` outside the
    /// group layout.
    pub group_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub root: PathBuf,
    pub layout: DatasetLayout,
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
    /// Distinct group directory names in sorted order (group layout only).
    pub group_names: Vec<String>,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_size(&self, class_id: usize) -> usize {
        self.samples
            .iter()
            .filter(|s| s.class_id == class_id)
            .count()
    }
}

/// Loads a dataset with deterministic ordering: classes by sorted directory
/// name, samples lexicographically by path.
pub fn load_dataset(root: &Path, layout: DatasetLayout) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| root.display().to_string());

    let (samples, class_names, group_names) = match layout {
        DatasetLayout::ClassDirs => load_class_dirs(root)?,
        DatasetLayout::GroupDirs => load_group_dirs(root)?,
        DatasetLayout::Flat => load_flat(root)?,
    };

    if class_names.len() < 2 {
        return Err(Error::Dataset(format!(
            "{}: need at least 2 classes, found {}",
            root.display(),
            class_names.len()
        )));
    }
    Ok(Dataset {
        name,
        root: root.to_path_buf(),
        layout,
        samples,
        class_names,
        group_names,
    })
}

type LoadedLayout = (Vec<Sample>, Vec<String>, Vec<String>);

fn load_class_dirs(root: &Path) -> Result<LoadedLayout> {
    let class_dirs = sorted_subdirs(root)?;
    let mut samples = Vec::new();
    let mut class_names = Vec::new();
    for (class_id, dir) in class_dirs.iter().enumerate() {
        let images = sorted_images(dir)?;
        if images.is_empty() {
            return Err(Error::Dataset(format!(
                "class directory {} contains no images",
                dir.display()
            )));
        }
        class_names.push(dir_name(dir));
        samples.extend(images.into_iter().map(|path| Sample {
            path,
            class_id,
            group_id: None,
        }));
    }
    Ok((samples, class_names, Vec::new()))
}

fn load_group_dirs(root: &Path) -> Result<LoadedLayout> {
    let class_dirs = sorted_subdirs(root)?;
    // Group ids align across classes through the sorted union of group names.
    let mut group_names: Vec<String> = Vec::new();
    for dir in &class_dirs {
        for g in sorted_subdirs(dir)? {
            let name = dir_name(&g);
            if !group_names.contains(&name) {
                group_names.push(name);
            }
        }
    }
    group_names.sort();
    if group_names.is_empty() {
        return Err(Error::Dataset(format!(
            "{}: group layout requires sample-group subdirectories",
            root.display()
        )));
    }

    let mut samples = Vec::new();
    let mut class_names = Vec::new();
    for (class_id, dir) in class_dirs.iter().enumerate() {
        let mut class_total = 0;
        for group_dir in sorted_subdirs(dir)? {
            let group_id = group_names
                .iter()
                .position(|n| *n == dir_name(&group_dir))
                .expect("group name collected above");
            let images = sorted_images(&group_dir)?;
            class_total += images.len();
            samples.extend(images.into_iter().map(|path| Sample {
                path,
                class_id,
                group_id: Some(group_id),
            }));
        }
        if class_total == 0 {
            return Err(Error::Dataset(format!(
                "class directory {} contains no images",
                dir.display()
            )));
        }
        class_names.push(dir_name(dir));
    }
    Ok((samples, class_names, group_names))
}

fn load_flat(root: &Path) -> Result<LoadedLayout> {
    let images = sorted_images(root)?;
    if images.is_empty() {
        return Err(Error::Dataset(format!(
            "{} contains no images",
            root.display()
        )));
    }
    let mut class_names: Vec<String> = Vec::new();
    let mut labeled = Vec::new();
    for path in images {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let class = match stem.split_once('_') {
            Some((prefix, _)) if !prefix.is_empty() => prefix.to_string(),
            _ => {
                return Err(Error::Dataset(format!(
                    "{}: flat layout expects <class>_<id> file names",
                    path.display()
                )))
            }
        };
        if !class_names.contains(&class) {
            class_names.push(class.clone());
        }
        labeled.push((path, class));
    }
    class_names.sort();
    let samples = labeled
        .into_iter()
        .map(|(path, class)| Sample {
            class_id: class_names.iter().position(|c| *c == class).unwrap(),
            path,
            group_id: None,
        })
        .collect();
    Ok((samples, class_names, Vec::new()))
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn sorted_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && is_supported_image(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn dir_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}
