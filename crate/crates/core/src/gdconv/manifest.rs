//! On-disk form of [`GDConvParams`]: a JSON manifest next to one GDCF file per field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{InterpKind, InterpVariant};
use crate::io::{read_field, write_field};

use super::params::{GDConvParams, ParamField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsManifest {
    pub n_points: usize,
    pub t_plus_1: usize,
    pub height: usize,
    pub width: usize,
    pub interp_kind: InterpVariant,
    /// Field name to GDCF file, relative to the manifest's directory.
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
}

fn default_file(id: ParamField) -> String {
    format!("{}.gdcf", id.name())
}

/// Writes `manifest.json` plus field files into `dir`; returns the manifest path.
pub fn save_params(dir: impl AsRef<Path>, params: &GDConvParams, kind: &InterpKind) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut fields = BTreeMap::new();
    for id in ParamField::ALL {
        let file = default_file(id);
        write_field(dir.join(&file), params.field(id))?;
        fields.insert(id.name().to_string(), file);
    }
    let manifest = ParamsManifest {
        n_points: params.n_points(),
        t_plus_1: params.t_plus_1(),
        height: params.height(),
        width: params.width(),
        interp_kind: kind.variant,
        fields,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Loads parameters and the interpolation kind named by a manifest.
pub fn load_params(manifest_path: impl AsRef<Path>) -> Result<(GDConvParams, InterpKind)> {
    let manifest_path = manifest_path.as_ref();
    let manifest: ParamsManifest = serde_json::from_slice(&std::fs::read(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let load = |id: ParamField| {
        let file = manifest
            .fields
            .get(id.name())
            .cloned()
            .unwrap_or_else(|| default_file(id));
        read_field(dir.join(file))
    };
    let params = GDConvParams::new(
        load(ParamField::Weights)?,
        load(ParamField::Dx)?,
        load(ParamField::Dy)?,
        load(ParamField::Z)?,
        load(ParamField::Modulation)?,
        load(ParamField::SupDx)?,
        load(ParamField::SupDy)?,
    )?;
    if params.n_points() != manifest.n_points
        || params.t_plus_1() != manifest.t_plus_1
        || params.height() != manifest.height
        || params.width() != manifest.width
    {
        return Err(Error::Format(format!(
            "manifest declares N={} T+1={} {}x{}, fields hold N={} T+1={} {}x{}",
            manifest.n_points,
            manifest.t_plus_1,
            manifest.height,
            manifest.width,
            params.n_points(),
            params.t_plus_1(),
            params.height(),
            params.width()
        )));
    }
    Ok((params, InterpKind::new(manifest.interp_kind)))
}
