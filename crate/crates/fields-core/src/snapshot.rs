use crate::field::{ScalarField, SymmetricTensorField, VectorField};
use crate::grid::Grid;
use crate::FieldError;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

/// JSON sidecar written next to every binary snapshot.
#[derive(Serialize, Deserialize)]
pub struct Sidecar {
    pub grid: Grid,
    pub components: Vec<String>,
    pub units: String,
    pub provenance: String,
}

fn write_binary(path: &Path, data: &[f64]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&buf)
}

fn read_binary(path: &Path, expect: usize) -> Result<Vec<f64>, FieldError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| FieldError::Invalid(format!("read {}: {e}", path.display())))?;
    if bytes.len() != expect * 8 {
        return Err(FieldError::Invalid(format!(
            "{}: expected {} samples, found {}",
            path.display(),
            expect,
            bytes.len() / 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

fn save(
    path: &Path,
    grid: &Grid,
    data: &[f64],
    components: &[&str],
    provenance: &str,
) -> Result<(), FieldError> {
    write_binary(path, data).map_err(|e| FieldError::Invalid(format!("write: {e}")))?;
    let sc = Sidecar {
        grid: grid.clone(),
        components: components.iter().map(|s| s.to_string()).collect(),
        units: "SI-consistent, box units".into(),
        provenance: provenance.into(),
    };
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(&sc).unwrap(),
    )
    .map_err(|e| FieldError::Invalid(format!("sidecar: {e}")))
}

fn load_sidecar(path: &Path) -> Result<Sidecar, FieldError> {
    let text = std::fs::read_to_string(sidecar_path(path))
        .map_err(|e| FieldError::Invalid(format!("sidecar: {e}")))?;
    serde_json::from_str(&text).map_err(|e| FieldError::Invalid(format!("sidecar parse: {e}")))
}

pub fn save_scalar(path: &Path, f: &ScalarField, provenance: &str) -> Result<(), FieldError> {
    save(path, f.grid(), f.data(), &["value"], provenance)
}

pub fn save_vector(path: &Path, f: &VectorField, provenance: &str) -> Result<(), FieldError> {
    save(path, f.grid(), f.data(), &["x", "y", "z"], provenance)
}

pub fn save_tensor(
    path: &Path,
    f: &SymmetricTensorField,
    provenance: &str,
) -> Result<(), FieldError> {
    save(
        path,
        f.grid(),
        f.data(),
        &["xx", "xy", "xz", "yy", "yz", "zz"],
        provenance,
    )
}

pub fn load_scalar(path: &Path) -> Result<ScalarField, FieldError> {
    let sc = load_sidecar(path)?;
    let grid = Arc::new(sc.grid);
    let data = read_binary(path, grid.node_count())?;
    let mut f = ScalarField::zeros(&grid);
    f.data_mut().copy_from_slice(&data);
    Ok(f)
}

pub fn load_vector(path: &Path) -> Result<VectorField, FieldError> {
    let sc = load_sidecar(path)?;
    let grid = Arc::new(sc.grid);
    let data = read_binary(path, grid.node_count() * 3)?;
    let mut f = VectorField::zeros(&grid);
    f.data_mut().copy_from_slice(&data);
    Ok(f)
}

pub fn load_tensor(path: &Path) -> Result<SymmetricTensorField, FieldError> {
    let sc = load_sidecar(path)?;
    let grid = Arc::new(sc.grid);
    let data = read_binary(path, grid.node_count() * 6)?;
    let mut f = SymmetricTensorField::zeros(&grid);
    f.data_mut().copy_from_slice(&data);
    Ok(f)
}
