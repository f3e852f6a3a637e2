//! Point clouds and their on-disk format.
//!
//! A cloud is stored as two files: a raw matrix of little-endian `f64`
//! values in row-major order, and a JSON sidecar (`<path>.meta.json`)
//! holding the ground truth and provenance.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::manifolds::{Family, ManifoldSpec};
use crate::perturb::NoiseKind;

/// One entry of a cloud's append-only distortion log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distortion {
    /// Isometric re-embedding into a larger ambient space.
    Isometry { from: usize, to: usize, stream: String },
    Squeeze { epsilon: f64, stream: String },
    Noise { noise_kind: NoiseKind, sigma2: f64, stream: String },
}

/// An `N x d_a` sample matrix with its ground truth.
#[derive(Clone, Debug)]
pub struct PointCloud {
    data: Vec<f64>,
    n_points: usize,
    dim: usize,
    intrinsic_dim: f64,
    spec: Option<ManifoldSpec>,
    provenance: String,
    lineage: String,
    non_manifold: bool,
    distortions: Vec<Distortion>,
}

impl PointCloud {
    /// Build a cloud from row-major data. Rejects non-finite entries.
    pub fn from_rows(
        data: Vec<f64>,
        n_points: usize,
        dim: usize,
        intrinsic_dim: f64,
        provenance: impl Into<String>,
        lineage: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || n_points == 0 {
            return Err(Error::invalid("cloud must have at least one point and one coordinate"));
        }
        if data.len() != n_points * dim {
            return Err(Error::invalid(format!(
                "cloud data has {} values, expected {} x {}",
                data.len(),
                n_points,
                dim
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite entry in row {}", pos / dim)));
        }
        Ok(PointCloud {
            data,
            n_points,
            dim,
            intrinsic_dim,
            spec: None,
            provenance: provenance.into(),
            lineage: lineage.into(),
            non_manifold: false,
            distortions: Vec::new(),
        })
    }

    pub(crate) fn with_spec(mut self, spec: ManifoldSpec) -> Self {
        self.provenance = spec.family.as_str().to_owned();
        self.spec = Some(spec);
        self
    }

    pub(crate) fn mark_non_manifold(mut self) -> Self {
        self.non_manifold = true;
        self
    }

    /// Copy of this cloud with new coordinates and one more log entry.
    pub(crate) fn derived(&self, data: Vec<f64>, dim: usize, entry: Distortion) -> Result<Self> {
        let mut out = PointCloud::from_rows(
            data,
            self.n_points,
            dim,
            self.intrinsic_dim,
            self.provenance.clone(),
            self.lineage.clone(),
        )?;
        out.spec = self.spec.clone();
        out.non_manifold = self.non_manifold;
        out.distortions = self.distortions.clone();
        out.distortions.push(entry);
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    /// Ambient dimension `d_a`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ground-truth intrinsic dimension (fractional for fractal clouds).
    pub fn intrinsic_dim(&self) -> f64 {
        self.intrinsic_dim
    }

    pub fn spec(&self) -> Option<&ManifoldSpec> {
        self.spec.as_ref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn lineage(&self) -> &str {
        &self.lineage
    }

    pub fn is_non_manifold(&self) -> bool {
        self.non_manifold
    }

    pub fn distortions(&self) -> &[Distortion] {
        &self.distortions
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Row-major view of all coordinates.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> RealMatrix {
        RealMatrix::from_row_slice(self.n_points, self.dim, &self.data)
    }

    /// Cloud made of the selected rows, sharing ground truth and lineage.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.n_points {
                return Err(Error::invalid(format!("row {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
        }
        let mut out = PointCloud::from_rows(
            data,
            indices.len(),
            self.dim,
            self.intrinsic_dim,
            self.provenance.clone(),
            format!("{}/subsample", self.lineage),
        )?;
        out.spec = self.spec.clone();
        out.non_manifold = self.non_manifold;
        out.distortions = self.distortions.clone();
        Ok(out)
    }

    /// Cloud with every coordinate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= c);
        if out.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("scaling produced non-finite values"));
        }
        Ok(out)
    }

    /// Cloud with each row replaced by `row * m` (`m` is `d_a x d'`).
    pub fn transformed(&self, m: &RealMatrix) -> Result<Self> {
        if m.nrows() != self.dim {
            return Err(Error::invalid("transform row count must equal ambient dimension"));
        }
        let out_dim = m.ncols();
        let mut data = vec![0.0; self.n_points * out_dim];
        for (src, dst) in self.rows().zip(data.chunks_exact_mut(out_dim)) {
            for (j, d) in dst.iter_mut().enumerate() {
                *d = src.iter().enumerate().map(|(i, x)| x * m[(i, j)]).sum();
            }
        }
        let mut out = self.clone();
        out.data = data;
        out.dim = out_dim;
        Ok(out)
    }
}

/// Sidecar metadata written next to a cloud matrix file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub format: String,
    pub family: Option<Family>,
    pub provenance: String,
    pub n: usize,
    pub k: usize,
    pub k1: usize,
    pub k2: usize,
    pub d_i: f64,
    pub d_a: usize,
    #[serde(rename = "N")]
    pub n_points: usize,
    pub seed_lineage: String,
    pub non_manifold: bool,
    pub spec: Option<ManifoldSpec>,
    pub distortions: Vec<Distortion>,
}

pub const MATRIX_FORMAT: &str = "f64-le-row-major";

/// Path of the sidecar for a matrix file.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

impl PointCloud {
    pub fn meta(&self) -> CloudMeta {
        let (n, k, k1, k2) = self
            .spec
            .as_ref()
            .map(|s| (s.n, s.k, s.k1, s.k2))
            .unwrap_or((0, 0, 0, 0));
        CloudMeta {
            format: MATRIX_FORMAT.to_owned(),
            family: self.spec.as_ref().map(|s| s.family),
            provenance: self.provenance.clone(),
            n,
            k,
            k1,
            k2,
            d_i: self.intrinsic_dim,
            d_a: self.dim,
            n_points: self.n_points,
            seed_lineage: self.lineage.clone(),
            non_manifold: self.non_manifold,
            spec: self.spec.clone(),
            distortions: self.distortions.clone(),
        }
    }

    /// Write the matrix to `path` and the metadata to its sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        fs::write(meta_path(path), meta + "\n")?;
        Ok(())
    }

    /// Read a cloud written by [`PointCloud::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let meta: CloudMeta = serde_json::from_str(&fs::read_to_string(meta_path(path))?)?;
        if meta.format != MATRIX_FORMAT {
            return Err(Error::Format(format!("unknown matrix format {}", meta.format)));
        }
        let bytes = fs::read(path)?;
        let expected = meta.n_points * meta.d_a * 8;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "matrix file has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let mut cloud = PointCloud::from_rows(
            data,
            meta.n_points,
            meta.d_a,
            meta.d_i,
            meta.provenance,
            meta.seed_lineage,
        )?;
        cloud.spec = meta.spec;
        cloud.non_manifold = meta.non_manifold;
        cloud.distortions = meta.distortions;
        Ok(cloud)
    }

    /// Plain CSV export, one row per point, shortest round-trip decimals.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if self.n_points.saturating_mul(self.dim) > 10_000_000 {
            return Err(Error::ResourceLimit("CSV export limited to 1e7 values".into()));
        }
        let mut w = csv::Writer::from_path(path)?;
        let header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        w.write_record(&header)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let r = PointCloud::from_rows(vec![1.0, f64::NAN], 1, 2, 1.0, "t", "t");
        assert!(r.is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let cloud = PointCloud::from_rows(
            vec![0.1, -2.5, 1e-300, 3.0, 4.0, 5.0],
            3,
            2,
            1.0,
            "test",
            "seed/1",
        )
        .unwrap();
        cloud.save(&path).unwrap();
        let back = PointCloud::load(&path).unwrap();
        assert_eq!(back.as_slice(), cloud.as_slice());
        assert_eq!(back.meta(), cloud.meta());
        assert_eq!(fs::metadata(&path).unwrap().len(), 48);
    }

    #[test]
    fn truncated_matrix_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let cloud = PointCloud::from_rows(vec![1.0; 6], 3, 2, 1.0, "t", "t").unwrap();
        cloud.save(&path).unwrap();
        fs::write(&path, [0u8; 40]).unwrap();
        assert!(matches!(PointCloud::load(&path), Err(Error::Format(_))));
    }
}
