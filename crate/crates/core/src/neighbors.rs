//! Exact k-nearest-neighbor tables.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Per-point neighbors sorted by ascending Euclidean distance, self excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborTable {
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl NeighborTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    /// Distances `T_1(x_i) <= ... <= T_k(x_i)`.
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// The first `k` columns as a table of their own.
    pub fn truncate(&self, k: usize) -> Result<NeighborTable> {
        if k == 0 || k > self.k {
            return Err(Error::invalid(format!("cannot truncate a {}-table to {k}", self.k)));
        }
        let n = self.len();
        let mut indices = Vec::with_capacity(n * k);
        let mut distances = Vec::with_capacity(n * k);
        for i in 0..n {
            indices.extend_from_slice(&self.indices(i)[..k]);
            distances.extend_from_slice(&self.distances(i)[..k]);
        }
        Ok(NeighborTable { k, indices, distances })
    }
}

/// Squared Euclidean distance, summed in four interleaved partial sums.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Exact Euclidean kNN by a full scan. Ties go to the lower index.
pub fn knn(cloud: &PointCloud, k: usize) -> Result<NeighborTable> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("knn needs 1 <= k <= N-1, got k={k}, N={n}")));
    }
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = cloud.row(i);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(q, cloud.row(j)), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_unstable_by(cmp);
            (cand.iter().map(|c| c.1).collect(), cand.iter().map(|c| c.0.sqrt()).collect())
        })
        .collect();
    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for (idx, dist) in rows {
        indices.extend(idx);
        distances.extend(dist);
    }
    Ok(NeighborTable { k, indices, distances })
}

/// Hex SHA-256 of a cloud's shape and coordinates.
pub fn cloud_digest(cloud: &PointCloud) -> String {
    let mut h = Sha256::new();
    h.update((cloud.len() as u64).to_le_bytes());
    h.update((cloud.dim() as u64).to_le_bytes());
    for x in cloud.as_slice() {
        h.update(x.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn cache_path(dir: &Path, cloud: &PointCloud, k: usize) -> PathBuf {
    dir.join(format!("{}-k{k}.knn", cloud_digest(cloud)))
}

fn write_table(path: &Path, t: &NeighborTable) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + t.indices.len() * 16);
    bytes.extend_from_slice(&(t.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&(t.k as u64).to_le_bytes());
    for &i in &t.indices {
        bytes.extend_from_slice(&(i as u64).to_le_bytes());
    }
    for &d in &t.distances {
        bytes.extend_from_slice(&d.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_table(path: &Path) -> Result<NeighborTable> {
    let bytes = fs::read(path)?;
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(i * 8..i * 8 + 8)
            .map(|s| s.try_into().expect("8 bytes"))
            .ok_or_else(|| Error::Format("truncated neighbor cache".into()))
    };
    let n = u64::from_le_bytes(word(0)?) as usize;
    let k = u64::from_le_bytes(word(1)?) as usize;
    if k == 0 || bytes.len() != 16 + n * k * 16 {
        return Err(Error::Format("neighbor cache has the wrong size".into()));
    }
    let indices = (0..n * k).map(|i| word(2 + i).map(|w| u64::from_le_bytes(w) as usize)).collect::<Result<_>>()?;
    let distances = (0..n * k).map(|i| word(2 + n * k + i).map(f64::from_le_bytes)).collect::<Result<_>>()?;
    Ok(NeighborTable { k, indices, distances })
}

/// [`knn`] backed by a file cache keyed by `(cloud digest, k)`.
pub fn knn_cached(cloud: &PointCloud, k: usize, dir: &Path) -> Result<NeighborTable> {
    let path = cache_path(dir, cloud, k);
    if path.exists() {
        if let Ok(t) = read_table(&path) {
            if t.len() == cloud.len() && t.k == k {
                return Ok(t);
            }
        }
    }
    let t = knn(cloud, k)?;
    fs::create_dir_all(dir)?;
    write_table(&path, &t)?;
    Ok(t)
}
