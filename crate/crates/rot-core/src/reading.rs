//! Reading-vector extraction: per-layer leading principal directions of the
//! difference-vector populations, sign-oriented and persisted as ROTV files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::format::{
    expect_eof, expect_magic, read_f64, read_f64_vec, read_string, read_u32, read_u8, write_f64,
    write_f64_slice, write_magic, write_string, write_u32, write_u8, FormatError,
};
use crate::linalg::{self, LinalgError, Vector};
use crate::populations::PopulationSet;

pub const READING_MAGIC: &[u8; 4] = b"ROTV";
const READING_VERSION: u32 = 1;

/// Orientation rule tag stored in provenance: the mean projection of the
/// population rows onto each vector is non-negative.
pub const ORIENTATION_MEAN_PROJECTION: &str = "mean_projection_nonneg";

#[derive(Debug, Error)]
pub enum ReadingError {
    #[error("layer {layer}: {source}")]
    Degenerate { layer: usize, source: LinalgError },
    #[error("layer {layer}: stored vector is not unit-norm")]
    NormViolation { layer: usize },
    #[error("reading-vector set has no layers")]
    Empty,
    #[error(transparent)]
    File(#[from] FormatError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadingProvenance {
    pub population_digest: String,
    pub model_id: String,
    pub query_count: usize,
    pub stimulus_count: usize,
    pub stimulus_kind: String,
}

/// Per-layer unit reading vectors with orientation and extraction metadata.
#[derive(Debug, Clone)]
pub struct ReadingVectorSet {
    vectors: BTreeMap<usize, Vector>,
    explained: BTreeMap<usize, f64>,
    pub centering: bool,
    pub orientation_rule: String,
    pub provenance: ReadingProvenance,
}

impl ReadingVectorSet {
    pub fn layers(&self) -> Vec<usize> {
        self.vectors.keys().copied().collect()
    }

    pub fn max_layer(&self) -> usize {
        *self.vectors.keys().next_back().expect("set is nonempty")
    }

    pub fn vector(&self, layer: usize) -> Option<&Vector> {
        self.vectors.get(&layer)
    }

    pub fn vectors(&self) -> impl Iterator<Item = (usize, &Vector)> {
        self.vectors.iter().map(|(k, v)| (*k, v))
    }

    /// Share of population variance along the reading vector.
    pub fn explained_share(&self, layer: usize) -> Option<f64> {
        self.explained.get(&layer).copied()
    }

    pub fn dim(&self) -> usize {
        self.vectors.values().next().map(Vector::len).unwrap_or(0)
    }
}

/// Extract one unit reading vector per layer: leading principal component
/// of the layer's difference rows, oriented so the mean row projection is
/// non-negative (pointing from negative toward positive stimuli).
pub fn extract_reading_vectors(
    pop: &PopulationSet,
    center: bool,
) -> Result<ReadingVectorSet, ReadingError> {
    let mut vectors = BTreeMap::new();
    let mut explained = BTreeMap::new();
    for (layer, matrix) in pop.matrices() {
        let lead = linalg::pca_leading(matrix, center)
            .map_err(|source| ReadingError::Degenerate { layer, source })?;
        let share = lead.explained_share();
        let mut direction = lead.direction;
        let mut mean_projection = 0.0;
        for row in matrix.rows() {
            mean_projection += linalg::dot(row, &direction).expect("population rows match dim");
        }
        mean_projection /= matrix.row_count() as f64;
        if mean_projection < 0.0 {
            direction = direction.scaled(-1.0);
        }
        vectors.insert(layer, direction);
        explained.insert(layer, share);
    }
    if vectors.is_empty() {
        return Err(ReadingError::Empty);
    }
    let p = pop.provenance();
    Ok(ReadingVectorSet {
        vectors,
        explained,
        centering: center,
        orientation_rule: ORIENTATION_MEAN_PROJECTION.to_string(),
        provenance: ReadingProvenance {
            population_digest: pop.digest(),
            model_id: p.model_id.clone(),
            query_count: p.query_count,
            stimulus_count: p.stimulus_count,
            stimulus_kind: p.stimulus_kind.clone(),
        },
    })
}

/// Assemble a set directly from vectors (synthetic readers for tests and
/// policy files). Vectors must be unit-norm.
pub fn reading_set_from_vectors(
    vectors: BTreeMap<usize, Vector>,
    centering: bool,
    provenance: ReadingProvenance,
) -> Result<ReadingVectorSet, ReadingError> {
    if vectors.is_empty() {
        return Err(ReadingError::Empty);
    }
    for (&layer, v) in &vectors {
        if (v.norm() - 1.0).abs() > 1e-6 {
            return Err(ReadingError::NormViolation { layer });
        }
    }
    let explained = vectors.keys().map(|&k| (k, 0.0)).collect();
    Ok(ReadingVectorSet {
        vectors,
        explained,
        centering,
        orientation_rule: ORIENTATION_MEAN_PROJECTION.to_string(),
        provenance,
    })
}

impl ReadingVectorSet {
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), FormatError> {
        write_magic(w, READING_MAGIC)?;
        write_u32(w, READING_VERSION)?;
        write_u8(w, self.centering as u8)?;
        write_string(w, &self.orientation_rule)?;
        write_string(w, &self.provenance.population_digest)?;
        write_string(w, &self.provenance.model_id)?;
        write_u32(w, self.provenance.query_count as u32)?;
        write_u32(w, self.provenance.stimulus_count as u32)?;
        write_string(w, &self.provenance.stimulus_kind)?;
        write_u32(w, self.vectors.len() as u32)?;
        for (&layer, vector) in &self.vectors {
            write_u32(w, layer as u32)?;
            write_u32(w, vector.len() as u32)?;
            write_f64(w, self.explained.get(&layer).copied().unwrap_or(0.0))?;
            write_f64_slice(w, vector.as_slice())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, ReadingError> {
        expect_magic(r, READING_MAGIC)?;
        let version = read_u32(r)?;
        if version != READING_VERSION {
            return Err(
                FormatError::corrupt(format!("unsupported reading-vector version {version}"))
                    .into(),
            );
        }
        let centering = match read_u8(r)? {
            0 => false,
            1 => true,
            other => return Err(FormatError::corrupt(format!("bad centering flag {other}")).into()),
        };
        let orientation_rule = read_string(r)?;
        let population_digest = read_string(r)?;
        let model_id = read_string(r)?;
        let query_count = read_u32(r)? as usize;
        let stimulus_count = read_u32(r)? as usize;
        let stimulus_kind = read_string(r)?;
        let layer_count = read_u32(r)? as usize;
        if layer_count == 0 {
            return Err(ReadingError::Empty);
        }
        let mut vectors = BTreeMap::new();
        let mut explained = BTreeMap::new();
        for _ in 0..layer_count {
            let layer = read_u32(r)? as usize;
            let dim = read_u32(r)? as usize;
            let share = read_f64(r)?;
            let values = read_f64_vec(r, dim)?;
            let vector = Vector::new(values)
                .map_err(|_| FormatError::corrupt("reading vector has non-finite entries"))?;
            if (vector.norm() - 1.0).abs() > 1e-6 {
                return Err(ReadingError::NormViolation { layer });
            }
            vectors.insert(layer, vector);
            explained.insert(layer, share);
        }
        Ok(Self {
            vectors,
            explained,
            centering,
            orientation_rule,
            provenance: ReadingProvenance {
                population_digest,
                model_id,
                query_count,
                stimulus_count,
                stimulus_kind,
            },
        })
    }
}

pub fn save_reading_vectors(set: &ReadingVectorSet, path: &Path) -> Result<(), ReadingError> {
    fs::write(path, set.to_bytes()).map_err(|e| ReadingError::File(FormatError::Io(e)))
}

pub fn load_reading_vectors(path: &Path) -> Result<ReadingVectorSet, ReadingError> {
    let bytes = fs::read(path).map_err(|e| ReadingError::File(FormatError::Io(e)))?;
    let mut r = Cursor::new(bytes.as_slice());
    let set = ReadingVectorSet::read_from(&mut r)?;
    expect_eof(&mut r).map_err(ReadingError::File)?;
    Ok(set)
}

/// Plain-text export for diffing: one layer per line, index then the
/// components (shortest round-trip decimal).
pub fn export_text(set: &ReadingVectorSet) -> String {
    let mut out = String::new();
    for (layer, vector) in set.vectors() {
        out.push_str(&layer.to_string());
        for &v in vector.as_slice() {
            out.push(' ');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SampleMatrix;
    use crate::populations::PopulationProvenance;
    use crate::rng::SplitMix64;
    use std::collections::BTreeMap;

    fn provenance() -> PopulationProvenance {
        PopulationProvenance {
            stimulus_digest: "abc".into(),
            model_id: "toy-test".into(),
            capture_position: "last_token".into(),
            query_count: 4,
            stimulus_count: 1,
            stimulus_kind: "zero_shot".into(),
        }
    }

    fn pop_from_rows(layer: usize, rows: Vec<Vec<f64>>) -> PopulationSet {
        let matrix = SampleMatrix::from_raw(rows).unwrap();
        let mut map = BTreeMap::new();
        map.insert(layer, matrix);
        PopulationSet::from_matrices(map, provenance()).unwrap()
    }

    #[test]
    fn rank_one_rows_give_normalized_direction() {
        // All rows equal v != 0, uncentered: R = v/|v| with positive mean
        // projection fixing the sign.
        let v = [3.0, 4.0];
        let pop = pop_from_rows(6, vec![v.to_vec(), v.to_vec(), v.to_vec()]);
        let set = extract_reading_vectors(&pop, false).unwrap();
        let r = set.vector(6).unwrap();
        assert!((r[0] - 0.6).abs() < 1e-12);
        assert!((r[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn orientation_follows_mean_projection() {
        // Rows {+u, -u, +u}: PCA direction is +-u, orientation picks +u.
        let u = [1.0, 0.0, 0.0];
        let pop =
            pop_from_rows(3, vec![u.to_vec(), u.iter().map(|v| -v).collect(), u.to_vec()]);
        let set = extract_reading_vectors(&pop, false).unwrap();
        let r = set.vector(3).unwrap();
        assert!(r[0] > 0.999, "oriented toward the majority sign");
    }

    #[test]
    fn planted_direction_recovery_uncentered() {
        // 128 rows = u + gaussian noise, sigma = 0.1 |u|.
        let dim = 24;
        let mut rng = SplitMix64::new(77);
        let mut u: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v /= norm);
        let sigma = 0.1;
        let rows: Vec<Vec<f64>> = (0..128)
            .map(|_| u.iter().map(|&ui| ui + sigma * rng.next_gaussian()).collect())
            .collect();
        let pop = pop_from_rows(5, rows);
        let set = extract_reading_vectors(&pop, false).unwrap();
        let r = set.vector(5).unwrap();
        let u_vec = Vector::new(u).unwrap();
        let cos = linalg::cosine(r, &u_vec).unwrap();
        assert!(cos >= 0.95, "cosine {cos}");
        // Cross-check against the independent covariance oracle.
        let oracle =
            linalg::test_oracle::leading_eigenvector_power(pop.matrix(5).unwrap(), false);
        assert!(linalg::cosine(r, &oracle).unwrap().abs() >= 1.0 - 1e-8);
    }

    #[test]
    fn degenerate_layer_reports_index() {
        let pop = pop_from_rows(4, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        match extract_reading_vectors(&pop, true) {
            Err(ReadingError::Degenerate { layer: 4, .. }) => {}
            other => panic!("expected degenerate layer 4, got {other:?}"),
        }
    }

    #[test]
    fn scale_invariance_after_orientation() {
        let mut rng = SplitMix64::new(8);
        let rows: Vec<Vec<f64>> =
            (0..16).map(|_| (0..6).map(|_| rng.next_gaussian()).collect()).collect();
        let scaled: Vec<Vec<f64>> =
            rows.iter().map(|r| r.iter().map(|v| v * 42.0).collect()).collect();
        let a = extract_reading_vectors(&pop_from_rows(2, rows), true).unwrap();
        let b = extract_reading_vectors(&pop_from_rows(2, scaled), true).unwrap();
        let va = a.vector(2).unwrap();
        let vb = b.vector(2).unwrap();
        for (x, y) in va.as_slice().iter().zip(vb.as_slice()) {
            assert!((x - y).abs() < 1e-9, "same vector after orientation");
        }
    }

    #[test]
    fn save_load_round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.rotv");
        let mut rng = SplitMix64::new(12);
        let rows: Vec<Vec<f64>> =
            (0..10).map(|_| (0..8).map(|_| rng.next_gaussian()).collect()).collect();
        let set = extract_reading_vectors(&pop_from_rows(6, rows), true).unwrap();
        save_reading_vectors(&set, &path).unwrap();
        let loaded = load_reading_vectors(&path).unwrap();
        assert_eq!(set.to_bytes(), loaded.to_bytes());
        assert_eq!(set.centering, loaded.centering);
        assert_eq!(set.provenance, loaded.provenance);
        let a = set.vector(6).unwrap();
        let b = loaded.vector(6).unwrap();
        assert_eq!(a.as_slice(), b.as_slice(), "elementwise zero difference");
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let mut rng = SplitMix64::new(12);
        let rows: Vec<Vec<f64>> =
            (0..6).map(|_| (0..4).map(|_| rng.next_gaussian()).collect()).collect();
        let set = extract_reading_vectors(&pop_from_rows(1, rows), true).unwrap();
        let mut bytes = set.to_bytes();
        bytes.truncate(bytes.len() - 9);
        let mut r = Cursor::new(bytes.as_slice());
        assert!(matches!(
            ReadingVectorSet::read_from(&mut r),
            Err(ReadingError::File(FormatError::Corrupt(_)))
        ));
    }

    #[test]
    fn zero_vector_in_file_is_norm_violation() {
        let mut rng = SplitMix64::new(12);
        let rows: Vec<Vec<f64>> =
            (0..6).map(|_| (0..4).map(|_| rng.next_gaussian()).collect()).collect();
        let set = extract_reading_vectors(&pop_from_rows(2, rows), true).unwrap();
        let mut bytes = set.to_bytes();
        // Zero out the vector payload (the trailing 4 * 8 bytes).
        let len = bytes.len();
        for b in &mut bytes[len - 32..] {
            *b = 0;
        }
        let mut r = Cursor::new(bytes.as_slice());
        assert!(matches!(
            ReadingVectorSet::read_from(&mut r),
            Err(ReadingError::NormViolation { layer: 2 })
        ));
    }

    #[test]
    fn text_export_lists_layers() {
        let mut vectors = BTreeMap::new();
        vectors.insert(2usize, Vector::new(vec![1.0, 0.0]).unwrap());
        vectors.insert(5usize, Vector::new(vec![0.0, -1.0]).unwrap());
        let set = reading_set_from_vectors(
            vectors,
            true,
            ReadingProvenance {
                population_digest: "d".into(),
                model_id: "m".into(),
                query_count: 1,
                stimulus_count: 1,
                stimulus_kind: "zero_shot".into(),
            },
        )
        .unwrap();
        let text = export_text(&set);
        assert_eq!(text, "2 1 0\n5 0 -1\n");
    }
}
