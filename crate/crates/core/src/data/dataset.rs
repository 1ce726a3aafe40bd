use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a dataset or representation set came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(source: impl Into<String>, params: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            source: source.into(),
            params,
            seed,
        }
    }
}

/// Row-aligned ground-truth concepts with optional task labels and inputs.
///
/// Concept cells are class indices; binary datasets hold only 0 and 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ConceptDataset {
    concepts: Array2<u32>,
    labels: Option<Vec<u32>>,
    features: Option<Array2<f64>>,
    pub provenance: Provenance,
}

impl ConceptDataset {
    /// Binary concept matrix (`N × k`).
    pub fn new(concepts: Array2<u32>) -> Result<Self> {
        if let Some(((row, _), v)) = concepts.indexed_iter().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidParameter(format!(
                "concept value {v} at row {row} is not binary"
            )));
        }
        Self::new_multiclass(concepts)
    }

    /// Concept matrix whose columns may take any class index.
    pub fn new_multiclass(concepts: Array2<u32>) -> Result<Self> {
        if concepts.ncols() == 0 {
            return Err(Error::InvalidParameter("dataset has no concepts".into()));
        }
        Ok(Self {
            concepts,
            labels: None,
            features: None,
            provenance: Provenance::default(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: features.nrows(),
            });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn n(&self) -> usize {
        self.concepts.nrows()
    }

    pub fn k(&self) -> usize {
        self.concepts.ncols()
    }

    pub fn concepts(&self) -> ArrayView2<'_, u32> {
        self.concepts.view()
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn features(&self) -> Option<ArrayView2<'_, f64>> {
        self.features.as_ref().map(|f| f.view())
    }

    pub fn concept(&self, j: usize) -> Vec<u32> {
        self.concepts.column(j).to_vec()
    }

    pub fn concept_f64(&self, j: usize) -> Vec<f64> {
        self.concepts.column(j).iter().map(|&v| f64::from(v)).collect()
    }

    /// Number of classes of concept `j` (largest index + 1, at least 2).
    pub fn classes(&self, j: usize) -> usize {
        self.concepts.column(j).iter().max().map_or(2, |&m| (m as usize + 1).max(2))
    }

    pub fn is_binary(&self) -> bool {
        self.concepts.iter().all(|&v| v <= 1)
    }

    /// Rows `idx`, in order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            concepts: self.concepts.select(Axis(0), idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            features: self.features.as_ref().map(|f| f.select(Axis(0), idx)),
            provenance: self.provenance.clone(),
        }
    }
}

/// Learnt concept representations, `N × k′ × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationSet {
    reps: Array3<f64>,
    /// Whether representation `i` is known to correspond to concept `i`.
    pub aligned: bool,
    pub provenance: String,
}

impl RepresentationSet {
    pub fn new(reps: Array3<f64>, aligned: bool) -> Result<Self> {
        let (_, k, d) = reps.dim();
        if k == 0 || d == 0 {
            return Err(Error::InvalidParameter(
                "representations need k' >= 1 and d >= 1".into(),
            ));
        }
        Ok(Self {
            reps,
            aligned,
            provenance: String::new(),
        })
    }

    /// One scalar per concept (`d = 1`) from an `N × k′` matrix.
    pub fn from_scalar(values: Array2<f64>, aligned: bool) -> Result<Self> {
        let (n, k) = values.dim();
        let reps = values
            .into_shape_with_order((n, k, 1))
            .expect("contiguous reshape");
        Self::new(reps, aligned)
    }

    /// Ground-truth concepts cast to `d = 1` representations.
    pub fn from_concepts(data: &ConceptDataset) -> Self {
        let values = data.concepts().mapv(f64::from);
        let mut set = Self::from_scalar(values, true).expect("dataset has concepts");
        set.provenance = "ground-truth concepts".into();
        set
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn n(&self) -> usize {
        self.reps.dim().0
    }

    pub fn n_concepts(&self) -> usize {
        self.reps.dim().1
    }

    pub fn dim(&self) -> usize {
        self.reps.dim().2
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.reps
    }

    /// Representation `i` as an `N × d` matrix.
    pub fn concept(&self, i: usize) -> ArrayView2<'_, f64> {
        self.reps.index_axis(Axis(1), i)
    }

    /// Scalar view of representation `i`; `d` must be 1.
    pub fn scalar(&self, i: usize) -> Vec<f64> {
        assert_eq!(self.dim(), 1, "scalar view needs d = 1");
        self.reps.index_axis(Axis(1), i).column(0).to_vec()
    }

    /// `N × (k′·d)` matrix, concept-major.
    pub fn flatten(&self) -> Array2<f64> {
        let (n, k, d) = self.reps.dim();
        self.reps
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n, k * d))
            .expect("contiguous reshape")
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            reps: self.reps.select(Axis(0), idx),
            aligned: self.aligned,
            provenance: self.provenance.clone(),
        }
    }

    /// Keeps representations `order` in that order; the result is aligned.
    pub fn reorder(&self, order: &[usize]) -> Self {
        Self {
            reps: self.reps.select(Axis(1), order),
            aligned: true,
            provenance: format!("{} (aligned)", self.provenance),
        }
    }

    pub fn check_rows(&self, data: &ConceptDataset) -> Result<()> {
        if self.n() != data.n() {
            return Err(Error::LengthMismatch {
                expected: data.n(),
                got: self.n(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};

    #[test]
    fn binary_validation() {
        assert!(ConceptDataset::new(array![[0, 1], [2, 0]]).is_err());
        let d = ConceptDataset::new_multiclass(array![[0, 1], [2, 0]]).unwrap();
        assert_eq!(d.classes(0), 3);
        assert!(!d.is_binary());
    }

    #[test]
    fn flatten_is_concept_major() {
        let reps = Array3::from_shape_fn((2, 3, 2), |(n, k, d)| (100 * n + 10 * k + d) as f64);
        let set = RepresentationSet::new(reps, true).unwrap();
        assert_eq!(
            set.flatten().row(1).to_vec(),
            vec![100.0, 101.0, 110.0, 111.0, 120.0, 121.0]
        );
        assert_eq!(set.concept(2).row(0).to_vec(), vec![20.0, 21.0]);
        let r = set.reorder(&[2, 0]);
        assert_eq!(r.n_concepts(), 2);
        assert_eq!(r.concept(0).row(1).to_vec(), vec![120.0, 121.0]);
    }

    #[test]
    fn subsets_keep_rows_together() {
        let d = ConceptDataset::new(array![[0, 1], [1, 0], [1, 1]])
            .unwrap()
            .with_labels(vec![5, 6, 7])
            .unwrap();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.concept(0), vec![1, 0]);
        assert_eq!(s.labels().unwrap(), &[7, 5]);
        assert!(d.clone().with_labels(vec![1]).is_err());
    }
}
