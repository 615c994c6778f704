//! Labeled tensor-product space specification and its index arithmetic.

use serde::{Deserialize, Serialize};

use super::HilbertError;

/// An ordered collection of labeled subsystems defining a tensor-product
/// space. Labels are unique; the total dimension is the product of the
/// subsystem dimensions.
///
/// Indexing is subsystem-major: the first subsystem varies slowest (see the
/// module docs).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(String, usize)>", into = "Vec<(String, usize)>")]
pub struct SpaceSpec {
    subsystems: Vec<(String, usize)>,
    strides: Vec<usize>,
    total_dim: usize,
}

impl SpaceSpec {
    /// Build a space from `(label, dim)` pairs.
    pub fn new<L, I>(subsystems: I) -> Result<Self, HilbertError>
    where
        L: Into<String>,
        I: IntoIterator<Item = (L, usize)>,
    {
        let subsystems: Vec<(String, usize)> =
            subsystems.into_iter().map(|(l, d)| (l.into(), d)).collect();
        for (i, (label, dim)) in subsystems.iter().enumerate() {
            if *dim == 0 {
                return Err(HilbertError::ZeroDim(label.clone()));
            }
            if subsystems[..i].iter().any(|(other, _)| other == label) {
                return Err(HilbertError::DuplicateLabel(label.clone()));
            }
        }
        let mut strides = vec![1usize; subsystems.len()];
        for k in (0..subsystems.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * subsystems[k + 1].1;
        }
        let total_dim = subsystems.iter().map(|(_, d)| d).product();
        Ok(Self {
            subsystems,
            strides,
            total_dim,
        })
    }

    /// Single-subsystem space.
    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self, HilbertError> {
        Self::new([(label.into(), dim)])
    }

    /// Product of all subsystem dimensions.
    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// The `(label, dim)` pairs in order.
    pub fn subsystems(&self) -> &[(String, usize)] {
        &self.subsystems
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.subsystems.iter().map(|(l, _)| l.as_str())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.subsystems.iter().any(|(l, _)| l == label)
    }

    /// Dimension of the named subsystem.
    pub fn dim_of(&self, label: &str) -> Result<usize, HilbertError> {
        self.subsystems
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, d)| *d)
            .ok_or_else(|| HilbertError::UnknownLabel(label.to_string()))
    }

    /// Position of the named subsystem in the ordered list.
    pub fn position_of(&self, label: &str) -> Result<usize, HilbertError> {
        self.subsystems
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| HilbertError::UnknownLabel(label.to_string()))
    }

    /// Stride of subsystem `k`: how far the flat index moves when that
    /// subsystem's digit increments.
    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    /// Concatenate two spaces. Fails when any label appears in both.
    pub fn tensor(&self, other: &SpaceSpec) -> Result<SpaceSpec, HilbertError> {
        for (label, _) in &other.subsystems {
            if self.contains(label) {
                return Err(HilbertError::LabelCollision(label.clone()));
            }
        }
        let merged = self
            .subsystems
            .iter()
            .chain(other.subsystems.iter())
            .cloned();
        SpaceSpec::new(merged)
    }

    /// The sub-space formed by the named labels, in this space's order.
    pub fn subspace(&self, keep: &[&str]) -> Result<SpaceSpec, HilbertError> {
        for label in keep {
            if !self.contains(label) {
                return Err(HilbertError::UnknownLabel(label.to_string()));
            }
        }
        let kept = self
            .subsystems
            .iter()
            .filter(|(l, _)| keep.contains(&l.as_str()))
            .cloned();
        SpaceSpec::new(kept)
    }

    /// Flat index from per-subsystem digits.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.subsystems.len());
        digits
            .iter()
            .zip(&self.strides)
            .map(|(digit, stride)| digit * stride)
            .sum()
    }

    /// Per-subsystem digits of a flat index.
    pub fn digits_of(&self, index: usize) -> Vec<usize> {
        self.subsystems
            .iter()
            .zip(&self.strides)
            .map(|((_, dim), stride)| (index / stride) % dim)
            .collect()
    }

    /// Require that two spaces are identical (same labels, dims, order).
    pub fn expect_same(&self, other: &SpaceSpec) -> Result<(), HilbertError> {
        if self != other {
            return Err(HilbertError::SpaceMismatch(format!(
                "{:?} vs {:?}",
                self.subsystems, other.subsystems
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<(String, usize)>> for SpaceSpec {
    type Error = HilbertError;

    fn try_from(subsystems: Vec<(String, usize)>) -> Result<Self, Self::Error> {
        SpaceSpec::new(subsystems)
    }
}

impl From<SpaceSpec> for Vec<(String, usize)> {
    fn from(space: SpaceSpec) -> Self {
        space.subsystems
    }
}
