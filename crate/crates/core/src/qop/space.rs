use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered tensor product of labeled factors. The factor order is the
/// Kronecker order of every operator built on the space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    factors: Vec<Factor>,
}

impl HilbertSpace {
    pub fn new<'a>(factors: impl IntoIterator<Item = (&'a str, usize)>) -> Result<Self> {
        let factors: Vec<Factor> = factors
            .into_iter()
            .map(|(label, dim)| Factor { label: label.to_string(), dim })
            .collect();
        Self::from_factors(factors)
    }

    pub fn from_factors(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::input("a Hilbert space needs at least one factor"));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(Error::input(alloc::format!("factor `{}` has dimension 0", f.label)));
            }
            if factors[..k].iter().any(|g| g.label == f.label) {
                return Err(Error::input(alloc::format!("duplicate factor label `{}`", f.label)));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.factors.iter().any(|f| f.label == label)
    }

    pub fn factor_dim(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].dim)
    }

    /// `self ⊗ other`; labels must stay unique.
    pub fn tensor(&self, other: &HilbertSpace) -> Result<HilbertSpace> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Self::from_factors(factors)
    }

    /// The space spanned by the listed factors, in this space's order.
    pub fn subspace(&self, keep: &[&str]) -> Result<HilbertSpace> {
        if keep.is_empty() {
            return Err(Error::input("at least one factor must be kept"));
        }
        for label in keep {
            self.position(label)?;
        }
        let factors = self.factors.iter().filter(|f| keep.contains(&f.label.as_str())).cloned().collect();
        Self::from_factors(factors)
    }

    /// Row-major strides: flat index = Σ digit_k · stride_k.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = alloc::vec![1usize; self.factors.len()];
        for k in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.factors[k + 1].dim;
        }
        strides
    }
}
