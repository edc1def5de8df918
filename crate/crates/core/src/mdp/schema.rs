use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Flat index of a state in a model's state space.
pub type StateIndex = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Feature {
    pub name: String,
    pub domain_size: usize,
}

/// Ordered list of finite-valued features. The state space is the Cartesian
/// product of the domains, flattened row-major (last feature varies fastest).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    strides: Vec<usize>,
    size: usize,
}

impl FeatureSchema {
    pub fn new<I, S>(features: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let features: Vec<Feature> = features
            .into_iter()
            .map(|(name, domain_size)| Feature {
                name: name.into(),
                domain_size,
            })
            .collect();

        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate feature name `{}`", f.name)));
            }
            if f.domain_size == 0 {
                return Err(Error::InvalidSchema(format!(
                    "feature `{}` has an empty domain",
                    f.name
                )));
            }
        }

        let mut strides = vec![0; features.len()];
        let mut size: usize = 1;
        for (i, f) in features.iter().enumerate().rev() {
            strides[i] = size;
            size = size
                .checked_mul(f.domain_size)
                .ok_or_else(|| Error::InvalidSchema("state count overflows the index type".into()))?;
        }

        Ok(Self {
            features,
            strides,
            size,
        })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Number of feature vectors, i.e. the product of the domain sizes.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Result<&Feature> {
        self.features
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_owned()))
    }

    pub fn stride(&self, position: usize) -> usize {
        self.strides[position]
    }

    pub fn encode(&self, fv: &FeatureVector) -> Result<StateIndex> {
        self.encode_values(fv.values())
    }

    pub fn encode_values(&self, values: &[usize]) -> Result<StateIndex> {
        if values.len() != self.features.len() {
            return Err(Error::LengthMismatch {
                what: "feature vector",
                expected: self.features.len(),
                found: values.len(),
            });
        }
        let mut index = 0;
        for ((f, &v), &stride) in self.features.iter().zip(values).zip(&self.strides) {
            if v >= f.domain_size {
                return Err(Error::FeatureOutOfRange {
                    feature: f.name.clone(),
                    value: v,
                    domain: f.domain_size,
                });
            }
            index += v * stride;
        }
        Ok(index)
    }

    pub fn decode(&self, index: StateIndex) -> Result<FeatureVector> {
        if index >= self.size {
            return Err(Error::IndexOutOfRange {
                what: "feature schema",
                index,
                bound: self.size,
            });
        }
        Ok(FeatureVector(self.decode_unchecked(index)))
    }

    pub(crate) fn decode_unchecked(&self, mut index: StateIndex) -> Vec<usize> {
        let mut values = vec![0; self.features.len()];
        for (i, f) in self.features.iter().enumerate().rev() {
            values[i] = index % f.domain_size;
            index /= f.domain_size;
        }
        values
    }

    /// Value of a single feature at a flat index.
    pub fn value_at(&self, index: StateIndex, position: usize) -> usize {
        (index / self.strides[position]) % self.features[position].domain_size
    }
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .features
            .iter()
            .map(|feat| format!("{}:{}", feat.name, feat.domain_size))
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// One value per schema feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector(pub Vec<usize>);

impl FeatureVector {
    pub fn new(values: Vec<usize>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for FeatureVector {
    fn from(values: Vec<usize>) -> Self {
        Self(values)
    }
}
