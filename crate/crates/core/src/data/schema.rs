use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureCategory {
    Basic,
    Substructure,
    DeltaR,
    InvMass,
    Girth,
}

/// Open interval `(lower, upper)`; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bounds {
    pub const UNBOUNDED: Bounds = Bounds {
        lower: None,
        upper: None,
    };

    pub fn positive() -> Self {
        Self {
            lower: Some(0.0),
            upper: None,
        }
    }

    pub fn open(lower: f64, upper: f64) -> Self {
        Self {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    /// Strict containment.
    pub fn contains(&self, v: f64) -> bool {
        v.is_finite()
            && self.lower.is_none_or(|l| v > l)
            && self.upper.is_none_or(|u| v < u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub category: FeatureCategory,
    pub bounds: Bounds,
}

/// Ordered list of named features; the order is the column order everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self> {
        for (i, f) in features.iter().enumerate() {
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::Config(format!("duplicate feature name {}", f.name)));
            }
            if f.name.is_empty() || f.name.contains(',') {
                return Err(Error::Config(format!("invalid feature name {:?}", f.name)));
            }
        }
        Ok(Self { features })
    }

    /// Schema with no bounds and a single category, for ad-hoc datasets.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names
                .iter()
                .map(|n| FeatureDef {
                    name: n.as_ref().to_owned(),
                    category: FeatureCategory::Basic,
                    bounds: Bounds::UNBOUNDED,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn project(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
        }
    }
}

/// The shipped 36-feature kinematic schema.
///
/// Reconstructed objects: lepton `l`, AK4 jets `j1 j2 j3`, b-tagged jet `b`,
/// fat jet `J`; angular pairs use `l, j1, j2, b, J`.
pub fn default_schema() -> FeatureSchema {
    use FeatureCategory::*;
    let mut defs = Vec::with_capacity(36);
    let mut push = |name: &str, category, bounds| {
        defs.push(FeatureDef {
            name: name.to_owned(),
            category,
            bounds,
        })
    };
    for name in ["H_T", "MET", "pT_l", "pT_j1", "pT_j2", "pT_j3", "pT_b", "pT_J"] {
        push(name, Basic, Bounds::positive());
    }
    for name in ["tau21_b1", "tau21_b2", "tau32_b1", "tau32_b2"] {
        push(name, Substructure, Bounds::open(0.0, 1.0));
    }
    let objects = ["l", "j1", "j2", "b", "J"];
    for i in 0..objects.len() {
        for j in i + 1..objects.len() {
            push(
                &format!("dR_{}_{}", objects[i], objects[j]),
                DeltaR,
                Bounds::open(0.0, 6.0),
            );
        }
    }
    for name in ["m_j1", "m_j2", "m_J", "m_b", "m_j1j2", "m_bJ", "m_lb", "m_j1j2b"] {
        push(name, InvMass, Bounds::positive());
    }
    push("girth_J", Girth, Bounds::open(0.0, 1.0));
    push("var_J", Girth, Bounds::positive());
    push("skew_J", Girth, Bounds::UNBOUNDED);
    push("kurt_J", Girth, Bounds::positive());
    push("girth_j1", Girth, Bounds::open(0.0, 1.0));
    push("girth_b", Girth, Bounds::open(0.0, 1.0));
    FeatureSchema::new(defs).expect("shipped schema is valid")
}
