use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EventDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.5,
            val: 0.2,
            test: 0.3,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::Config(format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Stratified train/validation/test split over `(label, process_id)` strata.
///
/// Within each stratum rows are shuffled and cut at rounded fraction
/// boundaries; each output keeps the parent's row order.
pub fn split(
    ds: &EventDataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(EventDataset, EventDataset, EventDataset)> {
    fractions.validate()?;
    let mut strata: BTreeMap<(u8, u16), Vec<usize>> = BTreeMap::new();
    for i in 0..ds.len() {
        strata
            .entry((ds.labels[i], ds.process_ids[i]))
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for rows in strata.values_mut() {
        rows.shuffle(&mut rng);
        let n = rows.len() as f64;
        let n_train = (n * fractions.train).round() as usize;
        let n_val = ((n * (fractions.train + fractions.val)).round() as usize).saturating_sub(n_train);
        let n_val = n_val.min(rows.len() - n_train);
        tr.extend_from_slice(&rows[..n_train]);
        va.extend_from_slice(&rows[n_train..n_train + n_val]);
        te.extend_from_slice(&rows[n_train + n_val..]);
    }
    for v in [&mut tr, &mut va, &mut te] {
        v.sort_unstable();
    }
    Ok((ds.subset(&tr), ds.subset(&va), ds.subset(&te)))
}
