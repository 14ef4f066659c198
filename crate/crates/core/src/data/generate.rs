use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::process::{Label, ProcessSpec};
use super::schema::FeatureSchema;
use super::EventDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Splits `n` rows across processes proportionally to their cross-sections,
/// with at least one row each (largest-remainder rounding).
fn allocate(n: usize, xs: &[f64]) -> Vec<usize> {
    let k = xs.len();
    let mut counts = vec![1usize; k];
    let spare = n - k;
    let total: f64 = xs.iter().sum();
    let quotas: Vec<f64> = xs.iter().map(|x| spare as f64 * x / total).collect();
    let mut given = 0;
    for (c, q) in counts.iter_mut().zip(&quotas) {
        *c += q.floor() as usize;
        given += q.floor() as usize;
    }
    let mut order: Vec<usize> = (0..k).collect();
    // ties keep the process order
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(spare - given) {
        counts[i] += 1;
    }
    counts
}

/// Generates `n_total` events: half signal, half background, each half split
/// across its processes in proportion to cross-section. Every event of a
/// process carries weight `cross_section / rows_of_that_process`, so a
/// process's weights sum to its cross-section.
///
/// Each process draws from its own ChaCha stream, so the output is a pure
/// function of `(specs, schema, n_total, seed)`.
pub fn generate(
    specs: &[ProcessSpec],
    schema: &FeatureSchema,
    n_total: usize,
    seed: u64,
) -> Result<EventDataset> {
    if specs.len() > u16::MAX as usize {
        return Err(Error::Config("too many processes".into()));
    }
    for s in specs {
        s.validate(schema)?;
    }
    let sig: Vec<usize> = (0..specs.len()).filter(|&i| specs[i].label == Label::Signal).collect();
    let bkg: Vec<usize> = (0..specs.len())
        .filter(|&i| specs[i].label == Label::Background)
        .collect();
    if sig.is_empty() || bkg.is_empty() {
        return Err(Error::Config(
            "need at least one signal and one background process".into(),
        ));
    }
    if n_total < 2 * specs.len() {
        return Err(Error::Config(format!(
            "n_total = {n_total} is below twice the process count ({})",
            2 * specs.len()
        )));
    }
    let n_sig = n_total / 2;
    let n_bkg = n_total - n_sig;
    let mut counts = vec![0usize; specs.len()];
    for (group, n) in [(&sig, n_sig), (&bkg, n_bkg)] {
        let xs: Vec<f64> = group.iter().map(|&i| specs[i].cross_section).collect();
        for (&i, c) in group.iter().zip(allocate(n, &xs)) {
            counts[i] = c;
        }
    }

    let d = schema.len();
    let mut data = Vec::with_capacity(n_total * d);
    let mut labels = Vec::with_capacity(n_total);
    let mut process_ids = Vec::with_capacity(n_total);
    let mut weights = Vec::with_capacity(n_total);
    for (pid, (spec, &count)) in specs.iter().zip(&counts).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(pid as u64);
        let w = spec.cross_section / count as f64;
        for _ in 0..count {
            spec.sample_event(schema, &mut rng, &mut data)?;
            labels.push(spec.label.as_u8());
            process_ids.push(pid as u16);
            weights.push(w);
        }
    }
    EventDataset::new(
        Matrix::from_vec(n_total, d, data)?,
        labels,
        process_ids,
        weights,
        schema.clone(),
    )
}
