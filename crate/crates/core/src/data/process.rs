use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schema::{FeatureCategory, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Signal,
    Background,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Signal => 1,
            Label::Background => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `exp(location + scale·z)`; `location` is the log of the median.
    LogNormal,
    Normal,
    /// Normal restricted to the feature bounds by rejection.
    TruncNormal,
    /// Uniform on `location ± scale`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureDist {
    pub family: Family,
    pub location: f64,
    pub scale: f64,
}

impl FeatureDist {
    pub fn log_normal(median: f64, sigma: f64) -> Self {
        Self {
            family: Family::LogNormal,
            location: median.ln(),
            scale: sigma,
        }
    }

    pub fn trunc_normal(mean: f64, sd: f64) -> Self {
        Self {
            family: Family::TruncNormal,
            location: mean,
            scale: sd,
        }
    }

    pub fn normal(mean: f64, sd: f64) -> Self {
        Self {
            family: Family::Normal,
            location: mean,
            scale: sd,
        }
    }

    /// Maps a standard normal (or, for `Uniform`, a unit uniform) draw to a value.
    fn transform(&self, z: f64, u: f64) -> f64 {
        match self.family {
            Family::LogNormal => (self.location + self.scale * z).exp(),
            Family::Normal | Family::TruncNormal => self.location + self.scale * z,
            Family::Uniform => self.location + self.scale * (2.0 * u - 1.0),
        }
    }
}

/// One physics process of the synthetic proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub name: String,
    pub label: Label,
    /// Nominal cross-section in pb.
    pub cross_section: f64,
    /// One distribution per schema feature, in schema order.
    pub features: Vec<FeatureDist>,
    /// Correlation of the `Basic` features through a shared per-event latent.
    pub correlation: f64,
}

const MAX_REJECTIONS: usize = 10_000;

impl ProcessSpec {
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        if !(self.cross_section > 0.0 && self.cross_section.is_finite()) {
            return Err(Error::Config(format!(
                "process {}: cross_section must be positive",
                self.name
            )));
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return Err(Error::Config(format!(
                "process {}: correlation must lie in [0, 1)",
                self.name
            )));
        }
        if self.features.len() != schema.len() {
            return Err(Error::Config(format!(
                "process {}: {} feature distributions for a {}-feature schema",
                self.name,
                self.features.len(),
                schema.len()
            )));
        }
        for (dist, def) in self.features.iter().zip(schema.features()) {
            if !(dist.scale > 0.0 && dist.scale.is_finite() && dist.location.is_finite()) {
                return Err(Error::Config(format!(
                    "process {}: feature {} needs a finite location and positive scale",
                    self.name, def.name
                )));
            }
        }
        Ok(())
    }

    /// Draws one event; every value lies strictly inside its feature bounds.
    pub(crate) fn sample_event<R: Rng>(
        &self,
        schema: &FeatureSchema,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let latent: f64 = StandardNormal.sample(rng);
        let rho = self.correlation;
        let own = (1.0 - rho * rho).sqrt();
        for (dist, def) in self.features.iter().zip(schema.features()) {
            let correlated = def.category == FeatureCategory::Basic;
            let mut tries = 0;
            let v = loop {
                let eps: f64 = StandardNormal.sample(rng);
                let z = if correlated { rho * latent + own * eps } else { eps };
                let u: f64 = rng.random();
                let v = dist.transform(z, u);
                if def.bounds.contains(v) {
                    break v;
                }
                tries += 1;
                if tries >= MAX_REJECTIONS {
                    return Err(Error::Config(format!(
                        "process {}: cannot sample {} inside {:?}",
                        self.name, def.name, def.bounds
                    )));
                }
            };
            out.push(v);
        }
        Ok(())
    }
}

/// Per-process shape of the shipped backgrounds.
struct BackgroundShape {
    name: &'static str,
    cross_section: f64,
    /// Multiplies the H_T median; other momenta scale with its square root.
    energy: f64,
    /// Which side of the signal peak the process populates in m_J, m_bJ, m_lb.
    high_mj: bool,
    high_mbj: bool,
    high_mlb: bool,
}

const BACKGROUNDS: [BackgroundShape; 10] = [
    BackgroundShape { name: "ttbar_1l", cross_section: 180.0, energy: 1.0, high_mj: true, high_mbj: true, high_mlb: false },
    BackgroundShape { name: "w_2j", cross_section: 150.0, energy: 0.8, high_mj: false, high_mbj: false, high_mlb: true },
    BackgroundShape { name: "ttbar_2l", cross_section: 45.0, energy: 0.95, high_mj: true, high_mbj: true, high_mlb: false },
    BackgroundShape { name: "single_top", cross_section: 30.0, energy: 0.85, high_mj: false, high_mbj: false, high_mlb: false },
    BackgroundShape { name: "z_2j", cross_section: 25.0, energy: 0.75, high_mj: false, high_mbj: false, high_mlb: true },
    BackgroundShape { name: "ww", cross_section: 12.0, energy: 0.8, high_mj: false, high_mbj: false, high_mlb: true },
    BackgroundShape { name: "wz", cross_section: 5.0, energy: 0.85, high_mj: false, high_mbj: false, high_mlb: false },
    BackgroundShape { name: "ttW", cross_section: 2.0, energy: 1.25, high_mj: true, high_mbj: true, high_mlb: true },
    BackgroundShape { name: "ttZ", cross_section: 1.5, energy: 1.3, high_mj: true, high_mbj: true, high_mlb: false },
    BackgroundShape { name: "ttH", cross_section: 0.9, energy: 1.35, high_mj: true, high_mbj: true, high_mlb: true },
];

/// Feature distributions shared by every process, signal included: these
/// columns carry no class information.
fn common_features(schema: &FeatureSchema) -> Vec<FeatureDist> {
    schema
        .features()
        .iter()
        .map(|f| match f.name.as_str() {
            "pT_j2" => FeatureDist::log_normal(110.0, 0.45),
            "pT_j3" => FeatureDist::log_normal(60.0, 0.45),
            "pT_j1" => FeatureDist::log_normal(200.0, 0.45),
            "tau21_b2" => FeatureDist::trunc_normal(0.55, 0.15),
            "tau32_b1" => FeatureDist::trunc_normal(0.7, 0.12),
            "tau32_b2" => FeatureDist::trunc_normal(0.65, 0.12),
            "m_j1" => FeatureDist::log_normal(30.0, 0.5),
            "m_j2" => FeatureDist::log_normal(20.0, 0.5),
            "m_b" => FeatureDist::log_normal(12.0, 0.4),
            "m_j1j2" => FeatureDist::log_normal(250.0, 0.5),
            "m_j1j2b" => FeatureDist::log_normal(420.0, 0.45),
            "girth_J" => FeatureDist::trunc_normal(0.15, 0.05),
            "var_J" => FeatureDist::log_normal(0.01, 0.4),
            "skew_J" => FeatureDist::normal(0.8, 0.4),
            "kurt_J" => FeatureDist::log_normal(3.5, 0.25),
            "girth_j1" => FeatureDist::trunc_normal(0.08, 0.03),
            "girth_b" => FeatureDist::trunc_normal(0.06, 0.025),
            name if name.starts_with("dR_") => FeatureDist::trunc_normal(2.5, 0.9),
            _ => FeatureDist::log_normal(100.0, 0.5),
        })
        .collect()
}

fn set(features: &mut [FeatureDist], schema: &FeatureSchema, name: &str, dist: FeatureDist) {
    let i = schema.index_of(name).expect("shipped feature");
    features[i] = dist;
}

/// One signal process (`BB_signal`) and ten weighted backgrounds over
/// [`super::default_schema`].
///
/// Signal events sit at a higher mass scale (H_T, MET, lepton, b and fat-jet
/// momenta), have a two-prong fat jet and a tighter lepton-b separation.
/// Three invariant masses (m_J, m_bJ, m_lb) peak for the signal between two
/// groups of backgrounds, so the background mixture averages close to the
/// signal peak. Every other column is identically distributed for all
/// processes. Cross-sections are proxy values spanning 200:1.
pub fn default_processes() -> Vec<ProcessSpec> {
    let schema = super::default_schema();
    let mut out = Vec::with_capacity(11);

    let mut sig = common_features(&schema);
    set(&mut sig, &schema, "H_T", FeatureDist::log_normal(1300.0, 0.12));
    set(&mut sig, &schema, "MET", FeatureDist::log_normal(160.0, 0.55));
    set(&mut sig, &schema, "pT_l", FeatureDist::log_normal(120.0, 0.5));
    set(&mut sig, &schema, "pT_b", FeatureDist::log_normal(140.0, 0.5));
    set(&mut sig, &schema, "pT_J", FeatureDist::log_normal(450.0, 0.3));
    set(&mut sig, &schema, "tau21_b1", FeatureDist::trunc_normal(0.45, 0.15));
    set(&mut sig, &schema, "dR_l_b", FeatureDist::trunc_normal(1.6, 0.8));
    set(&mut sig, &schema, "m_J", FeatureDist::trunc_normal(175.0, 20.0));
    set(&mut sig, &schema, "m_bJ", FeatureDist::trunc_normal(400.0, 45.0));
    set(&mut sig, &schema, "m_lb", FeatureDist::trunc_normal(150.0, 25.0));
    out.push(ProcessSpec {
        name: "BB_signal".into(),
        label: Label::Signal,
        cross_section: 0.5,
        features: sig,
        correlation: 0.6,
    });

    for bg in &BACKGROUNDS {
        let e = bg.energy;
        let r = e.sqrt();
        let mut f = common_features(&schema);
        set(&mut f, &schema, "H_T", FeatureDist::log_normal(650.0 * e, 0.35));
        set(&mut f, &schema, "MET", FeatureDist::log_normal(90.0 * r, 0.6));
        set(&mut f, &schema, "pT_l", FeatureDist::log_normal(70.0 * r, 0.5));
        set(&mut f, &schema, "pT_b", FeatureDist::log_normal(90.0 * r, 0.5));
        set(&mut f, &schema, "pT_J", FeatureDist::log_normal(300.0 * r, 0.35));
        set(&mut f, &schema, "tau21_b1", FeatureDist::trunc_normal(0.6, 0.15));
        set(&mut f, &schema, "dR_l_b", FeatureDist::trunc_normal(2.5, 0.9));
        let side = |high: bool, lo: (f64, f64), hi: (f64, f64)| {
            let (m, s) = if high { hi } else { lo };
            FeatureDist::trunc_normal(m, s)
        };
        set(&mut f, &schema, "m_J", side(bg.high_mj, (120.0, 30.0), (235.0, 35.0)));
        set(&mut f, &schema, "m_bJ", side(bg.high_mbj, (300.0, 60.0), (510.0, 70.0)));
        set(&mut f, &schema, "m_lb", side(bg.high_mlb, (105.0, 25.0), (200.0, 35.0)));
        out.push(ProcessSpec {
            name: bg.name.into(),
            label: Label::Background,
            cross_section: bg.cross_section,
            features: f,
            correlation: 0.6,
        });
    }
    out
}

/// Sample median of one feature for a process, from `n` draws.
pub fn sample_median<R: Rng>(
    spec: &ProcessSpec,
    schema: &FeatureSchema,
    feature: usize,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut vals = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(schema.len());
    for _ in 0..n {
        row.clear();
        spec.sample_event(schema, rng, &mut row)?;
        vals.push(row[feature]);
    }
    vals.sort_by(f64::total_cmp);
    Ok(if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    })
}
