//! Synthetic patient generator.
//!
//! Vitals follow per-patient baselines with slow sinusoidal drift and
//! Gaussian noise. Desaturation episodes lower SpO₂ and raise heart and
//! respiratory rate. Cells go missing at random, a few values are
//! physiologically implausible, and some measurement sets are split over
//! two rows with the same charttime.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pipeline::{RawRecord, Race};
use crate::scoring::{VitalKind, Vitals};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub patients: usize,
    pub max_admissions_per_patient: usize,
    pub min_minutes: i64,
    pub max_minutes: i64,
    /// Largest gap between successive charttimes.
    pub max_step_minutes: i64,
    pub missing_rate: f64,
    pub implausible_rate: f64,
    pub split_row_rate: f64,
    pub copd_fraction: f64,
    pub pediatric_fraction: f64,
    /// Fraction of admissions cut short enough to fail the inclusion filters.
    pub short_stay_fraction: f64,
    /// First charttime, epoch minutes.
    pub start_minute: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            patients: 40,
            max_admissions_per_patient: 2,
            min_minutes: 300,
            max_minutes: 540,
            max_step_minutes: 8,
            missing_rate: 0.06,
            implausible_rate: 0.002,
            split_row_rate: 0.05,
            copd_fraction: 0.15,
            pediatric_fraction: 0.1,
            short_stay_fraction: 0.05,
            // 2150-01-01 00:00
            start_minute: 94_671_360,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        if self.patients == 0 || self.max_admissions_per_patient == 0 {
            return Err(Error::Config("patients and admissions must be positive".into()));
        }
        if self.min_minutes < 2 || self.max_minutes < self.min_minutes || self.max_step_minutes < 1 {
            return Err(Error::Config("stay lengths and step must be positive and ordered".into()));
        }
        if ![
            self.missing_rate,
            self.implausible_rate,
            self.split_row_rate,
            self.copd_fraction,
            self.pediatric_fraction,
            self.short_stay_fraction,
        ]
        .into_iter()
        .all(frac)
        {
            return Err(Error::Config("rates and fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

struct Patient {
    age: f64,
    gender: f64,
    height: f64,
    weight: f64,
    race: Race,
    copd: bool,
    spo2: f64,
    hr: f64,
    rr: f64,
    sbp: f64,
    temp: f64,
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("valid sd").sample(rng)
}

fn patient(rng: &mut ChaCha8Rng, config: &SynthConfig) -> Patient {
    let pediatric = rng.gen_bool(config.pediatric_fraction);
    let age = if pediatric { rng.gen_range(5..18) as f64 } else { rng.gen_range(20..90) as f64 };
    let copd = !pediatric && rng.gen_bool(config.copd_fraction);
    let gender = rng.gen_range(0..2) as f64;
    let height = if pediatric {
        (100.0 + 4.5 * age + normal(rng, 0.0, 6.0)).round()
    } else {
        normal(rng, 170.0, 9.0).round()
    };
    let bmi = if pediatric { normal(rng, 18.0, 2.0) } else { normal(rng, 26.0, 4.0) };
    let weight = (bmi * (height / 100.0).powi(2) * 10.0).round() / 10.0;
    let race = Race::ALL[rng.gen_range(0..Race::ALL.len())];
    Patient {
        age,
        gender,
        height,
        weight,
        race,
        copd,
        spo2: if copd { normal(rng, 91.0, 0.8) } else { normal(rng, 97.5, 0.8) },
        hr: if pediatric { normal(rng, 95.0, 8.0) } else { normal(rng, 78.0, 8.0) },
        rr: if pediatric { normal(rng, 20.0, 2.0) } else { normal(rng, 16.0, 2.0) },
        sbp: if pediatric { normal(rng, 108.0, 8.0) } else { normal(rng, 124.0, 10.0) },
        temp: normal(rng, 36.9, 0.25),
    }
}

/// Desaturation depth (SpO₂ points) at minute `t` from trapezoid episodes.
fn dip(episodes: &[(f64, f64, f64)], t: f64) -> f64 {
    episodes
        .iter()
        .map(|&(start, len, depth)| {
            let ramp = (len / 4.0).max(1.0);
            let x = t - start;
            if x <= 0.0 || x >= len {
                0.0
            } else {
                depth * (x / ramp).min(1.0).min((len - x) / ramp)
            }
        })
        .fold(0.0, f64::max)
}

fn admission(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    p: &Patient,
    subject_id: &str,
    hadm_id: &str,
    start: i64,
) -> Vec<RawRecord> {
    let stay = if rng.gen_bool(config.short_stay_fraction) {
        rng.gen_range(20..60)
    } else {
        rng.gen_range(config.min_minutes..=config.max_minutes)
    };
    let n_episodes = rng.gen_range(1..=4);
    let episodes: Vec<(f64, f64, f64)> = (0..n_episodes)
        .map(|_| {
            let len = rng.gen_range(15.0..70.0);
            let start = rng.gen_range(0.0..(stay as f64 - 10.0).max(1.0));
            let depth = rng.gen_range(2.0..16.0);
            (start, len, depth)
        })
        .collect();
    let period = rng.gen_range(90.0..240.0);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let height = (!rng.gen_bool(0.1)).then_some(p.height);
    let weight = (!rng.gen_bool(0.05)).then_some(p.weight);

    let mut out = Vec::new();
    let mut t = 0;
    while t <= stay {
        let tf = t as f64;
        let d = dip(&episodes, tf);
        let wave = (std::f64::consts::TAU * tf / period + phase).sin();
        let spo2 = (p.spo2 - d + normal(rng, 0.0, 0.6)).min(100.0).round();
        let hr = (p.hr + 6.0 * wave + 1.2 * d + normal(rng, 0.0, 2.0)).round();
        let rr = (p.rr + 1.5 * wave + 0.4 * d + normal(rng, 0.0, 1.0)).round().max(4.0);
        let sbp = (p.sbp + 5.0 * wave + normal(rng, 0.0, 4.0)).round();
        let dbp = (0.55 * sbp + 8.0 + normal(rng, 0.0, 3.0)).round();
        let temp = ((p.temp + 0.15 * wave + normal(rng, 0.0, 0.08)) * 10.0).round() / 10.0;
        let mut vitals = Vitals::new(rr, spo2, hr, sbp, dbp, temp);
        for kind in VitalKind::ALL {
            if rng.gen_bool(config.missing_rate) {
                vitals.set(kind, None);
            } else if rng.gen_bool(config.implausible_rate) {
                let (_, hi) = kind.domain();
                vitals.set(kind, Some(hi + rng.gen_range(1.0..50.0)));
            }
        }
        let base = RawRecord {
            subject_id: subject_id.to_string(),
            hadm_id: hadm_id.to_string(),
            charttime: start + t,
            vitals,
            age: Some(p.age),
            gender: Some(p.gender),
            height,
            weight,
            race: Some(p.race),
            copd: Some(p.copd),
        };
        if rng.gen_bool(config.split_row_rate) {
            // Blood pressure and temperature arrive in a separate row.
            let mut first = base.clone();
            let mut second = base;
            for kind in [VitalKind::SystolicBp, VitalKind::DiastolicBp, VitalKind::Temperature] {
                first.vitals.set(kind, None);
            }
            for kind in [VitalKind::RespiratoryRate, VitalKind::SpO2, VitalKind::HeartRate] {
                second.vitals.set(kind, None);
            }
            out.push(first);
            out.push(second);
        } else {
            out.push(base);
        }
        t += rng.gen_range(1..=config.max_step_minutes);
    }
    out
}

/// Generates raw records ordered by patient, admission and charttime.
pub fn generate(config: &SynthConfig, seed: u64) -> Result<Vec<RawRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut hadm = 0;
    for i in 0..config.patients {
        let p = patient(&mut rng, config);
        let subject_id = format!("{}", 10_000_000 + i);
        let mut start = config.start_minute + rng.gen_range(0..60 * 24 * 30);
        for _ in 0..rng.gen_range(1..=config.max_admissions_per_patient) {
            hadm += 1;
            let hadm_id = format!("{}", 20_000_000 + hadm);
            let records = admission(&mut rng, config, &p, &subject_id, &hadm_id, start);
            start = records.last().map_or(start, |r| r.charttime) + rng.gen_range(60 * 24..60 * 24 * 90);
            out.extend(records);
        }
    }
    Ok(out)
}
