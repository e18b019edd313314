//! Synthetic marker / survival data with known truth.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::data::{Cohort, MarkedTime};
use crate::error::{Error, Result};
use crate::io::parse_key_values;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MarkerDist {
    StandardNormal,
    /// Uniform on `(0, 1)`.
    Uniform,
}

/// Log hazard ratio per marker unit, constant or switching at `change`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum GammaShape {
    Constant(f64),
    TwoPiece { before: f64, after: f64, change: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Censoring {
    None,
    /// Exponential censoring with this rate.
    Independent { rate: f64 },
    /// Exponential censoring with rate `rate * multiplier^M`.
    MarkerDependent { rate: f64, multiplier: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CauseSpec {
    pub gamma: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub marker_dist: MarkerDist,
    pub gamma: GammaShape,
    /// Baseline hazard of the event (single-cause scenarios).
    pub rate: f64,
    pub censoring: Censoring,
    /// Latent cause-specific exponential hazards `rate_j exp(M gamma_j)`.
    /// When non-empty, `gamma` and `rate` are ignored.
    pub causes: Vec<CauseSpec>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Single cause, standard normal marker, no censoring.
    pub fn simple(n: usize, gamma: f64, rate: f64, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            n,
            marker_dist: MarkerDist::StandardNormal,
            gamma: GammaShape::Constant(gamma),
            rate,
            censoring: Censoring::None,
            causes: Vec::new(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {x}")))
            }
        };
        if self.n < 2 {
            return Err(Error::invalid(format!("need at least 2 subjects, got {}", self.n)));
        }
        match self.gamma {
            GammaShape::Constant(g) if !g.is_finite() => return Err(Error::invalid("gamma is not finite")),
            GammaShape::TwoPiece { before, after, change } => {
                if !(before.is_finite() && after.is_finite()) {
                    return Err(Error::invalid("gamma is not finite"));
                }
                positive(change, "change time")?;
            }
            _ => {}
        }
        if self.causes.is_empty() {
            positive(self.rate, "rate")?;
        }
        for c in &self.causes {
            positive(c.rate, "cause rate")?;
            if !c.gamma.is_finite() {
                return Err(Error::invalid("cause gamma is not finite"));
            }
        }
        match self.censoring {
            Censoring::None => {}
            Censoring::Independent { rate } => positive(rate, "censoring rate")?,
            Censoring::MarkerDependent { rate, multiplier } => {
                positive(rate, "censoring rate")?;
                positive(multiplier, "censoring multiplier")?;
            }
        }
        Ok(())
    }

    /// Reads `key = value` lines: `n`, `marker` (standard_normal | uniform),
    /// `gamma`, `gamma_after` + `change_time` (two-piece), `rate`,
    /// `censoring` (none | independent | marker_dependent), `censor_rate`,
    /// `censor_multiplier`, repeated `cause = <gamma>, <rate>`, `seed`.
    pub fn parse(text: &str, source: &str) -> Result<ScenarioSpec> {
        let mut spec = ScenarioSpec::simple(0, 0.0, 1.0, 0);
        let (mut gamma, mut gamma_after, mut change) = (0.0, None, None);
        let (mut censoring, mut censor_rate, mut censor_mult) = ("none".to_string(), None, None);
        let bad = |key: &str, value: &str| Error::Parse {
            location: source.to_string(),
            message: format!("invalid value '{value}' for '{key}'"),
        };
        for (key, value) in parse_key_values(text, source)? {
            let num = || value.parse::<f64>().map_err(|_| bad(&key, &value));
            match key.as_str() {
                "n" => spec.n = value.parse().map_err(|_| bad(&key, &value))?,
                "seed" => spec.seed = value.parse().map_err(|_| bad(&key, &value))?,
                "marker" => {
                    spec.marker_dist = match value.as_str() {
                        "standard_normal" => MarkerDist::StandardNormal,
                        "uniform" => MarkerDist::Uniform,
                        _ => return Err(bad(&key, &value)),
                    }
                }
                "gamma" => gamma = num()?,
                "gamma_after" => gamma_after = Some(num()?),
                "change_time" => change = Some(num()?),
                "rate" => spec.rate = num()?,
                "censoring" => censoring = value.clone(),
                "censor_rate" => censor_rate = Some(num()?),
                "censor_multiplier" => censor_mult = Some(num()?),
                "cause" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    let [g, r] = parts[..] else { return Err(bad(&key, &value)) };
                    spec.causes.push(CauseSpec {
                        gamma: g.parse().map_err(|_| bad(&key, &value))?,
                        rate: r.parse().map_err(|_| bad(&key, &value))?,
                    });
                }
                _ => {
                    return Err(Error::Parse { location: source.to_string(), message: format!("unknown key '{key}'") })
                }
            }
        }
        spec.gamma = match (gamma_after, change) {
            (None, None) => GammaShape::Constant(gamma),
            (Some(after), Some(change)) => GammaShape::TwoPiece { before: gamma, after, change },
            _ => {
                return Err(Error::Parse {
                    location: source.to_string(),
                    message: "gamma_after and change_time must be given together".into(),
                })
            }
        };
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::Parse { location: source.to_string(), message: format!("'{key}' is required") })
        };
        spec.censoring = match censoring.as_str() {
            "none" => Censoring::None,
            "independent" => Censoring::Independent { rate: need(censor_rate, "censor_rate")? },
            "marker_dependent" => Censoring::MarkerDependent {
                rate: need(censor_rate, "censor_rate")?,
                multiplier: need(censor_mult, "censor_multiplier")?,
            },
            other => return Err(bad("censoring", other)),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<ScenarioSpec> {
        ScenarioSpec::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }
}

fn draw_marker(dist: MarkerDist, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        MarkerDist::StandardNormal => StandardNormal.sample(rng),
        MarkerDist::Uniform => rng.random::<f64>(),
    }
}

/// Inverse-CDF draw from the (piecewise) exponential hazard
/// `rate exp(M gamma(t))`.
fn draw_event_time(m: f64, rate: f64, gamma: GammaShape, rng: &mut ChaCha8Rng) -> f64 {
    let e: f64 = Exp1.sample(rng);
    match gamma {
        GammaShape::Constant(g) => e / (rate * (m * g).exp()),
        GammaShape::TwoPiece { before, after, change } => {
            let h1 = rate * (m * before).exp();
            if e < h1 * change {
                e / h1
            } else {
                change + (e - h1 * change) / (rate * (m * after).exp())
            }
        }
    }
}

/// Marker, latent event time and cause, before censoring.
fn draw_subject(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> (f64, f64, u32) {
    let m = draw_marker(spec.marker_dist, rng);
    if spec.causes.is_empty() {
        return (m, draw_event_time(m, spec.rate, spec.gamma, rng), 1);
    }
    let mut best = (f64::INFINITY, 0);
    for (j, c) in spec.causes.iter().enumerate() {
        let t = draw_event_time(m, c.rate, GammaShape::Constant(c.gamma), rng);
        if t < best.0 {
            best = (t, j as u32 + 1);
        }
    }
    (m, best.0, best.1)
}

/// Simulated sample of `spec.n` subjects, deterministic in `spec.seed`.
pub fn generate_sample(spec: &ScenarioSpec) -> Result<Vec<MarkedTime>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.n)
        .map(|_| {
            let (m, t, cause) = draw_subject(spec, &mut rng);
            let c = match spec.censoring {
                Censoring::None => f64::INFINITY,
                Censoring::Independent { rate } => {
                    let e: f64 = Exp1.sample(&mut rng);
                    e / rate
                }
                Censoring::MarkerDependent { rate, multiplier } => {
                    let e: f64 = Exp1.sample(&mut rng);
                    e / (rate * multiplier.powf(m))
                }
            };
            if t <= c {
                MarkedTime::new(m, t, cause)
            } else {
                MarkedTime::new(m, c, 0)
            }
        })
        .collect())
}

pub fn generate(spec: &ScenarioSpec) -> Result<Cohort> {
    Cohort::from_marked_times(&generate_sample(spec)?)
}

/// Uncensored `(marker, event time)` draws for truth computations, from a
/// stream separate from [`generate`].
pub fn truth_draws(spec: &ScenarioSpec, mc_n: usize) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    Ok((0..mc_n)
        .map(|_| {
            let (m, t, _) = draw_subject(spec, &mut rng);
            (m, t)
        })
        .collect())
}

/// `P(M_j > M_k)` for a case `s < T_j <= t` and a control `T_k > t`
/// (ties count one half), from `(marker, time)` pairs.
pub fn cd_auc_from_draws(draws: &[(f64, f64)], s: f64, t: f64) -> Result<f64> {
    let mut cases: Vec<f64> = draws.iter().filter(|d| d.1 > s && d.1 <= t).map(|d| d.0).collect();
    let mut controls: Vec<f64> = draws.iter().filter(|d| d.1 > t).map(|d| d.0).collect();
    if cases.is_empty() || controls.is_empty() {
        return Err(Error::degenerate("no cases or no controls in the draws"));
    }
    cases.sort_by(f64::total_cmp);
    controls.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &m in &cases {
        let below = controls.partition_point(|&c| c < m);
        let equal = controls.partition_point(|&c| c <= m) - below;
        wins += below as f64 + 0.5 * equal as f64;
    }
    Ok(wins / (cases.len() as f64 * controls.len() as f64))
}

/// Monte-Carlo cumulative/dynamic AUC for `(s, t]` from `mc_n` uncensored
/// draws.
pub fn truth_cd_auc(spec: &ScenarioSpec, s: f64, t: f64, mc_n: usize) -> Result<f64> {
    cd_auc_from_draws(&truth_draws(spec, mc_n)?, s, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_censoring_means_all_events() {
        let c = generate(&ScenarioSpec::simple(100, 1.0, 1.0, 3)).unwrap();
        assert_eq!(c.n_events(), 100);
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = ScenarioSpec { censoring: Censoring::Independent { rate: 0.5 }, ..ScenarioSpec::simple(50, 0.5, 1.0, 9) };
        assert_eq!(generate_sample(&spec).unwrap(), generate_sample(&spec).unwrap());
    }

    #[test]
    fn null_truth_is_half() {
        let auc = truth_cd_auc(&ScenarioSpec::simple(2, 0.0, 1.0, 1), 0.0, 0.7, 400_000).unwrap();
        assert!((auc - 0.5).abs() < 0.003, "{auc}");
    }

    #[test]
    fn scenario_file() {
        let text = "n = 200\ngamma = 1\nrate = 2\ncensoring = marker_dependent\ncensor_rate = 0.5\ncensor_multiplier = 3\nseed = 4\n";
        let spec = ScenarioSpec::parse(text, "s").unwrap();
        assert_eq!(spec.n, 200);
        assert_eq!(spec.censoring, Censoring::MarkerDependent { rate: 0.5, multiplier: 3.0 });
        let two = ScenarioSpec::parse("n = 10\ncause = 1, 0.5\ncause = 0, 0.5\n", "s").unwrap();
        assert_eq!(two.causes.len(), 2);
        assert!(ScenarioSpec::parse("n = 10\ncensoring = independent\n", "s").is_err());
        assert!(ScenarioSpec::parse("n = 1\n", "s").is_err());
    }

    #[test]
    fn two_piece_hazard_is_continuous_in_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = GammaShape::TwoPiece { before: 1.0, after: -1.0, change: 0.5 };
        for _ in 0..100 {
            assert!(draw_event_time(0.3, 1.0, g, &mut rng) > 0.0);
        }
    }
}
