//! Output degree distributions for the LT encoder.

use super::RatelessError;
use rand::Rng;

/// A distribution over coded-symbol degrees. Any distribution with unique
/// degrees, masses summing to one, and support inside the source block can be
/// plugged into the encoder; [`robust_soliton`] builds the default one.
#[derive(Clone, Debug)]
pub struct DegreeDistribution {
    /// `(degree, mass)` pairs sorted by degree; only positive masses kept.
    pub probabilities: Vec<(usize, f64)>,
    cdf: Vec<f64>,
}

impl DegreeDistribution {
    /// Validate and normalize bookkeeping for a list of `(degree, mass)`
    /// pairs. Masses must already sum to one within 1e-12.
    pub fn new(mut probabilities: Vec<(usize, f64)>) -> Result<Self, RatelessError> {
        probabilities.retain(|&(_, m)| m != 0.0);
        if probabilities.is_empty() {
            return Err(RatelessError::InvalidParam(
                "degree distribution has no mass".into(),
            ));
        }
        probabilities.sort_by_key(|&(d, _)| d);
        for w in probabilities.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(RatelessError::InvalidParam(format!(
                    "duplicate degree {}",
                    w[0].0
                )));
            }
        }
        let mut total = 0.0;
        for &(d, m) in &probabilities {
            if d == 0 {
                return Err(RatelessError::InvalidParam("degree 0 has mass".into()));
            }
            if !(m > 0.0 && m <= 1.0) {
                return Err(RatelessError::InvalidParam(format!(
                    "mass {m} for degree {d} outside (0, 1]"
                )));
            }
            total += m;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(RatelessError::InvalidParam(format!(
                "masses sum to {total}, not 1"
            )));
        }
        let mut acc = 0.0;
        let cdf = probabilities
            .iter()
            .map(|&(_, m)| {
                acc += m;
                acc
            })
            .collect();
        Ok(DegreeDistribution { probabilities, cdf })
    }

    /// Parse a two-column `degree mass` text table. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_table(text: &str) -> Result<Self, RatelessError> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(RatelessError::BadTable {
                    line: idx + 1,
                    reason: format!("expected two columns, found {}", cols.len()),
                });
            }
            let degree: usize = cols[0].parse().map_err(|e| RatelessError::BadTable {
                line: idx + 1,
                reason: format!("bad degree: {e}"),
            })?;
            let mass: f64 = cols[1].parse().map_err(|e| RatelessError::BadTable {
                line: idx + 1,
                reason: format!("bad mass: {e}"),
            })?;
            pairs.push((degree, mass));
        }
        DegreeDistribution::new(pairs)
    }

    pub fn max_degree(&self) -> usize {
        self.probabilities.last().map_or(0, |&(d, _)| d)
    }

    /// Mass placed on degree `d` (zero off-support).
    pub fn mass(&self, d: usize) -> f64 {
        self.probabilities
            .binary_search_by_key(&d, |&(deg, _)| deg)
            .map_or(0.0, |i| self.probabilities[i].1)
    }

    /// Draw one degree by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.probabilities[idx.min(self.probabilities.len() - 1)].0
    }
}

/// Standard robust soliton distribution mu(d) = (rho(d) + tau(d)) / beta on
/// degrees 1..=k, with spike position round(k/R) for R = c*ln(k/delta)*sqrt(k).
pub fn robust_soliton(k: usize, c: f64, delta: f64) -> Result<DegreeDistribution, RatelessError> {
    if k < 2 {
        return Err(RatelessError::InvalidParam(format!(
            "block length {k} below 2"
        )));
    }
    if !(c > 0.0) {
        return Err(RatelessError::InvalidParam(format!(
            "soliton c = {c} not positive"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(RatelessError::InvalidParam(format!(
            "soliton delta = {delta} outside (0, 1)"
        )));
    }
    let kf = k as f64;
    let r = c * (kf / delta).ln() * kf.sqrt();
    let spike = ((kf / r).round() as usize).clamp(1, k);
    let rho = |d: usize| {
        if d == 1 {
            1.0 / kf
        } else {
            1.0 / (d as f64 * (d as f64 - 1.0))
        }
    };
    let tau = |d: usize| {
        if d < spike {
            r / (d as f64 * kf)
        } else if d == spike {
            (r * (r / delta).ln()).max(0.0) / kf
        } else {
            0.0
        }
    };
    let raw: Vec<(usize, f64)> = (1..=k).map(|d| (d, rho(d) + tau(d))).collect();
    let beta: f64 = raw.iter().map(|&(_, m)| m).sum();
    DegreeDistribution::new(raw.into_iter().map(|(d, m)| (d, m / beta)).collect())
}
