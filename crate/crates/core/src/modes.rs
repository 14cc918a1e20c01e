//! Extracted spectra and counting tables.

use crate::error::{Error, Result};
use crate::profile::{fmt17, parse_f64, parse_header};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub lambda: f64,
    pub amplitude: f64,
    pub confidence: f64,
    /// Position in the full Dirichlet spectrum (1-based), when known.
    pub index: Option<usize>,
}

impl Mode {
    pub fn new(lambda: f64, amplitude: f64, confidence: f64) -> Self {
        Self {
            lambda,
            amplitude,
            confidence,
            index: None,
        }
    }

    pub fn indexed(index: usize, lambda: f64) -> Self {
        Self {
            lambda,
            amplitude: 0.0,
            confidence: 1.0,
            index: Some(index),
        }
    }
}

/// Modes with strictly increasing eigenvalues on an interval of given length.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    modes: Vec<Mode>,
    interval_length: f64,
}

impl ModeSet {
    pub fn new(modes: Vec<Mode>, interval_length: f64) -> Result<Self> {
        if !(interval_length > 0.0) {
            return Err(Error::Validation(format!(
                "interval length must be positive, got {interval_length}"
            )));
        }
        for w in modes.windows(2) {
            if !(w[1].lambda > w[0].lambda) {
                return Err(Error::Validation(format!(
                    "eigenvalues not strictly increasing: {} then {}",
                    w[0].lambda, w[1].lambda
                )));
            }
            if let (Some(a), Some(b)) = (w[0].index, w[1].index) {
                if b <= a {
                    return Err(Error::Validation(format!("indices not increasing: {a} then {b}")));
                }
            }
        }
        for m in &modes {
            if !(0.0..=1.0).contains(&m.confidence) {
                return Err(Error::Validation(format!(
                    "confidence {} outside [0, 1]",
                    m.confidence
                )));
            }
            if !m.lambda.is_finite() || !m.amplitude.is_finite() {
                return Err(Error::Validation("non-finite mode".into()));
            }
        }
        Ok(Self {
            modes,
            interval_length,
        })
    }

    /// Eigenvalues only, indexed 1..=n, confidence 1.
    pub fn from_eigenvalues(lambdas: &[f64], interval_length: f64) -> Result<Self> {
        let modes = lambdas
            .iter()
            .enumerate()
            .map(|(i, &l)| Mode::indexed(i + 1, l))
            .collect();
        Self::new(modes, interval_length)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn interval_length(&self) -> f64 {
        self.interval_length
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.amplitude).collect()
    }

    /// Modes with confidence at least `threshold`.
    pub fn confident(&self, threshold: f64) -> ModeSet {
        ModeSet {
            modes: self
                .modes
                .iter()
                .filter(|m| m.confidence >= threshold)
                .cloned()
                .collect(),
            interval_length: self.interval_length,
        }
    }

    /// Keeps modes whose index satisfies `keep`.
    pub fn filter_indices(&self, keep: impl Fn(usize) -> bool) -> ModeSet {
        ModeSet {
            modes: self
                .modes
                .iter()
                .filter(|m| m.index.map(&keep).unwrap_or(true))
                .cloned()
                .collect(),
            interval_length: self.interval_length,
        }
    }

    /// CSV text: header `# interval_length,count` then `lambda,amplitude,confidence`
    /// rows, with an optional fourth `index` column when every mode carries one.
    pub fn to_csv(&self) -> String {
        let with_index = !self.modes.is_empty() && self.modes.iter().all(|m| m.index.is_some());
        let mut out = format!("# {},{}\n", fmt17(self.interval_length), self.modes.len());
        for m in &self.modes {
            out.push_str(&format!(
                "{},{},{}",
                fmt17(m.lambda),
                fmt17(m.amplitude),
                fmt17(m.confidence)
            ));
            if with_index {
                out.push_str(&format!(",{}", m.index.unwrap()));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mode file".into()))?;
        let fields = parse_header(header, 2)?;
        let length = parse_f64(&fields[0], "interval_length")?;
        let count: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad count `{}`", fields[1])))?;
        let mut modes = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 && cols.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 3 or 4 columns", i + 2)));
            }
            let mut m = Mode::new(
                parse_f64(cols[0], "lambda")?,
                parse_f64(cols[1], "amplitude")?,
                parse_f64(cols[2], "confidence")?,
            );
            if cols.len() == 4 {
                m.index = Some(
                    cols[3]
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("line {}: bad index", i + 2)))?,
                );
            }
            modes.push(m);
        }
        if modes.len() != count {
            return Err(Error::Parse(format!(
                "header declares {count} modes, found {}",
                modes.len()
            )));
        }
        Self::new(modes, length)
    }
}

/// Counting functions `N`, `S`, `d = N − S` evaluated at thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCounts {
    pub thresholds: Vec<f64>,
    pub total: Vec<usize>,
    pub observed: Vec<usize>,
    pub vanishing: Vec<usize>,
}

impl SpectrumCounts {
    pub fn new(thresholds: Vec<f64>, total: Vec<usize>, observed: Vec<usize>, vanishing: Vec<usize>) -> Result<Self> {
        let n = thresholds.len();
        if total.len() != n || observed.len() != n || vanishing.len() != n {
            return Err(Error::Validation("count columns differ in length".into()));
        }
        for i in 0..n {
            if observed[i] > total[i] || vanishing[i] > total[i] {
                return Err(Error::Validation(format!("counts exceed N at threshold {i}")));
            }
            if i > 0
                && (thresholds[i] <= thresholds[i - 1]
                    || total[i] < total[i - 1]
                    || observed[i] < observed[i - 1]
                    || vanishing[i] < vanishing[i - 1])
            {
                return Err(Error::Validation(format!("counts not monotone at threshold {i}")));
            }
        }
        Ok(Self {
            thresholds,
            total,
            observed,
            vanishing,
        })
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// `d(λ)/√λ` at each threshold.
    pub fn vanishing_density(&self) -> Vec<f64> {
        self.thresholds
            .iter()
            .zip(&self.vanishing)
            .map(|(l, &d)| d as f64 / l.abs().sqrt().max(f64::MIN_POSITIVE))
            .collect()
    }

    /// `S(λ)/N(λ)` at each threshold (1 where `N = 0`).
    pub fn observed_fraction(&self) -> Vec<f64> {
        self.observed
            .iter()
            .zip(&self.total)
            .map(|(&s, &n)| if n == 0 { 1.0 } else { s as f64 / n as f64 })
            .collect()
    }

    pub fn max_vanishing_density(&self) -> f64 {
        self.vanishing_density().into_iter().fold(0.0, f64::max)
    }

    /// Whether `S ≥ (1 − 2ε) N + ε` holds at the largest threshold.
    pub fn meets_budget(&self, epsilon: f64) -> bool {
        match (self.observed.last(), self.total.last()) {
            (Some(&s), Some(&n)) => s as f64 >= (1.0 - 2.0 * epsilon) * n as f64 + epsilon,
            _ => false,
        }
    }

    /// CSV with header `# count` and rows `lambda,N,S,d,d_over_sqrt_lambda,S_over_N`.
    pub fn to_csv(&self) -> String {
        let dens = self.vanishing_density();
        let frac = self.observed_fraction();
        let mut out = format!("# {}\n", self.len());
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt17(self.thresholds[i]),
                self.total[i],
                self.observed[i],
                self.vanishing[i],
                fmt17(dens[i]),
                fmt17(frac[i])
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty counts file".into()))?;
        let fields = parse_header(header, 1)?;
        let count: usize = fields[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad count `{}`", fields[0])))?;
        let (mut th, mut n, mut s, mut d) = (vec![], vec![], vec![], vec![]);
        let int = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad integer `{v}`")))
        };
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::Parse(format!("expected 6 columns in `{line}`")));
            }
            th.push(parse_f64(cols[0], "lambda")?);
            n.push(int(cols[1])?);
            s.push(int(cols[2])?);
            d.push(int(cols[3])?);
        }
        if th.len() != count {
            return Err(Error::Parse(format!("header declares {count} rows, found {}", th.len())));
        }
        Self::new(th, n, s, d)
    }
}
