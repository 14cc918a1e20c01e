//! Time-sampled boundary observations.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics;
use crate::profile::{fmt17, parse_f64, parse_header};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFlavor {
    /// `u(t, 1)`
    Dirichlet,
    /// `∂ₓu(t, 1)`
    Neumann,
}

impl fmt::Display for TraceFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceFlavor::Dirichlet => "dirichlet",
            TraceFlavor::Neumann => "neumann",
        })
    }
}

impl FromStr for TraceFlavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dirichlet" => Ok(TraceFlavor::Dirichlet),
            "neumann" => Ok(TraceFlavor::Neumann),
            other => Err(Error::Parse(format!("unknown trace flavor `{other}`"))),
        }
    }
}

/// Uniformly sampled boundary trace with an empirical decay rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    flavor: TraceFlavor,
    decay_rate_estimate: Option<f64>,
}

impl BoundaryTrace {
    /// Builds a trace and estimates its decay rate from the final quarter.
    pub fn new(t0: f64, dt: f64, values: Vec<f64>, flavor: TraceFlavor) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Resolution(format!(
                "trace needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::Validation(format!("invalid time grid t0 = {t0}, dt = {dt}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite trace value at index {i}")));
        }
        let decay = estimate_decay_rate(t0, dt, &values);
        Ok(Self {
            t0,
            dt,
            values,
            flavor,
            decay_rate_estimate: decay,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flavor(&self) -> TraceFlavor {
        self.flavor
    }

    pub fn decay_rate_estimate(&self) -> Option<f64> {
        self.decay_rate_estimate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.time(i))
    }

    pub fn t_last(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn peak(&self) -> f64 {
        numerics::sup_norm(&self.values)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.t0, self.dt, values, self.flavor)
    }

    /// Keeps samples with `t <= t_end`.
    pub fn truncated(&self, t_end: f64) -> Result<Self> {
        let keep = ((t_end - self.t0) / self.dt + 1e-9).floor() as usize + 1;
        let keep = keep.min(self.values.len());
        Self::new(self.t0, self.dt, self.values[..keep].to_vec(), self.flavor)
    }

    /// Every `stride`-th sample.
    pub fn decimated(&self, stride: usize) -> Result<Self> {
        let values = self.values.iter().step_by(stride.max(1)).cloned().collect();
        Self::new(self.t0, self.dt * stride.max(1) as f64, values, self.flavor)
    }

    pub fn l2_norm(&self) -> f64 {
        numerics::l2_norm(&self.values, self.dt)
    }

    /// CSV text: header `# flavor,t0,dt,count`, one value per line.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# {},{},{},{}\n",
            self.flavor,
            fmt17(self.t0),
            fmt17(self.dt),
            self.values.len()
        );
        for v in &self.values {
            out.push_str(&fmt17(*v));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trace file".into()))?;
        let fields = parse_header(header, 4)?;
        let flavor: TraceFlavor = fields[0].parse()?;
        let t0 = parse_f64(&fields[1], "t0")?;
        let dt = parse_f64(&fields[2], "dt")?;
        let count: usize = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad count `{}`", fields[3])))?;
        let values = lines
            .enumerate()
            .map(|(i, l)| parse_f64(l, &format!("line {}", i + 2)))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != count {
            return Err(Error::Parse(format!(
                "header declares {count} values, found {}",
                values.len()
            )));
        }
        Self::new(t0, dt, values, flavor)
    }
}

/// Log-linear fit of the running tail maximum `m(t) = max_{s≥t} |v(s)|`
/// over the final quarter (its last quarter excluded, where `m` collapses
/// onto the final sample), clamped so that
/// `|v_last| ≤ 10 · max|v| · e^{−κ (t_last − t_peak)}`. Returns `None`
/// unless the fitted envelope at least halves across the fit window.
fn estimate_decay_rate(t0: f64, dt: f64, values: &[f64]) -> Option<f64> {
    let n = values.len();
    let (i_peak, peak) = values
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    let start = (3 * n / 4).max(i_peak + 1);
    if peak == 0.0 || n < 32 || start >= n {
        return None;
    }
    let stop = start + 3 * (n - start) / 4;
    if stop < start + 4 {
        return None;
    }
    let floor = peak * 1e-16;
    let mut envelope = vec![0.0; n];
    let mut running = 0.0f64;
    for i in (start..n).rev() {
        running = running.max(values[i].abs());
        envelope[i] = running.max(floor);
    }
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (i, e) in envelope.iter().enumerate().take(stop).skip(start) {
        let t = t0 + dt * i as f64;
        let y = e.ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let m = (stop - start) as f64;
    let denom = m * stt - st * st;
    if denom <= 0.0 {
        return None;
    }
    let mut kappa = -(m * sty - st * sy) / denom;
    let window = dt * (stop - start) as f64;
    if !(kappa * window > std::f64::consts::LN_2) {
        return None;
    }
    let last = values[n - 1].abs();
    let span = dt * (n - 1 - i_peak) as f64;
    if last > 0.0 {
        kappa = kappa.min((10.0 * peak / last).ln() / span);
    }
    (kappa.is_finite() && kappa > 0.0).then_some(kappa)
}
