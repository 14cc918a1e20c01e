//! Sampled real functions on an interval.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{self, UniformSpline};

/// Tolerance used for support and background checks at construction.
pub const SUPPORT_TOLERANCE: f64 = 1e-10;

/// Role a profile plays in the model equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// Wave speed `c(x)`; must stay positive.
    Speed,
    /// Convection coefficient `b(x)` of the heat equation.
    Convection,
    /// Schrödinger potential `q(y)` or `V(x)`.
    Potential,
    /// Initial data `f`, `g` or gauged `h`.
    InitialData,
    /// Derived quantities: eigenfunctions, sensitivities, coordinate maps.
    Auxiliary,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::Speed => "speed",
            ProfileKind::Convection => "convection",
            ProfileKind::Potential => "potential",
            ProfileKind::InitialData => "initial_data",
            ProfileKind::Auxiliary => "auxiliary",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "speed" => Ok(ProfileKind::Speed),
            "convection" => Ok(ProfileKind::Convection),
            "potential" => Ok(ProfileKind::Potential),
            "initial_data" => Ok(ProfileKind::InitialData),
            "auxiliary" => Ok(ProfileKind::Auxiliary),
            other => Err(Error::Parse(format!("unknown profile kind `{other}`"))),
        }
    }
}

/// Uniform samples of a real function on `[left, right]` (endpoints
/// included) with a not-a-knot cubic interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    kind: ProfileKind,
    left: f64,
    right: f64,
    samples: Vec<f64>,
    spline: UniformSpline,
}

impl Profile {
    pub fn new(kind: ProfileKind, left: f64, right: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 4 {
            return Err(Error::Resolution(format!(
                "profile needs at least 4 samples, got {}",
                samples.len()
            )));
        }
        if !(right > left) || !left.is_finite() || !right.is_finite() {
            return Err(Error::Domain(format!("invalid interval [{left}, {right}]")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite sample at index {i}")));
        }
        if kind == ProfileKind::Speed {
            if let Some(i) = samples.iter().position(|&v| v <= 0.0) {
                return Err(Error::Positivity(format!(
                    "speed sample {i} is {} (must be > 0)",
                    samples[i]
                )));
            }
        }
        let spline = UniformSpline::new(left, right, &samples);
        Ok(Self {
            kind,
            left,
            right,
            samples,
            spline,
        })
    }

    /// Samples `f` at `count` uniform nodes.
    pub fn from_fn(
        kind: ProfileKind,
        left: f64,
        right: f64,
        count: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if count < 2 {
            return Err(Error::Resolution("count must be at least 2".into()));
        }
        let h = (right - left) / (count - 1) as f64;
        let samples = (0..count).map(|i| f(left + h * i as f64)).collect();
        Self::new(kind, left, right, samples)
    }

    pub fn constant(kind: ProfileKind, left: f64, right: f64, count: usize, value: f64) -> Result<Self> {
        Self::new(kind, left, right, vec![value; count])
    }

    /// A speed profile that must equal `background` at both endpoints.
    pub fn speed_with_background(left: f64, right: f64, samples: Vec<f64>, background: f64) -> Result<Self> {
        let p = Self::new(ProfileKind::Speed, left, right, samples)?;
        p.check_background(background)?;
        Ok(p)
    }

    /// Checks the background condition `c = c0` at both endpoints.
    pub fn check_background(&self, background: f64) -> Result<()> {
        let first = self.samples[0];
        let last = *self.samples.last().unwrap();
        let tol = SUPPORT_TOLERANCE * background.abs().max(1.0);
        if (first - background).abs() > tol || (last - background).abs() > tol {
            return Err(Error::Validation(format!(
                "c_cond violated: speed endpoints ({first}, {last}) differ from background {background}"
            )));
        }
        Ok(())
    }

    /// Checks that every sample outside `[lo, hi]` vanishes.
    pub fn check_support(&self, lo: f64, hi: f64, label: &str) -> Result<()> {
        let scale = self.sup_norm().max(1.0);
        for (x, v) in self.nodes().zip(&self.samples) {
            let outside = x < lo - 1e-12 || x > hi + 1e-12;
            let boundary = (x - lo).abs() <= 1e-12 || (x - hi).abs() <= 1e-12;
            if (outside || boundary) && v.abs() > SUPPORT_TOLERANCE * scale {
                return Err(Error::Validation(format!(
                    "{label} violated: value {v:e} at x = {x} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn with_kind(&self, kind: ProfileKind) -> Result<Self> {
        Self::new(kind, self.left, self.right, self.samples.clone())
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn step(&self) -> f64 {
        (self.right - self.left) / (self.samples.len() - 1) as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn node(&self, i: usize) -> f64 {
        self.left + self.step() * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..self.samples.len()).map(move |i| self.left + h * i as f64)
    }

    /// Interpolated value; errors outside the interval.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let slack = 1e-12 * self.length().max(1.0);
        if x < self.left - slack || x > self.right + slack || x.is_nan() {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}]",
                self.left, self.right
            )));
        }
        Ok(self.spline.eval(x))
    }

    /// Interpolated value with `x` clamped into the interval.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        self.spline.eval(x.clamp(self.left, self.right))
    }

    /// Value extended by the endpoint values outside the interval.
    pub fn eval_extended(&self, x: f64) -> f64 {
        if x <= self.left {
            self.samples[0]
        } else if x >= self.right {
            *self.samples.last().unwrap()
        } else {
            self.spline.eval(x)
        }
    }

    pub fn eval_derivative_clamped(&self, x: f64) -> f64 {
        self.spline.eval_derivative(x.clamp(self.left, self.right))
    }

    /// Derivative of order 1 or 2 sampled on the same grid, from local
    /// seven-point interpolating stencils (one-sided at the ends).
    pub fn derivative(&self, order: usize) -> Result<Profile> {
        if !(1..=2).contains(&order) {
            return Err(Error::Domain(format!("derivative order {order} not in {{1, 2}}")));
        }
        if self.count() < 8 {
            return Err(Error::Resolution(format!(
                "derivative needs at least 8 samples, got {}",
                self.count()
            )));
        }
        let d = numerics::uniform_derivative(&self.samples, self.step(), order);
        Profile::new(ProfileKind::Auxiliary, self.left, self.right, d)
    }

    /// Resample the interpolant on `count` uniform nodes.
    pub fn resample(&self, count: usize) -> Result<Profile> {
        let s = &self.spline;
        Profile::from_fn(self.kind, self.left, self.right, count, |x| s.eval(x))
    }

    /// Resample on a different interval, extending by endpoint values.
    pub fn resample_on(&self, left: f64, right: f64, count: usize) -> Result<Profile> {
        Profile::from_fn(self.kind, left, right, count, |x| self.eval_extended(x))
    }

    /// Pointwise map of the samples.
    pub fn map(&self, kind: ProfileKind, f: impl Fn(f64, f64) -> f64) -> Result<Profile> {
        let samples = self.nodes().zip(&self.samples).map(|(x, &v)| f(x, v)).collect();
        Profile::new(kind, self.left, self.right, samples)
    }

    /// Composite Simpson integral over the whole interval.
    pub fn integral(&self) -> f64 {
        numerics::simpson(&self.samples, self.step())
    }

    /// Running integral `∫_left^{x_i}` of the interpolant at every node.
    pub fn cumulative_integral(&self) -> Vec<f64> {
        self.spline.cumulative_integral()
    }

    pub fn sup_norm(&self) -> f64 {
        numerics::sup_norm(&self.samples)
    }

    pub fn l2_norm(&self) -> f64 {
        numerics::l2_norm(&self.samples, self.step())
    }

    /// Sup norm of `self − other` evaluated on this profile's nodes, with
    /// `other` extended by its endpoint values.
    pub fn sup_distance(&self, other: &Profile) -> f64 {
        self.nodes()
            .zip(&self.samples)
            .map(|(x, v)| (v - other.eval_extended(x)).abs())
            .fold(0.0, f64::max)
    }

    /// L2 norm of `self − other` on this profile's grid.
    pub fn l2_distance(&self, other: &Profile) -> f64 {
        let diff: Vec<f64> = self
            .nodes()
            .zip(&self.samples)
            .map(|(x, v)| v - other.eval_extended(x))
            .collect();
        numerics::l2_norm(&diff, self.step())
    }

    /// CSV text: header `# kind,left,right,count`, one value per line.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# {},{},{},{}\n",
            self.kind,
            fmt17(self.left),
            fmt17(self.right),
            self.count()
        );
        for v in &self.samples {
            out.push_str(&fmt17(*v));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Profile> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty profile file".into()))?;
        let fields = parse_header(header, 4)?;
        let kind: ProfileKind = fields[0].parse()?;
        let left = parse_f64(&fields[1], "left")?;
        let right = parse_f64(&fields[2], "right")?;
        let count: usize = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad count `{}`", fields[3])))?;
        let samples = lines
            .enumerate()
            .map(|(i, l)| parse_f64(l, &format!("line {}", i + 2)))
            .collect::<Result<Vec<_>>>()?;
        if samples.len() != count {
            return Err(Error::Parse(format!(
                "header declares {count} values, found {}",
                samples.len()
            )));
        }
        Profile::new(kind, left, right, samples)
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_header(line: &str, expected: usize) -> Result<Vec<String>> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse(format!("header must start with `#`: `{line}`")))?;
    let fields: Vec<String> = body.split(',').map(|s| s.trim().to_string()).collect();
    if fields.len() != expected {
        return Err(Error::Parse(format!(
            "header `{line}` has {} fields, expected {expected}",
            fields.len()
        )));
    }
    Ok(fields)
}

pub(crate) fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: cannot parse `{}` as a number", s.trim())))
}
