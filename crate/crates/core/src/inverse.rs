//! Reconstruction: potentials from indexed partial spectra, then speed and
//! initial data from a wave trace, convection and initial data from a heat
//! trace.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extraction::{self, DensityReport};
use crate::liouville::{
    convection_to_potential, gauge_initial_data, potential_to_speed, recover_convection, GaugeDirection,
};
use crate::modes::ModeSet;
use crate::numerics;
use crate::profile::{Profile, ProfileKind};
use crate::sturm::{self, EigenPair};
use crate::trace::BoundaryTrace;
use crate::wave::WaveGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct InversionSettings {
    /// Sub-interval on which the potential is unknown.
    pub unknown_region: (f64, f64),
    pub basis_count: usize,
    /// Tikhonov weight on the curvature of the fitted correction, relative
    /// to the data term.
    pub regularization: f64,
    pub max_iterations: usize,
    /// Target for `‖λ(V̂) − λ_obs‖ / ‖λ_obs‖`.
    pub misfit_tolerance: f64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        Self {
            unknown_region: (0.0, 0.5),
            basis_count: 16,
            regularization: 1e-6,
            max_iterations: 40,
            misfit_tolerance: 1e-10,
        }
    }
}

impl InversionSettings {
    fn validate(&self) -> Result<()> {
        let (a, b) = self.unknown_region;
        if !(b > a) {
            return Err(Error::Validation(format!("empty unknown region ({a}, {b})")));
        }
        if self.basis_count == 0 {
            return Err(Error::Validation("basis_count must be at least 1".into()));
        }
        if !(self.regularization >= 0.0) {
            return Err(Error::Validation("regularization must be non-negative".into()));
        }
        if !(self.misfit_tolerance > 0.0) {
            return Err(Error::Validation("misfit_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian bumps on a region, tapered by `sin²` to vanish at the region
/// ends that lie inside the full interval.
#[derive(Debug, Clone)]
pub struct BumpBasis {
    lo: f64,
    hi: f64,
    taper_lo: bool,
    taper_hi: bool,
    centres: Vec<f64>,
    width: f64,
    taper: f64,
}

impl BumpBasis {
    pub fn new(region: (f64, f64), interval: (f64, f64), count: usize) -> Self {
        let (lo, hi) = region;
        let tol = 1e-12 * (interval.1 - interval.0);
        let taper_lo = lo > interval.0 + tol;
        let taper_hi = hi < interval.1 - tol;
        // Free ends get a bump centred on them; tapered ends keep half a
        // spacing of clearance.
        let first = if taper_lo { 0.5 } else { 0.0 };
        let last = if taper_hi { count as f64 - 0.5 } else { count as f64 - 1.0 };
        let span = (last - first).max(1.0);
        let spacing = (hi - lo) / (span + if taper_lo { 0.5 } else { 0.0 } + if taper_hi { 0.5 } else { 0.0 });
        let centres = (0..count)
            .map(|i| lo + spacing * (i as f64 + if taper_lo { 0.5 } else { 0.0 }))
            .collect();
        Self {
            lo,
            hi,
            taper_lo,
            taper_hi,
            centres,
            width: spacing,
            taper: (3.0 * spacing).min(hi - lo),
        }
    }

    pub fn len(&self) -> usize {
        self.centres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centres.is_empty()
    }

    fn window(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        let len = self.taper;
        let taper = |d: f64| (0.5 * PI * (d / len).min(1.0)).sin().powi(2);
        let mut w = 1.0;
        if self.taper_lo {
            w *= taper(x - self.lo);
        }
        if self.taper_hi {
            w *= taper(self.hi - x);
        }
        w
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        let z = (x - self.centres[i]) / self.width;
        (-0.5 * z * z).exp() * self.window(x)
    }

    /// Samples of every basis function on the nodes of `grid`.
    pub fn sample(&self, grid: &Profile) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| grid.nodes().map(|x| self.eval(i, x)).collect())
            .collect()
    }
}

/// `∂λₖ/∂θᵢ = ∫ φₖ² βᵢ` for every pair and basis sample vector.
pub fn spectral_jacobian(pairs: &[EigenPair], basis: &[Vec<f64>], h: f64) -> DMatrix<f64> {
    DMatrix::from_fn(pairs.len(), basis.len(), |k, i| {
        let prod: Vec<f64> = pairs[k]
            .eigenfunction
            .samples()
            .iter()
            .zip(&basis[i])
            .map(|(p, b)| p * p * b)
            .collect();
        numerics::simpson(&prod, h)
    })
}

/// Eigenpairs at `indices`, computed in parallel.
pub fn eigenpairs_parallel(q: &Profile, indices: &[usize]) -> Result<Vec<EigenPair>> {
    indices
        .par_iter()
        .map(|&k| sturm::dirichlet_eigenpairs_at(q, &[k]).map(|mut v| v.remove(0)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct PotentialFit {
    pub potential: Profile,
    pub coefficients: Vec<f64>,
    /// `‖λ(V̂) − λ_obs‖ / ‖λ_obs‖` at the returned potential.
    pub misfit: f64,
    /// Objective after every accepted step, starting from the initial guess.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Consecutive observed `√λ` gaps look inconsistent with the indices.
    pub gap_flag: bool,
}

/// Flags index gaps whose `√λ` spacing per index step leaves
/// `[0.4, 1.6]·π/L`.
pub fn index_gap_flag(modes: &ModeSet) -> bool {
    let unit = PI / modes.interval_length();
    modes.modes().windows(2).any(|w| {
        let (Some(a), Some(b)) = (w[0].index, w[1].index) else {
            return false;
        };
        let gap = (w[1].lambda.max(0.0).sqrt() - w[0].lambda.max(0.0).sqrt()) / (b - a) as f64;
        w[0].lambda > 0.0 && (gap > 1.6 * unit || gap < 0.4 * unit)
    })
}

/// Gauss–Newton fit of a potential `known ⊕ Σ θᵢ βᵢ` to indexed eigenvalues.
/// Outside the known region the fixed part continues the known profile
/// linearly; the bump basis lives on `settings.unknown_region`.
pub fn recover_potential_from_partial_spectrum(
    observed: &ModeSet,
    known: &Profile,
    settings: &InversionSettings,
) -> Result<PotentialFit> {
    fit_potential(observed, known, settings, false)
}

/// With `free_end` the right end of the interval is fitted too, through
/// `∂λₖ/∂R = −φₖ′(R)²`.
pub fn fit_potential(observed: &ModeSet, known: &Profile, settings: &InversionSettings, free_end: bool) -> Result<PotentialFit> {
    settings.validate()?;
    let (ua, ub) = settings.unknown_region;
    let left = ua.min(known.left());
    let right = ub.max(known.right());
    let tol = 1e-9 * (right - left);
    if known.left() > ub + tol || known.right() < ua - tol {
        return Err(Error::Validation(
            "known and unknown regions leave a gap in the interval".into(),
        ));
    }
    let indices: Vec<usize> = observed
        .modes()
        .iter()
        .map(|m| m.index.ok_or_else(|| Error::Validation("observed eigenvalues must carry indices".into())))
        .collect::<Result<_>>()?;
    if indices.is_empty() {
        return Err(Error::Data("no observed eigenvalues".into()));
    }
    if indices.len() < settings.basis_count && settings.regularization == 0.0 {
        return Err(Error::Conditioning(format!(
            "{} eigenvalues cannot determine {} coefficients without regularization",
            indices.len(),
            settings.basis_count
        )));
    }
    let k_max = *indices.iter().max().unwrap();
    let step = known.step();
    let count = (((right - left) / step).round() as usize + 1).max(4 * k_max + 1).max(65);
    let basis = BumpBasis::new((ua, ub), (left, right), settings.basis_count);
    let nb = settings.basis_count;
    let np = nb + usize::from(free_end);
    // Grid, fixed part and basis samples for a given right end.
    let layout = |end: f64| -> Result<(Profile, Vec<f64>, Vec<Vec<f64>>)> {
        let grid = Profile::constant(ProfileKind::Potential, left, end, count, 0.0)?;
        let base = linear_continuation(known, &grid);
        let samples = basis.sample(&grid);
        Ok((grid, base, samples))
    };
    let end_of = |p: &[f64]| if free_end { right + p[nb] } else { right };
    let build = |p: &[f64]| -> Result<(Profile, Vec<Vec<f64>>)> {
        let (grid, mut v, samples) = layout(end_of(p))?;
        for (t, b) in p[..nb].iter().zip(&samples) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += t * bi;
            }
        }
        Ok((Profile::new(ProfileKind::Potential, left, grid.right(), v)?, samples))
    };
    let obs = DVector::from_vec(observed.lambdas());
    let obs_norm = obs.norm().max(f64::MIN_POSITIVE);
    let (grid0, _, samples0) = layout(right)?;
    let gtg = curvature_gram(&samples0, grid0.step());

    let evaluate = |p: &[f64]| -> Result<(DMatrix<f64>, DVector<f64>)> {
        let (v, samples) = build(p)?;
        let pairs = eigenpairs_parallel(&v, &indices)?;
        let r = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.lambda)) - &obs;
        let theta_jac = spectral_jacobian(&pairs, &samples, v.step());
        let jac = DMatrix::from_fn(pairs.len(), np, |k, i| {
            if i < nb {
                theta_jac[(k, i)]
            } else {
                -pairs[k].right_slope.powi(2)
            }
        });
        Ok((jac, r))
    };
    let mut theta = DVector::zeros(np);
    let (mut jac, mut r) = evaluate(theta.as_slice())?;
    let jtj_trace: f64 = (jac.columns(0, nb).transpose() * jac.columns(0, nb)).trace();
    let alpha = if gtg.trace() > 0.0 {
        settings.regularization * jtj_trace / gtg.trace()
    } else {
        settings.regularization * jtj_trace / nb as f64
    };
    let mut reg_matrix = DMatrix::zeros(np, np);
    if gtg.trace() > 0.0 {
        reg_matrix.view_mut((0, 0), (nb, nb)).copy_from(&gtg);
    } else {
        reg_matrix.view_mut((0, 0), (nb, nb)).fill_with_identity();
    }
    let objective = |r: &DVector<f64>, th: &DVector<f64>| r.norm_squared() + alpha * (th.transpose() * &reg_matrix * th)[(0, 0)];
    let mut phi = objective(&r, &theta);
    let mut history = vec![phi];
    let mut increases = 0;
    let mut iterations = 0;
    while iterations < settings.max_iterations {
        if r.norm() / obs_norm < settings.misfit_tolerance {
            break;
        }
        iterations += 1;
        let lhs = jac.transpose() * &jac + alpha * &reg_matrix;
        let rhs = -(jac.transpose() * &r + alpha * &reg_matrix * &theta);
        let delta = numerics::lstsq(&lhs, &rhs, 1e-14);
        let predicted = rhs.dot(&delta);
        if !(predicted > 1e-15 * phi) {
            break;
        }
        let mut accepted = None;
        let mut s = 1.0;
        for _ in 0..10 {
            let trial = &theta + s * &delta;
            if let Ok((j, rt)) = evaluate(trial.as_slice()) {
                let val = objective(&rt, &trial);
                if val < phi {
                    accepted = Some((trial, j, rt, val));
                    break;
                }
            }
            s *= 0.5;
        }
        let (trial, j, rt, val) = match accepted {
            Some(a) => {
                increases = 0;
                a
            }
            None => {
                increases += 1;
                if increases >= 3 {
                    return Err(Error::Optimization(format!(
                        "misfit increased on 3 consecutive steps; objective history {history:?}"
                    )));
                }
                let trial = &theta + &delta;
                let (j, rt) = evaluate(trial.as_slice())?;
                let val = objective(&rt, &trial);
                (trial, j, rt, val)
            }
        };
        let improvement = (phi - val) / phi.max(f64::MIN_POSITIVE);
        theta = trial;
        jac = j;
        r = rt;
        phi = val;
        history.push(phi);
        if improvement >= 0.0 && improvement < 1e-9 {
            break;
        }
    }
    let (potential, _) = build(theta.as_slice())?;
    Ok(PotentialFit {
        potential,
        coefficients: theta.as_slice()[..nb].to_vec(),
        misfit: r.norm() / obs_norm,
        history,
        iterations,
        gap_flag: index_gap_flag(observed),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePipelineSettings {
    /// Basis, regularization and stopping rule; the unknown region is set
    /// from the estimated travel time.
    pub inversion: InversionSettings,
    /// Zeros requested on the extended interval.
    pub modes: usize,
    /// Zeros requested in the preliminary scan.
    pub preliminary_modes: usize,
    /// Minimum confidence for a zero to enter the fit.
    pub confidence: f64,
    /// Replace the through-origin travel-time estimate by the two-term Weyl fit.
    pub refine_travel_time: bool,
    /// Nodes of the potential grid on the extended interval.
    pub grid_count: usize,
}

impl Default for WavePipelineSettings {
    fn default() -> Self {
        Self {
            inversion: InversionSettings {
                basis_count: 32,
                ..InversionSettings::default()
            },
            modes: 36,
            preliminary_modes: 24,
            confidence: 0.5,
            refine_travel_time: true,
            grid_count: 1025,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpeedReconstruction {
    /// `ĉ` on `[0, 1]`.
    pub speed: Profile,
    /// `q̂` on `[0, L̂]`.
    pub potential: Profile,
    pub travel_time: f64,
    pub preliminary: ModeSet,
    pub spectrum: ModeSet,
    pub fit: PotentialFit,
}

/// Speed from a Dirichlet wave trace and the background speed alone.
pub fn recover_speed_pipeline(
    trace: &BoundaryTrace,
    c0: f64,
    settings: &WavePipelineSettings,
) -> Result<SpeedReconstruction> {
    let stage = |name: &'static str| move |e: Error| e.at_stage(name);
    let preliminary = extraction::zero_scan_spectrum(trace, c0, settings.preliminary_modes)
        .map_err(stage("preliminary scan"))?
        .confident(settings.confidence);
    let mut length = extraction::travel_time_from_spectrum(&preliminary, 1.0).map_err(stage("travel time"))?;
    if settings.refine_travel_time {
        length = extraction::weyl_fit(&preliminary, 1.0).map_err(stage("travel time"))?.0;
    }
    let shift = length;
    let spectrum = extraction::extended_interval_spectrum(trace, c0, shift, settings.modes)
        .map_err(stage("extended spectrum"))?
        .confident(settings.confidence);
    // The shifted zeros live on (0, L + shift); their Weyl slope gives L.
    let implied = extraction::travel_time_from_spectrum(&spectrum, 1.0).map_err(stage("extended spectrum"))? - shift;
    if (implied / length - 1.0).abs() > 0.02 {
        return Err(Error::Consistency(format!(
            "extended spectrum implies travel time {implied:.6}, preliminary estimate {length:.6}"
        )));
    }
    if settings.refine_travel_time {
        length = extraction::weyl_fit(&spectrum, 1.0).map_err(stage("extended spectrum"))?.0 - shift;
    }
    let total = length + shift;
    let known_count = ((settings.grid_count - 1) as f64 * shift / total).round() as usize + 1;
    let known = Profile::constant(ProfileKind::Potential, length, total, known_count.max(4), 0.0)?;
    let inversion = InversionSettings {
        unknown_region: (0.0, length),
        ..settings.inversion.clone()
    };
    let fit = fit_potential(&spectrum, &known, &inversion, settings.refine_travel_time).map_err(stage("potential fit"))?;
    let length = fit.potential.right() - shift;
    let total = fit.potential.right();
    let n_half = ((fit.potential.count() - 1) as f64 * length / total).round() as usize + 1;
    let potential = fit.potential.resample_on(0.0, length, n_half.max(4))?;
    let raw = potential_to_speed(&potential, c0).map_err(stage("speed"))?;
    let speed = Profile::from_fn(ProfileKind::Speed, 0.0, 1.0, raw.count(), |x| {
        if x <= raw.right() {
            raw.eval_clamped(x)
        } else {
            c0
        }
    })?;
    Ok(SpeedReconstruction {
        speed,
        potential,
        travel_time: length,
        preliminary,
        spectrum,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataSettings {
    /// Grid cells on `[0, 1]` for the forward model.
    pub resolution: usize,
    pub cfl: f64,
    /// Transparent-boundary margin beyond `x = 1`.
    pub margin: f64,
    /// Target for `‖Af − d‖ / ‖d‖`.
    pub tolerance: f64,
    /// Stagnation above this multiple of `tolerance` is an error.
    pub stall_factor: f64,
    pub max_iterations: usize,
}

impl Default for InitialDataSettings {
    fn default() -> Self {
        Self {
            resolution: 2048,
            cfl: 0.9,
            margin: 0.25,
            tolerance: 1e-3,
            stall_factor: 10.0,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InitialDataFit {
    /// `f̂` on `[0, 1]`.
    pub initial_data: Profile,
    /// Final `‖Af̂ − d‖ / ‖d‖`.
    pub misfit: f64,
    pub iterations: usize,
}

/// Least-squares initial data for a known speed, by conjugate gradients on
/// the normal equations of the leapfrog map and its exact adjoint.
pub fn recover_wave_initial_data(
    trace: &BoundaryTrace,
    c: &Profile,
    settings: &InitialDataSettings,
) -> Result<InitialDataFit> {
    if trace.t0().abs() > 1e-12 {
        return Err(Error::Validation(format!("wave trace must start at t = 0, got {}", trace.t0())));
    }
    if !(settings.tolerance > 0.0) || !(settings.stall_factor >= 1.0) || settings.max_iterations == 0 {
        return Err(Error::Validation(
            "tolerance and max_iterations must be positive, stall_factor at least 1".into(),
        ));
    }
    let cmax = c.samples().iter().cloned().fold(0.0, f64::max);
    let dt_limit = settings.cfl / (settings.resolution as f64 * cmax);
    let stride = ((dt_limit / trace.dt()).floor() as usize).max(1);
    let data = trace.decimated(stride)?;
    let grid = WaveGrid::new(
        c,
        settings.resolution,
        settings.cfl,
        settings.margin,
        true,
        Some(data.dt()),
        data.t_last() + 0.5 * data.dt(),
    )?;
    let n = grid.samples().min(data.len());
    let d = DVector::from_column_slice(&data.values()[..n]);
    let d_norm = d.norm();
    let unknowns = grid.observe - 1;
    let apply = |x: &DVector<f64>| DVector::from_iterator(n, grid.forward(x.as_slice()).into_iter().take(n));
    let apply_t = |r: &DVector<f64>| {
        let mut full = vec![0.0; grid.samples()];
        full[..n].copy_from_slice(r.as_slice());
        DVector::from_vec(grid.adjoint(&full))
    };
    let mut x = DVector::zeros(unknowns);
    let mut iterations = 0;
    let mut misfit = if d_norm > 0.0 { 1.0 } else { 0.0 };
    if d_norm > 0.0 {
        let mut r = d.clone();
        let mut s = apply_t(&r);
        let mut p = s.clone();
        let mut gamma = s.norm_squared();
        let mut recent = vec![misfit];
        while iterations < settings.max_iterations && misfit > settings.tolerance && gamma > 0.0 {
            iterations += 1;
            let q = apply(&p);
            let alpha = gamma / q.norm_squared();
            x.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &q, 1.0);
            misfit = r.norm() / d_norm;
            recent.push(misfit);
            if recent.len() > 6 && misfit > (1.0 - 1e-3) * recent[recent.len() - 6] {
                break;
            }
            s = apply_t(&r);
            let gamma_new = s.norm_squared();
            p = &s + (gamma_new / gamma) * &p;
            gamma = gamma_new;
        }
    }
    if !misfit.is_finite() {
        return Err(Error::Optimization("initial-data iteration diverged".into()));
    }
    if misfit > settings.stall_factor * settings.tolerance {
        return Err(Error::Optimization(format!(
            "initial-data misfit stalled at {misfit:.3e} after {iterations} iterations"
        )));
    }
    if misfit > settings.tolerance {
        log::warn!("initial-data misfit {misfit:.3e} above tolerance {:.1e}", settings.tolerance);
    }
    let mut samples = vec![0.0; settings.resolution + 1];
    samples[1..grid.observe].copy_from_slice(x.as_slice());
    Ok(InitialDataFit {
        initial_data: Profile::new(ProfileKind::InitialData, 0.0, 1.0, samples)?,
        misfit,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveInversionSettings {
    pub speed: WavePipelineSettings,
    pub initial_data: InitialDataSettings,
}

impl Default for WaveInversionSettings {
    fn default() -> Self {
        Self {
            speed: WavePipelineSettings::default(),
            // The reconstructed speed carries model error, so the data
            // cannot be fit to the tolerance that an exact speed allows.
            initial_data: InitialDataSettings { stall_factor: 100.0, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaveReconstruction {
    pub speed: SpeedReconstruction,
    pub initial_data: InitialDataFit,
}

/// Speed and initial data from a Dirichlet wave trace and `c₀`.
pub fn invert_wave(trace: &BoundaryTrace, c0: f64, settings: &WaveInversionSettings) -> Result<WaveReconstruction> {
    let speed = recover_speed_pipeline(trace, c0, &settings.speed)?;
    let initial_data =
        recover_wave_initial_data(trace, &speed.speed, &settings.initial_data).map_err(|e| e.at_stage("initial data"))?;
    Ok(WaveReconstruction { speed, initial_data })
}

/// Modes below this confidence are left out of the heat synthesis.
pub const HEAT_CONFIDENCE: f64 = 0.5;

/// Assigns spectral indices to unindexed modes from `λₖ ≈ (kπ/L)² + m`,
/// estimating the shift `m` alongside. When two modes claim one index the
/// one closer to the Weyl prediction stays.
pub fn assign_weyl_indices(modes: &ModeSet) -> Result<ModeSet> {
    let unit = PI / modes.interval_length();
    let lambdas = modes.lambdas();
    if lambdas.is_empty() {
        return Err(Error::Data("no modes to index".into()));
    }
    let index_for = |l: f64, m: f64| (((l - m).max(0.0).sqrt() / unit).round() as usize).max(1);
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut offsets: Vec<f64> = lambdas
            .iter()
            .map(|&l| l - (index_for(l, shift) as f64 * unit).powi(2))
            .collect();
        offsets.sort_by(f64::total_cmp);
        let next = offsets[offsets.len() / 2];
        if next == shift {
            break;
        }
        shift = next;
    }
    let mut kept: Vec<crate::modes::Mode> = Vec::new();
    for m in modes.modes() {
        let k = index_for(m.lambda, shift);
        let miss = |l: f64| (l - (k as f64 * unit).powi(2) - shift).abs();
        match kept.last() {
            Some(prev) if prev.index == Some(k) => {
                if miss(m.lambda) < miss(prev.lambda) {
                    kept.pop();
                } else {
                    continue;
                }
            }
            _ => {}
        }
        kept.push(crate::modes::Mode { index: Some(k), ..*m });
    }
    ModeSet::new(kept, modes.interval_length())
}

#[derive(Debug, Clone)]
pub struct HeatInitialData {
    /// `ĝ` on the grid of `b`.
    pub initial_data: Profile,
    /// `ĥ`, before the inverse gauge.
    pub gauged: Profile,
    /// `‖ĥ′‖ (Σ_{k>K} 1/λₖ)^{1/2}`, a bound on the omitted modes.
    pub truncation_estimate: f64,
    /// Indices of modes skipped for low confidence.
    pub skipped: Vec<usize>,
}

/// `ĥ = Σ (aₖ / φₖ′(1)) φₖ` over confident indexed modes, gauged back with `b`.
pub fn recover_heat_initial_data(v: &Profile, modes: &ModeSet, b: &Profile) -> Result<HeatInitialData> {
    let mut used = Vec::new();
    let mut skipped = Vec::new();
    for m in modes.modes() {
        let k = m
            .index
            .ok_or_else(|| Error::Validation("heat modes must carry indices".into()))?;
        if m.confidence < HEAT_CONFIDENCE {
            skipped.push(k);
        } else {
            used.push((k, m.amplitude));
        }
    }
    if used.is_empty() {
        return Err(Error::Data("every mode fell below the confidence threshold".into()));
    }
    let indices: Vec<usize> = used.iter().map(|u| u.0).collect();
    let pairs = eigenpairs_parallel(v, &indices)?;
    let h: Vec<f64> = b
        .nodes()
        .map(|x| {
            let x = x.clamp(v.left(), v.right());
            pairs
                .iter()
                .zip(&used)
                .map(|(p, (_, a))| a / p.right_slope * p.eigenfunction.eval_clamped(x))
                .sum()
        })
        .collect();
    let gauged = Profile::new(ProfileKind::InitialData, b.left(), b.right(), h)?;
    let k_max = *indices.iter().max().unwrap() as f64;
    let slope = gauged.derivative(1)?.l2_norm();
    // Σ_{k>K} 1/(kπ)² ≈ 1/(π²K) for the Weyl-scaled tail.
    let truncation_estimate = slope * (1.0 / (PI * PI * k_max)).sqrt() * v.length();
    let initial_data = gauge_initial_data(&gauged, b, GaugeDirection::Inverse)?;
    Ok(HeatInitialData {
        initial_data,
        gauged,
        truncation_estimate,
        skipped,
    })
}

/// Output of [`fit_heat_flux`].
#[derive(Debug, Clone)]
pub struct HeatFluxFit {
    pub potential: Profile,
    /// Gauged initial data `ĥ`, supported in `[0, ε]`.
    pub gauged: Profile,
    /// `‖model − samples‖ / ‖samples‖`.
    pub misfit: f64,
    pub history: Vec<f64>,
}

/// Hat functions on `n` interior nodes of `[0, support]`.
fn hat(support: f64, n: usize, j: usize, x: f64) -> f64 {
    let w = support / (n + 1) as f64;
    (1.0 - ((x - w * (j + 1) as f64) / w).abs()).max(0.0)
}

/// Joint fit of the potential on `(0, split)` and of gauged initial data
/// supported in `[0, support]` to the flux samples themselves. The initial
/// data enter linearly and are eliminated for every trial potential; the
/// potential coefficients follow Gauss–Newton with finite-difference
/// Jacobians, started from `theta0`.
pub fn fit_heat_flux(
    samples: &BoundaryTrace,
    known: &Profile,
    support: f64,
    theta0: &[f64],
    settings: &InversionSettings,
    hats: usize,
    data_regularization: f64,
) -> Result<HeatFluxFit> {
    settings.validate()?;
    let (ua, ub) = settings.unknown_region;
    let (left, right) = (ua.min(known.left()), ub.max(known.right()));
    let nb = settings.basis_count;
    if theta0.len() != nb {
        return Err(Error::Validation("starting coefficients do not match basis_count".into()));
    }
    if samples.t0() <= 0.0 {
        return Err(Error::Validation("flux samples must start after t = 0".into()));
    }
    let t: Vec<f64> = samples.times().collect();
    let y = DVector::from_column_slice(samples.values());
    let y_norm = y.norm().max(f64::MIN_POSITIVE);
    // Modes decaying below e^{-40} before the first sample are dropped.
    let modes = ((40.0 / samples.t0()).sqrt() * (right - left) / PI).ceil() as usize + 2;
    let count = (8 * modes + 1).max(1025);
    let grid = Profile::constant(ProfileKind::Potential, left, right, count, 0.0)?;
    let base = linear_continuation(known, &grid);
    let basis = BumpBasis::new((ua, ub), (left, right), nb).sample(&grid);
    let hat_samples: Vec<Vec<f64>> = (0..hats)
        .map(|j| grid.nodes().map(|x| hat(support, hats, j, x)).collect())
        .collect();
    let indices: Vec<usize> = (1..=modes).collect();
    let mut smooth = DMatrix::<f64>::zeros(hats, hats);
    for j in 0..hats {
        smooth[(j, j)] = 2.0;
        if j > 0 {
            smooth[(j, j - 1)] = -1.0;
        }
        if j + 1 < hats {
            smooth[(j, j + 1)] = -1.0;
        }
    }
    let ltl = smooth.transpose() * &smooth;
    let build = |theta: &[f64]| -> Result<Profile> {
        let mut v = base.clone();
        for (c, b) in theta.iter().zip(&basis) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += c * bi;
            }
        }
        Profile::new(ProfileKind::Potential, left, right, v)
    };
    // Residual of the eliminated problem, stacked with the smoothing term,
    // and the initial-data coefficients.
    let evaluate = |theta: &[f64]| -> Result<(DVector<f64>, DVector<f64>)> {
        let v = build(theta)?;
        let pairs = eigenpairs_parallel(&v, &indices)?;
        let h = v.step();
        let proj = DMatrix::from_fn(modes, hats, |k, j| {
            let f: Vec<f64> = pairs[k].eigenfunction.samples().iter().zip(&hat_samples[j]).map(|(a, b)| a * b).collect();
            numerics::simpson(&f, h)
        });
        let decay = DMatrix::from_fn(t.len(), modes, |i, k| (-pairs[k].lambda * t[i]).exp() * pairs[k].right_slope);
        let a = decay * proj;
        let ata = a.transpose() * &a;
        let alpha = data_regularization * ata.trace() / ltl.trace();
        let eta = numerics::lstsq(&(&ata + alpha * &ltl), &(a.transpose() * &y), 1e-15);
        let fit = &y - &a * &eta;
        let penalty = alpha.sqrt() * (&smooth * &eta);
        let mut r = DVector::zeros(t.len() + hats);
        r.rows_mut(0, t.len()).copy_from(&fit);
        r.rows_mut(t.len(), hats).copy_from(&penalty);
        Ok((r / y_norm, eta))
    };
    let jacobian = |theta: &DVector<f64>, r0: &DVector<f64>| -> Result<DMatrix<f64>> {
        let cols: Vec<DVector<f64>> = (0..nb)
            .map(|i| {
                let step = 1e-6 * (1.0 + theta[i].abs());
                let mut th = theta.clone();
                th[i] += step;
                evaluate(th.as_slice()).map(|(r, _)| (r - r0) / step)
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_columns(&cols))
    };
    let gtg = curvature_gram(&basis, grid.step());
    let mut theta = DVector::from_column_slice(theta0);
    let (mut r, mut eta) = evaluate(theta.as_slice())?;
    let mut jac = jacobian(&theta, &r)?;
    let alpha = settings.regularization * (jac.transpose() * &jac).trace() / gtg.trace().max(f64::MIN_POSITIVE);
    let objective = |r: &DVector<f64>, th: &DVector<f64>| r.norm_squared() + alpha * (th.transpose() * &gtg * th)[(0, 0)];
    let mut phi = objective(&r, &theta);
    let mut history = vec![phi];
    for _ in 0..settings.max_iterations {
        let lhs = jac.transpose() * &jac + alpha * &gtg;
        let rhs = -(jac.transpose() * &r + alpha * &gtg * &theta);
        let delta = numerics::lstsq(&lhs, &rhs, 1e-14);
        let mut accepted = None;
        let mut step = 1.0;
        for _ in 0..10 {
            let trial = &theta + step * &delta;
            if let Ok((rt, et)) = evaluate(trial.as_slice()) {
                let val = objective(&rt, &trial);
                if val < phi {
                    accepted = Some((trial, rt, et, val));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, rt, et, val)) = accepted else {
            break;
        };
        let improvement = (phi - val) / phi;
        theta = trial;
        r = rt;
        eta = et;
        phi = val;
        history.push(phi);
        if improvement < 1e-6 {
            break;
        }
        jac = jacobian(&theta, &r)?;
    }
    let potential = build(theta.as_slice())?;
    let gauged = Profile::from_fn(ProfileKind::InitialData, left, right, count, |x| {
        (0..hats).map(|j| eta[j] * hat(support, hats, j, x)).sum()
    })?;
    Ok(HeatFluxFit {
        potential,
        gauged,
        misfit: r.rows(0, t.len()).norm(),
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatPipelineSettings {
    /// Basis, regularization and stopping rule; the unknown region is set
    /// from `ε`.
    pub inversion: InversionSettings,
    /// Exponentials requested from the flux samples.
    pub modes: usize,
    /// Refine the potential and initial data jointly against the samples.
    pub refine_with_samples: bool,
    /// Hat functions for the initial data on `[0, ε]`.
    pub initial_data_basis: usize,
    /// Smoothing weight on the initial data, relative to the data term.
    pub initial_data_regularization: f64,
    /// Curvature weight during the joint refinement.
    pub refinement_regularization: f64,
    pub refinement_iterations: usize,
}

impl Default for HeatPipelineSettings {
    fn default() -> Self {
        Self {
            // Only a handful of eigenvalues survive extraction, so the
            // spectral stage leans hard on smoothness.
            inversion: InversionSettings { regularization: 1e-2, ..Default::default() },
            modes: 20,
            refine_with_samples: true,
            initial_data_basis: 20,
            initial_data_regularization: 1e-8,
            refinement_regularization: 1e-8,
            refinement_iterations: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeatReconstruction {
    pub convection: Profile,
    pub initial_data: Profile,
    /// Initial data synthesised from the extracted modes alone.
    pub modal: HeatInitialData,
    /// Fit to the extracted eigenvalues.
    pub potential: PotentialFit,
    /// Joint refinement against the samples, when enabled.
    pub flux_fit: Option<HeatFluxFit>,
    /// Extracted modes with assigned indices.
    pub modes: ModeSet,
    /// `S/N` at the largest observed index.
    pub observed_fraction: f64,
    pub density: DensityReport,
    /// Set when the observed fraction falls short of `(1 − 2ε)N + ε`.
    pub budget_warning: Option<String>,
}

/// Convection and initial data from flux samples and `b` on `[½ − ε, 1]`.
pub fn invert_heat_pipeline(
    samples: &BoundaryTrace,
    b_known: &Profile,
    epsilon: f64,
    settings: &HeatPipelineSettings,
) -> Result<HeatReconstruction> {
    let stage = |name: &'static str| move |e: Error| e.at_stage(name);
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let split = 0.5 - epsilon;
    if (b_known.left() - split).abs() > 1e-9 || (b_known.right() - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!(
            "supp_cond: known convection must cover [{split}, 1], got [{}, {}]",
            b_known.left(),
            b_known.right()
        )));
    }
    let fit = extraction::fit_exponential_modes(samples, settings.modes).map_err(stage("mode extraction"))?;
    let positive: Vec<_> = fit
        .modes
        .modes()
        .iter()
        .filter(|m| m.lambda > 0.0 && m.confidence >= HEAT_CONFIDENCE)
        .cloned()
        .collect();
    let modes = assign_weyl_indices(&ModeSet::new(positive, 1.0)?).map_err(stage("index assignment"))?;
    let known = convection_to_potential(b_known)?;
    let inversion = InversionSettings {
        unknown_region: (0.0, split),
        ..settings.inversion.clone()
    };
    let potential = recover_potential_from_partial_spectrum(&modes, &known, &inversion).map_err(stage("potential fit"))?;
    let b_right = b_known.samples()[b_known.count() - 1];
    let spectral_convection = recover_convection(&potential.potential, b_right).map_err(stage("convection"))?;
    let modal =
        recover_heat_initial_data(&potential.potential, &modes, &spectral_convection).map_err(stage("initial data"))?;
    let flux_fit = if settings.refine_with_samples {
        Some(
            fit_heat_flux(
                samples,
                &known,
                epsilon,
                &potential.coefficients,
                &InversionSettings {
                    regularization: settings.refinement_regularization,
                    max_iterations: settings.refinement_iterations,
                    ..inversion.clone()
                },
                settings.initial_data_basis,
                settings.initial_data_regularization,
            )
            .map_err(stage("joint refinement"))?,
        )
    } else {
        None
    };
    let (convection, initial_data) = match &flux_fit {
        Some(f) => {
            let b = recover_convection(&f.potential, b_right).map_err(stage("convection"))?;
            let h = Profile::from_fn(ProfileKind::InitialData, b.left(), b.right(), b.count(), |x| {
                f.gauged.eval_clamped(x)
            })?;
            let g = gauge_initial_data(&h, &b, GaugeDirection::Inverse).map_err(stage("initial data"))?;
            (b, g)
        }
        None => (spectral_convection, modal.initial_data.clone()),
    };
    let k_max = modes.modes().iter().filter_map(|m| m.index).max().unwrap_or(1);
    let reference = sturm::dirichlet_eigenvalues(&potential.potential, k_max).map_err(stage("density audit"))?;
    let density = extraction::mode_density_report(&modes, &reference, epsilon).map_err(stage("density audit"))?;
    let n = k_max as f64;
    let s_count = modes.len() as f64;
    let observed_fraction = s_count / n;
    let budget_warning = (s_count < (1.0 - 2.0 * epsilon) * n + epsilon).then(|| {
        let msg = format!(
            "information deficit: {s_count} of {n} modes observed, budget needs {:.2}",
            (1.0 - 2.0 * epsilon) * n + epsilon
        );
        log::warn!("{msg}");
        msg
    });
    Ok(HeatReconstruction {
        convection,
        initial_data,
        modal,
        potential,
        flux_fit,
        modes,
        observed_fraction,
        density,
        budget_warning,
    })
}

/// The known profile on its own interval, continued linearly beyond it.
fn linear_continuation(known: &Profile, grid: &Profile) -> Vec<f64> {
    let (dl, dr) = match known.derivative(1) {
        Ok(d) => (d.samples()[0], d.samples()[d.count() - 1]),
        Err(_) => (0.0, 0.0),
    };
    let (kl, kr) = (known.left(), known.right());
    let (vl, vr) = (known.samples()[0], known.samples()[known.count() - 1]);
    grid.nodes()
        .map(|x| {
            if x < kl {
                vl + dl * (x - kl)
            } else if x > kr {
                vr + dr * (x - kr)
            } else {
                known.eval_clamped(x)
            }
        })
        .collect()
}

/// Gram matrix of `∫ (Σθᵢβᵢ)″²` from second differences on the grid.
fn curvature_gram(samples: &[Vec<f64>], h: f64) -> DMatrix<f64> {
    let d2: Vec<Vec<f64>> = samples
        .iter()
        .map(|b| b.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]) / (h * h)).collect())
        .collect();
    let n = samples.len();
    DMatrix::from_fn(n, n, |i, j| h * d2[i].iter().zip(&d2[j]).map(|(a, b)| a * b).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_vanishes_at_interior_ends_only() {
        let b = BumpBasis::new((0.0, 0.45), (0.0, 1.0), 16);
        for i in 0..16 {
            assert_eq!(b.eval(i, 0.45), 0.0);
            assert_eq!(b.eval(i, 0.7), 0.0);
        }
        assert!(b.eval(0, 0.0) > 0.1);
    }

    #[test]
    fn zero_potential_from_free_spectrum() {
        let lambdas: Vec<f64> = (1..=30).map(|k| (k as f64 * PI).powi(2)).collect();
        let observed = ModeSet::from_eigenvalues(&lambdas, 1.0).unwrap();
        let known = Profile::constant(ProfileKind::Potential, 0.5, 1.0, 257, 0.0).unwrap();
        let fit = recover_potential_from_partial_spectrum(&observed, &known, &InversionSettings::default()).unwrap();
        assert!(fit.potential.sup_norm() < 1e-6, "{}", fit.potential.sup_norm());
        assert!(!fit.gap_flag);
    }

    #[test]
    fn underdetermined_without_regularization() {
        let observed = ModeSet::from_eigenvalues(&[PI * PI, 4.0 * PI * PI], 1.0).unwrap();
        let known = Profile::constant(ProfileKind::Potential, 0.5, 1.0, 257, 0.0).unwrap();
        let settings = InversionSettings { regularization: 0.0, ..Default::default() };
        assert!(matches!(
            recover_potential_from_partial_spectrum(&observed, &known, &settings),
            Err(Error::Conditioning(_))
        ));
    }

    #[test]
    fn missing_indices_raise_gap_flag() {
        let modes = ModeSet::from_eigenvalues(&[PI * PI, 9.0 * PI * PI, 16.0 * PI * PI, 25.0 * PI * PI, 36.0 * PI * PI], 1.0)
            .unwrap();
        assert!(index_gap_flag(&modes));
    }
}
