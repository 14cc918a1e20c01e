//! Runs an [`ExperimentConfig`] and writes its artifacts.
//!
//! Every numeric artifact is CSV with 17 significant digits; the summary is
//! TOML. Output is a pure function of the config and seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::{Equation, ExperimentConfig, HeatSolver, Mode};
use crate::error::{Error, Result};
use crate::extraction;
use crate::heat::{heat_flux_modal, solve_heat_fd, solve_heat_modal, HeatRunOptions};
use crate::inverse::{invert_heat_pipeline, invert_wave, HeatPipelineSettings, WaveInversionSettings};
use crate::numerics;
use crate::profile::{Profile, ProfileKind};
use crate::sturm;
use crate::trace::{BoundaryTrace, TraceFlavor};
use crate::wave::{solve_wave, WaveRunOptions};

/// Support and background checks use this slack.
const HYPOTHESIS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value < tolerance }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub mode: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub notes: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    fn note(&mut self, name: &str, value: impl Into<String>) {
        self.notes.insert(name.to_string(), value.into());
    }
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Summary,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }
}

/// Executes the config's workflow, writing artifacts under `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ReportBundle> {
    config.validate()?;
    let mode = config.mode()?;
    let mut out = Writer::new(out_dir)?;
    let mut summary = Summary { mode: mode.as_str().to_string(), seed: config.seed, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match mode {
        Mode::ForwardWave => forward_wave(config, &mut out, &mut summary, &mut rng)?,
        Mode::ForwardHeat => forward_heat(config, &mut out, &mut summary, &mut rng)?,
        Mode::Extract => extract(config, &mut out, &mut summary, &mut rng)?,
        Mode::InvertWave => invert_wave_mode(config, &mut out, &mut summary, &mut rng)?,
        Mode::InvertHeat => invert_heat_mode(config, &mut out, &mut summary, &mut rng)?,
        Mode::ComparePairs => compare_pairs(config, &mut out, &mut summary)?,
    }
    let text = toml::to_string(&summary).map_err(|e| Error::Io(format!("summary: {e}")))?;
    out.write("summary.toml", &text)?;
    Ok(ReportBundle { out_dir: out.dir, files: out.files, summary })
}

fn wave_options(config: &ExperimentConfig, resolution: usize) -> WaveRunOptions {
    WaveRunOptions {
        t_max: config.grids.t_max,
        cfl: config.grids.cfl,
        resolution,
        ..Default::default()
    }
}

fn heat_options(config: &ExperimentConfig) -> HeatRunOptions {
    let g = &config.grids;
    HeatRunOptions {
        mode_count: g.mode_count,
        fd_resolution: g.fd_resolution,
        fd_dt: g.fd_dt,
        ..HeatRunOptions::uniform(g.heat_t1, g.heat_t2, g.heat_samples)
    }
}

fn simulate_heat(config: &ExperimentConfig, b: &Profile, g: &Profile, opts: &HeatRunOptions) -> Result<BoundaryTrace> {
    match config.grids.heat_solver {
        HeatSolver::Modal => Ok(solve_heat_modal(b, g, opts)?.0),
        HeatSolver::CrankNicolson => solve_heat_fd(b, g, opts),
    }
}

/// Adds `N(0, σ²)` noise drawn from the experiment's generator.
pub fn add_noise(trace: &BoundaryTrace, sigma: f64, rng: &mut ChaCha8Rng) -> Result<BoundaryTrace> {
    if sigma == 0.0 {
        return Ok(trace.clone());
    }
    let dist = Normal::new(0.0, sigma).map_err(|e| Error::Validation(format!("noise: {e}")))?;
    trace.with_values(trace.values().iter().map(|v| v + dist.sample(rng)).collect())
}

fn load_trace(config: &ExperimentConfig) -> Result<Option<BoundaryTrace>> {
    let Some(file) = &config.trace_file else {
        return Ok(None);
    };
    let path = config.base_dir.join(file);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(Some(BoundaryTrace::from_csv(&text).map_err(|e| e.at_stage("trace file"))?))
}

fn forward_wave(config: &ExperimentConfig, out: &mut Writer, summary: &mut Summary, rng: &mut ChaCha8Rng) -> Result<()> {
    let c = config.profile("c", ProfileKind::Speed)?;
    let f = config.profile("f", ProfileKind::InitialData)?;
    c.check_background(config.wave.c0)?;
    let clean = solve_wave(&c, &f, &wave_options(config, config.grids.wave_resolution)).map_err(|e| e.at_stage("wave solve"))?;
    let trace = add_noise(&clean, config.noise.amplitude, rng)?;
    summary.metric("trace_l2", trace.l2_norm());
    summary.metric("trace_peak", trace.peak());
    out.write("c.csv", &c.to_csv())?;
    out.write("f.csv", &f.to_csv())?;
    out.write("trace.csv", &trace.to_csv())
}

fn forward_heat(config: &ExperimentConfig, out: &mut Writer, summary: &mut Summary, rng: &mut ChaCha8Rng) -> Result<()> {
    let b = config.profile("b", ProfileKind::Convection)?;
    let g = config.profile("g", ProfileKind::InitialData)?;
    let opts = heat_options(config);
    let clean = match config.grids.heat_solver {
        HeatSolver::Modal => {
            let (trace, tail) = solve_heat_modal(&b, &g, &opts).map_err(|e| e.at_stage("heat solve"))?;
            summary.metric("modal_tail_bound", tail);
            trace
        }
        HeatSolver::CrankNicolson => solve_heat_fd(&b, &g, &opts).map_err(|e| e.at_stage("heat solve"))?,
    };
    let trace = add_noise(&clean, config.noise.amplitude, rng)?;
    summary.metric("trace_l2", trace.l2_norm());
    out.write("b.csv", &b.to_csv())?;
    out.write("g.csv", &g.to_csv())?;
    out.write("trace.csv", &trace.to_csv())
}

fn extract(config: &ExperimentConfig, out: &mut Writer, summary: &mut Summary, rng: &mut ChaCha8Rng) -> Result<()> {
    let trace = match load_trace(config)? {
        Some(t) => t,
        None => {
            let clean = match config.extract.equation {
                Equation::Wave => {
                    let c = config.profile("c", ProfileKind::Speed)?;
                    let f = config.profile("f", ProfileKind::InitialData)?;
                    solve_wave(&c, &f, &wave_options(config, config.grids.wave_resolution))?
                }
                Equation::Heat => {
                    let b = config.profile("b", ProfileKind::Convection)?;
                    let g = config.profile("g", ProfileKind::InitialData)?;
                    simulate_heat(config, &b, &g, &heat_options(config))?
                }
            };
            add_noise(&clean, config.noise.amplitude, rng)?
        }
    };
    let count = config.extract.count;
    let modes = match trace.flavor() {
        TraceFlavor::Dirichlet => {
            extraction::zero_scan_spectrum(&trace, config.wave.c0, count).map_err(|e| e.at_stage("zero scan"))?
        }
        TraceFlavor::Neumann => {
            let fit = extraction::fit_exponential_modes(&trace, count).map_err(|e| e.at_stage("matrix pencil"))?;
            summary.metric("numerical_rank", fit.numerical_rank as f64);
            summary.metric("residual", fit.residual);
            summary.note("rank_deficient", fit.rank_deficient.to_string());
            fit.modes
        }
    };
    summary.metric("modes", modes.len() as f64);
    out.write("trace.csv", &trace.to_csv())?;
    out.write("modes.csv", &modes.to_csv())
}

fn check_tolerance(config: &ExperimentConfig, summary: &mut Summary, name: &str, value: f64) {
    if let Some(&tol) = config.tolerances.get(name) {
        summary.checks.push(Check::below(name, value, tol));
    }
}

fn invert_wave_mode(config: &ExperimentConfig, out: &mut Writer, summary: &mut Summary, rng: &mut ChaCha8Rng) -> Result<()> {
    let truth = match config.trace_file {
        Some(_) => None,
        None => Some((config.profile("c", ProfileKind::Speed)?, config.profile("f", ProfileKind::InitialData)?)),
    };
    let trace = match (load_trace(config)?, &truth) {
        (Some(t), _) => t,
        (None, Some((c, f))) => {
            let clean = solve_wave(c, f, &wave_options(config, config.grids.wave_resolution))
                .map_err(|e| e.at_stage("wave solve"))?;
            add_noise(&clean, config.noise.amplitude, rng)?
        }
        (None, None) => unreachable!("validated"),
    };
    let mut settings = WaveInversionSettings::default();
    let w = &config.wave;
    if let Some(m) = w.modes {
        settings.speed.modes = m;
    }
    if let Some(n) = w.basis_count {
        settings.speed.inversion.basis_count = n;
    }
    if let Some(r) = w.regularization {
        settings.speed.inversion.regularization = r;
    }
    let rec = invert_wave(&trace, w.c0, &settings)?;
    summary.metric("travel_time", rec.speed.travel_time);
    summary.metric("spectral_misfit", rec.speed.fit.misfit);
    summary.metric("confident_modes", rec.speed.spectrum.confident(settings.speed.confidence).len() as f64);
    summary.metric("initial_data_misfit", rec.initial_data.misfit);
    summary.metric("initial_data_iterations", rec.initial_data.iterations as f64);
    if let Some((c, f)) = &truth {
        let speed_err = rec.speed.speed.sup_distance(c);
        let f_err = rec.initial_data.initial_data.l2_distance(f) / f.l2_norm().max(f64::MIN_POSITIVE);
        summary.metric("speed_sup_error", speed_err);
        summary.metric("initial_data_rel_error", f_err);
        check_tolerance(config, summary, "speed_sup", speed_err);
        check_tolerance(config, summary, "initial_data_rel", f_err);
    }
    out.write("trace.csv", &trace.to_csv())?;
    out.write("spectrum.csv", &rec.speed.spectrum.to_csv())?;
    out.write("potential.csv", &rec.speed.potential.to_csv())?;
    out.write("speed.csv", &rec.speed.speed.to_csv())?;
    out.write("initial_data.csv", &rec.initial_data.initial_data.to_csv())
}

fn invert_heat_mode(config: &ExperimentConfig, out: &mut Writer, summary: &mut Summary, rng: &mut ChaCha8Rng) -> Result<()> {
    let epsilon = config.heat.epsilon;
    let b = config.profile("b", ProfileKind::Convection)?;
    let g = match config.trace_file {
        Some(_) => None,
        None => Some(config.profile("g", ProfileKind::InitialData)?),
    };
    let trace = match (load_trace(config)?, &g) {
        (Some(t), _) => t,
        (None, Some(g)) => {
            let clean = simulate_heat(config, &b, g, &heat_options(config)).map_err(|e| e.at_stage("heat solve"))?;
            add_noise(&clean, config.noise.amplitude, rng)?
        }
        (None, None) => unreachable!("validated"),
    };
    let split = 0.5 - epsilon;
    if b.left() > split || b.right() < 1.0 {
        return Err(Error::Validation(format!("supp_cond: profile b must cover [{split}, 1]")));
    }
    let count = ((1.0 - split) / b.step()).round() as usize + 1;
    let b_known = b.resample_on(split, 1.0, count.max(9))?;
    let mut settings = HeatPipelineSettings::default();
    let h = &config.heat;
    if let Some(m) = h.modes {
        settings.modes = m;
    }
    if let Some(n) = h.basis_count {
        settings.inversion.basis_count = n;
    }
    if let Some(r) = h.regularization {
        settings.inversion.regularization = r;
    }
    if let Some(r) = h.refine_with_samples {
        settings.refine_with_samples = r;
    }
    let rec = invert_heat_pipeline(&trace, &b_known, epsilon, &settings)?;
    summary.metric("modes", rec.modes.len() as f64);
    summary.metric("observed_fraction", rec.observed_fraction);
    summary.metric("max_vanishing_density", rec.density.max_density);
    summary.metric("density_bound", rec.density.bound);
    summary.metric("spectral_misfit", rec.potential.misfit);
    if let Some(fit) = &rec.flux_fit {
        summary.metric("flux_misfit", fit.misfit);
    }
    if let Some(w) = &rec.budget_warning {
        summary.note("budget_warning", w.clone());
    }
    if let Some(g) = &g {
        let b_err = rec.convection.sup_distance(&b);
        let g_err = rec.initial_data.l2_distance(g) / g.l2_norm().max(f64::MIN_POSITIVE);
        summary.metric("convection_sup_error", b_err);
        summary.metric("initial_data_rel_error", g_err);
        check_tolerance(config, summary, "convection_sup", b_err);
        check_tolerance(config, summary, "initial_data_rel", g_err);
    }
    out.write("trace.csv", &trace.to_csv())?;
    out.write("modes.csv", &rec.modes.to_csv())?;
    out.write("counts.csv", &rec.density.counts.to_csv())?;
    out.write("potential.csv", &rec.potential.potential.to_csv())?;
    out.write("convection.csv", &rec.convection.to_csv())?;
    out.write("initial_data.csv", &rec.initial_data.to_csv())
}

/// Trace distances between two runs and the solver floor.
#[derive(Debug, Clone, PartialEq)]
pub struct PairComparison {
    pub traces: (BoundaryTrace, BoundaryTrace),
    pub l2: f64,
    pub sup: f64,
    /// Refinement estimate of the forward-solver error.
    pub floor: f64,
}

impl PairComparison {
    pub fn distinguishable(&self, factor: f64) -> bool {
        self.l2 > factor * self.floor
    }
}

fn trace_distance(a: &BoundaryTrace, b: &BoundaryTrace) -> Result<(f64, f64)> {
    if (a.dt() - b.dt()).abs() > 1e-12 * a.dt() || a.t0() != b.t0() {
        return Err(Error::Resolution("traces do not share sample times".into()));
    }
    let n = a.len().min(b.len());
    if n == 0 {
        return Err(Error::Data("empty traces".into()));
    }
    let diff: Vec<f64> = (0..n).map(|i| a.values()[i] - b.values()[i]).collect();
    let sup = diff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((numerics::l2_norm(&diff, a.dt()), sup))
}

/// Wave pairs under `c = c₀` at the ends and `supp f ⊂ (0, 1)`; the floor
/// comes from a run at twice the resolution.
pub fn compare_wave_pairs(
    pair1: (&Profile, &Profile),
    pair2: (&Profile, &Profile),
    c0: f64,
    opts: &WaveRunOptions,
) -> Result<PairComparison> {
    for (c, f) in [pair1, pair2] {
        c.check_background(c0)?;
        f.check_support(0.0, 1.0, "F_supp")?;
    }
    if pair1.0.sup_norm() == 0.0 || pair2.0.sup_norm() == 0.0 {
        return Err(Error::Validation("c_cond: speed must be positive".into()));
    }
    let cmax = [pair1.0, pair2.0]
        .iter()
        .flat_map(|c| c.samples().iter())
        .fold(0.0f64, |m, v| m.max(*v));
    let opts = &WaveRunOptions { sample_dt: Some(opts.cfl / (opts.resolution as f64 * cmax)), ..*opts };
    let fine = WaveRunOptions { resolution: 2 * opts.resolution, ..*opts };
    let mut floor = 0.0f64;
    let mut traces = Vec::new();
    for (c, f) in [pair1, pair2] {
        let coarse = solve_wave(c, f, opts)?;
        let refined = solve_wave(c, f, &fine)?;
        floor = floor.max(trace_distance(&coarse, &refined)?.0);
        traces.push(coarse);
    }
    let (l2, sup) = trace_distance(&traces[0], &traces[1])?;
    let scale = traces.iter().map(|t| t.l2_norm()).fold(0.0, f64::max);
    let t2 = traces.pop().unwrap();
    let t1 = traces.pop().unwrap();
    Ok(PairComparison { traces: (t1, t2), l2, sup, floor: floor.max(1e-14 * scale) })
}

/// Heat pairs under `supp g ⊂ [0, ε]` and `b₁ = b₂` on `[½ − ε, 1]`; the
/// floor comes from doubling the mode count.
pub fn compare_heat_pairs(
    pair1: (&Profile, &Profile),
    pair2: (&Profile, &Profile),
    epsilon: f64,
    opts: &HeatRunOptions,
) -> Result<PairComparison> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    for (_, g) in [pair1, pair2] {
        g.check_support(0.0, epsilon, "supp_cond")?;
    }
    let split = 0.5 - epsilon;
    let nodes = pair1.0.count().max(pair2.0.count());
    let gap = (0..nodes)
        .map(|i| split + (1.0 - split) * i as f64 / (nodes - 1) as f64)
        .map(|x| (pair1.0.eval_clamped(x) - pair2.0.eval_clamped(x)).abs())
        .fold(0.0f64, f64::max);
    if gap > HYPOTHESIS_TOLERANCE {
        return Err(Error::Validation(format!(
            "supp_cond: convection coefficients differ by {gap:.3e} on [{split}, 1]"
        )));
    }
    let mut floor = 0.0f64;
    let mut traces = Vec::new();
    for (b, g) in [pair1, pair2] {
        let coarse = heat_flux_modal(b, g, &opts.times, opts.mode_count)?.values;
        let refined = heat_flux_modal(b, g, &opts.times, 2 * opts.mode_count)?.values;
        let trace = solve_heat_modal(b, g, opts)?.0.with_values(coarse.clone())?;
        let fine = trace.with_values(refined)?;
        floor = floor.max(trace_distance(&trace, &fine)?.0);
        traces.push(trace);
    }
    let (l2, sup) = trace_distance(&traces[0], &traces[1])?;
    let scale = traces.iter().map(|t| t.l2_norm()).fold(0.0, f64::max);
    let t2 = traces.pop().unwrap();
    let t1 = traces.pop().unwrap();
    Ok(PairComparison { traces: (t1, t2), l2, sup, floor: floor.max(1e-14 * scale) })
}

fn compare_pairs(config: &ExperimentConfig, out: &mut Writer, summary: &mut Summary) -> Result<()> {
    let cmp = match config.compare.equation {
        Equation::Wave => {
            let c1 = config.profile("c1", ProfileKind::Speed)?;
            let f1 = config.profile("f1", ProfileKind::InitialData)?;
            let c2 = config.profile("c2", ProfileKind::Speed)?;
            let f2 = config.profile("f2", ProfileKind::InitialData)?;
            compare_wave_pairs((&c1, &f1), (&c2, &f2), config.wave.c0, &wave_options(config, config.grids.wave_resolution))?
        }
        Equation::Heat => {
            let b1 = config.profile("b1", ProfileKind::Convection)?;
            let g1 = config.profile("g1", ProfileKind::InitialData)?;
            let b2 = config.profile("b2", ProfileKind::Convection)?;
            let g2 = config.profile("g2", ProfileKind::InitialData)?;
            compare_heat_pairs((&b1, &g1), (&b2, &g2), config.heat.epsilon, &heat_options(config))?
        }
    };
    let factor = config.tolerances.get("floor_factor").copied().unwrap_or(10.0);
    summary.metric("distance_l2", cmp.l2);
    summary.metric("distance_sup", cmp.sup);
    summary.metric("solver_floor", cmp.floor);
    summary.metric("floor_factor", factor);
    let verdict = if cmp.distinguishable(factor) {
        "distinguishable"
    } else {
        "indistinguishable_at_resolution"
    };
    summary.note("verdict", verdict);
    out.write("trace_1.csv", &cmp.traces.0.to_csv())?;
    out.write("trace_2.csv", &cmp.traces.1.to_csv())
}

/// Fast built-in checks of the solver stack.
pub fn selftest() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let zero = Profile::constant(ProfileKind::Potential, 0.0, 1.0, 257, 0.0)?;
    let lambdas = sturm::dirichlet_eigenvalues(&zero, 10)?.lambdas();
    let spectrum_err = lambdas
        .iter()
        .enumerate()
        .map(|(i, l)| (l / ((i + 1) as f64 * PI).powi(2) - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::below("free_spectrum_rel", spectrum_err, 1e-9));

    let c = Profile::constant(ProfileKind::Speed, 0.0, 1.0, 17, 1.0)?;
    let bump = |x: f64| if x > 0.2 && x < 0.7 { (4.0 * (x - 0.2) / 0.5 * (0.7 - x) / 0.5).powi(4) } else { 0.0 };
    let f = Profile::from_fn(ProfileKind::InitialData, 0.0, 1.0, 513, bump)?;
    let tr = solve_wave(&c, &f, &WaveRunOptions { t_max: 2.0, cfl: 1.0, resolution: 512, ..Default::default() })?;
    let dalembert = |t: f64| if t < 1.0 { 0.5 * bump(1.0 - t) } else { -0.5 * bump(t - 1.0) };
    let wave_err = tr.times().zip(tr.values()).map(|(t, v)| (v - dalembert(t)).abs()).fold(0.0, f64::max);
    checks.push(Check::below("dalembert_sup", wave_err, 1e-12));

    let b = Profile::constant(ProfileKind::Convection, 0.0, 1.0, 513, 0.5)?;
    let g = Profile::from_fn(ProfileKind::InitialData, 0.0, 1.0, 513, |x| (PI * x).sin())?;
    let times = [0.05, 0.1, 0.2];
    let modal = heat_flux_modal(&b, &g, &times, 40)?.values;
    let fd = crate::heat::heat_flux_fd(&b, &g, &times, 2049, 1e-4)?;
    let heat_err = modal.iter().zip(&fd).map(|(a, c)| (a - c).abs() / a.abs()).fold(0.0, f64::max);
    checks.push(Check::below("heat_cross_path_rel", heat_err, 1e-4));

    let planted: Vec<f64> = (0..200)
        .map(|i| {
            let t = 0.01 + 0.005 * i as f64;
            (-9.87 * t).exp() - 0.5 * (-39.5 * t).exp()
        })
        .collect();
    let fit = extraction::fit_exponential_modes(&BoundaryTrace::new(0.01, 0.005, planted, TraceFlavor::Neumann)?, 2)?;
    let pencil_err = fit
        .modes
        .lambdas()
        .iter()
        .zip([9.87, 39.5])
        .map(|(l, r)| (l / r - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::below("pencil_rel", pencil_err, 1e-8));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_seeded() {
        let tr = BoundaryTrace::new(0.0, 0.1, vec![0.0; 16], TraceFlavor::Dirichlet).unwrap();
        let a = add_noise(&tr, 1e-3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = add_noise(&tr, 1e-3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let c = add_noise(&tr, 1e-3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn selftest_passes() {
        for c in selftest().unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }
}
