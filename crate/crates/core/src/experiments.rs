//! The two-step polarization protocol and the parameter sweeps built on it.
//!
//! Step (i) drives the system with the laser until it settles into the
//! first non-equilibrium steady state ρ₁ˢˢ; step (ii) switches the laser off
//! and lets it relax to ρ₂ˢˢ, whose `|1⟩` population is the polarization.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::{
    asymptotic_state, build_rate_matrix, steady_state, weak_drive_limit, Phase, PiecewisePath,
    PopulationPropagator, PopulationVector, Trajectory,
};
use crate::model::{build_model, Level, ModelParams, NvModel};
use crate::thermo::{entropy, integrate_ledger, Ledger, LedgerOptions, LedgerTotals};

/// Tolerance on `max|p(t_end) − ρ₂ˢˢ|` before a phase-2 convergence warning.
pub const PHASE2_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    UniformGround,
    Explicit(PopulationVector),
}

impl InitialState {
    pub fn populations(&self) -> PopulationVector {
        match self {
            InitialState::UniformGround => PopulationVector::uniform_ground(),
            InitialState::Explicit(p) => *p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub gamma_p: f64,
    /// Laser switch-off time (μs).
    pub t_off: f64,
    /// End of the relaxation phase (μs).
    pub t_end: f64,
    /// Number of uniformly spaced output samples on `[0, t_end]`; `t_off` is
    /// added when it does not fall on the grid.
    pub sample_count: usize,
    pub b_z: f64,
    /// Threshold on the relative stationarity residual `‖W p‖_max / max_rate`.
    pub ness_tol: f64,
    pub initial_state: InitialState,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            gamma_p: 1.0,
            t_off: 10.0,
            t_end: 30.0,
            sample_count: 601,
            b_z: 0.0,
            ness_tol: 1e-8,
            initial_state: InitialState::UniformGround,
        }
    }
}

impl ProtocolConfig {
    pub fn with_gamma_p(mut self, gamma_p: f64) -> Self {
        self.gamma_p = gamma_p;
        self
    }

    /// Sets `t_off` and moves `t_end` to keep the default 20 μs relaxation.
    pub fn with_t_off(mut self, t_off: f64) -> Self {
        self.t_off = t_off;
        self.t_end = t_off + 20.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_p.is_finite() && self.gamma_p >= 0.0) {
            return Err(Error::invalid("gamma_p", format!("must be finite and >= 0, got {}", self.gamma_p)));
        }
        if !(self.t_off.is_finite() && self.t_off > 0.0) {
            return Err(Error::invalid("t_off", format!("must be > 0, got {}", self.t_off)));
        }
        if !(self.t_end.is_finite() && self.t_end > self.t_off) {
            return Err(Error::invalid(
                "t_end",
                format!("must exceed t_off = {}, got {}", self.t_off, self.t_end),
            ));
        }
        if self.sample_count < 2 {
            return Err(Error::invalid("sample_count", format!("must be >= 2, got {}", self.sample_count)));
        }
        if !(self.ness_tol.is_finite() && self.ness_tol > 0.0) {
            return Err(Error::invalid("ness_tol", format!("must be > 0, got {}", self.ness_tol)));
        }
        if !self.b_z.is_finite() {
            return Err(Error::invalid("b_z", "must be finite"));
        }
        if let InitialState::Explicit(p) = &self.initial_state {
            p.validate()?;
        }
        Ok(())
    }

    /// Output grid: `sample_count` uniform points on `[0, t_end]` plus `t_off`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = self.sample_count - 1;
        let mut times: Vec<f64> = (0..=n).map(|k| self.t_end * k as f64 / n as f64).collect();
        times[n] = self.t_end;
        let i = times.partition_point(|t| *t < self.t_off);
        if times[i] != self.t_off {
            times.insert(i, self.t_off);
        }
        times
    }

    fn model(&self, params: &ModelParams) -> Result<NvModel> {
        let mut p = *params;
        p.gamma_p = self.gamma_p;
        p.b_z = self.b_z;
        build_model(p)
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub trajectory: Trajectory<PopulationVector>,
    pub ledger: Ledger,
    /// Ledger totals over `[0, t_off]` and `[t_off, t_end]`.
    pub phase_totals: [LedgerTotals; 2],
    /// State at `t_off`.
    pub rho1_ss: PopulationVector,
    /// Stationarity residual of `rho1_ss` under the laser-on generator.
    pub rho1_residual: f64,
    /// First time the residual drops below `ness_tol`; `None` if not reached
    /// by `t_off`.
    pub ness1_reached_at: Option<f64>,
    pub rho2_ss: PopulationVector,
    pub polarization: f64,
    pub warnings: Vec<String>,
}

impl ProtocolResult {
    /// Index of the `t_off` sample.
    pub fn t_off_index(&self) -> usize {
        self.trajectory.laser_on.iter().rposition(|on| *on).unwrap_or(0)
    }
}

/// Runs the two-step protocol and integrates its ledger.
pub fn run_protocol(cfg: &ProtocolConfig, params: &ModelParams) -> Result<ProtocolResult> {
    run_protocol_with(cfg, params, &LedgerOptions::default())
}

pub fn run_protocol_with(
    cfg: &ProtocolConfig,
    params: &ModelParams,
    ledger_opts: &LedgerOptions,
) -> Result<ProtocolResult> {
    cfg.validate()?;
    let model = cfg.model(params)?;
    let w_on = build_rate_matrix(&model, true);
    let w_off = build_rate_matrix(&model, false);
    let mut warnings = Vec::new();

    let p0 = cfg.initial_state.populations();
    let on = PopulationPropagator::new(w_on, p0, 0.0);
    let p_off = on.checked_at(cfg.t_off)?;
    let off = PopulationPropagator::new(w_off, p_off, cfg.t_off);
    let path = PiecewisePath {
        phases: vec![
            Phase {
                t_start: 0.0,
                t_end: cfg.t_off,
                propagator: on.clone(),
            },
            Phase {
                t_start: cfg.t_off,
                t_end: cfg.t_end,
                propagator: off,
            },
        ],
    };

    let times = cfg.sample_times();
    let mut states = Vec::with_capacity(times.len());
    let mut laser = Vec::with_capacity(times.len());
    for &t in &times {
        let ph = path.phase_at(t).expect("sample inside protocol span");
        states.push(ph.propagator.checked_at(t)?);
        laser.push(ph.laser_on());
    }
    let trajectory = Trajectory {
        times,
        states,
        laser_on: laser,
        path: Some(path),
    };

    let rho1_residual = w_on.relative_residual(&p_off);
    let ness1_reached_at = if cfg.gamma_p == 0.0 {
        // Nothing moves without the pump; the initial state is stationary
        // whenever it lies in G.
        (rho1_residual <= cfg.ness_tol).then_some(0.0)
    } else {
        first_ness_time(&on, cfg.t_off, cfg.ness_tol)
    };
    if ness1_reached_at.is_none() {
        warnings.push(format!(
            "laser-on NESS not reached by t_off = {} us: residual {:.3e} > ness_tol {:.1e}",
            cfg.t_off, rho1_residual, cfg.ness_tol
        ));
    }

    let rho2_ss = asymptotic_state(&w_off, &p_off)?;
    let p_end = trajectory.last().expect("non-empty trajectory");
    let phase2_gap = p_end.max_abs_diff(&rho2_ss);
    if phase2_gap > PHASE2_TOL {
        warnings.push(format!(
            "relaxation not converged by t_end = {} us: max|p(t_end) - rho2_ss| = {:.3e}",
            cfg.t_end, phase2_gap
        ));
    }
    let outside_g = rho2_ss.excited() + rho2_ss.intersystem();
    if outside_g > 1e-9 {
        warnings.push(format!("rho2_ss has {outside_g:.3e} population outside G"));
    }

    let ledger = integrate_ledger(&trajectory, &model, ledger_opts)?;
    if let Some(w) = &ledger.totals.warning {
        warnings.push(w.clone());
    }
    let i_off = trajectory.times.partition_point(|t| *t < cfg.t_off);
    let last = trajectory.len() - 1;
    let phase_totals = [
        LedgerTotals::between(&ledger.samples, 0, i_off),
        LedgerTotals::between(&ledger.samples, i_off, last),
    ];

    Ok(ProtocolResult {
        polarization: rho2_ss.get(Level::of(1)),
        trajectory,
        ledger,
        phase_totals,
        rho1_ss: p_off,
        rho1_residual,
        ness1_reached_at,
        rho2_ss,
        warnings,
    })
}

/// Earliest time in `(t0, t_max]` at which the relative residual of the
/// propagated state is `<= tol`, located on a uniform scan and refined by
/// bisection.
fn first_ness_time(prop: &PopulationPropagator, t_max: f64, tol: f64) -> Option<f64> {
    let (t0, _) = prop.initial();
    let w = prop.generator();
    let residual = |t: f64| w.relative_residual(&prop.at(t));
    if residual(t0) <= tol {
        return Some(t0);
    }
    const SCAN: usize = 400;
    let mut lo = t0;
    let mut hi = None;
    for k in 1..=SCAN {
        let t = t0 + (t_max - t0) * k as f64 / SCAN as f64;
        if residual(t) <= tol {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi?;
    while hi - lo > 1e-9 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if residual(mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Time for the laser-on dynamics from the uniform ground state to reach the
/// relative residual `tol`; `None` if not reached by `t_max`.
pub fn time_to_ness(params: &ModelParams, tol: f64, t_max: f64) -> Result<Option<f64>> {
    let model = build_model(*params)?;
    let prop = PopulationPropagator::new(
        build_rate_matrix(&model, true),
        PopulationVector::uniform_ground(),
        0.0,
    );
    Ok(first_ness_time(&prop, t_max, tol))
}

/// Laser-on stationary state ρ₁ˢˢ. At `Γ_p = 0` the laser-on generator has a
/// three-fold kernel and the state is taken as the `Γ_p → 0⁺` limit.
pub fn ness1(params: &ModelParams) -> Result<PopulationVector> {
    let model = build_model(*params)?;
    if params.gamma_p > 0.0 {
        return steady_state(&build_rate_matrix(&model, true));
    }
    let w_off = build_rate_matrix(&model, false);
    let unit = build_model(params.with_gamma_p(1.0))?;
    let drive = build_rate_matrix(&unit, true).matrix() - w_off.matrix();
    weak_drive_limit(&w_off, &drive)
}

/// ρ₂ˢˢ reached after switching the laser off at ρ₁ˢˢ.
pub fn ness2(params: &ModelParams, rho1: &PopulationVector) -> Result<PopulationVector> {
    let model = build_model(*params)?;
    asymptotic_state(&build_rate_matrix(&model, false), rho1)
}

/// `n` evenly spaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let mut v: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
            v[n - 1] = b;
            v
        }
    }
}

/// Γ_p ∈ [0, 5], 101 points.
pub fn default_gamma_grid() -> Vec<f64> {
    linspace(0.0, 5.0, 101)
}

/// t_off ∈ (0, 10] μs, 100 points.
pub fn default_toff_grid() -> Vec<f64> {
    (1..=100).map(|k| k as f64 * 0.1).collect()
}

fn check_grid(name: &'static str, grid: &[f64], min: f64, inclusive: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(name, "grid is empty"));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid(name, "grid must be strictly increasing"));
        }
    }
    let first = grid[0];
    let ok = first.is_finite() && if inclusive { first >= min } else { first > min };
    if !ok || !grid[grid.len() - 1].is_finite() {
        return Err(Error::invalid(name, format!("grid values must be finite and above {min}")));
    }
    Ok(())
}

fn strictly(values: impl Iterator<Item = f64>, increasing: bool) -> bool {
    let v: Vec<f64> = values.collect();
    v.windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ness1Row {
    pub gamma_p: f64,
    pub populations: PopulationVector,
}

#[derive(Debug, Clone)]
pub struct Ness1Sweep {
    pub rows: Vec<Ness1Row>,
    pub p1_decreasing: bool,
    pub p4_increasing: bool,
    pub pi_increasing: bool,
    /// Smallest grid Γ_p beyond which every population changes by less than
    /// `1e-3` per unit Γ_p; `None` if the grid never saturates.
    pub saturation_gamma: Option<f64>,
}

pub const SATURATION_SLOPE: f64 = 1e-3;

pub fn sweep_ness1(gamma_grid: &[f64], params: &ModelParams) -> Result<Ness1Sweep> {
    check_grid("gamma_grid", gamma_grid, 0.0, true)?;
    let rows = gamma_grid
        .par_iter()
        .map(|&g| {
            ness1(&params.with_gamma_p(g)).map(|p| Ness1Row {
                gamma_p: g,
                populations: p,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut saturation_gamma = None;
    for i in (0..rows.len().saturating_sub(1)).rev() {
        let (a, b) = (&rows[i], &rows[i + 1]);
        let slope = a.populations.max_abs_diff(&b.populations) / (b.gamma_p - a.gamma_p);
        if slope >= SATURATION_SLOPE {
            break;
        }
        saturation_gamma = Some(a.gamma_p);
    }

    Ok(Ness1Sweep {
        p1_decreasing: strictly(rows.iter().map(|r| r.populations[0]), false),
        p4_increasing: strictly(rows.iter().map(|r| r.populations[3]), true),
        pi_increasing: strictly(rows.iter().map(|r| r.populations.intersystem()), true),
        saturation_gamma,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct PolarizationSweep {
    /// `(Γ_p, polarization)`.
    pub rows: Vec<(f64, f64)>,
    pub decreasing: bool,
}

pub fn sweep_polarization_vs_gamma(
    gamma_grid: &[f64],
    params: &ModelParams,
) -> Result<PolarizationSweep> {
    check_grid("gamma_grid", gamma_grid, 0.0, true)?;
    let rows = gamma_grid
        .par_iter()
        .map(|&g| {
            let p = params.with_gamma_p(g);
            let rho2 = ness2(&p, &ness1(&p)?)?;
            Ok((g, rho2[0]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolarizationSweep {
        decreasing: strictly(rows.iter().map(|r| r.1), false),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToffRow {
    pub t_off: f64,
    pub polarization: f64,
    /// Work delivered over `[0, t_off]`.
    pub work: f64,
    /// Stationarity residual at `t_off`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ToffSweep {
    pub gamma_p: f64,
    pub rows: Vec<ToffRow>,
    /// Polarization non-decreasing in work along the grid.
    pub non_decreasing: bool,
    /// Work at the first grid point where the NESS tolerance holds.
    pub work_at_ness: Option<f64>,
    /// Largest polarization spread among points at or beyond `work_at_ness`.
    pub plateau_spread: Option<f64>,
}

/// One full protocol per `t_off`; relaxation lasts 20 μs after each switch-off.
pub fn sweep_polarization_vs_toff(
    toff_grid: &[f64],
    gamma_p: f64,
    params: &ModelParams,
    ness_tol: f64,
) -> Result<ToffSweep> {
    check_grid("toff_grid", toff_grid, 0.0, false)?;
    let rows = toff_grid
        .par_iter()
        .map(|&t_off| {
            let cfg = ProtocolConfig {
                gamma_p,
                b_z: params.b_z,
                ness_tol,
                ..ProtocolConfig::default()
            }
            .with_t_off(t_off);
            let r = run_protocol(&cfg, params)?;
            Ok(ToffRow {
                t_off,
                polarization: r.polarization,
                work: r.phase_totals[0].work,
                residual: r.rho1_residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut by_work: Vec<ToffRow> = rows.clone();
    by_work.sort_by(|a, b| a.work.total_cmp(&b.work));
    let non_decreasing = by_work.windows(2).all(|w| w[1].polarization >= w[0].polarization);
    let at = by_work.iter().position(|r| r.residual <= ness_tol);
    let work_at_ness = at.map(|i| by_work[i].work);
    let plateau_spread = at.map(|i| {
        let tail = &by_work[i..];
        let hi = tail.iter().map(|r| r.polarization).fold(f64::MIN, f64::max);
        let lo = tail.iter().map(|r| r.polarization).fold(f64::MAX, f64::min);
        hi - lo
    });
    Ok(ToffSweep {
        gamma_p,
        rows,
        non_decreasing,
        work_at_ness,
        plateau_spread,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRow {
    pub gamma_p: f64,
    pub s1: f64,
    pub s2: f64,
    pub polarization: f64,
}

#[derive(Debug, Clone)]
pub struct EntropySweep {
    pub rows: Vec<EntropyRow>,
    pub s2_increasing: bool,
    /// S(ρ₁ˢˢ) rises then falls on the grid with its maximum strictly inside.
    pub s1_unimodal: bool,
    /// Maximizer of S(ρ₁ˢˢ) refined by golden-section search.
    pub s1_argmax: Option<f64>,
}

/// Target half-width of the golden-section bracket around the maximizer.
pub const ARGMAX_TOL: f64 = 1e-4;

fn entropy_point(params: &ModelParams, g: f64) -> Result<EntropyRow> {
    let p = params.with_gamma_p(g);
    let rho1 = ness1(&p)?;
    let rho2 = ness2(&p, &rho1)?;
    Ok(EntropyRow {
        gamma_p: g,
        s1: entropy(&rho1),
        s2: entropy(&rho2),
        polarization: rho2[0],
    })
}

pub fn sweep_entropy(gamma_grid: &[f64], params: &ModelParams) -> Result<EntropySweep> {
    check_grid("gamma_grid", gamma_grid, 0.0, true)?;
    let rows = gamma_grid
        .par_iter()
        .map(|&g| entropy_point(params, g))
        .collect::<Result<Vec<_>>>()?;

    let imax = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.s1.total_cmp(&b.1.s1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let interior = imax > 0 && imax + 1 < rows.len();
    let s1_unimodal = interior
        && strictly(rows[..=imax].iter().map(|r| r.s1), true)
        && strictly(rows[imax..].iter().map(|r| r.s1), false);
    let s1_argmax = if interior {
        let f = |g: f64| ness1(&params.with_gamma_p(g)).map(|p| entropy(&p));
        Some(golden_max(f, rows[imax - 1].gamma_p, rows[imax + 1].gamma_p, ARGMAX_TOL)?)
    } else {
        None
    };

    Ok(EntropySweep {
        s2_increasing: strictly(rows.iter().map(|r| r.s2), true),
        s1_unimodal,
        s1_argmax,
        rows,
    })
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 2.0 * tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Γ_p in `[lo, hi]` at which `P_E = P_G` in ρ₁ˢˢ, by bisection.
pub fn excitation_crossover(params: &ModelParams, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let f = |g: f64| -> Result<f64> {
        let p = ness1(&params.with_gamma_p(g))?;
        Ok(p.excited() - p.ground())
    };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "P_E - P_G does not change sign on [{lo}, {hi}]"
        )));
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if f(m)?.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone)]
pub struct EntropyDecomposition {
    pub gamma_p: f64,
    pub times: Vec<f64>,
    /// `S(t) − S(0)`.
    pub delta_s: Vec<f64>,
    pub s_w: Vec<f64>,
    pub s_q: Vec<f64>,
    /// `max_t |ΔS − (S_W + S_Q)|`.
    pub max_closure_residual: f64,
    /// Totals over the whole run, then over each phase.
    pub totals: [LedgerTotals; 3],
    pub warnings: Vec<String>,
}

/// Time series of `ΔS`, `S_W` and `S_Q` for each protocol.
pub fn entropy_decomposition_run(
    configs: &[ProtocolConfig],
    params: &ModelParams,
) -> Result<Vec<EntropyDecomposition>> {
    configs
        .par_iter()
        .map(|cfg| {
            let r = run_protocol(cfg, params)?;
            let s0 = r.ledger.samples[0].s;
            let delta_s: Vec<f64> = r.ledger.samples.iter().map(|x| x.s - s0).collect();
            let s_w: Vec<f64> = r.ledger.samples.iter().map(|x| x.sw_cum).collect();
            let s_q: Vec<f64> = r.ledger.samples.iter().map(|x| x.sq_cum).collect();
            let max_closure_residual = (0..delta_s.len())
                .map(|i| (delta_s[i] - s_w[i] - s_q[i]).abs())
                .fold(0.0, f64::max);
            Ok(EntropyDecomposition {
                gamma_p: cfg.gamma_p,
                times: r.trajectory.times.clone(),
                delta_s,
                s_w,
                s_q,
                max_closure_residual,
                totals: [
                    r.ledger.totals.clone(),
                    r.phase_totals[0].clone(),
                    r.phase_totals[1].clone(),
                ],
                warnings: r.warnings,
            })
        })
        .collect()
}

/// Stationarity residual of `p` under the laser-on generator.
pub fn laser_on_residual(params: &ModelParams, p: &PopulationVector) -> Result<f64> {
    let model = build_model(*params)?;
    Ok(build_rate_matrix(&model, true).relative_residual(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_times_include_t_off() {
        let cfg = ProtocolConfig {
            t_off: 1.234,
            t_end: 3.0,
            sample_count: 4,
            ..Default::default()
        };
        assert_eq!(cfg.sample_times(), vec![0.0, 1.0, 1.234, 2.0, 3.0]);
        let cfg = ProtocolConfig::default();
        let t = cfg.sample_times();
        assert_eq!(t.len(), 601);
        assert!(t.contains(&10.0));
    }

    #[test]
    fn config_validation() {
        let ok = ProtocolConfig::default();
        ok.validate().unwrap();
        for (bad, field) in [
            (ProtocolConfig { t_off: 0.0, ..ok.clone() }, "t_off"),
            (ProtocolConfig { t_end: 5.0, ..ok.clone() }, "t_end"),
            (ProtocolConfig { sample_count: 1, ..ok.clone() }, "sample_count"),
            (ProtocolConfig { ness_tol: 0.0, ..ok.clone() }, "ness_tol"),
            (ProtocolConfig { gamma_p: -1.0, ..ok.clone() }, "gamma_p"),
        ] {
            match bad.validate() {
                Err(Error::InvalidParameter { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{field}: {other:?}"),
            }
        }
    }

    #[test]
    fn no_pump_leaves_state_unchanged() {
        let cfg = ProtocolConfig::default().with_gamma_p(0.0);
        let r = run_protocol(&cfg, &ModelParams::default()).unwrap();
        assert!((r.polarization - 1.0 / 3.0).abs() < 1e-12);
        let p0 = PopulationVector::uniform_ground();
        for p in &r.trajectory.states {
            assert!(p.max_abs_diff(&p0) < 1e-12);
        }
        assert_eq!(r.ness1_reached_at, Some(0.0));
        assert!(r.ledger.totals.work.abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let x = golden_max(|g| Ok(-(g - 0.3).powi(2)), 0.0, 1.0, 1e-6).unwrap();
        assert!((x - 0.3).abs() < 2e-6);
    }

    #[test]
    fn linspace_endpoints() {
        let g = default_gamma_grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 5.0);
        assert!((g[23] - 1.15).abs() < 1e-15);
        let t = default_toff_grid();
        assert_eq!(t.len(), 100);
        assert_eq!(t[99], 10.0);
    }
}
