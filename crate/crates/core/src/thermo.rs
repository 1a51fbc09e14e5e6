//! Thermodynamic ledger of the pumping cycle: internal energy, laser power,
//! per-channel heat currents, von Neumann entropy and its split into a
//! work-driven and a heat-driven rate.
//!
//! Sign convention: every current is `Tr{H D(ρ)}` of its dissipator, so heat
//! leaving the system is negative and the stationary balance reads
//! `Ẇ + Q̇ = 0`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::lindblad::{
    apply_adjoint_dissipator, apply_dissipator, DensityMatrix, PiecewisePath, PopulationVector,
    Trajectory,
};
use crate::model::{CMatrix8, Channel, JumpOperator, NvModel, DIM};

/// Populations below this are replaced by it inside logarithms.
pub const LN_FLOOR: f64 = 1e-300;

pub fn internal_energy(p: &PopulationVector, model: &NvModel) -> f64 {
    model.energies().iter().enumerate().map(|(n, e)| e * p[n]).sum()
}

/// `Σ_jumps k p_from (E_to − E_from)`, i.e. `Tr{H D(ρ)}` for a diagonal state.
fn energy_flux<'a>(
    p: &PopulationVector,
    model: &NvModel,
    jumps: impl Iterator<Item = &'a JumpOperator>,
) -> f64 {
    jumps
        .map(|j| j.rate * p.get(j.from) * model.energy_gap(j.to, j.from))
        .sum()
}

/// Power delivered by the laser, `Tr{H D_p(ρ)} = Γ_p γ (Δ₄₁P₁ + Δ₅₂P₂ + Δ₆₃P₃)`.
pub fn power_exact(p: &PopulationVector, model: &NvModel, laser_on: bool) -> f64 {
    if !laser_on {
        return 0.0;
    }
    energy_flux(p, model, model.channel(Channel::Pump))
}

/// `Δ_EG Γ_p γ P_G`, valid while the intra-triplet gaps are negligible.
pub fn power_approx(p: &PopulationVector, model: &NvModel, laser_on: bool) -> f64 {
    if !laser_on {
        return 0.0;
    }
    model.params().delta_eg * model.pump_rate() * p.ground()
}

/// `Tr{H D_d^i(ρ)}` for one decay channel. Passing [`Channel::Pump`] gives the
/// power with the laser on.
pub fn heat_current(p: &PopulationVector, model: &NvModel, channel: Channel) -> f64 {
    energy_flux(p, model, model.channel(channel))
}

/// `−Δ_EG γ P_E`.
pub fn heat_current_sc_closed_form(p: &PopulationVector, model: &NvModel) -> f64 {
    -model.params().delta_eg * fluorescence(p, model)
}

/// Photon emission rate of the spin-conserving decay, `γ P_E`.
pub fn fluorescence(p: &PopulationVector, model: &NvModel) -> f64 {
    model.params().gamma * p.excited()
}

/// `Tr{H D(ρ)}` evaluated on the density matrix; reference for the
/// population formulas above.
pub fn energy_flux_matrix<'a>(
    rho: &DensityMatrix,
    model: &NvModel,
    jumps: impl IntoIterator<Item = &'a JumpOperator>,
) -> f64 {
    (model.hamiltonian() * apply_dissipator(rho.matrix(), jumps))
        .trace()
        .re
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeatCurrents {
    pub sc: f64,
    pub isc: f64,
    pub nsc: f64,
}

impl HeatCurrents {
    pub fn total(&self) -> f64 {
        self.sc + self.isc + self.nsc
    }
}

pub fn heat_currents(p: &PopulationVector, model: &NvModel) -> HeatCurrents {
    HeatCurrents {
        sc: heat_current(p, model, Channel::SpinConserving),
        isc: heat_current(p, model, Channel::Isc),
        nsc: heat_current(p, model, Channel::NonSpinConserving),
    }
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn ln_floor(x: f64) -> f64 {
    x.max(LN_FLOOR).ln()
}

/// Von Neumann entropy of a diagonal state, `−Σ p ln p` with `0 ln 0 = 0`.
pub fn entropy(p: &PopulationVector) -> f64 {
    -(0..DIM).map(|n| xlnx(p[n])).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EntropyRates {
    /// `Ṡ_W = −Tr{ρ D_p*(ln ρ)}`.
    pub work: f64,
    /// `Ṡ_Q = −Σ_i Tr{ρ D_d^{i*}(ln ρ)}`.
    pub heat: f64,
    /// A jump fed a level whose population sat below [`LN_FLOOR`].
    pub clamped: bool,
}

impl EntropyRates {
    pub fn total(&self) -> f64 {
        self.work + self.heat
    }
}

/// Per jump: `−k p_from (ln p_to − ln p_from)`.
fn entropy_flux<'a>(p: &PopulationVector, jumps: impl Iterator<Item = &'a JumpOperator>) -> (f64, bool) {
    let mut clamped = false;
    let mut sum = 0.0;
    for j in jumps {
        let from = p.get(j.from);
        if j.rate == 0.0 || from <= 0.0 {
            continue;
        }
        let to = p.get(j.to);
        if to < LN_FLOOR && from > LN_FLOOR {
            clamped = true;
        }
        sum -= j.rate * from * (ln_floor(to) - ln_floor(from));
    }
    (sum, clamped)
}

pub fn entropy_rates(p: &PopulationVector, model: &NvModel, laser_on: bool) -> EntropyRates {
    let (work, cw) = if laser_on {
        entropy_flux(p, model.channel(Channel::Pump))
    } else {
        (0.0, false)
    };
    let (heat, ch) = Channel::DECAY
        .iter()
        .map(|c| entropy_flux(p, model.channel(*c)))
        .fold((0.0, false), |(s, c), (x, y)| (s + x, c || y));
    EntropyRates {
        work,
        heat,
        clamped: cw || ch,
    }
}

/// Density-matrix route: `−Tr{ρ D*(ln ρ)}` with the adjoint dissipator.
pub fn entropy_rates_matrix(p: &PopulationVector, model: &NvModel, laser_on: bool) -> EntropyRates {
    let mut log_rho = CMatrix8::zeros();
    for n in 0..DIM {
        log_rho[(n, n)] = ln_floor(p[n]).into();
    }
    let rho = DensityMatrix::from_populations(p);
    let rate = |jumps: &mut dyn Iterator<Item = &JumpOperator>| {
        -(rho.matrix() * apply_adjoint_dissipator(&log_rho, jumps))
            .trace()
            .re
    };
    let work = if laser_on {
        rate(&mut model.channel(Channel::Pump))
    } else {
        0.0
    };
    let heat = Channel::DECAY
        .iter()
        .map(|c| rate(&mut model.channel(*c)))
        .sum();
    EntropyRates {
        work,
        heat,
        clamped: false,
    }
}

/// `Ṡ = −Σ_n ṗ_n ln p_n` along the active generator.
pub fn total_entropy_rate(p: &PopulationVector, model: &NvModel, laser_on: bool) -> f64 {
    let mut pdot = [0.0; DIM];
    for j in model.active(laser_on) {
        let flow = j.rate * p.get(j.from);
        pdot[j.from.idx()] -= flow;
        pdot[j.to.idx()] += flow;
    }
    -(0..DIM)
        .filter(|&n| pdot[n] != 0.0)
        .map(|n| pdot[n] * ln_floor(p[n]))
        .sum::<f64>()
}

/// Instantaneous fluxes plus running integrals from the trajectory start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoSample {
    pub t: f64,
    pub laser_on: bool,
    pub u: f64,
    pub wdot: f64,
    pub qdot_sc: f64,
    pub qdot_isc: f64,
    pub qdot_nsc: f64,
    pub qdot_total: f64,
    pub fluorescence: f64,
    pub s: f64,
    pub sdot_w: f64,
    pub sdot_q: f64,
    pub entropy_clamped: bool,
    pub work_cum: f64,
    pub heat_cum: f64,
    pub heat_sc_cum: f64,
    pub heat_isc_cum: f64,
    pub heat_nsc_cum: f64,
    pub sw_cum: f64,
    pub sq_cum: f64,
}

impl ThermoSample {
    fn instantaneous(t: f64, p: &PopulationVector, model: &NvModel, laser_on: bool) -> Self {
        let q = heat_currents(p, model);
        let s = entropy_rates(p, model, laser_on);
        ThermoSample {
            t,
            laser_on,
            u: internal_energy(p, model),
            wdot: power_exact(p, model, laser_on),
            qdot_sc: q.sc,
            qdot_isc: q.isc,
            qdot_nsc: q.nsc,
            qdot_total: q.total(),
            fluorescence: fluorescence(p, model),
            s: entropy(p),
            sdot_w: s.work,
            sdot_q: s.heat,
            entropy_clamped: s.clamped,
            work_cum: 0.0,
            heat_cum: 0.0,
            heat_sc_cum: 0.0,
            heat_isc_cum: 0.0,
            heat_nsc_cum: 0.0,
            sw_cum: 0.0,
            sq_cum: 0.0,
        }
    }
}

/// Integrated ledger over `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerTotals {
    pub t_start: f64,
    pub t_end: f64,
    pub work: f64,
    pub heat: f64,
    pub heat_sc: f64,
    pub heat_isc: f64,
    pub heat_nsc: f64,
    pub delta_u: f64,
    pub entropy_work: f64,
    pub entropy_heat: f64,
    pub delta_s: f64,
    pub warning: Option<String>,
}

impl LedgerTotals {
    /// `|ΔU − (W + Q)|`.
    pub fn first_law_residual(&self) -> f64 {
        (self.delta_u - (self.work + self.heat)).abs()
    }

    pub fn first_law_scale(&self) -> f64 {
        self.work.abs().max(self.heat.abs()).max(self.delta_u.abs())
    }

    /// `|ΔS − (S_W + S_Q)|`.
    pub fn entropy_residual(&self) -> f64 {
        (self.delta_s - (self.entropy_work + self.entropy_heat)).abs()
    }

    pub fn entropy_scale(&self) -> f64 {
        self.delta_s
            .abs()
            .max(self.entropy_work.abs())
            .max(self.entropy_heat.abs())
            .max(1e-3)
    }

    pub fn first_law_holds(&self, rel: f64) -> bool {
        self.first_law_residual() <= rel * self.first_law_scale()
    }

    pub fn entropy_closure_holds(&self, rel: f64) -> bool {
        self.entropy_residual() <= rel * self.entropy_scale()
    }

    /// Totals between two samples of a ledger.
    pub fn between(samples: &[ThermoSample], i0: usize, i1: usize) -> Self {
        let (a, b) = (&samples[i0], &samples[i1]);
        LedgerTotals {
            t_start: a.t,
            t_end: b.t,
            work: b.work_cum - a.work_cum,
            heat: b.heat_cum - a.heat_cum,
            heat_sc: b.heat_sc_cum - a.heat_sc_cum,
            heat_isc: b.heat_isc_cum - a.heat_isc_cum,
            heat_nsc: b.heat_nsc_cum - a.heat_nsc_cum,
            delta_u: b.u - a.u,
            entropy_work: b.sw_cum - a.sw_cum,
            entropy_heat: b.sq_cum - a.sq_cum,
            delta_s: b.s - a.s,
            warning: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ledger {
    pub samples: Vec<ThermoSample>,
    pub totals: LedgerTotals,
    /// Number of flux evaluations spent on quadrature.
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LedgerOptions {
    /// Initial quadrature tolerance relative to the integrated magnitudes.
    pub rtol: f64,
    /// Tightest tolerance tried before giving up.
    pub min_rtol: f64,
    pub max_evaluations: usize,
    /// Targets on the first-law and entropy-closure residuals.
    pub first_law_tol: f64,
    pub entropy_tol: f64,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        LedgerOptions {
            rtol: 1e-8,
            min_rtol: 1e-12,
            max_evaluations: 4_000_000,
            first_law_tol: 1e-6,
            entropy_tol: 1e-6,
        }
    }
}

const NQ: usize = 6;
type Flux = [f64; NQ];

/// Integrands: Ẇ, Q̇_sc, Q̇_isc, Q̇_nsc, Ṡ_W, Ṡ_Q.
fn flux(p: &PopulationVector, model: &NvModel, laser_on: bool) -> (Flux, bool) {
    let q = heat_currents(p, model);
    let s = entropy_rates(p, model, laser_on);
    (
        [power_exact(p, model, laser_on), q.sc, q.isc, q.nsc, s.work, s.heat],
        s.clamped,
    )
}

struct Leaf {
    a: f64,
    b: f64,
    fa: Flux,
    fm: Flux,
    fb: Flux,
    phase: usize,
    slot: usize,
    splittable: bool,
}

impl Leaf {
    fn coarse(&self) -> Flux {
        let h = self.b - self.a;
        std::array::from_fn(|q| 0.5 * h * (self.fa[q] + self.fb[q]))
    }

    fn fine(&self) -> Flux {
        let h = self.b - self.a;
        std::array::from_fn(|q| 0.25 * h * (self.fa[q] + 2.0 * self.fm[q] + self.fb[q]))
    }

    fn error(&self, atol: &Flux) -> f64 {
        if !self.splittable {
            return 0.0;
        }
        let (c, f) = (self.coarse(), self.fine());
        (0..NQ).map(|q| (c[q] - f[q]).abs() / atol[q]).fold(0.0, f64::max)
    }
}

struct Keyed(f64, usize);

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Keyed {}
impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

/// Builds the ledger of a population trajectory.
///
/// With an exact path attached, running integrals come from globally
/// adaptive trapezoid quadrature: the interval with the largest estimated
/// error is bisected (with an exact state at the new midpoint) until the
/// summed error meets the tolerance, and the tolerance is tightened until the
/// first-law and entropy-closure residuals meet their targets or stop
/// improving. Without a path, the sample grid is used as is.
pub fn integrate_ledger(
    traj: &Trajectory<PopulationVector>,
    model: &NvModel,
    opts: &LedgerOptions,
) -> Result<Ledger> {
    if traj.is_empty() {
        return Err(Error::invalid("trajectory", "empty trajectory"));
    }
    let mut samples: Vec<ThermoSample> = traj
        .times
        .iter()
        .zip(&traj.states)
        .zip(&traj.laser_on)
        .map(|((t, p), on)| ThermoSample::instantaneous(*t, p, model, *on))
        .collect();

    let (slot_sums, evaluations, mut warning) = match &traj.path {
        Some(path) => adaptive_slots(traj, path, model, opts, &samples)?,
        None => (sampled_slots(traj, model), 0, None),
    };

    let mut acc = [0.0; NQ];
    for (sample, inc) in samples.iter_mut().zip(&slot_sums) {
        for q in 0..NQ {
            acc[q] += inc[q];
        }
        sample.work_cum = acc[0];
        sample.heat_sc_cum = acc[1];
        sample.heat_isc_cum = acc[2];
        sample.heat_nsc_cum = acc[3];
        sample.heat_cum = acc[1] + acc[2] + acc[3];
        sample.sw_cum = acc[4];
        sample.sq_cum = acc[5];
    }

    let mut totals = LedgerTotals::between(&samples, 0, samples.len() - 1);
    if warning.is_none()
        && (!totals.first_law_holds(opts.first_law_tol)
            || !totals.entropy_closure_holds(opts.entropy_tol))
    {
        warning = Some(format!(
            "ledger residuals above target: first law {:.3e} (scale {:.3e}), entropy {:.3e} (scale {:.3e})",
            totals.first_law_residual(),
            totals.first_law_scale(),
            totals.entropy_residual(),
            totals.entropy_scale()
        ));
    }
    totals.warning = warning;
    Ok(Ledger {
        samples,
        totals,
        evaluations,
    })
}

fn sampled_slots(traj: &Trajectory<PopulationVector>, model: &NvModel) -> Vec<Flux> {
    let fluxes: Vec<Flux> = traj
        .states
        .iter()
        .zip(&traj.laser_on)
        .map(|(p, on)| flux(p, model, *on).0)
        .collect();
    let mut out = vec![[0.0; NQ]; traj.len()];
    for i in 1..traj.len() {
        let h = traj.times[i] - traj.times[i - 1];
        out[i] = std::array::from_fn(|q| 0.5 * h * (fluxes[i - 1][q] + fluxes[i][q]));
    }
    out
}

type SlotResult = (Vec<Flux>, usize, Option<String>);

fn adaptive_slots(
    traj: &Trajectory<PopulationVector>,
    path: &PiecewisePath,
    model: &NvModel,
    opts: &LedgerOptions,
    samples: &[ThermoSample],
) -> Result<SlotResult> {
    let times = &traj.times;
    let t0 = times[0];
    let t1 = *times.last().unwrap();
    let h_min = 1e-13 * t1.abs().max(1.0);
    let evaluations = std::cell::Cell::new(0usize);

    let eval = |phase: usize, t: f64| -> Result<(Flux, bool)> {
        evaluations.set(evaluations.get() + 1);
        let ph = &path.phases[phase];
        let p = ph.propagator.at(t);
        if p.vector().iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at t = {t} us")));
        }
        Ok(flux(&p, model, ph.laser_on()))
    };

    // Initial leaves: sample points and phase boundaries.
    let mut leaves: Vec<Leaf> = Vec::new();
    for (k, ph) in path.phases.iter().enumerate() {
        let a = ph.t_start.max(t0);
        let b = ph.t_end.min(t1);
        if b <= a {
            continue;
        }
        let mut pts: Vec<f64> = vec![a];
        pts.extend(times.iter().copied().filter(|t| *t > a && *t < b));
        pts.push(b);
        let mut f_prev = eval(k, a)?.0;
        for w in pts.windows(2) {
            let (x, y) = (w[0], w[1]);
            let fm = eval(k, 0.5 * (x + y))?.0;
            let fy = eval(k, y)?.0;
            let slot = times.partition_point(|t| *t < y);
            leaves.push(Leaf {
                a: x,
                b: y,
                fa: f_prev,
                fm,
                fb: fy,
                phase: k,
                slot,
                splittable: y - x > h_min,
            });
            f_prev = fy;
        }
    }

    // Reference magnitudes. Entropy rates at clamped samples are artifacts of
    // the log floor and are left out.
    let mut ref_energy = 0.0;
    let mut ref_entropy = 0.0;
    for (i, w) in times.windows(2).enumerate() {
        let (sa, sb) = (&samples[i], &samples[i + 1]);
        let h = w[1] - w[0];
        let e = |s: &ThermoSample| s.wdot.abs() + s.qdot_sc.abs() + s.qdot_isc.abs() + s.qdot_nsc.abs();
        ref_energy += 0.5 * h * (e(sa) + e(sb));
        if !sa.entropy_clamped && !sb.entropy_clamped {
            ref_entropy += 0.5 * h * (sa.sdot_w.abs() + sa.sdot_q.abs() + sb.sdot_w.abs() + sb.sdot_q.abs());
        }
    }
    let ref_energy = ref_energy.max(f64::MIN_POSITIVE);
    let ref_entropy = ref_entropy.max(1e-3);

    let mut rtol = opts.rtol;
    let mut best_residual = f64::INFINITY;
    let mut warning = None;
    let slots = loop {
        let atol: Flux = std::array::from_fn(|q| {
            if q < 4 {
                rtol * ref_energy
            } else {
                rtol * ref_entropy
            }
        });
        let mut heap: BinaryHeap<Keyed> = BinaryHeap::new();
        let mut err_sum = 0.0;
        for (i, leaf) in leaves.iter().enumerate() {
            let e = leaf.error(&atol);
            err_sum += e;
            heap.push(Keyed(e, i));
        }
        while err_sum > 1.0 {
            if evaluations.get() >= opts.max_evaluations {
                warning = Some(format!(
                    "quadrature budget of {} evaluations exhausted at rtol {rtol:.1e}",
                    opts.max_evaluations
                ));
                break;
            }
            let Some(Keyed(e, i)) = heap.pop() else { break };
            if e == 0.0 {
                break;
            }
            err_sum -= e;
            let (a, b, m) = (leaves[i].a, leaves[i].b, 0.5 * (leaves[i].a + leaves[i].b));
            let (phase, slot) = (leaves[i].phase, leaves[i].slot);
            let (fa, fm, fb) = (leaves[i].fa, leaves[i].fm, leaves[i].fb);
            let left_mid = eval(phase, 0.5 * (a + m))?.0;
            let right_mid = eval(phase, 0.5 * (m + b))?.0;
            leaves[i] = Leaf {
                a,
                b: m,
                fa,
                fm: left_mid,
                fb: fm,
                phase,
                slot,
                splittable: m - a > h_min,
            };
            leaves.push(Leaf {
                a: m,
                b,
                fa: fm,
                fm: right_mid,
                fb,
                phase,
                slot,
                splittable: b - m > h_min,
            });
            let j = leaves.len() - 1;
            for k in [i, j] {
                let e = leaves[k].error(&atol);
                err_sum += e;
                heap.push(Keyed(e, k));
            }
        }

        let mut slots = vec![[0.0; NQ]; times.len()];
        for leaf in &leaves {
            let f = leaf.fine();
            for q in 0..NQ {
                slots[leaf.slot][q] += f[q];
            }
        }

        let w: f64 = slots.iter().map(|s| s[0]).sum();
        let heat: f64 = slots.iter().map(|s| s[1] + s[2] + s[3]).sum();
        let sw: f64 = slots.iter().map(|s| s[4]).sum();
        let sq: f64 = slots.iter().map(|s| s[5]).sum();
        let last = samples.len() - 1;
        let du = samples[last].u - samples[0].u;
        let ds = samples[last].s - samples[0].s;
        let e_scale = w.abs().max(heat.abs()).max(du.abs()).max(f64::MIN_POSITIVE);
        let s_scale = ds.abs().max(sw.abs()).max(sq.abs()).max(1e-3);
        let e_res = (du - (w + heat)).abs() / e_scale;
        let s_res = (ds - (sw + sq)).abs() / s_scale;
        let ok = e_res <= opts.first_law_tol && s_res <= opts.entropy_tol;
        let residual = (e_res / opts.first_law_tol).max(s_res / opts.entropy_tol);
        if ok || warning.is_some() {
            break slots;
        }
        if residual >= best_residual || rtol / 10.0 < opts.min_rtol {
            warning = Some(format!(
                "ledger residuals stalled at rtol {rtol:.1e}: first law {e_res:.3e}, entropy {s_res:.3e} (relative)"
            ));
            break slots;
        }
        best_residual = residual;
        rtol /= 10.0;
    };
    Ok((slots, evaluations.get(), warning))
}
