//! Eight-level model of the NV⁻ electronic structure under optical pumping.
//!
//! Levels, in frequency units with ħ = 1 (MHz) and time in μs:
//!
//! ```text
//!   |8⟩ ─ I upper           |4⟩ E, m_s = 0     |5⟩,|6⟩ E, m_s = ±1
//!   |7⟩ ─ I lower           |1⟩ G, m_s = 0     |2⟩,|3⟩ G, m_s = ±1
//! ```
//!
//! The Hamiltonian is diagonal in this basis, so the model is fully described
//! by eight energies and seventeen single-transition jump operators
//! `L = √k |to⟩⟨from|`, grouped into the laser pump and three decay channels.

use std::fmt;

use nalgebra::SMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DIM: usize = 8;

pub type CMatrix8 = SMatrix<Complex64, DIM, DIM>;

/// How the Zeeman term enters the excited-state triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExcitedZeeman {
    /// `γ B_z S_z²`: both `|5⟩` and `|6⟩` shift up by `γ B_z`.
    LiteralSz2,
    /// `γ B_z S_z`: `|5⟩` and `|6⟩` split symmetrically, as in the ground triplet.
    #[default]
    PhysicalSz,
}

/// The four small non-spin-conserving E → G rates (MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonSpinConservingRates {
    pub g42: f64,
    pub g43: f64,
    pub g51: f64,
    pub g61: f64,
}

/// Physical constants of the model. Frequencies and rates in MHz, field in T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Ground-state zero-field splitting.
    pub d_g: f64,
    /// Excited-state zero-field splitting.
    pub d_e: f64,
    /// G–E gap.
    pub delta_eg: f64,
    /// G–I gap (energy of `|7⟩`).
    pub delta_ig: f64,
    /// `|7⟩`–`|8⟩` gap.
    pub d_i: f64,
    /// Electronic gyromagnetic ratio, MHz/T.
    pub gyro: f64,
    pub b_z: f64,
    /// Spin-conserving decay rate; also the pump base rate.
    pub gamma: f64,
    /// Dimensionless laser power; the pump rate is `gamma_p * gamma`.
    pub gamma_p: f64,
    pub gamma_nsc: NonSpinConservingRates,
    /// E → `|8⟩` rates from `|4⟩`, `|5⟩`, `|6⟩`.
    pub kappa_ei: [f64; 3],
    /// `|8⟩` → `|7⟩` rate.
    pub kappa_i: f64,
    /// `|7⟩` → G rates into `|1⟩`, `|2⟩`, `|3⟩`.
    pub kappa_ig: [f64; 3],
    pub excited_zeeman: ExcitedZeeman,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            d_g: 2.87e3,
            d_e: 1.40e3,
            delta_eg: 4.7e8,
            delta_ig: 1.69e8,
            d_i: 2.88e8,
            gyro: 2.80e4,
            b_z: 0.0,
            gamma: 77.0,
            gamma_p: 1.0,
            gamma_nsc: NonSpinConservingRates {
                g42: 0.25,
                g43: 0.25,
                g51: 0.25,
                g61: 0.25,
            },
            kappa_ei: [0.0, 15.0, 15.0],
            kappa_i: 1.0e3,
            kappa_ig: [1.0, 1.0, 1.0],
            excited_zeeman: ExcitedZeeman::PhysicalSz,
        }
    }
}

impl ModelParams {
    pub fn with_gamma_p(mut self, gamma_p: f64) -> Self {
        self.gamma_p = gamma_p;
        self
    }

    pub fn with_b_z(mut self, b_z: f64) -> Self {
        self.b_z = b_z;
        self
    }

    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let non_negative: [(&'static str, f64); 19] = [
            ("d_g", self.d_g),
            ("d_e", self.d_e),
            ("delta_eg", self.delta_eg),
            ("delta_ig", self.delta_ig),
            ("d_i", self.d_i),
            ("gyro", self.gyro),
            ("gamma", self.gamma),
            ("gamma_p", self.gamma_p),
            ("gamma_42", self.gamma_nsc.g42),
            ("gamma_43", self.gamma_nsc.g43),
            ("gamma_51", self.gamma_nsc.g51),
            ("gamma_61", self.gamma_nsc.g61),
            ("kappa_ei_4", self.kappa_ei[0]),
            ("kappa_ei_5", self.kappa_ei[1]),
            ("kappa_ei_6", self.kappa_ei[2]),
            ("kappa_i", self.kappa_i),
            ("kappa_ig_1", self.kappa_ig[0]),
            ("kappa_ig_2", self.kappa_ig[1]),
            ("kappa_ig_3", self.kappa_ig[2]),
        ];
        for (field, value) in non_negative {
            if !value.is_finite() {
                return Err(Error::invalid(field, format!("must be finite, got {value}")));
            }
            if value < 0.0 {
                return Err(Error::invalid(field, format!("must be >= 0, got {value}")));
            }
        }
        if !self.b_z.is_finite() {
            return Err(Error::invalid("b_z", format!("must be finite, got {}", self.b_z)));
        }
        Ok(())
    }
}

/// A level label `|n⟩`, `n ∈ 1..=8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(u8);

impl Level {
    pub const ALL: [Level; DIM] = [
        Level(1),
        Level(2),
        Level(3),
        Level(4),
        Level(5),
        Level(6),
        Level(7),
        Level(8),
    ];

    pub fn new(n: usize) -> Result<Self> {
        if (1..=DIM).contains(&n) {
            Ok(Level(n as u8))
        } else {
            Err(Error::invalid("level", format!("must be in 1..=8, got {n}")))
        }
    }

    /// Panics outside `1..=8`; for literals.
    pub const fn of(n: u8) -> Self {
        assert!(n >= 1 && n as usize <= DIM);
        Level(n)
    }

    pub fn number(self) -> usize {
        self.0 as usize
    }

    /// Zero-based array index.
    pub fn idx(self) -> usize {
        self.0 as usize - 1
    }

    pub fn subspace(self) -> Subspace {
        match self.0 {
            1..=3 => Subspace::Ground,
            4..=6 => Subspace::Excited,
            _ => Subspace::Intersystem,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}⟩", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subspace {
    Ground,
    Excited,
    Intersystem,
}

impl Subspace {
    pub fn levels(self) -> &'static [Level] {
        match self {
            Subspace::Ground => &Level::ALL[0..3],
            Subspace::Excited => &Level::ALL[3..6],
            Subspace::Intersystem => &Level::ALL[6..8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Pump,
    SpinConserving,
    Isc,
    NonSpinConserving,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::Pump,
        Channel::SpinConserving,
        Channel::Isc,
        Channel::NonSpinConserving,
    ];
    pub const DECAY: [Channel; 3] = [
        Channel::SpinConserving,
        Channel::Isc,
        Channel::NonSpinConserving,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Pump => "pump",
            Channel::SpinConserving => "spin_conserving",
            Channel::Isc => "isc",
            Channel::NonSpinConserving => "non_spin_conserving",
        }
    }
}

/// `L = √rate |to⟩⟨from|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOperator {
    pub from: Level,
    pub to: Level,
    pub rate: f64,
    pub channel: Channel,
}

impl JumpOperator {
    pub fn amplitude(&self) -> f64 {
        self.rate.sqrt()
    }

    /// Dense matrix form of the operator.
    pub fn matrix(&self) -> CMatrix8 {
        let mut m = CMatrix8::zeros();
        m[(self.to.idx(), self.from.idx())] = Complex64::new(self.amplitude(), 0.0);
        m
    }
}

/// Immutable model: diagonal Hamiltonian plus the seventeen jump operators.
#[derive(Debug, Clone, PartialEq)]
pub struct NvModel {
    energies: [f64; DIM],
    jumps: Vec<JumpOperator>,
    params: ModelParams,
}

impl NvModel {
    pub fn build(params: ModelParams) -> Result<Self> {
        build_model(params)
    }

    pub fn energies(&self) -> &[f64; DIM] {
        &self.energies
    }

    pub fn energy(&self, level: Level) -> f64 {
        self.energies[level.idx()]
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn channel(&self, channel: Channel) -> impl Iterator<Item = &JumpOperator> + Clone {
        self.jumps.iter().filter(move |j| j.channel == channel)
    }

    /// Jumps active with the laser on (everything) or off (decays only).
    pub fn active(&self, laser_on: bool) -> impl Iterator<Item = &JumpOperator> + Clone {
        self.jumps
            .iter()
            .filter(move |j| laser_on || j.channel != Channel::Pump)
    }

    /// Largest single jump rate among the active jumps.
    pub fn max_rate(&self, laser_on: bool) -> f64 {
        self.active(laser_on).map(|j| j.rate).fold(0.0, f64::max)
    }

    pub fn pump_rate(&self) -> f64 {
        self.params.gamma_p * self.params.gamma
    }

    /// `Δ_ij = E_i − E_j`.
    pub fn energy_gap(&self, i: Level, j: Level) -> f64 {
        self.energies[i.idx()] - self.energies[j.idx()]
    }

    pub fn hamiltonian(&self) -> CMatrix8 {
        let mut h = CMatrix8::zeros();
        for (n, e) in self.energies.iter().enumerate() {
            h[(n, n)] = Complex64::new(*e, 0.0);
        }
        h
    }
}

pub fn energy_gap(model: &NvModel, i: Level, j: Level) -> f64 {
    model.energy_gap(i, j)
}

pub fn build_model(params: ModelParams) -> Result<NvModel> {
    params.validate()?;
    let p = &params;
    let zeeman_g = p.gyro * p.b_z;
    let (shift5, shift6) = match p.excited_zeeman {
        ExcitedZeeman::PhysicalSz => (zeeman_g, -zeeman_g),
        ExcitedZeeman::LiteralSz2 => (zeeman_g, zeeman_g),
    };
    let energies = [
        0.0,
        p.d_g + zeeman_g,
        p.d_g - zeeman_g,
        p.delta_eg,
        p.delta_eg + p.d_e + shift5,
        p.delta_eg + p.d_e + shift6,
        p.delta_ig,
        p.delta_ig + p.d_i,
    ];

    let pump = p.gamma_p * p.gamma;
    let jump = |from: u8, to: u8, rate: f64, channel: Channel| JumpOperator {
        from: Level::of(from),
        to: Level::of(to),
        rate,
        channel,
    };
    use Channel::*;
    let jumps = vec![
        jump(1, 4, pump, Pump),
        jump(2, 5, pump, Pump),
        jump(3, 6, pump, Pump),
        jump(4, 1, p.gamma, SpinConserving),
        jump(5, 2, p.gamma, SpinConserving),
        jump(6, 3, p.gamma, SpinConserving),
        jump(4, 8, p.kappa_ei[0], Isc),
        jump(5, 8, p.kappa_ei[1], Isc),
        jump(6, 8, p.kappa_ei[2], Isc),
        jump(8, 7, p.kappa_i, Isc),
        jump(7, 1, p.kappa_ig[0], Isc),
        jump(7, 2, p.kappa_ig[1], Isc),
        jump(7, 3, p.kappa_ig[2], Isc),
        jump(4, 2, p.gamma_nsc.g42, NonSpinConserving),
        jump(4, 3, p.gamma_nsc.g43, NonSpinConserving),
        jump(5, 1, p.gamma_nsc.g51, NonSpinConserving),
        jump(6, 1, p.gamma_nsc.g61, NonSpinConserving),
    ];

    Ok(NvModel {
        energies,
        jumps,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_model(gamma_p: f64) -> NvModel {
        build_model(ModelParams::default().with_gamma_p(gamma_p)).unwrap()
    }

    #[test]
    fn pump_rate_is_gamma_p_times_gamma() {
        let m = default_model(0.5);
        let pump: Vec<_> = m.channel(Channel::Pump).collect();
        assert_eq!(pump.len(), 3);
        for j in pump {
            assert!((j.rate - 38.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_laser_keeps_pump_channel_with_zero_rate() {
        let m = default_model(0.0);
        assert_eq!(m.channel(Channel::Pump).count(), 3);
        assert!(m.channel(Channel::Pump).all(|j| j.rate == 0.0));
    }

    #[test]
    fn seventeen_jumps_with_channel_membership() {
        let m = default_model(1.0);
        assert_eq!(m.jumps().len(), 17);
        let counts: Vec<usize> = Channel::ALL.iter().map(|c| m.channel(*c).count()).collect();
        assert_eq!(counts, vec![3, 3, 7, 4]);
        for j in m.jumps() {
            assert_ne!(j.from, j.to);
            assert!(j.rate >= 0.0);
        }
    }

    #[test]
    fn level_four_has_no_isc_outflow() {
        let m = default_model(1.0);
        let four = Level::of(4);
        let out: Vec<_> = m.jumps().iter().filter(|j| j.from == four && j.rate > 0.0).collect();
        assert!(out.iter().all(|j| j.to != Level::of(8)));
        let total: f64 = out.iter().map(|j| j.rate).sum();
        assert!((total - 77.5).abs() < 1e-12);
    }

    #[test]
    fn outflow_from_five_totals_92_25() {
        let m = default_model(1.0);
        let total: f64 = m
            .active(false)
            .filter(|j| j.from == Level::of(5))
            .map(|j| j.rate)
            .sum();
        assert!((total - 92.25).abs() < 1e-12);
    }

    #[test]
    fn default_energies_and_gaps() {
        let m = default_model(1.0);
        let g = |i: u8, j: u8| m.energy_gap(Level::of(i), Level::of(j));
        assert_eq!(g(4, 1), 4.7e8);
        assert_eq!(g(1, 1), 0.0);
        assert_eq!(g(2, 1), 2.87e3);
        assert_eq!(g(8, 7), 2.88e8);
        assert_eq!(m.energy(Level::of(7)), 1.69e8);
        for i in Level::ALL {
            for j in Level::ALL {
                assert_eq!(m.energy_gap(i, j), -m.energy_gap(j, i));
            }
        }
    }

    #[test]
    fn zeeman_conventions() {
        let b = 0.01;
        let phys = build_model(ModelParams::default().with_b_z(b)).unwrap();
        let lit = build_model(ModelParams {
            excited_zeeman: ExcitedZeeman::LiteralSz2,
            ..ModelParams::default().with_b_z(b)
        })
        .unwrap();
        let z = 2.80e4 * b;
        assert!((phys.energy(Level::of(2)) - (2.87e3 + z)).abs() < 1e-9);
        assert!((phys.energy(Level::of(3)) - (2.87e3 - z)).abs() < 1e-9);
        assert!((phys.energy(Level::of(5)) - (4.7e8 + 1.4e3 + z)).abs() < 1e-6);
        assert!((phys.energy(Level::of(6)) - (4.7e8 + 1.4e3 - z)).abs() < 1e-6);
        assert_eq!(lit.energy(Level::of(5)), lit.energy(Level::of(6)));

        let zero = build_model(ModelParams::default()).unwrap();
        let zero_lit = build_model(ModelParams {
            excited_zeeman: ExcitedZeeman::LiteralSz2,
            ..ModelParams::default()
        })
        .unwrap();
        assert_eq!(zero.energies(), zero_lit.energies());
    }

    #[test]
    fn internal_gaps_are_small_against_eg_gap() {
        for b in [0.0, 0.01, 0.05] {
            let m = build_model(ModelParams::default().with_b_z(b)).unwrap();
            let eg = m.params().delta_eg;
            let worst = [(4, 1), (5, 2), (6, 3)]
                .iter()
                .map(|&(i, j)| (m.energy_gap(Level::of(i), Level::of(j)) - eg).abs() / eg)
                .fold(0.0, f64::max);
            assert!(worst < 1e-4, "b = {b}: {worst}");
        }
    }

    #[test]
    fn every_level_reachable_from_ground_with_laser() {
        let m = default_model(0.3);
        let mut seen = [false; DIM];
        seen[0] = true;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            for j in m.active(true).filter(|j| j.from.idx() == n && j.rate > 0.0) {
                if !seen[j.to.idx()] {
                    seen[j.to.idx()] = true;
                    stack.push(j.to.idx());
                }
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn negative_values_are_rejected_by_name() {
        let cases: Vec<(&str, ModelParams)> = vec![
            ("gamma", ModelParams { gamma: -1.0, ..Default::default() }),
            ("gamma_p", ModelParams::default().with_gamma_p(-0.1)),
            ("kappa_ig_2", ModelParams { kappa_ig: [1.0, -1.0, 1.0], ..Default::default() }),
            ("d_g", ModelParams { d_g: -2.0, ..Default::default() }),
        ];
        for (name, params) in cases {
            match build_model(params) {
                Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, name),
                other => panic!("expected rejection of {name}, got {other:?}"),
            }
        }
    }

    #[test]
    fn level_bounds() {
        assert!(Level::new(0).is_err());
        assert!(Level::new(9).is_err());
        assert_eq!(Level::new(8).unwrap().subspace(), Subspace::Intersystem);
        assert_eq!(Level::of(5).subspace(), Subspace::Excited);
    }
}
