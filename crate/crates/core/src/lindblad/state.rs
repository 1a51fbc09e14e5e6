use std::ops::Index;

use nalgebra::{SVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CMatrix8, Level, Subspace, DIM};

use super::propagate::PiecewisePath;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const NEGATIVE_POPULATION_TOL: f64 = 1e-12;

pub type Vector8 = SVector<f64, DIM>;

/// Diagonal of the density matrix in the level basis, `p_n = ⟨n|ρ|n⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationVector(Vector8);

impl PopulationVector {
    /// Validating constructor.
    pub fn new(p: [f64; DIM]) -> Result<Self> {
        let v = PopulationVector(Vector8::from(p));
        v.validate()?;
        Ok(v)
    }

    /// Wraps a vector without checking invariants (propagator output).
    pub fn from_vector_unchecked(v: Vector8) -> Self {
        PopulationVector(v)
    }

    pub fn basis(level: Level) -> Self {
        let mut v = Vector8::zeros();
        v[level.idx()] = 1.0;
        PopulationVector(v)
    }

    /// Maximally mixed on the given subspace.
    pub fn uniform_on(subspace: Subspace) -> Self {
        let levels = subspace.levels();
        let mut v = Vector8::zeros();
        for l in levels {
            v[l.idx()] = 1.0 / levels.len() as f64;
        }
        PopulationVector(v)
    }

    /// The protocol's initial state `⅓(|1⟩⟨1| + |2⟩⟨2| + |3⟩⟨3|)`.
    pub fn uniform_ground() -> Self {
        Self::uniform_on(Subspace::Ground)
    }

    pub fn uniform() -> Self {
        PopulationVector(Vector8::from_element(1.0 / DIM as f64))
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite population: {:?}", self.0.as_slice())));
        }
        if let Some((n, x)) = self
            .0
            .iter()
            .enumerate()
            .find(|(_, x)| **x < -NEGATIVE_POPULATION_TOL)
        {
            return Err(Error::Numerical(format!("population p{} = {x:e} is negative", n + 1)));
        }
        let total = self.total();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::Numerical(format!("populations sum to {total:.15}")));
        }
        Ok(())
    }

    pub fn vector(&self) -> &Vector8 {
        &self.0
    }

    pub fn as_array(&self) -> [f64; DIM] {
        self.0.into()
    }

    pub fn get(&self, level: Level) -> f64 {
        self.0[level.idx()]
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }

    pub fn subspace_total(&self, subspace: Subspace) -> f64 {
        subspace.levels().iter().map(|l| self.get(*l)).sum()
    }

    pub fn ground(&self) -> f64 {
        self.subspace_total(Subspace::Ground)
    }

    pub fn excited(&self) -> f64 {
        self.subspace_total(Subspace::Excited)
    }

    pub fn intersystem(&self) -> f64 {
        self.subspace_total(Subspace::Intersystem)
    }

    pub fn max_abs_diff(&self, other: &PopulationVector) -> f64 {
        (self.0 - other.0).amax()
    }
}

impl Index<usize> for PopulationVector {
    type Output = f64;
    /// Zero-based.
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Full 8×8 state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(CMatrix8);

impl DensityMatrix {
    pub fn new(rho: CMatrix8) -> Result<Self> {
        let d = DensityMatrix(rho);
        d.validate()?;
        Ok(d)
    }

    pub fn from_matrix_unchecked(rho: CMatrix8) -> Self {
        DensityMatrix(rho)
    }

    pub fn from_populations(p: &PopulationVector) -> Self {
        let mut m = CMatrix8::zeros();
        for n in 0..DIM {
            m[(n, n)] = Complex64::new(p[n], 0.0);
        }
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &CMatrix8 {
        &self.0
    }

    pub fn populations(&self) -> PopulationVector {
        PopulationVector(Vector8::from_fn(|n, _| self.0[(n, n)].re))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..DIM {
            for j in 0..DIM {
                if i != j {
                    max = max.max(self.0[(i, j)].norm());
                }
            }
        }
        max
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint()).map(|z| z.norm()).max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite density matrix entry".into()));
        }
        let herm = self.hermiticity_error();
        if herm >= HERMITIAN_TOL {
            return Err(Error::Numerical(format!("density matrix not Hermitian: {herm:e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > TRACE_TOL {
            return Err(Error::Numerical(format!("density matrix trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min <= -PSD_TOL {
            return Err(Error::Numerical(format!("density matrix eigenvalue {min:e} < 0")));
        }
        Ok(())
    }
}

/// Sampled time evolution. When produced by the population path, `path`
/// holds the exact propagators so that the trajectory can be re-evaluated
/// between samples.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub laser_on: Vec<bool>,
    pub path: Option<PiecewisePath>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&S> {
        self.states.last()
    }
}

impl Trajectory<DensityMatrix> {
    pub fn populations(&self) -> Trajectory<PopulationVector> {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(DensityMatrix::populations).collect(),
            laser_on: self.laser_on.clone(),
            path: None,
        }
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("times", "empty time grid"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("times", "non-finite time"));
    }
    if times[0] < 0.0 {
        return Err(Error::invalid("times", format!("must start at t >= 0, got {}", times[0])));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("times", "must be strictly increasing"));
    }
    Ok(())
}
