//! Exact propagation of the population dynamics `ṗ = W p` and its stationary
//! and asymptotic states.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Eigen, Matrix8};
use crate::model::DIM;

use super::rates::RateMatrix;
use super::state::{check_times, PopulationVector, Trajectory, Vector8};

/// Above this eigenvector condition number the propagator switches to the
/// Padé matrix exponential.
pub const MAX_EIGEN_CONDITION: f64 = 1e8;
/// Relative singular-value threshold for kernel dimension.
pub const KERNEL_TOL: f64 = 1e-12;
/// Absolute tolerance on the real part of generator eigenvalues.
pub const SPECTRUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Method {
    /// `p(t) = Re Σ_k v_k c_k e^{λ_k (t − t0)}`.
    Spectral {
        values: [Complex64; DIM],
        vectors: nalgebra::SMatrix<Complex64, DIM, DIM>,
        coefficients: [Complex64; DIM],
    },
    Expm,
}

/// `p(t) = exp(W (t − t0)) p0` for a fixed generator.
#[derive(Debug, Clone)]
pub struct PopulationPropagator {
    generator: RateMatrix,
    p0: PopulationVector,
    t0: f64,
    method: Method,
}

impl PopulationPropagator {
    pub fn new(generator: RateMatrix, p0: PopulationVector, t0: f64) -> Self {
        let method = match linalg::eigen(generator.matrix()) {
            Some(e) if e.condition <= MAX_EIGEN_CONDITION => spectral(e, &p0, &generator),
            _ => Method::Expm,
        };
        PopulationPropagator {
            generator,
            p0,
            t0,
            method,
        }
    }

    /// Forces the matrix-exponential path.
    pub fn new_expm(generator: RateMatrix, p0: PopulationVector, t0: f64) -> Self {
        PopulationPropagator {
            generator,
            p0,
            t0,
            method: Method::Expm,
        }
    }

    pub fn uses_eigendecomposition(&self) -> bool {
        matches!(self.method, Method::Spectral { .. })
    }

    pub fn generator(&self) -> &RateMatrix {
        &self.generator
    }

    pub fn initial(&self) -> (f64, &PopulationVector) {
        (self.t0, &self.p0)
    }

    pub fn at(&self, t: f64) -> PopulationVector {
        let dt = t - self.t0;
        if dt == 0.0 {
            return self.p0;
        }
        let v = match &self.method {
            Method::Spectral {
                values,
                vectors,
                coefficients,
            } => {
                let mut acc = [Complex64::new(0.0, 0.0); DIM];
                for k in 0..DIM {
                    let weight = coefficients[k] * (values[k] * dt).exp();
                    if weight == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for (n, a) in acc.iter_mut().enumerate() {
                        *a += vectors[(n, k)] * weight;
                    }
                }
                Vector8::from_fn(|n, _| acc[n].re)
            }
            Method::Expm => linalg::expm(&(self.generator.matrix() * dt)) * self.p0.vector(),
        };
        PopulationVector::from_vector_unchecked(v)
    }

    /// Evaluates and checks the propagated state.
    pub fn checked_at(&self, t: f64) -> Result<PopulationVector> {
        let p = self.at(t);
        if p.vector().iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite population at t = {t} us (t0 = {}, eigendecomposition = {}, max rate = {})",
                self.t0,
                self.uses_eigendecomposition(),
                self.generator.max_rate()
            )));
        }
        let total = p.total();
        if (total - 1.0).abs() > super::state::TRACE_TOL {
            return Err(Error::Numerical(format!(
                "probability not conserved at t = {t} us: sum = {total:.15}"
            )));
        }
        Ok(p)
    }
}

fn spectral(e: Eigen, p0: &PopulationVector, w: &RateMatrix) -> Method {
    let scale = linalg::scale(w.matrix());
    let p0c = nalgebra::SVector::<Complex64, DIM>::from_fn(|n, _| Complex64::new(p0[n], 0.0));
    let c = e.inverse * p0c;
    let mut values = e.values;
    // A generator always has a zero eigenvalue; pin it so that the stationary
    // part does not drift over long horizons.
    for v in values.iter_mut() {
        if v.norm() <= SPECTRUM_TOL * scale {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    Method::Spectral {
        values,
        vectors: e.vectors,
        coefficients: c.into(),
    }
}

/// One constant-generator stretch of a piecewise trajectory.
#[derive(Debug, Clone)]
pub struct Phase {
    pub t_start: f64,
    pub t_end: f64,
    pub propagator: PopulationPropagator,
}

impl Phase {
    pub fn laser_on(&self) -> bool {
        self.propagator.generator().laser_on()
    }
}

/// Ordered, contiguous phases; lets consumers evaluate the exact state at any
/// time in `[t_start, t_end]`.
#[derive(Debug, Clone, Default)]
pub struct PiecewisePath {
    pub phases: Vec<Phase>,
}

impl PiecewisePath {
    pub fn single(propagator: PopulationPropagator, t_end: f64) -> Self {
        let t_start = propagator.t0;
        PiecewisePath {
            phases: vec![Phase {
                t_start,
                t_end,
                propagator,
            }],
        }
    }

    /// Phase containing `t`; boundaries belong to the earlier phase.
    pub fn phase_at(&self, t: f64) -> Option<&Phase> {
        self.phases
            .iter()
            .find(|ph| t >= ph.t_start && t <= ph.t_end)
    }

    pub fn at(&self, t: f64) -> Option<PopulationVector> {
        self.phase_at(t).map(|ph| ph.propagator.at(t))
    }
}

/// `p(t) = exp(W t) p0` sampled on `times`.
pub fn evolve_populations(
    w: &RateMatrix,
    p0: &PopulationVector,
    times: &[f64],
) -> Result<Trajectory<PopulationVector>> {
    check_times(times)?;
    p0.validate()?;
    let prop = PopulationPropagator::new(*w, *p0, 0.0);
    let states = times
        .iter()
        .map(|&t| prop.checked_at(t))
        .collect::<Result<Vec<_>>>()?;
    let t_end = *times.last().unwrap();
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        laser_on: vec![w.laser_on(); times.len()],
        path: Some(PiecewisePath::single(prop, t_end)),
    })
}

fn dmatrix(m: &Matrix8) -> DMatrix<f64> {
    DMatrix::from_fn(DIM, DIM, |i, j| m[(i, j)])
}

/// Unique probability vector spanning `ker W`.
pub fn steady_state(w: &RateMatrix) -> Result<PopulationVector> {
    let k = linalg::kernel(&dmatrix(w.matrix()), KERNEL_TOL);
    if k.ncols() != 1 {
        return Err(Error::DegenerateKernel { dim: k.ncols() });
    }
    let col = k.column(0);
    let sum = col.sum();
    if sum.abs() < f64::EPSILON {
        return Err(Error::Numerical("kernel vector has zero total probability".into()));
    }
    let p = PopulationVector::from_vector_unchecked(Vector8::from_fn(|n, _| col[n] / sum));
    p.validate()?;
    Ok(p)
}

/// Fails if any eigenvalue of `W` has a positive real part.
pub fn check_generator_spectrum(w: &RateMatrix) -> Result<()> {
    let scale = linalg::scale(w.matrix());
    for z in w.matrix().complex_eigenvalues().iter() {
        if !z.re.is_finite() || z.re > SPECTRUM_TOL * scale {
            return Err(Error::InvalidGenerator { re: z.re, im: z.im });
        }
    }
    Ok(())
}

/// Spectral projector onto `ker W`: `R (Lᵀ R)⁻¹ Lᵀ` with `R`, `L` the right
/// and left kernel bases.
fn zero_projector(w: &Matrix8) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let right = linalg::kernel(&dmatrix(w), KERNEL_TOL);
    let left = linalg::kernel(&dmatrix(&w.transpose()), KERNEL_TOL);
    if right.ncols() != left.ncols() || right.ncols() == 0 {
        return Err(Error::Numerical(format!(
            "zero eigenvalue is not semisimple (right kernel {}, left kernel {})",
            right.ncols(),
            left.ncols()
        )));
    }
    let gram = left.transpose() * &right;
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular kernel Gram matrix".into()))?;
    Ok((right, left, gram_inv))
}

/// `lim_{t→∞} exp(W t) p0`.
pub fn asymptotic_state(w: &RateMatrix, p0: &PopulationVector) -> Result<PopulationVector> {
    check_generator_spectrum(w)?;
    let (right, left, gram_inv) = zero_projector(w.matrix())?;
    let p = DVector::from_column_slice(p0.vector().as_slice());
    let limit = right * (gram_inv * (left.transpose() * p));
    let out = PopulationVector::from_vector_unchecked(Vector8::from_fn(|n, _| limit[n]));
    out.validate()?;
    Ok(out)
}

/// Stationary state of `W_off + ε W_drive` in the limit `ε → 0⁺`, where
/// `W_off` has a degenerate kernel that the drive lifts.
///
/// Degenerate perturbation theory: with `P = R G⁻¹ Lᵀ` the projector onto
/// `ker W_off`, the limit is `R x` with `x` spanning the kernel of the
/// effective generator `G⁻¹ Lᵀ W_drive R`.
pub fn weak_drive_limit(w_off: &RateMatrix, w_drive: &Matrix8) -> Result<PopulationVector> {
    let (right, left, gram_inv) = zero_projector(w_off.matrix())?;
    let effective = &gram_inv * left.transpose() * dmatrix(w_drive) * &right;
    let k = linalg::kernel(&effective, KERNEL_TOL.max(1e-10));
    if k.ncols() != 1 {
        return Err(Error::DegenerateKernel { dim: k.ncols() });
    }
    let full = right * k.column(0);
    let sum = full.sum();
    let out = PopulationVector::from_vector_unchecked(Vector8::from_fn(|n, _| full[n] / sum));
    out.validate()?;
    Ok(out)
}
