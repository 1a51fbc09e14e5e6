//! Adaptive integration of the full master equation on the 64-dimensional
//! vectorized density matrix. Used to validate the population reduction.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CMatrix8, NvModel, DIM};

use super::state::{check_times, DensityMatrix, Trajectory};

const N: usize = DIM * DIM;

#[derive(Debug, Clone, Copy)]
pub struct FullOptions {
    /// Relative local error tolerance.
    pub rtol: f64,
    /// Absolute local error floor.
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for FullOptions {
    fn default() -> Self {
        FullOptions {
            rtol: 1e-10,
            atol: 1e-14,
            max_steps: 5_000_000,
        }
    }
}

impl FullOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        FullOptions {
            rtol,
            ..Default::default()
        }
    }
}

/// Liouvillian `𝓛` with `vec(ρ̇) = 𝓛 vec(ρ)` (column-major `vec`), stored as
/// its nonzero entries.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    entries: Vec<(usize, usize, Complex64)>,
}

fn to_dmatrix(m: &CMatrix8) -> DMatrix<Complex64> {
    DMatrix::from_fn(DIM, DIM, |i, j| m[(i, j)])
}

impl Liouvillian {
    /// Assembled from `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.
    pub fn new(model: &NvModel, laser_on: bool) -> Self {
        let id = DMatrix::<Complex64>::identity(DIM, DIM);
        let h = to_dmatrix(&model.hamiltonian());
        let minus_i = Complex64::new(0.0, -1.0);
        let half = Complex64::new(0.5, 0.0);

        let mut sup = (id.kronecker(&h) - h.transpose().kronecker(&id)) * minus_i;
        for jump in model.active(laser_on) {
            let l = to_dmatrix(&jump.matrix());
            let ldl = l.adjoint() * &l;
            sup += l.conjugate().kronecker(&l);
            sup -= (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)) * half;
        }

        let mut entries = Vec::new();
        for c in 0..N {
            for r in 0..N {
                let v = sup[(r, c)];
                if v != Complex64::new(0.0, 0.0) {
                    entries.push((r, c, v));
                }
            }
        }
        Liouvillian { entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    fn apply(&self, x: &[Complex64; N], out: &mut [Complex64; N]) {
        out.fill(Complex64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
    }
}

fn vec_of(m: &CMatrix8) -> [Complex64; N] {
    let mut v = [Complex64::new(0.0, 0.0); N];
    for c in 0..DIM {
        for r in 0..DIM {
            v[c * DIM + r] = m[(r, c)];
        }
    }
    v
}

fn mat_of(v: &[Complex64; N]) -> CMatrix8 {
    CMatrix8::from_fn(|r, c| v[c * DIM + r])
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are
// not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Stepper<'a> {
    lv: &'a Liouvillian,
    k: [[Complex64; N]; 7],
    tmp: [Complex64; N],
}

impl<'a> Stepper<'a> {
    fn new(lv: &'a Liouvillian) -> Self {
        Stepper {
            lv,
            k: [[Complex64::new(0.0, 0.0); N]; 7],
            tmp: [Complex64::new(0.0, 0.0); N],
        }
    }

    /// One trial step; assumes `k[0]` holds `𝓛 y`. Returns the error norm.
    fn step(&mut self, y: &[Complex64; N], h: f64, y_new: &mut [Complex64; N], opts: &FullOptions) -> f64 {
        for s in 1..7 {
            for i in 0..N {
                let mut acc = y[i];
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        acc += self.k[j][i] * (h * a);
                    }
                }
                self.tmp[i] = acc;
            }
            let (_, tail) = self.k.split_at_mut(s);
            self.lv.apply(&self.tmp, &mut tail[0]);
        }
        // Stage 7 was evaluated at the fifth-order solution (FSAL).
        let mut err: f64 = 0.0;
        for i in 0..N {
            let mut hi = Complex64::new(0.0, 0.0);
            let mut lo = Complex64::new(0.0, 0.0);
            for s in 0..7 {
                hi += self.k[s][i] * B5[s];
                lo += self.k[s][i] * B4[s];
            }
            y_new[i] = y[i] + hi * h;
            let e = ((hi - lo) * h).norm();
            let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err = err.max(e / sc);
        }
        err
    }
}

/// Integrates `ρ̇ = −i[H, ρ] + D(ρ)` from `rho0` at `t = 0`, sampling at `times`.
pub fn evolve_full(
    rho0: &DensityMatrix,
    model: &NvModel,
    laser_on: bool,
    times: &[f64],
    opts: FullOptions,
) -> Result<Trajectory<DensityMatrix>> {
    check_times(times)?;
    rho0.validate()?;
    let lv = Liouvillian::new(model, laser_on);
    let mut stepper = Stepper::new(&lv);

    let mut y = vec_of(rho0.matrix());
    let mut y_new = [Complex64::new(0.0, 0.0); N];
    let mut t = 0.0f64;
    let rate = model.max_rate(laser_on).max(1.0);
    let mut h = 1e-3 / rate;
    let mut steps = 0usize;
    let mut states = Vec::with_capacity(times.len());
    lv.apply(&y, &mut stepper.k[0]);

    for &target in times {
        while t < target {
            let h_min = 1e-14 * t.abs().max(1.0);
            if steps >= opts.max_steps || h < h_min {
                return Err(Error::Stiffness { t, h });
            }
            let last = target - t <= h;
            let h_try = if last { target - t } else { h };
            let err = stepper.step(&y, h_try, &mut y_new, &opts);
            steps += 1;
            if !err.is_finite() {
                return Err(Error::Numerical(format!("non-finite state at t = {t} us")));
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t = if last { target } else { t + h_try };
                y = y_new;
                stepper.k[0] = stepper.k[6];
                if !last {
                    h = h_try * factor;
                } else {
                    h = h.max(h_try * factor);
                }
            } else {
                h = h_try * factor;
            }
        }
        states.push(DensityMatrix::from_matrix_unchecked(mat_of(&y)));
    }

    Ok(Trajectory {
        times: times.to_vec(),
        states,
        laser_on: vec![laser_on; times.len()],
        path: None,
    })
}
