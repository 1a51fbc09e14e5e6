//! Brute-force reference implementation, independent of the library: rates
//! and energies are typed in from the parameter table, the stationary state
//! comes from Gaussian elimination and the dynamics from fixed-step RK4.

#![allow(dead_code)]

pub type Mat = [[f64; 8]; 8];
pub type Vec8 = [f64; 8];

pub const GAMMA: f64 = 77.0;
pub const D_G: f64 = 2.87e3;
pub const DELTA_EG: f64 = 4.7e8;
pub const DELTA_IG: f64 = 1.69e8;
pub const D_I: f64 = 2.88e8;
pub const D_E: f64 = 1.40e3;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Kind {
    Pump,
    Sc,
    Isc,
    Nsc,
}

/// `(from, to, rate, kind)` with 1-based levels.
pub fn jumps(gamma_p: f64) -> Vec<(usize, usize, f64, Kind)> {
    let g = GAMMA;
    vec![
        (1, 4, gamma_p * g, Kind::Pump),
        (2, 5, gamma_p * g, Kind::Pump),
        (3, 6, gamma_p * g, Kind::Pump),
        (4, 1, g, Kind::Sc),
        (5, 2, g, Kind::Sc),
        (6, 3, g, Kind::Sc),
        (4, 8, 0.0, Kind::Isc),
        (5, 8, 15.0, Kind::Isc),
        (6, 8, 15.0, Kind::Isc),
        (8, 7, 1.0e3, Kind::Isc),
        (7, 1, 1.0, Kind::Isc),
        (7, 2, 1.0, Kind::Isc),
        (7, 3, 1.0, Kind::Isc),
        (4, 2, 0.25, Kind::Nsc),
        (4, 3, 0.25, Kind::Nsc),
        (5, 1, 0.25, Kind::Nsc),
        (6, 1, 0.25, Kind::Nsc),
    ]
}

/// Energies at zero field.
pub fn energies() -> Vec8 {
    [
        0.0,
        D_G,
        D_G,
        DELTA_EG,
        DELTA_EG + D_E,
        DELTA_EG + D_E,
        DELTA_IG,
        DELTA_IG + D_I,
    ]
}

pub fn rate_matrix(gamma_p: f64, laser_on: bool) -> Mat {
    let mut w = [[0.0; 8]; 8];
    for (from, to, k, kind) in jumps(gamma_p) {
        if kind == Kind::Pump && !laser_on {
            continue;
        }
        w[to - 1][from - 1] += k;
        w[from - 1][from - 1] -= k;
    }
    w
}

pub fn mul(w: &Mat, p: &Vec8) -> Vec8 {
    let mut out = [0.0; 8];
    for i in 0..8 {
        for j in 0..8 {
            out[i] += w[i][j] * p[j];
        }
    }
    out
}

/// Solves `W p = 0, Σ p = 1` by replacing the last balance equation with the
/// normalization and eliminating with partial pivoting.
pub fn null_space(w: &Mat) -> Vec8 {
    let mut a = *w;
    let mut b = [0.0; 8];
    a[7] = [1.0; 8];
    b[7] = 1.0;
    for col in 0..8 {
        let piv = (col..8)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..8 {
            let f = a[row][col] / a[col][col];
            for k in col..8 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 8];
    for row in (0..8).rev() {
        let s: f64 = (row + 1..8).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn entropy(p: &Vec8) -> f64 {
    p.iter().filter(|x| **x > 0.0).map(|x| -x * x.ln()).sum()
}

/// Power and heat currents `[Ẇ, Q̇_sc, Q̇_isc, Q̇_nsc]`.
pub fn fluxes(gamma_p: f64, laser_on: bool, p: &Vec8) -> [f64; 4] {
    let e = energies();
    let mut f = [0.0; 4];
    for (from, to, k, kind) in jumps(gamma_p) {
        let flow = k * p[from - 1] * (e[to - 1] - e[from - 1]);
        match kind {
            Kind::Pump if laser_on => f[0] += flow,
            Kind::Pump => {}
            Kind::Sc => f[1] += flow,
            Kind::Isc => f[2] += flow,
            Kind::Nsc => f[3] += flow,
        }
    }
    f
}

/// State of the RK4 integration: populations plus running integrals of the
/// four fluxes.
#[derive(Clone, Copy, Debug)]
pub struct Aug {
    pub p: Vec8,
    pub integrals: [f64; 4],
}

fn deriv(gamma_p: f64, laser_on: bool, w: &Mat, p: &Vec8) -> (Vec8, [f64; 4]) {
    (mul(w, p), fluxes(gamma_p, laser_on, p))
}

/// Fixed-step classical RK4 over `[0, t]` with at least `steps` steps.
pub fn rk4(gamma_p: f64, laser_on: bool, start: Aug, t: f64, steps: usize) -> Aug {
    let w = rate_matrix(gamma_p, laser_on);
    let h = t / steps as f64;
    let mut s = start;
    for _ in 0..steps {
        let add = |s: &Aug, k: &(Vec8, [f64; 4]), c: f64| {
            let mut out = *s;
            for i in 0..8 {
                out.p[i] += c * k.0[i];
            }
            out
        };
        let k1 = deriv(gamma_p, laser_on, &w, &s.p);
        let k2 = deriv(gamma_p, laser_on, &w, &add(&s, &k1, 0.5 * h).p);
        let k3 = deriv(gamma_p, laser_on, &w, &add(&s, &k2, 0.5 * h).p);
        let k4 = deriv(gamma_p, laser_on, &w, &add(&s, &k3, h).p);
        for i in 0..8 {
            s.p[i] += h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
        }
        for q in 0..4 {
            s.integrals[q] += h / 6.0 * (k1.1[q] + 2.0 * k2.1[q] + 2.0 * k3.1[q] + k4.1[q]);
        }
    }
    s
}

pub fn uniform_ground() -> Vec8 {
    let t = 1.0 / 3.0;
    [t, t, t, 0.0, 0.0, 0.0, 0.0, 0.0]
}

/// Two-step protocol from the uniform ground state.
pub struct Protocol {
    pub p_off: Vec8,
    pub p_end: Vec8,
    /// `[W, Q_sc, Q_isc, Q_nsc]` over the whole run.
    pub integrals: [f64; 4],
}

/// Step `h` of `1e-4` μs keeps `h · κ_I = 0.1` well inside the RK4 stability
/// region.
pub fn protocol(gamma_p: f64, t_off: f64, t_end: f64) -> Protocol {
    let h = 1e-4;
    let start = Aug {
        p: uniform_ground(),
        integrals: [0.0; 4],
    };
    let on = rk4(gamma_p, true, start, t_off, (t_off / h).ceil() as usize);
    let off = rk4(gamma_p, false, on, t_end - t_off, ((t_end - t_off) / h).ceil() as usize);
    Protocol {
        p_off: on.p,
        p_end: off.p,
        integrals: off.integrals,
    }
}
