//! Small dense linear algebra on 8×8 generators: eigendecomposition with
//! defect detection, Padé matrix exponential, kernels.

use nalgebra::{DMatrix, DVector, SMatrix, SVD};
use num_complex::Complex64;

pub use crate::model::CMatrix8;
use crate::model::DIM;

pub type Matrix8 = SMatrix<f64, DIM, DIM>;

/// Eigenvalues closer than this (relative to the matrix scale) are one cluster.
const CLUSTER_TOL: f64 = 1e-7;
/// Singular values below this (relative) count as zero in a cluster null space.
const NULL_TOL: f64 = 1e-8;

/// `W = V diag(λ) V⁻¹` for a diagonalizable real matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: [Complex64; DIM],
    pub vectors: CMatrix8,
    pub inverse: CMatrix8,
    /// 2-norm condition number of `vectors`.
    pub condition: f64,
}

pub fn scale(m: &Matrix8) -> f64 {
    m.amax().max(1.0)
}

/// Eigendecomposition via the real Schur eigenvalues, with eigenvectors from
/// the null space of `W − λI` per eigenvalue cluster. Returns `None` when a
/// cluster is defective (geometric < algebraic multiplicity).
pub fn eigen(m: &Matrix8) -> Option<Eigen> {
    let s = scale(m);
    let raw = m.complex_eigenvalues();
    if raw.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }

    // Greedy clustering of near-equal eigenvalues.
    let mut remaining: Vec<Complex64> = raw.iter().copied().collect();
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    while let Some(seed) = remaining.pop() {
        let mut cluster = vec![seed];
        remaining.retain(|z| {
            if (*z - seed).norm() <= CLUSTER_TOL * s {
                cluster.push(*z);
                false
            } else {
                true
            }
        });
        clusters.push(cluster);
    }
    // Deterministic ordering: by real part, then imaginary part.
    clusters.sort_by(|a, b| {
        let (za, zb) = (mean(a), mean(b));
        za.re
            .partial_cmp(&zb.re)
            .unwrap()
            .then(za.im.partial_cmp(&zb.im).unwrap())
    });

    let mc: CMatrix8 = m.map(|x| Complex64::new(x, 0.0));
    let mut values = [Complex64::new(0.0, 0.0); DIM];
    let mut vectors = CMatrix8::zeros();
    let mut col = 0;
    for cluster in &clusters {
        let mut lambda = mean(cluster);
        if lambda.im.abs() <= CLUSTER_TOL * s {
            lambda.im = 0.0;
        }
        let shifted = mc - CMatrix8::identity() * lambda;
        let svd = SVD::new(shifted, false, true);
        let v_t = svd.v_t?;
        let mut order: Vec<usize> = (0..DIM).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[i]
                .partial_cmp(&svd.singular_values[j])
                .unwrap()
        });
        for &k in order.iter().take(cluster.len()) {
            if svd.singular_values[k] > NULL_TOL * s {
                return None;
            }
            let v = v_t.row(k).adjoint();
            let norm = v.norm();
            vectors.set_column(col, &(v / Complex64::new(norm, 0.0)));
            values[col] = lambda;
            col += 1;
        }
    }

    let condition = condition_number(&vectors);
    let inverse = vectors.try_inverse()?;
    Some(Eigen {
        values,
        vectors,
        inverse,
        condition,
    })
}

fn mean(zs: &[Complex64]) -> Complex64 {
    zs.iter().sum::<Complex64>() / zs.len() as f64
}

pub fn condition_number(m: &CMatrix8) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &Matrix8) -> Matrix8 {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA_13: f64 = 5.371920351148152;

    let norm1 = (0..DIM)
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA_13 {
        (norm1 / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings);

    let id = Matrix8::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u_inner = a6 * (a6 * B[13] + a4 * B[11] + a2 * B[9]) + a6 * B[7] + a4 * B[5] + a2 * B[3]
        + id * B[1];
    let u = a * u_inner;
    let v = a6 * (a6 * B[12] + a4 * B[10] + a2 * B[8]) + a6 * B[6] + a4 * B[4] + a2 * B[2]
        + id * B[0];

    let p = v + u;
    let q = v - u;
    let mut r = q.lu().solve(&p).unwrap_or_else(|| Matrix8::from_element(f64::NAN));
    for _ in 0..squarings {
        r = r * r;
    }
    r
}

/// Orthonormal basis of the (numerical) right kernel of `m`, as columns.
pub fn kernel(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.max().max(f64::MIN_POSITIVE);
    let cols: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= rel_tol * smax)
        .map(|k| v_t.row(k).transpose())
        .collect();
    // For wide or rank-deficient-by-shape inputs the SVD may return fewer rows
    // than columns; that does not happen for the square inputs used here.
    debug_assert_eq!(v_t.nrows(), n);
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Singular values in ascending order.
pub fn sorted_singular_values(m: &Matrix8) -> Vec<f64> {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sv
}
