//! Small dense 3x3 helpers: scaling-and-squaring matrix exponential and the
//! spectral norm.

use nalgebra::{Matrix3, SymmetricEigen};

pub type Mat3 = Matrix3<f64>;

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
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

/// Maximum absolute column sum.
pub fn norm1(a: &Mat3) -> f64 {
    (0..3)
        .map(|j| (0..3).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral (operator 2-) norm via the largest eigenvalue of the Gram matrix.
pub fn spectral_norm(a: &Mat3) -> f64 {
    let scale = a.amax();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s = a / scale;
    let gram = s.transpose() * s;
    let eig = SymmetricEigen::new(gram);
    scale * eig.eigenvalues.max().max(0.0).sqrt()
}

fn pade_low(a: &Mat3, b: &[f64]) -> (Mat3, Mat3) {
    let id = Mat3::identity();
    let a2 = a * a;
    let mut power = id;
    let mut u = Mat3::zeros();
    let mut v = Mat3::zeros();
    for k in 0..b.len() / 2 {
        v += power * b[2 * k];
        u += power * b[2 * k + 1];
        power *= a2;
    }
    (a * u, v)
}

fn pade13(a: &Mat3) -> (Mat3, Mat3) {
    let id = Mat3::identity();
    let b = &B13;
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u_inner = a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9]) + a6 * b[7] + a4 * b[5] + a2 * b[3] + id * b[1];
    let u = a * u_inner;
    let v = a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8]) + a6 * b[6] + a4 * b[4] + a2 * b[2] + id * b[0];
    (u, v)
}

/// Matrix exponential by scaling and squaring with a diagonal Pade approximant,
/// degree and squaring count picked from the 1-norm so that the backward error
/// stays at unit-roundoff level.
pub fn expm(a: &Mat3) -> Mat3 {
    let nrm = norm1(a);
    if !nrm.is_finite() {
        return Mat3::from_element(f64::NAN);
    }
    let solve = |(u, v): (Mat3, Mat3)| -> Mat3 {
        let p = v + u;
        let q = v - u;
        match q.lu().solve(&p) {
            Some(r) => r,
            None => Mat3::from_element(f64::NAN),
        }
    };
    for (m, theta) in THETA {
        if nrm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return solve(pade_low(a, b));
        }
    }
    let s = if nrm > THETA_13 {
        (nrm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s);
    let mut r = solve(pade13(&scaled));
    for _ in 0..s {
        r = r * r;
    }
    r
}
