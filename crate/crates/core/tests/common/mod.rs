//! Explicit full-space unitaries built by Kronecker products, independent of
//! the library's gate kernels and circuit builders.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use qkad::featuremap::Family;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Op = DMatrix<C>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn m2(a: [[C; 2]; 2]) -> Op {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

pub fn u3(theta: f64, phi: f64, lambda: f64) -> Op {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    m2([
        [c(co, 0.0), -C::from_polar(si, lambda)],
        [C::from_polar(si, phi), C::from_polar(co, phi + lambda)],
    ])
}

pub fn rx(t: f64) -> Op {
    let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
    m2([[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]])
}

pub fn ry(t: f64) -> Op {
    let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
    m2([[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]])
}

pub fn rz(t: f64) -> Op {
    m2([
        [C::from_polar(1.0, -t / 2.0), c(0.0, 0.0)],
        [c(0.0, 0.0), C::from_polar(1.0, t / 2.0)],
    ])
}

pub fn phase(t: f64) -> Op {
    m2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), C::from_polar(1.0, t)]])
}

pub fn hadamard() -> Op {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    m2([[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]])
}

/// `g` on qubit `q` of `n`; qubit 0 is the rightmost Kronecker factor.
pub fn embed(n: usize, q: usize, g: &Op) -> Op {
    let mut full = DMatrix::<C>::identity(1, 1);
    for k in (0..n).rev() {
        let f = if k == q { g.clone() } else { DMatrix::identity(2, 2) };
        full = full.kronecker(&f);
    }
    full
}

/// `|0><0|_c ⊗ I + |1><1|_c ⊗ X_t`.
pub fn cnot(n: usize, control: usize, target: usize) -> Op {
    let p0 = m2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
    let p1 = m2([[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
    let x = m2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]);
    let mut a = DMatrix::<C>::identity(1, 1);
    let mut b = DMatrix::<C>::identity(1, 1);
    for k in (0..n).rev() {
        let (fa, fb) = if k == control {
            (p0.clone(), p1.clone())
        } else if k == target {
            (DMatrix::identity(2, 2), x.clone())
        } else {
            (DMatrix::identity(2, 2), DMatrix::identity(2, 2))
        };
        a = a.kronecker(&fa);
        b = b.kronecker(&fb);
    }
    a + b
}

fn layer(n: usize, u: &mut Op, g: impl Fn(usize) -> Op) {
    for k in 0..n {
        *u = embed(n, k, &g(k)) * &*u;
    }
}

/// Full encoding unitary of a feature-map family for scaled features `x`.
pub fn feature_unitary(family: Family, repetitions: usize, x: &[f64]) -> Op {
    let n = match family {
        Family::ZZ => x.len(),
        _ => x.len() / 2,
    };
    let dim = 1 << n;
    let mut u = DMatrix::<C>::identity(dim, dim);
    for _ in 0..repetitions {
        match family {
            Family::Simple2DoF => layer(n, &mut u, |k| u3(FRAC_PI_2, x[2 * k], x[2 * k + 1])),
            Family::Belis => {
                layer(n, &mut u, |k| u3(FRAC_PI_2, x[2 * k], x[2 * k + 1]));
                for k in 0..n.saturating_sub(1) {
                    u = cnot(n, k, k + 1) * &u;
                }
                for k in 0..n {
                    u = embed(n, k, &rz(x[2 * k])) * &u;
                    u = embed(n, k, &rx(x[2 * k + 1])) * &u;
                }
            }
            Family::Sakhnenko10 => {
                layer(n, &mut u, |k| ry(x[2 * k]));
                layer(n, &mut u, |k| rx(x[2 * k + 1]));
                if n == 2 {
                    u = cnot(n, 0, 1) * &u;
                } else if n >= 3 {
                    for k in 0..n {
                        u = cnot(n, k, (k + 1) % n) * &u;
                    }
                }
                layer(n, &mut u, |_| ry(FRAC_PI_2));
            }
            Family::ZZ => {
                layer(n, &mut u, |_| hadamard());
                layer(n, &mut u, |k| phase(2.0 * x[k]));
                for k in 0..n.saturating_sub(1) {
                    let phi = (PI - x[k]) * (PI - x[k + 1]);
                    u = cnot(n, k, k + 1) * &u;
                    u = embed(n, k + 1, &phase(2.0 * phi)) * &u;
                    u = cnot(n, k, k + 1) * &u;
                }
            }
        }
    }
    u
}

/// `|<0|U(b)† U(a)|0>|²`.
pub fn oracle_fidelity(family: Family, repetitions: usize, a: &[f64], b: &[f64]) -> f64 {
    let ua = feature_unitary(family, repetitions, a);
    let ub = feature_unitary(family, repetitions, b);
    (ub.adjoint() * ua)[(0, 0)].norm_sqr()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform angles in `[−π, π]`.
pub fn random_angles(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> qkad::Matrix {
    qkad::Matrix::from_fn(rows, cols, |_, _| rng.random_range(-PI..=PI))
}

/// Gaussian-kernel Gram matrix of random points: symmetric PSD.
pub fn random_psd(rng: &mut ChaCha8Rng, m: usize, dim: usize, gamma: f64) -> qkad::Matrix {
    let pts: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    qkad::Matrix::from_fn(m, m, |i, j| {
        let d2: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        (-gamma * d2).exp()
    })
}

/// Prints and records one acceptance line.
pub fn report(id: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:>2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
