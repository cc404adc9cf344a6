#![allow(dead_code)]

use cvstab::decompose::{decompose, RealSystem};
use cvstab::model::{derive_bounds, ActivationSpec, ComplexMatrix, DelaySpec, NetworkSpec};
use cvstab::reference;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub fn cm(n: usize, re: &[f64], im: &[f64]) -> ComplexMatrix {
    ComplexMatrix::new(
        DMatrix::from_row_slice(n, n, re),
        DMatrix::from_row_slice(n, n, im),
    )
    .unwrap()
}

/// Network with the example activations on every node.
pub fn network(
    d: &[f64],
    a: ComplexMatrix,
    b: ComplexMatrix,
    u: &[Complex64],
    tau: &[f64],
) -> NetworkSpec {
    let n = d.len();
    NetworkSpec::new(
        d.to_vec(),
        a,
        b,
        u.to_vec(),
        DelaySpec::constant(&DMatrix::from_row_slice(n, n, tau)).unwrap(),
        ActivationSpec::uniform(n, reference::example_activation()),
    )
    .unwrap()
}

/// `A = B = 0`.
pub fn uncoupled(d: &[f64], u: &[Complex64]) -> NetworkSpec {
    let n = d.len();
    network(
        d,
        ComplexMatrix::zeros(n),
        ComplexMatrix::zeros(n),
        u,
        &vec![1.0; n * n],
    )
}

pub fn system(net: &NetworkSpec) -> RealSystem {
    decompose(net, &derive_bounds(&net.activations).unwrap()).unwrap()
}

pub fn reference_system() -> RealSystem {
    system(&reference::constant_delay().network)
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, scale: f64) -> ComplexMatrix {
    let re: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-scale..scale)).collect();
    let im: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-scale..scale)).collect();
    cm(n, &re, &im)
}

pub fn random_network<R: Rng>(rng: &mut R, n: usize, d: f64, scale: f64) -> NetworkSpec {
    let a = random_matrix(rng, n, scale);
    let b = random_matrix(rng, n, scale);
    let u: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
        .collect();
    let tau: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.1..2.0)).collect();
    network(&vec![d; n], a, b, &u, &tau)
}
