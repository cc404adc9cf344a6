//! The two-neuron benchmark network with asynchronous delays, bundled so that
//! the reproduction runs need no external files.

use num_complex::Complex64;

use crate::io::{parse_network, InitialCase, NetworkDocument};
use crate::model::{ComplexActivation, Component, NodeActivation, Sigma};

pub const CONSTANT_DELAY_JSON: &str = include_str!("../fixtures/two_neuron_const.json");
pub const VARYING_DELAY_JSON: &str = include_str!("../fixtures/two_neuron_varying.json");
pub const ALT_INPUT_JSON: &str = include_str!("../fixtures/two_neuron_alt_input.json");

/// Reference equilibrium, four decimals, in figure order `(z₁ᴿ, z₁ᴵ, z₂ᴿ, z₂ᴵ)`.
pub const EQUILIBRIUM: [f64; 4] = [-0.0351, 0.1423, 0.0912, 0.2239];

/// [`EQUILIBRIUM`] in the simulator's block layout `(z₁ᴿ, z₂ᴿ, z₁ᴵ, z₂ᴵ)`.
pub fn equilibrium_block() -> Vec<f64> {
    let e = EQUILIBRIUM;
    vec![e[0], e[2], e[1], e[3]]
}

/// Reference eigenvalues of `D̄ − ĀF̄ − B̄Ḡ`.
pub const EIGENVALUES_PLAIN: [f64; 4] = [-0.7655, 18.6670, 20.9701, 19.8784];

/// Reference eigenvalues of `D̄ − ĀF̄ − B̄Ḡ + Δ̄`.
pub const EIGENVALUES_CORRECTED: [f64; 4] = [0.8488, 20.0717, 22.7947, 21.5348];

/// Alternative input `u′` used for the sensitivity run.
pub fn alternate_input() -> Vec<Complex64> {
    vec![Complex64::new(3.0, 2.0), Complex64::new(4.0, -1.0)]
}

fn load(text: &str) -> NetworkDocument {
    parse_network(text).expect("bundled fixture is valid")
}

/// Constant delays `τ = [[1, 2], [3, 4]]` with the five initial cases.
pub fn constant_delay() -> NetworkDocument {
    load(CONSTANT_DELAY_JSON)
}

/// Delays `1 + sin t`, `2 + cos t`, `3 − sin t`, `4 − cos t`; first initial case only.
pub fn varying_delay() -> NetworkDocument {
    load(VARYING_DELAY_JSON)
}

/// Constant delays with input `u′`; first initial case only.
pub fn alt_input() -> NetworkDocument {
    load(ALT_INPUT_JSON)
}

pub fn cases() -> Vec<InitialCase> {
    constant_delay().cases
}

/// The activation pair used on both nodes: `f = (bipolar(2x + y), logistic(x + 2y))`,
/// `g = (logistic(x + 2y), bipolar(2x + y))`.
pub fn example_activation() -> NodeActivation {
    let fr = Component::new(Sigma::Bipolar, 2.0, 1.0);
    let fi = Component::new(Sigma::Logistic, 1.0, 2.0);
    NodeActivation {
        f: ComplexActivation { re: fr, im: fi },
        g: ComplexActivation { re: fi, im: fr },
    }
}
