mod common;

use approx::assert_abs_diff_eq;
use common::*;
use cvstab::decompose::{comparison_matrices, delta_correction};
use cvstab::io::{network_to_json, parse_network};
use cvstab::model::{
    derive_bounds, eval_activation, ActivationClass, ActivationSpec, ComplexActivation, Component,
    Delay, NodeActivation, Sigma, Wave, Which,
};
use cvstab::{reference, Error};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row(m: &DMatrix<f64>, r: usize) -> Vec<f64> {
    (0..m.ncols()).map(|c| m[(r, c)]).collect()
}

#[test]
fn fixture_uses_example_activation() {
    let net = reference::constant_delay().network;
    assert!(net
        .activations
        .nodes
        .iter()
        .all(|n| *n == reference::example_activation()));
    assert_eq!(reference::constant_delay().cases.len(), 5);
}

#[test]
fn example_bounds() {
    let b = derive_bounds(&reference::constant_delay().network.activations).unwrap();
    for j in 0..2 {
        assert_eq!(b.lambda[j].as_array(), [1.0, 0.5, 0.25, 0.5]);
        assert_eq!(b.mu[j].as_array(), [0.25, 0.5, 1.0, 0.5]);
        assert_eq!(b.f_class[j], ActivationClass::H1);
    }
    assert!(b.f_is_h1());
}

#[test]
fn zero_coefficients_are_rejected() {
    let z = Component::new(Sigma::Logistic, 0.0, 0.0);
    let mut node = reference::example_activation();
    node.g.re = z;
    let spec = ActivationSpec::uniform(1, node);
    assert!(matches!(
        derive_bounds(&spec),
        Err(Error::DegenerateActivation {
            node: 0,
            which: "g",
            component: "RR"
        })
    ));
}

#[test]
fn negative_coefficient_gives_h2() {
    let mut node = reference::example_activation();
    node.f.im = Component::new(Sigma::Logistic, -1.0, 2.0);
    let b = derive_bounds(&ActivationSpec::uniform(1, node)).unwrap();
    assert_eq!(b.f_class[0], ActivationClass::H2);
    assert_eq!(b.lambda[0].ir, 0.25);
}

#[test]
fn unsupported_sigma_rejected() {
    assert!(matches!(
        Sigma::parse("relu"),
        Err(Error::UnsupportedSigma(_))
    ));
    assert_eq!(Sigma::parse("Bipolar").unwrap(), Sigma::Bipolar);
}

#[test]
fn activation_values() {
    assert_eq!(Sigma::Bipolar.eval(0.0), 0.0);
    assert_eq!(Sigma::Logistic.eval(0.0), 0.5);
    let spec = ActivationSpec::uniform(1, reference::example_activation());
    assert_eq!(eval_activation(&spec, 0, Which::F, 0.0, 0.0), (0.0, 0.5));
    let (fr, fi) = eval_activation(&spec, 0, Which::F, 1.0, 1.0);
    let e3 = (-3.0f64).exp();
    assert_abs_diff_eq!(fr, (1.0 - e3) / (1.0 + e3), epsilon = 1e-15);
    assert_abs_diff_eq!(fi, 1.0 / (1.0 + e3), epsilon = 1e-15);
    // saturation keeps far arguments finite and at the asymptote
    assert_eq!(Sigma::Logistic.eval(-1e6), 0.0);
    assert_eq!(Sigma::Bipolar.eval(1e6), 1.0);
}

#[test]
fn bounds_are_tight_on_a_grid() {
    let comps = [
        Component::new(Sigma::Bipolar, 2.0, 1.0),
        Component::new(Sigma::Logistic, 1.0, 2.0),
        Component::new(Sigma::Logistic, -0.7, 3.0),
        Component::new(Sigma::Bipolar, 0.3, -1.5),
    ];
    for c in comps {
        let (bx, by) = c.partial_bounds();
        let (mut mx, mut my) = (0.0f64, 0.0f64);
        for i in 0..=200 {
            for k in 0..=200 {
                let x = -10.0 + 0.1 * i as f64;
                let y = -10.0 + 0.1 * k as f64;
                let (px, py) = c.partials(x, y);
                assert!(px.abs() <= bx + 1e-15 && py.abs() <= by + 1e-15);
                if c.is_increasing() {
                    assert!(px > 0.0 && py > 0.0);
                }
                mx = mx.max(px.abs());
                my = my.max(py.abs());
            }
        }
        assert!(mx >= 0.99 * bx && my >= 0.99 * by, "{c:?}");
    }
}

#[test]
fn sigma_is_monotone() {
    for s in [Sigma::Logistic, Sigma::Bipolar] {
        let mut prev = s.eval(-40.0);
        for i in 1..=8000 {
            let v = s.eval(-40.0 + 0.01 * i as f64);
            assert!(v >= prev);
            prev = v;
        }
    }
}

#[test]
fn example_comparison_matrices() {
    let sys = reference_system();
    let c = sys.comparison();
    assert_eq!(c.d_bar, DMatrix::from_diagonal_element(4, 4, 19.0));
    assert_eq!(row(&c.a_bar, 0), [2.0, 3.0, 3.0, 1.0]);
    assert_eq!(row(&c.b_bar, 0), [1.0, 2.0, 2.0, 1.0]);
    assert_eq!(row(&c.f_bar, 0), [1.0, 0.0, 0.5, 0.0]);
    let a_bar = DMatrix::from_row_slice(
        4,
        4,
        &[
            2., 3., 3., 1., 4., 1., 2., 2., 3., 1., 2., 3., 2., 2., 4., 1.,
        ],
    );
    let b_bar = DMatrix::from_row_slice(
        4,
        4,
        &[
            1., 2., 2., 1., 3., 3., 4., 2., 2., 1., 1., 2., 4., 2., 3., 3.,
        ],
    );
    let g_bar = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.25, 0., 0.5, 0., 0., 0.25, 0., 0.5, 1., 0., 0.5, 0., 0., 1., 0., 0.5,
        ],
    );
    assert_eq!(c.a_bar, a_bar);
    assert_eq!(c.b_bar, b_bar);
    assert_eq!(c.g_bar, g_bar);
}

#[test]
fn example_sign_gaps() {
    let sys = reference_system();
    let g = sys.sign_gap();
    assert_eq!(g.p1.as_slice(), [2.0, 1.0]);
    assert_eq!(g.p2.as_slice(), [0.0, 2.0]);
    assert_eq!(g.p3.as_slice(), [3.0, 0.0]);
    // diag(P1 + 0.25 P2, 0.5 (P1 + P3))
    let expect = [2.0, 1.5, 2.5, 0.5];
    for (i, e) in expect.iter().enumerate() {
        assert_abs_diff_eq!(g.delta_bar[(i, i)], *e, epsilon = 1e-15);
    }
}

#[test]
fn positive_diagonal_has_no_sign_gap() {
    let a = cm(2, &[1.0, -2.0, 3.0, 0.5], &[0.0, 1.0, -1.0, 0.0]);
    let net = network(
        &[5.0, 5.0],
        a,
        cm(2, &[0.0; 4], &[0.0; 4]),
        &[Complex64::new(0.0, 0.0); 2],
        &[1.0; 4],
    );
    let g = delta_correction(&net, &derive_bounds(&net.activations).unwrap()).unwrap();
    assert!(g
        .p1
        .iter()
        .chain(g.p2.iter())
        .chain(g.p3.iter())
        .all(|v| *v == 0.0));
    assert!(g.delta_bar.iter().all(|v| *v == 0.0));
}

#[test]
fn negative_real_diagonal_gap() {
    let a = cm(1, &[-2.5], &[0.0]);
    let net = network(
        &[5.0],
        a,
        cm(1, &[0.0], &[0.0]),
        &[Complex64::new(0.0, 0.0)],
        &[1.0],
    );
    let g = delta_correction(&net, &derive_bounds(&net.activations).unwrap()).unwrap();
    assert_eq!(g.p1[0], 2.5);
}

#[test]
fn uncoupled_right_hand_side() {
    let u = [Complex64::new(1.0, -2.0), Complex64::new(0.5, 3.0)];
    let sys = system(&uncoupled(&[2.0, 3.0], &u));
    let z = [0.1, -0.2, 0.3, 0.4];
    let out = sys.rhs_at_rest(&z);
    let expect = [
        -2.0 * 0.1 + 1.0,
        3.0 * 0.2 + 0.5,
        -2.0 * 0.3 - 2.0,
        -3.0 * 0.4 + 3.0,
    ];
    for (a, b) in out.iter().zip(expect) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
    }
}

#[test]
fn identity_bounds_compose() {
    let mut node = reference::example_activation();
    let one = Component::new(Sigma::Bipolar, 2.0, 2.0); // both bounds 1
    node.f = ComplexActivation { re: one, im: one };
    let n = 2;
    let net = cvstab::model::NetworkSpec::new(
        vec![1.0; n],
        cm(n, &[1.0, 0.0, 0.0, 1.0], &[0.0; 4]),
        cvstab::model::ComplexMatrix::zeros(n),
        vec![Complex64::new(0.0, 0.0); n],
        cvstab::model::DelaySpec::uniform(n, 1.0).unwrap(),
        ActivationSpec::uniform(n, node),
    )
    .unwrap();
    let c = comparison_matrices(&net, &derive_bounds(&net.activations).unwrap()).unwrap();
    assert_eq!(&c.a_bar * &c.f_bar, c.f_bar);
}

#[test]
fn real_network_blocks_decouple() {
    let a = cm(2, &[1.0, -2.0, 0.5, 3.0], &[0.0; 4]);
    let b = cm(2, &[-1.0, 0.25, 2.0, -0.5], &[0.0; 4]);
    let sys = system(&network(
        &[4.0, 4.0],
        a,
        b,
        &[Complex64::new(1.0, 0.0); 2],
        &[1.0; 4],
    ));
    let c = sys.comparison();
    for m in [&c.a_bar, &c.b_bar] {
        for r in 0..2 {
            for k in 0..2 {
                assert_eq!(m[(r, 2 + k)], 0.0);
                assert_eq!(m[(2 + r, k)], 0.0);
            }
        }
    }
}

#[test]
fn random_blocks_match_entrywise_abs_and_swap_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let n = rng.gen_range(1..5);
        let net = random_network(&mut rng, n, 3.0, 2.0);
        let sys = system(&net);
        let c = sys.comparison();
        for j in 0..n {
            for k in 0..n {
                assert_eq!(c.a_bar[(j, k)], net.a.re()[(j, k)].abs());
                assert_eq!(c.a_bar[(j, n + k)], net.a.im()[(j, k)].abs());
                assert_eq!(c.b_bar[(n + j, k)], net.b.im()[(j, k)].abs());
                assert_eq!(c.b_bar[(n + j, n + k)], net.b.re()[(j, k)].abs());
            }
        }
        let swap = |m: &DMatrix<f64>| {
            DMatrix::from_fn(2 * n, 2 * n, |r, s| {
                m[((r + n) % (2 * n), (s + n) % (2 * n))]
            })
        };
        assert_eq!(swap(&c.a_bar), c.a_bar);
        assert_eq!(swap(&c.b_bar), c.b_bar);
        assert!(c
            .a_bar
            .iter()
            .chain(c.b_bar.iter())
            .chain(c.f_bar.iter())
            .chain(c.g_bar.iter())
            .all(|v| *v >= 0.0));
        assert!(sys.sign_gap().delta_bar.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn real_and_complex_right_hand_sides_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.gen_range(1..5);
        let net = random_network(&mut rng, n, 2.0, 3.0);
        let sys = system(&net);
        let z: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let delayed: Vec<Complex64> = (0..n * n)
            .map(|_| Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let expect = net.complex_rhs(&z, &delayed);
        let zr: Vec<f64> = z
            .iter()
            .map(|v| v.re)
            .chain(z.iter().map(|v| v.im))
            .collect();
        let dr: Vec<f64> = delayed.iter().flat_map(|v| [v.re, v.im]).collect();
        let mut out = vec![0.0; 2 * n];
        sys.rhs(&zr, &dr, &mut out);
        for j in 0..n {
            assert!((out[j] - expect[j].re).abs() < 1e-12);
            assert!((out[n + j] - expect[j].im).abs() < 1e-12);
        }
    }
}

#[test]
fn delays_and_bounds() {
    let d = Delay::Periodic {
        base: 3.0,
        amp: -1.0,
        phase: 0.0,
        wave: Wave::Sin,
    };
    assert_eq!(d.upper_bound(), 4.0);
    assert_eq!(d.lower_bound(), 2.0);
    assert!((d.at(std::f64::consts::FRAC_PI_2) - 2.0).abs() < 1e-15);
    let sys = system(&reference::varying_delay().network);
    assert_eq!(row(sys.tau_bar(), 0), [2.0, 3.0]);
    assert_eq!(row(sys.tau_bar(), 1), [4.0, 5.0]);
    assert_eq!(sys.tau_max(), 5.0);
    assert_eq!(sys.tau_bar_expanded()[(3, 1)], 5.0);
}

#[test]
fn json_round_trip() {
    let doc = reference::constant_delay();
    let text = network_to_json(&doc.network, &doc.cases).unwrap();
    let back = parse_network(&text).unwrap();
    assert_eq!(back.network, doc.network);
    assert_eq!(back.cases, doc.cases);
}

#[test]
fn json_rejects_non_square_a() {
    let mut v: serde_json::Value = serde_json::from_str(reference::CONSTANT_DELAY_JSON).unwrap();
    v["A_re"] = serde_json::json!([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    let err = parse_network(&v.to_string()).unwrap_err();
    assert!(
        matches!(&err, Error::Dimension(m) if m.contains("A_re")),
        "{err}"
    );
}

#[test]
fn json_reports_malformed_text_with_position() {
    let err = parse_network("{\n  \"n\": 2,\n  \"d\": [1, 2,\n}").unwrap_err();
    match err {
        Error::Parse(e) => assert!(e.line() >= 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn json_rejects_unknown_fields_and_bad_delays() {
    let mut v: serde_json::Value = serde_json::from_str(reference::CONSTANT_DELAY_JSON).unwrap();
    v["extra"] = serde_json::json!(1);
    assert!(matches!(
        parse_network(&v.to_string()),
        Err(Error::Parse(_))
    ));
    let mut v: serde_json::Value = serde_json::from_str(reference::CONSTANT_DELAY_JSON).unwrap();
    v["delays"][0][0] = serde_json::json!({"base": 1.0, "amp": 2.0, "kind": "sin"});
    assert!(parse_network(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(reference::CONSTANT_DELAY_JSON).unwrap();
    v["d"] = serde_json::json!([19.0, 0.0]);
    assert!(matches!(
        parse_network(&v.to_string()),
        Err(Error::InvalidNetwork(_))
    ));
}

#[test]
fn uniform_node_is_shared() {
    let spec = ActivationSpec::uniform(3, reference::example_activation());
    assert_eq!(spec.len(), 3);
    let _: &NodeActivation = &spec.nodes[2];
}
