use ngev_core::{BprModel, Network};
use proptest::prelude::*;

fn model(cbar: f64, cap: f64) -> BprModel {
    BprModel::new(&Network::from_links(2, &[(0, 1, cbar)], cap).unwrap())
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

proptest! {
    #[test]
    fn inverse_round_trip(cbar in 0.1f64..10.0, cap in 1.0f64..1e4, frac in 0.0f64..3.0) {
        let m = model(cbar, cap);
        let x = frac * cap;
        let c = m.cost(&[x]).unwrap();
        let back = m.inverse_cost(&c).unwrap()[0];
        prop_assert!((back - x).abs() <= 1e-9 * cap.max(x));
    }

    #[test]
    fn integrals_match_quadrature(cbar in 0.1f64..10.0, cap in 1.0f64..1e3, frac in 0.0f64..3.0) {
        let m = model(cbar, cap);
        let x = frac * cap;
        let quad = simpson(|v| m.cost(&[v]).unwrap()[0], 0.0, x, 2000);
        let exact = m.cost_integral(&[x]).unwrap();
        prop_assert!((quad - exact).abs() <= 1e-9 * exact.max(1.0));

        let c = m.cost(&[x]).unwrap()[0];
        let quad = simpson(|s| m.inverse_cost(&[s.max(cbar)]).unwrap()[0], cbar, c, 20000);
        let exact = m.conjugate_integral(&[c]).unwrap();
        prop_assert!((quad - exact).abs() <= 1e-4 * exact.max(1e-6));
    }

    #[test]
    fn fenchel_young(cbar in 0.1f64..10.0, cap in 1.0f64..1e3, xf in 0.0f64..3.0, cf in 0.0f64..20.0) {
        let m = model(cbar, cap);
        let x = xf * cap;
        let c = cbar * (1.0 + cf);
        let lhs = m.cost_integral(&[x]).unwrap() + m.conjugate_integral(&[c]).unwrap();
        prop_assert!(lhs >= c * x - 1e-9 * lhs.abs().max(1.0));
        let cx = m.cost(&[x]).unwrap()[0];
        let tight = m.cost_integral(&[x]).unwrap() + m.conjugate_integral(&[cx]).unwrap();
        prop_assert!((tight - cx * x).abs() <= 1e-9 * tight.abs().max(1.0));
    }

    #[test]
    fn conjugate_derivative_is_the_inverse(cbar in 0.1f64..10.0, cap in 1.0f64..1e3, cf in 0.01f64..20.0) {
        let m = model(cbar, cap);
        let c = cbar * (1.0 + cf);
        let h = 1e-6 * c;
        let fd = (m.conjugate_integral(&[c + h]).unwrap() - m.conjugate_integral(&[c - h]).unwrap()) / (2.0 * h);
        let inv = m.inverse_cost(&[c]).unwrap()[0];
        prop_assert!((fd - inv).abs() <= 1e-6 * inv.max(1.0));
    }

    #[test]
    fn cost_and_inverse_are_increasing(cbar in 0.1f64..10.0, cap in 1.0f64..1e3, a in 0.0f64..5.0, b in 0.0f64..5.0) {
        prop_assume!(a < b);
        let m = model(cbar, cap);
        let (ca, cb) = (m.cost(&[a * cap]).unwrap()[0], m.cost(&[b * cap]).unwrap()[0]);
        prop_assert!(ca < cb);
        let (ia, ib) = (
            m.inverse_cost(&[cbar * (1.0 + a)]).unwrap()[0],
            m.inverse_cost(&[cbar * (1.0 + b)]).unwrap()[0],
        );
        prop_assert!(ia < ib);
    }
}

#[test]
fn free_flow_values() {
    let m = model(2.0, 100.0);
    assert_eq!(m.cost(&[0.0]).unwrap(), vec![2.0]);
    assert_eq!(m.cost(&[100.0]).unwrap(), vec![4.0]);
    assert_eq!(m.inverse_cost(&[2.0]).unwrap(), vec![0.0]);
    assert_eq!(m.conjugate_integral(&[2.0]).unwrap(), 0.0);
    assert_eq!(m.cost_integral(&[0.0]).unwrap(), 0.0);
}

#[test]
fn domain_errors() {
    let m = model(2.0, 100.0);
    assert_eq!(m.inverse_cost(&[1.9]).unwrap_err().category(), "domain");
    assert_eq!(m.conjugate_integral(&[1.0]).unwrap_err().category(), "domain");
    assert_eq!(m.cost(&[-1.0]).unwrap_err().category(), "validation");
    assert_eq!(m.cost(&[1.0, 2.0]).unwrap_err().category(), "validation");
}
