//! Analytic gradients and Hessian blocks against central finite differences of
//! the barrier value (for gradients) and of the analytic gradient (for Hessians).

mod common;

use common::*;
use secrecy_core::rng::NormalSource;
use secrecy_core::BarrierObjective;

#[test]
fn example_channel_derivatives() {
    let mut g = NormalSource::new(45);
    let (eg, eh) = check_channel(&example_channel(), &mut g);
    assert!(eg <= 1e-5, "gradient rel err {eg:.3e}");
    assert!(eh <= 1e-4, "hessian rel err {eh:.3e}");
}

#[test]
fn random_channel_derivatives() {
    let mut g = NormalSource::new(2024);
    for (m, n1, n2) in [(2, 2, 2), (3, 2, 1), (1, 3, 2), (4, 3, 3), (3, 1, 4)] {
        let ch = random_channel(&mut g, m, n1, n2);
        let (eg, eh) = check_channel(&ch, &mut g);
        assert!(eg <= 1e-5, "({m},{n1},{n2}) gradient rel err {eg:.3e}");
        assert!(eh <= 1e-4, "({m},{n1},{n2}) hessian rel err {eh:.3e}");
    }
}

#[test]
fn per_antenna_barrier_derivatives() {
    use secrecy_core::PowerCaps;
    let mut g = NormalSource::new(77);
    let ch = random_channel(&mut g, 3, 2, 2);
    let caps = PowerCaps { per_antenna: vec![4.0, 5.0, 6.0], total: Some(9.0) };
    let obj = BarrierObjective::with_caps(&ch, 3.0, caps).unwrap();
    for _ in 0..10 {
        let r = random_r(&mut g, 3, 6.0);
        let k21 = random_k21(&mut g, 2, 2, 0.5);
        let (eg, eh) = fd_errors(&obj, &r, &k21);
        assert!(eg <= 1e-5 && eh <= 1e-4, "{eg:.3e} {eh:.3e}");
    }
}
