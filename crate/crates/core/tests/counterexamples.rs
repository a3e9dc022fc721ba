use ellipsoid_lab::counterexamples::{
    audit_measure_preserving, counterexample_2d, halfslab_volume_fraction, planar_couplings, planar_pair,
    projection_split, CouplingMap, AUDIT_SAMPLES,
};
use ellipsoid_lab::dpp::task_rng;
use ellipsoid_lab::matcore::{haar_orthogonal, random_spd, vec};
use ellipsoid_lab::{Ellipsoid, Error, OrthoMatrix, SymMatrix};
use rand::Rng;

#[test]
fn halfslab_fraction_matches_sampling() {
    let mut rng = task_rng(600, 0);
    let m = 40_000;
    for t in 0..20 {
        let n = 2 + t % 2;
        let shape: SymMatrix<f64> = random_spd(n, 0.2, 5.0, &mut rng);
        let center: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = Ellipsoid::new(center.clone(), shape).unwrap();
        let axis = t % n;
        let reach = vec::norm(e.shape().row(axis));
        let threshold = rng.random_range(0.05..0.95) * reach;
        let want = halfslab_volume_fraction(&e, axis, threshold).unwrap();
        let hits = (0..m)
            .filter(|_| (e.sample(&mut rng)[axis] - center[axis]).abs() >= threshold)
            .count();
        let p = hits as f64 / m as f64;
        let sigma = (want * (1.0 - want) / m as f64).sqrt();
        assert!((p - want).abs() <= 3.0 * sigma + 1e-3, "case {t}: {p} vs {want}");
    }
}

#[test]
fn parallel_part_respects_width_bound() {
    let (e1, e2) = planar_pair();
    let mut rng = task_rng(601, 0);
    for (id, q) in planar_couplings(8) {
        let phi = CouplingMap::linear(&e1, &e2, &q).unwrap();
        let split = projection_split(&e1, &e2, &phi, &[1.0, 0.0], 100_000, &mut rng).unwrap();
        let bound = 1.21 + 3.0 * split.parallel.stderr;
        assert!(split.parallel.mean <= bound, "{id}: {}", split.parallel.mean);
        assert!(split.violated(), "{id}");
    }
}

#[test]
fn linear_couplings_pass_the_audit() {
    let mut rng = task_rng(602, 0);
    let (p1, p2) = planar_pair();
    let spatial = (
        Ellipsoid::new(vec![0.5, 0.0, -1.0], SymMatrix::diag(&[2.0, 0.5, 1.0])).unwrap(),
        Ellipsoid::new(vec![0.0; 3], SymMatrix::diag(&[1.0, 1.0, 1.0])).unwrap(),
    );
    for (e1, e2) in [(p1, p2), spatial] {
        for _ in 0..3 {
            let q: OrthoMatrix<f64> = haar_orthogonal(e1.dim(), &mut rng);
            let phi = CouplingMap::linear(&e1, &e2, &q).unwrap();
            let audit = audit_measure_preserving(&e1, &e2, &phi, AUDIT_SAMPLES, &mut rng).unwrap();
            assert!(audit.passes && audit.escaped == 0, "{audit:?}");
        }
    }
}

#[test]
fn radial_squeeze_is_rejected() {
    let (e1, e2) = planar_pair();
    let mut rng = task_rng(603, 0);
    let (a, b) = (e1.clone(), e2.clone());
    // a bijection E₁ → E₂ that concentrates mass near the centre
    let phi = CouplingMap::custom(move |y: &[f64]| {
        let u = a.to_ball(y);
        let r = vec::norm(&u);
        b.from_ball(&[u[0] * r, u[1] * r])
    });
    let audit = audit_measure_preserving(&e1, &e2, &phi, AUDIT_SAMPLES, &mut rng).unwrap();
    assert!(!audit.passes);
    let err = projection_split(&e1, &e2, &phi, &[1.0, 0.0], 100_000, &mut rng).unwrap_err();
    assert!(matches!(err, Error::NotMeasurePreserving { .. }));
}

#[test]
fn unequal_volumes_are_refused() {
    let e1 = Ellipsoid::new(vec![0.0; 2], SymMatrix::diag(&[1.0, 2.0])).unwrap();
    let e2 = Ellipsoid::unit_ball(2);
    assert!(CouplingMap::linear(&e1, &e2, &OrthoMatrix::identity(2)).is_err());
}

#[test]
fn planar_margin_on_coarse_grid() {
    let mut rng = task_rng(604, 0);
    let rep = counterexample_2d(1_000_000, 24, &mut rng).unwrap();
    assert_eq!(rep.records.len(), 48);
    assert!(rep.all_violated);
    assert!(rep.max_parallel <= rep.parallel_bound);
    assert!(rep.min_orthogonal - rep.max_parallel >= 4.0, "{} {}", rep.min_orthogonal, rep.max_parallel);
}
