use ellipsoid_lab::dpp::task_rng;
use ellipsoid_lab::ellipsoid::{sample_unit_ball, AngleProfile};
use ellipsoid_lab::matcore::{principal_sqrt, random_in_class, vec};
use ellipsoid_lab::{CoefficientField, EllipticityClass, Ellipsoid, SymMatrix};
use rand::Rng;

fn unit_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Some(u) = vec::normalized(&v) {
            return u;
        }
    }
}

#[test]
fn sqrt_maps_sphere_between_radii() {
    let mut rng = task_rng(200, 0);
    for i in 0..1000 {
        let n = 2 + i % 3;
        let cls = EllipticityClass::new(n, 0.5, 4.0).unwrap();
        let a = random_in_class(&cls, i % 2 == 0, &mut rng);
        let s = principal_sqrt(&a).unwrap();
        for _ in 0..20 {
            let u = unit_vector(n, &mut rng);
            let len = vec::norm(&s.mul_vec(&u));
            assert!(len >= 0.5f64.sqrt() - 1e-12 && len <= 2.0 + 1e-12, "{len}");
        }
    }
}

fn shipped_fields() -> Vec<CoefficientField<f64>> {
    let cls2 = EllipticityClass::new(2, 1.0, 2.5).unwrap();
    let cls3 = EllipticityClass::new(3, 1.0, 2.5).unwrap();
    vec![
        CoefficientField::constant(cls2, SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.5]]).unwrap()).unwrap(),
        CoefficientField::checkerboard_axes(cls2, 0.3).unwrap(),
        CoefficientField::checkerboard_axes(cls3, 0.2).unwrap(),
        CoefficientField::rotating(cls2, vec![1.0, 2.5], AngleProfile::Linear { omega: vec![2.0, -1.0] }).unwrap(),
        CoefficientField::rotating(cls2, vec![1.0, 2.5], AngleProfile::Polar { winding: 1.0 }).unwrap(),
    ]
}

#[test]
fn determinant_is_constant_across_fields() {
    let mut rng = task_rng(201, 0);
    for f in shipped_fields() {
        let n = f.dim();
        let target = f.det_target();
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = f.evaluate(&x).unwrap();
            assert!((a.determinant() - target).abs() <= 1e-9 * target, "{:?}", f.kind());
        }
    }
}

#[test]
fn midpoint_ball_lies_in_both_ellipsoids() {
    let mut rng = task_rng(202, 0);
    let eps = 0.2;
    for f in shipped_fields().into_iter().filter(|f| f.dim() == 2) {
        let lambda = f.class().lambda;
        for _ in 0..20 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let d = unit_vector(2, &mut rng);
            let t = rng.random_range(0.0..0.5) * lambda.sqrt() * eps;
            let z = [x[0] + t * d[0], x[1] + t * d[1]];
            let ex = Ellipsoid::from_coefficient(x.to_vec(), &f.evaluate(&x).unwrap(), eps).unwrap();
            let ez = Ellipsoid::from_coefficient(z.to_vec(), &f.evaluate(&z).unwrap(), eps).unwrap();
            let rad = lambda.sqrt() * eps / 4.0;
            for _ in 0..1000 {
                let u: Vec<f64> = sample_unit_ball(2, &mut rng);
                let p = [(x[0] + z[0]) / 2.0 + rad * u[0], (x[1] + z[1]) / 2.0 + rad * u[1]];
                assert!(ex.contains(&p) && ez.contains(&p));
            }
        }
    }
}
