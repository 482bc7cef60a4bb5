use higgs_core::complex::{ComplexElement, Dolbeault};
use higgs_core::form::{Bundle, FiberMetric, FormField};
use higgs_core::geometry::TorusGeometry;
use higgs_core::hym::make_flat_abelian;
use higgs_core::linalg;
use higgs_core::C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hermitian(entries: &[f64], r: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); r * r];
    let mut it = entries.iter();
    for i in 0..r {
        m[i * r + i] = C64::new(*it.next().unwrap(), 0.0);
        for j in i + 1..r {
            let z = C64::new(*it.next().unwrap(), *it.next().unwrap());
            m[i * r + j] = z;
            m[j * r + i] = z.conj();
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_and_log_are_inverse(entries in prop::collection::vec(-1.0f64..1.0, 9)) {
        let m = hermitian(&entries, 3);
        let e = linalg::hermitian_function(&m, 3, f64::exp);
        let back = linalg::hermitian_function(&e, 3, f64::ln);
        for (a, b) in m.iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_positive_matrix(entries in prop::collection::vec(-1.0f64..1.0, 9)) {
        let h = linalg::hermitian_function(&hermitian(&entries, 3), 3, f64::exp);
        let inv = linalg::inverse(&h, 3).unwrap();
        let id = linalg::mul(&h, &inv, 3);
        for (a, b) in id.iter().zip(&linalg::identity(3)) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn d_squared_vanishes_on_flat_abelian(re in -1.0f64..1.0, im in -1.0f64..1.0, seed in 0u64..1000) {
        let geom = TorusGeometry::new(&[(1.0, 0.6)], &[C64::new(1.2, 0.0)], 16).unwrap();
        let cfg = make_flat_abelian(&geom, &[C64::new(re, im)]).unwrap();
        let dol = Dolbeault::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = ComplexElement::random(cfg.bundle(), 0, 3, &mut rng).unwrap();
        let ddf = dol.d(&dol.d(&f).unwrap()).unwrap();
        prop_assert!(ddf.norm(cfg.metric()) < 1e-10 * f.norm(cfg.metric()).max(1.0));
    }

    #[test]
    fn star_is_an_involution(seed in 0u64..1000, rank in 1usize..4) {
        let geom = TorusGeometry::new(&[(1.0, 0.8), (0.9, 1.1)], &[C64::new(1.0, 0.0), C64::new(0.2, 0.1), C64::new(0.2, -0.1), C64::new(0.8, 0.0)], 4).unwrap();
        let b = Bundle::trivial(geom, rank);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = FormField::random(&b, 0, 0, 1, &mut rng).unwrap();
        let h = raw.map_points(|_, _, m| {
            let d = linalg::dagger(m, rank);
            let p: Vec<C64> = m.iter().zip(&d).map(|(a, b)| (a + b) * 0.25).collect();
            linalg::hermitian_function(&p, rank, f64::exp)
        });
        let h = FiberMetric::new(h).unwrap();
        let f = FormField::random(&b, 1, 1, 1, &mut rng).unwrap();
        let back = f.star(&h).star(&h);
        prop_assert!(back.minus(&f).unwrap().sup_norm() < 1e-12 * f.sup_norm().max(1.0));
    }

    #[test]
    fn inner_product_is_hermitian(seed in 0u64..1000) {
        let geom = TorusGeometry::new(&[(1.0, 0.7)], &[C64::new(1.3, 0.0)], 8).unwrap();
        let b = Bundle::trivial(geom, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = FiberMetric::identity(&b);
        let x = FormField::random(&b, 0, 1, 2, &mut rng).unwrap();
        let y = FormField::random(&b, 0, 1, 2, &mut rng).unwrap();
        let xy = x.inner(&y, &h).unwrap();
        let yx = y.inner(&x, &h).unwrap();
        prop_assert!((xy - yx.conj()).norm() < 1e-12 * (1.0 + xy.norm()));
        prop_assert!(x.inner(&x, &h).unwrap().re >= 0.0);
    }
}
