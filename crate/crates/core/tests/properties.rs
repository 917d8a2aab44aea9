use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

use nfisac::channel::{synthesize, ChannelModel, ChannelTensor, OfdmGrid};
use nfisac::crb::{fim_from_gradient, mean_signal_gradient, EstimationScenario, Param};
use nfisac::geometry::{ArrayGeometry, ArrayKind, TargetState};
use nfisac::transforms::{Domain, DomainMatrix};

const DOMAINS: [Domain; 4] =
    [Domain::SpatialFrequency, Domain::SpatialDelay, Domain::AngularFrequency, Domain::AngularDelay];

fn complex() -> impl Strategy<Value = Complex64> {
    (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn matrix() -> impl Strategy<Value = DMatrix<Complex64>> {
    (1usize..12, 1usize..12).prop_flat_map(|(n, m)| {
        prop::collection::vec(complex(), n * m).prop_map(move |v| DMatrix::from_vec(n, m, v))
    })
}

fn tensor() -> impl Strategy<Value = ChannelTensor> {
    (1usize..6, 1usize..6, 1usize..4).prop_flat_map(|(n, m, k)| {
        prop::collection::vec(
            (any::<f64>(), any::<f64>()).prop_map(|(re, im)| Complex64::new(re, im)),
            n * m * k,
        )
        .prop_map(move |v| ChannelTensor::from_vec(n, m, k, v).unwrap())
    })
}

fn kind() -> impl Strategy<Value = ArrayKind> {
    prop_oneof![Just(ArrayKind::DenseUla), Just(ArrayKind::SparseUla), Just(ArrayKind::Uca)]
}

fn fim(s: &EstimationScenario) -> DMatrix<f64> {
    fim_from_gradient(&mean_signal_gradient(s).unwrap(), s.noise_variance())
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

const UNKNOWNS: [Param; 6] = [
    Param::Range,
    Param::Angle,
    Param::RadialVelocity,
    Param::TransverseVelocity,
    Param::GainRe,
    Param::GainIm,
];

#[derive(Debug, Clone)]
struct Case {
    carrier: f64,
    spacing: f64,
    m: usize,
    k: usize,
    n: usize,
    target: TargetState,
    snr_db: f64,
}

fn case() -> impl Strategy<Value = Case> {
    (
        20e9..70e9f64,
        1e5..1e7f64,
        1usize..5,
        1usize..4,
        2usize..10,
        (1.0..30.0f64, 0.3..2.8f64, -20.0..20.0f64, -20.0..20.0f64),
        (0.1..2.0f64, -1.0..1.0f64),
        -10.0..20.0f64,
    )
        .prop_map(|(carrier, spacing, m, k, n, (r, th, vr, vt), (gr, gi), snr_db)| Case {
            carrier,
            spacing,
            m,
            k,
            n,
            target: TargetState::moving(r, th, vr, vt).unwrap().with_gain(Complex64::new(gr, gi)),
            snr_db,
        })
}

fn ula_scenario(c: &Case, n: usize, m: usize, k: usize) -> EstimationScenario {
    let grid = OfdmGrid::new(c.carrier, m, c.spacing, k).unwrap();
    let geometry = ArrayGeometry::new(ArrayKind::DenseUla, n, grid.wavelength()).unwrap();
    EstimationScenario::new(grid, geometry, c.target, c.snr_db, ChannelModel::NearField, UNKNOWNS.to_vec()).unwrap()
}

/// `bigger - smaller` is positive semidefinite up to round-off.
fn loewner_dominates(bigger: DMatrix<f64>, smaller: DMatrix<f64>) -> Result<(), TestCaseError> {
    let scale = bigger.trace();
    let low = min_eigenvalue(bigger - smaller);
    prop_assert!(low >= -1e-8 * scale, "min eigenvalue {low} vs trace {scale}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_are_linear(x in matrix(), a in complex(), seed in any::<u64>()) {
        let y = x.map(|z| z * Complex64::new((seed % 7) as f64 - 3.0, 1.0));
        for d in DOMAINS {
            let lhs = DomainMatrix::spatial_frequency(&x * a + &y).into_domain(d).data;
            let rhs = DomainMatrix::spatial_frequency(x.clone()).into_domain(d).data * a
                + DomainMatrix::spatial_frequency(y.clone()).into_domain(d).data;
            let scale = lhs.norm().max(1.0);
            prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn transforms_preserve_norm(x in matrix()) {
        let norm = x.norm();
        for d in DOMAINS {
            let t = DomainMatrix::spatial_frequency(x.clone()).into_domain(d);
            prop_assert!((t.frobenius_norm() - norm).abs() <= 1e-10 * norm.max(1.0));
        }
    }

    #[test]
    fn unit_gain_channels_have_unit_modulus(c in case(), kind in kind(), far in any::<bool>()) {
        let grid = OfdmGrid::new(c.carrier, c.m, c.spacing, c.k).unwrap();
        let geometry = ArrayGeometry::new(kind, c.n, grid.wavelength()).unwrap();
        let model = if far && kind.is_linear() { ChannelModel::FarField } else { ChannelModel::NearField };
        let t = c.target.with_gain(Complex64::new(1.0, 0.0));
        let h = synthesize(model, &grid, &geometry, &t).unwrap();
        for z in h.as_slice() {
            prop_assert!((z.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn fim_is_symmetric_psd(c in case(), kind in kind()) {
        let grid = OfdmGrid::new(c.carrier, c.m, c.spacing, c.k).unwrap();
        let geometry = ArrayGeometry::new(kind, c.n, grid.wavelength()).unwrap();
        let s = EstimationScenario::new(grid, geometry, c.target, c.snr_db, ChannelModel::NearField, UNKNOWNS.to_vec())
            .unwrap();
        let j = fim(&s);
        let scale = j.trace();
        prop_assert!((&j - j.transpose()).norm() <= 1e-12 * scale);
        prop_assert!(min_eigenvalue(j) >= -1e-8 * scale);
    }

    #[test]
    fn more_antennas_never_lose_information(c in case()) {
        loewner_dominates(fim(&ula_scenario(&c, c.n + 2, c.m, c.k)), fim(&ula_scenario(&c, c.n, c.m, c.k)))?;
    }

    #[test]
    fn more_subcarriers_never_lose_information(c in case()) {
        loewner_dominates(fim(&ula_scenario(&c, c.n, c.m + 2, c.k)), fim(&ula_scenario(&c, c.n, c.m, c.k)))?;
    }

    #[test]
    fn more_symbols_never_lose_information(c in case()) {
        loewner_dominates(fim(&ula_scenario(&c, c.n, c.m, c.k + 1)), fim(&ula_scenario(&c, c.n, c.m, c.k)))?;
    }

    #[test]
    fn binary_round_trip(t in tensor()) {
        let back = ChannelTensor::from_binary(&t.to_binary()).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        for (a, b) in back.as_slice().iter().zip(t.as_slice()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn csv_round_trip(t in tensor().prop_filter("finite", |t| t.as_slice().iter().all(|z| z.re.is_finite() && z.im.is_finite()))) {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ChannelTensor::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, t);
    }
}
