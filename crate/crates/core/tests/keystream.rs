use rand::Rng;
use y00_core::attacks::{intercept, running_key_posteriors};
use y00_core::constellation::BasisIndex;
use y00_core::endpoints::SessionConfig;
use y00_core::gf2::{BitVector, Gf2Solver};
use y00_core::keystream::{
    maximal_period, EncSpec, KeyedMapperSpec, KeystreamGenerator, LfsrSpec, LinearForms, PolynomialTable, RunningKey,
};
use y00_core::rng::stream;
use y00_core::stats::chi_square_gof;
use y00_core::{ConstellationSpec, DsrPolicy, NoiseModel};

#[test]
fn every_table_entry_up_to_degree_20_has_maximal_period() {
    let table = PolynomialTable::builtin();
    let mut checked = 0;
    for d in table.degrees().filter(|&d| d <= 20) {
        for mask in table.entries(d) {
            assert!(maximal_period(d, mask).unwrap(), "degree {d} mask {}", mask.to_hex());
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn non_primitive_masks_are_caught() {
    // x^4 + x^2 + 1 = (x^2 + x + 1)^2
    let mask = BitVector::from_u64(4, 0x5).unwrap();
    assert!(!maximal_period(4, &mask).unwrap());
}

/// Noiseless known-plaintext: every qumode reveals its segment, and the
/// seed follows from `degree` independent linear equations.
#[test]
fn noiseless_kpa_recovers_the_seed_by_linear_algebra() {
    let spec = ConstellationSpec::new(64, 900.0).unwrap();
    for (d, mask, seed) in [(16, 0x100b, 0xbeef), (23, 0x21, 0x5a5a5a), (31, 0x9, 0x1234_5678)] {
        let lfsr = LfsrSpec::from_u64(d, mask, seed).unwrap();
        let cfg = SessionConfig::new(spec, EncSpec::Lfsr(lfsr.clone())).unwrap().with_seed(d as u64);
        let n = d.div_ceil(6) + 2;
        let icp = intercept(&cfg, &NoiseModel::Noiseless, n).unwrap();
        let soft = running_key_posteriors(&icp.observations, &icp.scenario(true), &spec, &NoiseModel::Noiseless, DsrPolicy::Off).unwrap();

        let mut solver = Gf2Solver::new(d);
        let mut forms = LinearForms::new(&lfsr);
        for i in 0..n {
            let k = (0..64).find(|&k| soft.posterior(i, k) > 0.5).unwrap();
            assert_eq!(BasisIndex(k), icp.bases[i]);
            for j in (0..6).rev() {
                solver.add(forms.next().unwrap(), k >> j & 1 == 1);
            }
        }
        assert!(solver.is_full_rank());
        assert_eq!(&solver.solve().unwrap(), lfsr.seed(), "degree {d}");
    }
}

#[test]
fn fewer_bits_than_the_degree_leave_the_seed_undetermined() {
    let lfsr = LfsrSpec::from_u64(31, 0x9, 77).unwrap();
    let mut solver = Gf2Solver::new(31);
    for f in LinearForms::new(&lfsr).take(30) {
        solver.add(f, false);
    }
    assert!(!solver.is_full_rank());
}

/// A keystream that only ever emits zeros.
struct Zeros(u64);

impl KeystreamGenerator for Zeros {
    fn next_bit(&mut self) -> bool {
        self.0 += 1;
        false
    }
    fn reset(&mut self) {
        self.0 = 0;
    }
    fn bits_emitted(&self) -> u64 {
        self.0
    }
    fn descriptor(&self) -> String {
        "zeros".into()
    }
}

#[test]
fn keyed_mapper_is_a_latin_square() {
    for m in [2u32, 4, 8, 16] {
        for k in 0..m {
            let mut seen = vec![false; m as usize];
            for a in 0..m {
                let b = y00_core::keystream::keyed_mapper_apply(BasisIndex(k), BasisIndex(a), m);
                assert!(!seen[b.0 as usize]);
                seen[b.0 as usize] = true;
            }
        }
    }
}

#[test]
fn keyed_mapper_uniformizes_a_degenerate_main_keystream() {
    for m in [2u32, 4, 8, 16] {
        let spec = ConstellationSpec::new(m, 100.0).unwrap();
        let aux = KeyedMapperSpec { aux_key: [0x42; 32] }.build();
        let mut key = RunningKey::from_generators(Box::new(Zeros(0)), Some(aux), &spec);
        let mut h = vec![0u64; m as usize];
        for _ in 0..40_000 {
            h[key.next_basis().0 as usize] += 1;
        }
        let t = chi_square_gof(&h, &vec![1.0; m as usize]);
        assert!(t.p_value > 1e-4, "M = {m}: {t:?}");
        let bits = spec.key_bits() as u64 * 40_000;
        assert_eq!(key.bits_consumed(), (bits, bits));
    }
}

#[test]
fn keyed_polynomial_choice_is_a_function_of_the_key() {
    let table = PolynomialTable::builtin();
    let mut rng = stream(3, &[1]);
    let seed = BitVector::from_u64(17, 0x1_2345).unwrap();
    let mut picked = std::collections::BTreeSet::new();
    for _ in 0..64 {
        let key = BitVector::from_u64(64, rng.random()).unwrap();
        let a = EncSpec::keyed_poly(seed.clone(), &key, &table).unwrap();
        let b = EncSpec::keyed_poly(seed.clone(), &key, &table).unwrap();
        assert_eq!(a, b);
        if let EncSpec::KeyedPolyLfsr { table_entry, .. } = a {
            picked.insert(table_entry);
        }
    }
    assert!(picked.len() > 1 || table.entries(17).len() == 1);
}
