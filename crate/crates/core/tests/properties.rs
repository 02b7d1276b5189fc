use fedtabgan_core::data::{binarize, encode_pm1, PatientMatrix};
use fedtabgan_core::federation::{epoch_budget, partition, partition_with, FederationPlan};
use fedtabgan_core::gan::{GanConfig, GanModel};
use fedtabgan_core::wire::WeightsBundle;
use proptest::prelude::*;

fn matrix_strategy() -> impl Strategy<Value = PatientMatrix> {
    (0usize..20, 1usize..12).prop_flat_map(|(rows, cols)| {
        prop::collection::vec(0u8..=1, rows * cols).prop_map(move |bits| PatientMatrix::new(rows, cols, bits).unwrap())
    })
}

proptest! {
    #[test]
    fn binarize_inverts_encoding(m in matrix_strategy()) {
        let encoded = encode_pm1(&m);
        prop_assert!(encoded.as_slice().iter().all(|v| *v == 1.0 || *v == -1.0));
        prop_assert_eq!(binarize(&encoded, 0.0), m);
    }

    #[test]
    fn budgets_split_the_total(total in 0u64..1_000_000, k in 1usize..40) {
        let b = epoch_budget(total, k).unwrap();
        prop_assert_eq!(b.len(), k);
        prop_assert_eq!(b.iter().sum::<u64>(), total);
        prop_assert!(b.iter().max().unwrap() - b.iter().min().unwrap() <= 1);
    }

    #[test]
    fn round_budgets_conserve_each_node(total in 0u64..100_000, k in 1usize..8, rounds in 1u32..6) {
        let plan = FederationPlan::new(k, total, rounds, 0).unwrap();
        for node in 0..k {
            let sum: u64 = (0..rounds).map(|r| plan.round_budgets(r)[node]).sum();
            prop_assert_eq!(sum, plan.epochs_per_node[node]);
        }
    }

    #[test]
    fn partition_is_a_disjoint_cover(rows in 1usize..300, k in 1usize..8, seed in any::<u64>(), last in any::<bool>()) {
        prop_assume!(rows >= k);
        let bits: Vec<u8> = (0..rows).flat_map(|r| (0..10).map(move |c| ((r >> c) & 1) as u8)).collect();
        let data = PatientMatrix::new(rows, 10, bits).unwrap();
        let p = partition_with(&data, k, seed, last).unwrap();
        let mut seen: Vec<usize> = p.silos.iter().flat_map(|s| s.iter_rows().map(|r| {
            r.iter().enumerate().map(|(c, b)| usize::from(*b) << c).sum::<usize>()
        })).collect();
        seen.sort_unstable();
        let expected = if last { rows } else { rows - rows % k };
        prop_assert_eq!(seen.len(), expected);
        seen.dedup();
        prop_assert_eq!(seen.len(), expected);
        let sizes: Vec<usize> = p.silos.iter().map(PatientMatrix::rows).collect();
        prop_assert!(sizes[..k - 1].iter().all(|s| *s == rows / k));
        prop_assert_eq!(p.dropped, rows - expected);
        prop_assert_eq!(partition(&data, k, seed).unwrap().silos, partition_with(&data, k, seed, false).unwrap().silos);
    }

    #[test]
    fn fresh_models_survive_the_exchange_format(seed in any::<u64>()) {
        let mut cfg = GanConfig::desk(5).with_seed(seed);
        cfg.noise_dim = 3;
        cfg.g_hidden = vec![4];
        cfg.d_hidden = vec![4];
        let model = GanModel::new(&cfg).unwrap();
        let bundle = WeightsBundle::from_model(&model);
        let mut other = GanModel::new(&cfg.clone().with_seed(seed.wrapping_add(1))).unwrap();
        bundle.apply_to(&mut other).unwrap();
        prop_assert!(other.same_weights(&model));
        prop_assert_eq!(WeightsBundle::decode(&bundle.encode()).unwrap(), bundle);
    }
}
