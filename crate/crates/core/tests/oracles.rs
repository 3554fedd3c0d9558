//! Library results checked against independent brute-force references.

mod common;

use common::*;
use gmm_diag::kmeans::{
    global_diag_cov, kmeans_iterate, means_from_indices, run_kmeans_from, seed_indices, KmState,
};
use gmm_diag::{
    accumulate_chunk, learn, log_add, reduce_and_update, responsibilities, AssignMode, Dataset,
    DistKind, DistMode, FitConfig, GmmModel, SeedMode, SynthSpec, Workers,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn log_add_matches_extended_precision() {
    // 40-digit reference: ln(e^1000 + e^999)
    let reference = 1000.313_261_687_518_222_834_f64;
    let v = log_add(1000.0, 999.0);
    assert!(rel_close(v, reference, 1e-15), "{v}");
    assert!((1000f64).exp().is_infinite());
}

#[test]
fn log_gauss_matches_linear_domain() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let mean: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let var: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..2.0)).collect();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = GmmModel::from_params(&[mean.clone()], &[var.clone()], &[1.0]).unwrap();
        let got = m.log_gauss(&x, 0).unwrap();
        let want = lin_gauss(&x, &mean, &var).ln();
        assert!(rel_close(got, want, 1e-12), "{got} vs {want}");
    }
}

#[test]
fn log_p_matches_linear_domain() {
    for seed in 0..30 {
        let (data, model) = random_instance(seed, 20, 2, 3);
        for x in data.samples() {
            let got = model.log_p(x).unwrap();
            let want = lin_mix(x, &model).ln();
            assert!(rel_close(got, want, 1e-12), "{got} vs {want}");
        }
    }
}

#[test]
fn avg_log_p_matches_serial_sum() {
    let spec = SynthSpec::two_cluster();
    let (data, _) = spec.sample(10_000, 5).unwrap();
    let model = spec.to_model().unwrap();
    let serial: f64 = data.samples().map(|x| lin_mix(x, &model).ln()).sum::<f64>() / 10_000.0;
    let got = model.avg_log_p(&data).unwrap();
    assert!(rel_close(got, serial, 1e-10), "{got} vs {serial}");
}

#[test]
fn log_p_stays_finite_far_from_means() {
    let m = GmmModel::from_params(&[[0.0, 0.0], [1.0, 1.0]], &[[1.0, 4.0], [0.25, 1.0]], &[0.5, 0.5]).unwrap();
    for dist in [1e2, 1e4, 1e6] {
        let x = [dist * 2.0, -dist * 2.0];
        assert!(m.log_p(&x).unwrap().is_finite());
        assert_eq!(lin_mix(&x, &m), 0.0);
    }
}

#[test]
fn batch_equals_scalar() {
    let (data, model) = random_instance(9, 3000, 4, 5);
    let batch = model.log_p_batch_with(&data, &Workers::new(3).unwrap()).unwrap();
    for (i, x) in data.samples().enumerate() {
        assert_eq!(batch[i].to_bits(), model.log_p(x).unwrap().to_bits());
    }
    let comp = model.log_p_comp_batch(&data, 2).unwrap();
    assert_eq!(comp[17], model.log_gauss(data.sample(17), 2).unwrap());
}

#[test]
fn global_cov_matches_welford() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let flat: Vec<f64> = (0..4000)
        .map(|i| rng.random_range(-1.0..1.0) * (1 + i % 4) as f64 + (i % 4) as f64 * 10.0)
        .collect();
    let data = Dataset::from_flat(flat, 4).unwrap();
    let got = global_diag_cov(&data).unwrap();
    for (g, w) in got.iter().zip(welford_var(&data)) {
        assert!(rel_close(*g, w, 1e-12), "{g} vs {w}");
    }
}

fn three_clusters(seed: u64) -> (Dataset, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = [[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]];
    let mut flat = Vec::new();
    let mut labels = Vec::new();
    for i in 0..300 {
        let c = i % 3;
        flat.push(centres[c][0] + rng.random_range(-1.0..1.0));
        flat.push(centres[c][1] + rng.random_range(-1.0..1.0));
        labels.push(c);
    }
    (Dataset::from_flat(flat, 2).unwrap(), labels)
}

#[test]
fn random_spread_hits_every_cluster() {
    let (data, labels) = three_clusters(0);
    let hits = (0..100)
        .filter(|&s| {
            let idx = seed_indices(&data, 3, SeedMode::RandomSpread, &DistMode::EuclSq, s).unwrap();
            let mut covered: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            covered.sort_unstable();
            covered == [0, 1, 2]
        })
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn static_spread_matches_brute_force() {
    let (data, _) = three_clusters(1);
    let idx = seed_indices(&data, 3, SeedMode::StaticSpread, &DistMode::EuclSq, 0).unwrap();
    // brute force: repeatedly take the sample farthest from all chosen ones
    let mut chosen = vec![0usize];
    while chosen.len() < 3 {
        let mut best = (0, -1.0);
        for i in 0..data.n_samples() {
            if chosen.contains(&i) {
                continue;
            }
            let d = chosen
                .iter()
                .map(|&c| DistMode::EuclSq.dist(data.sample(i), data.sample(c)).unwrap())
                .fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (i, d);
            }
        }
        chosen.push(best.0);
    }
    assert_eq!(idx, chosen);
}

#[test]
fn kmeans_iteration_thread_invariant() {
    for n in [500, 20_000] {
        let (data, _) = random_instance(4, n, 3, 4);
        let means = means_from_indices(&data, &[0, 1, 2, 3]);
        let state = KmState::new(means, 3, n).unwrap();
        let dist = DistMode::for_data(DistKind::Maha, &data).unwrap();
        let reference = kmeans_iterate(&data, &state, &dist, &Workers::new(1).unwrap()).unwrap();
        for t in [2, 4] {
            let got = kmeans_iterate(&data, &state, &dist, &Workers::new(t).unwrap()).unwrap();
            assert_eq!(got.0, reference.0);
            assert_eq!(got.1.to_bits(), reference.1.to_bits());
        }
        // the update equals the per-cluster average computed naively
        let (next, _) = reference;
        for g in 0..4 {
            let members: Vec<&[f64]> =
                data.samples().zip(&next.assignment).filter(|(_, &a)| a == g).map(|(x, _)| x).collect();
            assert_eq!(members.len(), next.counts[g]);
            for j in 0..3 {
                let avg = members.iter().map(|x| x[j]).sum::<f64>() / members.len() as f64;
                assert!(rel_close(avg, next.mean(g)[j], 1e-12));
            }
        }
    }
}

#[test]
fn kmeans_objective_non_increasing() {
    for seed in 0..10 {
        let (data, _) = random_instance(seed, 2000, 3, 4);
        let dist = DistMode::for_data(DistKind::Eucl, &data).unwrap();
        let idx = seed_indices(&data, 4, SeedMode::RandomSubset, &dist, seed).unwrap();
        let r = run_kmeans_from(&data, means_from_indices(&data, &idx), &dist, 15, &Workers::new(2).unwrap(), |_, _| {})
            .unwrap();
        if !r.resurrections.is_empty() {
            continue;
        }
        for w in r.objective.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", r.objective);
        }
        assert_eq!(r.state.counts.iter().sum::<usize>(), 2000);
    }
}

#[test]
fn maha_scaling_leaves_assignments_unchanged() {
    let (data, _) = random_instance(12, 1000, 3, 3);
    let scales = [1000.0, 0.01, 7.0];
    let shifts = [5.0, -2.0, 0.0];
    let scaled: Vec<f64> = data
        .as_flat()
        .chunks(3)
        .flat_map(|x| (0..3).map(move |j| x[j] * scales[j] + shifts[j]))
        .collect();
    let scaled = Dataset::from_flat(scaled, 3).unwrap();
    let seeds = [0, 10, 20];
    let a_dist = DistMode::for_data(DistKind::Maha, &data).unwrap();
    let b_dist = DistMode::for_data(DistKind::Maha, &scaled).unwrap();
    let w = Workers::new(1).unwrap();
    let a = run_kmeans_from(&data, means_from_indices(&data, &seeds), &a_dist, 10, &w, |_, _| {}).unwrap();
    let b = run_kmeans_from(&scaled, means_from_indices(&scaled, &seeds), &b_dist, 10, &w, |_, _| {}).unwrap();
    assert_eq!(a.state.assignment, b.state.assignment);
}

#[test]
fn responsibilities_match_linear_domain() {
    for seed in 0..20 {
        let (data, model) = random_instance(seed, 30, 2, 3);
        for x in data.samples() {
            let got = responsibilities(x, &model).unwrap();
            let want = lin_resp(x, &model);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10);
            }
            assert!((got.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn reduce_matches_direct_update() {
    for seed in 0..10 {
        let (data, model) = random_instance(100 + seed, 200, 3, 2);
        let acc = accumulate_chunk(&data, 0..200, &model).unwrap();
        let next = reduce_and_update(&[acc], &model, 1e-10, 200).unwrap();
        let (hefts, means, vars) = direct_em_update(&data, &model);
        for g in 0..2 {
            assert!(rel_close(next.hefts()[g], hefts[g], 1e-12));
            for j in 0..3 {
                assert!(rel_close(next.mean(g)[j], means[g][j], 1e-12));
                assert!(rel_close(next.dcov(g)[j], vars[g][j], 1e-9));
            }
        }
    }
}

#[test]
fn generate_matches_moments() {
    let m = GmmModel::from_params(&[[3.0]], &[[4.0]], &[1.0]).unwrap();
    let d = m.generate(100_000, 17).unwrap();
    let n = d.n_samples() as f64;
    let mean = d.as_flat().iter().sum::<f64>() / n;
    let var = d.as_flat().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    assert!((mean - 3.0).abs() < 3.0 * 2.0 / n.sqrt(), "{mean}");
    assert!((var - 4.0).abs() < 0.05 * 4.0, "{var}");

    let m = GmmModel::from_params(&[[0.0], [10.0]], &[[1.0], [1.0]], &[0.25, 0.75]).unwrap();
    let (_, labels) = m.generate_labelled(100_000, 18).unwrap();
    let f0 = labels.iter().filter(|&&g| g == 0).count() as f64 / 100_000.0;
    assert!((f0 - 0.25).abs() < 0.01, "{f0}");
}

#[test]
fn generate_then_learn_recovers_model() {
    let truth = GmmModel::from_params(&[[-4.0, 0.0], [4.0, 2.0]], &[[1.0, 0.5], [2.0, 1.0]], &[0.3, 0.7]).unwrap();
    let data = truth.generate(50_000, 99).unwrap();
    let cfg = FitConfig {
        em_iter: 20,
        rng_seed: 4,
        ..FitConfig::new(2)
    };
    let (fit, _) = learn(&data, &cfg).unwrap();
    let pairing = match_components(&fit, &truth);
    for (t, &f) in pairing.iter().enumerate() {
        assert!((fit.hefts()[f] - truth.hefts()[t]).abs() < 0.02);
        let n_t = truth.hefts()[t] * 50_000.0;
        for j in 0..2 {
            let se = (truth.dcov(t)[j] / n_t).sqrt();
            assert!((fit.mean(f)[j] - truth.mean(t)[j]).abs() < 3.0 * se, "t={t} j={j}");
        }
    }
}

#[test]
fn histogram_follows_generator_proportions() {
    let spec = SynthSpec::two_cluster();
    let (data, _) = spec.sample(10_000, 8).unwrap();
    let model = spec.to_model().unwrap();
    let h = model.norm_hist(&data, AssignMode::ProbDist).unwrap();
    assert!((h[0] - 2.0 / 3.0).abs() < 0.02 && (h[1] - 1.0 / 3.0).abs() < 0.02, "{h:?}");
}

#[test]
fn trained_model_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = random_instance(50, 3000, 4, 3);
    let (model, _) = learn(&data, &FitConfig { rng_seed: 2, ..FitConfig::new(3) }).unwrap();
    let path = dir.path().join("m.gmm");
    model.save(&path).unwrap();
    assert_eq!(GmmModel::load(&path).unwrap(), model);
}

fn model_strategy() -> impl Strategy<Value = GmmModel> {
    (1usize..5, 1usize..5).prop_flat_map(|(d, k)| {
        (
            prop::collection::vec(-1e6f64..1e6, d * k),
            prop::collection::vec(1e-12f64..1e6, d * k),
            prop::collection::vec(0.0f64..1.0, k),
        )
            .prop_filter_map("hefts sum to zero", move |(means, dcovs, raw)| {
                let s: f64 = raw.iter().sum();
                (s > 0.0).then(|| {
                    let hefts = raw.iter().map(|w| w / s).collect();
                    GmmModel::from_flat_params(d, means, dcovs, hefts).unwrap()
                })
            })
    })
}

proptest! {
    #[test]
    fn save_load_is_identity(model in model_strategy()) {
        let back = GmmModel::from_text(&model.to_text()).unwrap();
        prop_assert_eq!(back, model);
    }

    #[test]
    fn heft_setter_accepts_exactly_valid_input(hefts in prop::collection::vec(-0.5f64..1.5, 3)) {
        let mut m = GmmModel::reset(2, 3).unwrap();
        let sum: f64 = hefts.iter().sum();
        let valid = hefts.iter().all(|w| *w >= 0.0) && (sum - 1.0).abs() <= 1e-9;
        prop_assert_eq!(m.set_hefts(&hefts).is_ok(), valid);
    }

    #[test]
    fn heft_setter_accepts_normalised(raw in prop::collection::vec(0.0f64..1.0, 1..6)) {
        let s: f64 = raw.iter().sum();
        prop_assume!(s > 0.0);
        let hefts: Vec<f64> = raw.iter().map(|w| w / s).collect();
        let mut m = GmmModel::reset(1, hefts.len()).unwrap();
        prop_assert!(m.set_hefts(&hefts).is_ok());
        prop_assert!((m.hefts().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn dcov_setter_accepts_exactly_positive(dcovs in prop::collection::vec(-1.0f64..1.0, 4)) {
        let mut m = GmmModel::reset(2, 2).unwrap();
        let rows = [dcovs[..2].to_vec(), dcovs[2..].to_vec()];
        prop_assert_eq!(m.set_dcovs(&rows).is_ok(), dcovs.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn shape_mismatch_always_rejected(d in 1usize..4, k in 1usize..4, extra in 1usize..3) {
        let mut m = GmmModel::reset(d, k).unwrap();
        let wrong_dim = vec![vec![0.0; d + extra]; k];
        prop_assert!(m.set_means(&wrong_dim).is_err());
        let wrong_count = vec![vec![1.0; d]; k + extra];
        prop_assert!(m.set_dcovs(&wrong_count).is_err());
        prop_assert!(m.set_hefts(&vec![1.0 / (k + extra) as f64; k + extra]).is_err());
    }

    #[test]
    fn unit_maha_equals_eucl(a in prop::collection::vec(-1e3f64..1e3, 4), b in prop::collection::vec(-1e3f64..1e3, 4)) {
        let maha = DistMode::MahaDiag(vec![1.0; 4]);
        prop_assert_eq!(maha.dist(&a, &b).unwrap().to_bits(), DistMode::EuclSq.dist(&a, &b).unwrap().to_bits());
    }

    #[test]
    fn prob_assign_ignores_common_offset(x in prop::collection::vec(-5f64..5.0, 2), shift in -3f64..3.0) {
        // translating the model and the point together must not change the winner
        let m = GmmModel::from_params(&[[0.0, 0.0], [2.0, 1.0], [-1.0, 3.0]], &[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]], &[0.2, 0.5, 0.3]).unwrap();
        let shifted = GmmModel::from_params(&[[shift, shift], [2.0 + shift, 1.0 + shift], [-1.0 + shift, 3.0 + shift]], &[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]], &[0.2, 0.5, 0.3]).unwrap();
        let xs = [x[0] + shift, x[1] + shift];
        prop_assert_eq!(m.assign(&x, AssignMode::ProbDist).unwrap(), shifted.assign(&xs, AssignMode::ProbDist).unwrap());
    }
}
