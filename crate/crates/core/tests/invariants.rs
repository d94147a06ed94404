use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xcrossnet::data::{Dataset, Instance};
use xcrossnet::layers::{sigmoid, ConcatCross, CrossStack, ProductLayer};
use xcrossnet::model::{load_checkpoint, save_checkpoint, ModelConfig, XCrossNetModel};
use xcrossnet::optim::batch_gradient;
use xcrossnet::oracle::{
    abs_params, evaluate_polynomial, expand_cross_polynomial, max_scaled_error, naive_concat_cross_forward,
    naive_cross_forward, naive_product_p2, pairwise_auc,
};
use xcrossnet::{auc, Parameterized};

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn randomize<P: Parameterized>(p: &mut P, rng: &mut ChaCha8Rng, scale: f64) {
    let flat = random_vec(rng, p.num_params(), scale);
    p.set_flat_params(&flat).unwrap();
}

fn abs_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.abs()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cross_stack_matches_materialized_matrices(m in 1usize..9, l in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = CrossStack::zeros(m, l);
        randomize(&mut s, &mut rng, 1.0);
        let d = random_vec(&mut rng, m, 1.0);
        let (fast, _) = s.forward(&d).unwrap();
        let slow = naive_cross_forward(&d, &s).unwrap();
        let scale = naive_cross_forward(&abs_vec(&d), &abs_params(&s)).unwrap();
        prop_assert_eq!(fast.len(), m * (l + 1));
        let err = max_scaled_error(&fast, &slow, &scale).unwrap();
        prop_assert!(err <= 1e-12, "{}", err);
    }

    #[test]
    fn concat_cross_matches_materialized_matrix(a in 1usize..12, b in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = ConcatCross::zeros(a + b);
        randomize(&mut c, &mut rng, 1.0);
        let oc = random_vec(&mut rng, a, 1.0);
        let op = random_vec(&mut rng, b, 1.0);
        let (fast, _) = c.forward(&oc, &op).unwrap();
        let slow = naive_concat_cross_forward(&oc, &op, &c).unwrap();
        let scale = naive_concat_cross_forward(&abs_vec(&oc), &abs_vec(&op), &abs_params(&c)).unwrap();
        prop_assert_eq!(fast.len(), 2 * (a + b));
        let err = max_scaled_error(&fast, &slow, &scale).unwrap();
        prop_assert!(err <= 1e-12, "{}", err);
    }

    #[test]
    fn factored_product_matches_double_sum(
        n in 1usize..9, k in 1usize..7, t in 1usize..6, seed in any::<u64>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ProductLayer::zeros(n, k, t);
        randomize(&mut p, &mut rng, 1.0);
        let e = random_vec(&mut rng, n * k, 1.0);
        let (out, _) = p.forward(&e).unwrap();
        prop_assert_eq!(out.len(), 2 * t);
        for u in 0..t {
            let slow = naive_product_p2(&e, k, p.theta(u)).unwrap();
            let scale = naive_product_p2(&abs_vec(&e), k, &abs_vec(p.theta(u))).unwrap();
            prop_assert!(out[t + u] >= 0.0);
            let err = max_scaled_error(&[out[t + u]], &[slow], &[scale]).unwrap();
            prop_assert!(err <= 1e-10, "{}", err);
        }
    }

    #[test]
    fn bias_free_chain_is_a_product_of_linear_forms(m in 1usize..5, l in 0usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // L+1 weight vectors: the chain dot(C_L, W^L) is the last scalar.
        let weights: Vec<Vec<f64>> = (0..=l).map(|_| random_vec(&mut rng, m, 1.0)).collect();
        let mut s = CrossStack::zeros(m, l + 1);
        for (i, w) in weights.iter().enumerate() {
            s.weight_mut(i).copy_from_slice(w);
        }
        let d = random_vec(&mut rng, m, 1.0);
        let (_, cache) = s.forward(&d).unwrap();
        let chain = cache.scalars()[l];
        let forms = |d: &[f64], ws: &[Vec<f64>]| -> f64 {
            ws.iter().map(|w| w.iter().zip(d).map(|(a, b)| a * b).sum::<f64>()).product()
        };
        let literal = forms(&d, &weights);
        let expanded = evaluate_polynomial(&expand_cross_polynomial(&weights).unwrap(), &d);
        let abs_w: Vec<Vec<f64>> = weights.iter().map(|w| abs_vec(w)).collect();
        let scale = forms(&abs_vec(&d), &abs_w);
        let err = max_scaled_error(&[chain, chain], &[literal, expanded], &[scale, scale]).unwrap();
        prop_assert!(err <= 1e-10, "{}", err);
    }

    #[test]
    fn expansion_is_homogeneous_of_depth_plus_one(m in 1usize..5, l in 0usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<Vec<f64>> = (0..=l).map(|_| random_vec(&mut rng, m, 1.0)).collect();
        for mono in expand_cross_polynomial(&weights).unwrap() {
            prop_assert_eq!(mono.order() as usize, l + 1);
        }
    }

    #[test]
    fn auc_matches_pairwise_count(
        scores in proptest::collection::vec(0u8..20, 2..200),
        labels_seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(labels_seed);
        let preds: Vec<f64> = scores.iter().map(|&s| f64::from(s) / 20.0).collect();
        let mut labels: Vec<u8> = (0..preds.len()).map(|_| rng.gen_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let fast = auc(&preds, &labels).unwrap();
        let slow = pairwise_auc(&preds, &labels).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&fast));
        // Any strictly increasing transform leaves the ranking unchanged.
        let squashed: Vec<f64> = preds.iter().map(|p| (3.0 * p - 1.0).tanh()).collect();
        prop_assert!((auc(&squashed, &labels).unwrap() - fast).abs() <= 1e-12);
        let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
        prop_assert!((auc(&preds, &flipped).unwrap() - (1.0 - fast)).abs() <= 1e-12);
    }
}

fn small_model(seed: u64, depth: usize, widths: Vec<usize>) -> XCrossNetModel {
    let cfg = ModelConfig {
        cross_depth: depth,
        mlp_widths: widths,
        seed,
        ..ModelConfig::gradcheck_default()
    };
    let mut m = XCrossNetModel::init(&cfg).unwrap();
    randomize(&mut m, &mut ChaCha8Rng::seed_from_u64(seed), 0.5);
    m
}

fn random_data(cfg: &ModelConfig, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|_| Instance {
            dense: random_vec(&mut rng, cfg.num_dense, 2.0),
            sparse: cfg.vocab_sizes.iter().map(|&v| rng.gen_range(0..v as u32)).collect(),
            label: rng.gen_range(0..2),
        })
        .collect();
    Dataset::new(cfg.num_dense, cfg.num_sparse, instances).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn batch_gradient_ignores_batch_order(
        seed in any::<u64>(),
        depth in 1usize..4,
        perm in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let m = small_model(seed, depth, vec![6]);
        let data = random_data(m.config(), 12, seed ^ 1);
        let mut g1 = m.clone();
        let mut g2 = m.clone();
        let sorted: Vec<usize> = (0..12).collect();
        let l1 = batch_gradient(&m, &data, &sorted, &mut g1).unwrap();
        let l2 = batch_gradient(&m, &data, &perm, &mut g2).unwrap();
        prop_assert_eq!(l1.to_bits(), l2.to_bits());
        let same = g1.flat_params().iter().zip(g2.flat_params()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn predictions_are_the_sigmoid_of_the_logit(seed in any::<u64>(), scale in 0.1f64..50.0) {
        let mut m = small_model(seed, 2, vec![8, 4]);
        m.scale(scale);
        let data = random_data(m.config(), 8, seed);
        for inst in data.instances() {
            let (p, cache) = m.forward(inst).unwrap();
            prop_assert_eq!(p.to_bits(), sigmoid(cache.logit()).to_bits());
            prop_assert!((0.0..=1.0).contains(&p));
            // Beyond |z| ≈ 37 the sigmoid rounds to exactly 0 or 1 in f64.
            if cache.logit().abs() < 36.0 {
                prop_assert!(p > 0.0 && p < 1.0, "p = {p}");
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise(seed in any::<u64>(), depth in 1usize..4, width in 1usize..9) {
        let m = small_model(seed, depth, vec![width]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut meta = serde_json::Map::new();
        meta.insert("seed".into(), serde_json::json!(seed));
        save_checkpoint(&m, meta.clone(), &path).unwrap();
        let (back, header) = load_checkpoint(&path).unwrap();
        prop_assert_eq!(&header.meta, &meta);
        prop_assert_eq!(back.config(), m.config());
        let same = back.flat_params().iter().zip(m.flat_params()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }
}
