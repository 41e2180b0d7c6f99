mod common;

use camuv::hsic::{p_hsic, p_hsic_permutation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

fn uniform(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let u = Uniform::new(0.0, 1.0);
    (0..n).map(|_| u.sample(rng)).collect()
}

fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn gamma_and_permutation_agree_on_most_fixtures() {
    let corpus = common::hsic_corpus(50, 11);
    let mut agree = 0;
    for (f, (a, b)) in corpus.iter().enumerate() {
        let cols: Vec<&[f64]> = b.iter().map(|c| c.as_slice()).collect();
        let gamma = p_hsic(a, &cols).unwrap().p_value;
        let perm = p_hsic_permutation(a, &cols, 999, f as u64).unwrap();
        if (gamma <= 0.01) == (perm <= 0.01) {
            agree += 1;
        }
    }
    assert!(agree >= 48, "{agree}/50 decisions agree");
}

#[test]
fn permutation_p_values_are_uniform_under_independence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p: Vec<f64> = (0..200)
        .map(|t| {
            let a = uniform(60, &mut rng);
            let b = uniform(60, &mut rng);
            p_hsic_permutation(&a, &[&b], 200, t).unwrap()
        })
        .collect();
    let d = ks_uniform(p);
    assert!(d < 0.15, "KS distance {d}");
}

#[test]
fn joint_second_argument_sees_dependence_on_either_column() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = uniform(200, &mut rng);
    let z = uniform(200, &mut rng);
    let y: Vec<f64> = x.iter().map(|v| (v - 0.5).powi(2)).collect();
    assert!(p_hsic(&y, &[&z, &x]).unwrap().p_value < 0.001);
    let w = uniform(200, &mut rng);
    assert!(p_hsic(&w, &[&z, &x]).unwrap().p_value > 0.001);
}
