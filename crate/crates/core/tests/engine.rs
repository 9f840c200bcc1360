use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use stmcmc::engine::*;
use stmcmc::prob::{BlockPrior, FnLikelihood, LogLikelihood, Marginal, TemperedTarget};
use stmcmc::rng::{stream, Purpose};
use stmcmc::samplers::{KernelKind, ProposalSpec};

fn chi2_p(observed: &[f64], expected: &[f64], df: f64) -> f64 {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn multiplicities_follow_the_multinomial() {
    let w = [0.05, 0.15, 0.2, 0.25, 0.35];
    let n = w.len();
    let reps = 10_000;
    let mut rng = stream(1, 0, Purpose::Resample, 0);
    let mut totals = vec![0.0; n];
    // multiplicity of the last sample is Binomial(n, 0.35)
    let mut hist = vec![0.0; n + 1];
    for _ in 0..reps {
        let idx = multinomial_indices(&w, n, &mut rng).unwrap();
        assert_eq!(idx.len(), n);
        for &i in &idx {
            totals[i] += 1.0;
        }
        hist[idx.iter().filter(|&&i| i == n - 1).count()] += 1.0;
    }
    let expected: Vec<f64> = w.iter().map(|p| p * (n * reps) as f64).collect();
    assert!(chi2_p(&totals, &expected, (n - 1) as f64) > 1e-3);

    let binom = |k: usize| {
        let c = (0..k).fold(1.0, |a, i| a * (n - i) as f64 / (i + 1) as f64);
        c * 0.35f64.powi(k as i32) * 0.65f64.powi((n - k) as i32) * reps as f64
    };
    // merge the sparse top cells
    let mut obs: Vec<f64> = hist[..4].to_vec();
    obs.push(hist[4..].iter().sum());
    let mut exp: Vec<f64> = (0..4).map(binom).collect();
    exp.push((4..=n).map(binom).sum());
    assert!(chi2_p(&obs, &exp, (obs.len() - 1) as f64) > 1e-3);
}

#[test]
fn resampling_is_unbiased_for_the_weighted_mean() {
    let mut rng = stream(2, 0, Purpose::Other, 0);
    let x: Vec<f64> = (0..20).map(|_| rng.sample(StandardNormal)).collect();
    let w = normalized_weights(&x.iter().map(|v| 0.7 * v).collect::<Vec<_>>()).unwrap();
    let target: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
    let reps = 10_000;
    let means: Vec<f64> = (0..reps)
        .map(|_| {
            let idx = multinomial_indices(&w, x.len(), &mut rng).unwrap();
            idx.iter().map(|&i| x[i]).sum::<f64>() / x.len() as f64
        })
        .collect();
    let m = means.iter().sum::<f64>() / reps as f64;
    let sd = (means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    assert!((m - target).abs() < 4.0 * sd / (reps as f64).sqrt(), "{m} vs {target}");
}

#[test]
fn degenerate_and_uniform_weights() {
    let mut rng = stream(3, 0, Purpose::Resample, 0);
    let mut w = vec![0.0; 8];
    w[0] = 1.0;
    assert_eq!(multinomial_indices(&w, 8, &mut rng).unwrap(), vec![0; 8]);

    let uniform = vec![1.0; 8];
    let mut counts = [0usize; 8];
    for _ in 0..5000 {
        for i in multinomial_indices(&uniform, 8, &mut rng).unwrap() {
            counts[i] += 1;
        }
    }
    // expected multiplicity 1 per draw, binomial sd sqrt(5000 * 7/8)
    for c in counts {
        assert!((c as f64 - 5000.0).abs() < 4.0 * (5000.0 * 7.0 / 8.0f64).sqrt());
    }
}

#[test]
fn weight_examples() {
    let w = normalized_weights(&[0.0, 0.0, 2f64.ln()]).unwrap();
    for (a, b) in w.iter().zip([0.25, 0.25, 0.5]) {
        assert!((a - b).abs() < 1e-15);
    }
    let w = normalized_weights(&[-1e3; 5]).unwrap();
    assert!(w.iter().all(|&x| x == 0.2));
    let w = normalized_weights(&[0.0, -800.0, -900.0]).unwrap();
    assert_eq!(w[0], 1.0);

    // self-normalised mean at zero increment is the plain mean
    let g = [0.3, -1.2, 4.0, 2.5, 0.0];
    let w = normalized_weights(&[0.0; 5]).unwrap();
    let a: f64 = w.iter().zip(&g).map(|(w, g)| w * g).sum();
    assert!((a - g.iter().sum::<f64>() / 5.0).abs() <= 1e-15);
}

#[test]
fn two_point_increment_has_closed_form() {
    // weights 1 and exp(-d) have COV (1 - e^-d) / (1 + e^-d)
    let kappa: f64 = 0.1;
    let d = solve_delta_beta(&[0.0, -1.0], kappa, 1.0).unwrap();
    let exact = ((1.0 + kappa) / (1.0 - kappa)).ln();
    // the root is found to 1e-8 in COV, where the slope is about 1/2
    let b = (-d).exp();
    assert!(((1.0 - b) / (1.0 + b) - kappa).abs() < 1e-8);
    assert!((d - exact).abs() < 3e-8, "{d} vs {exact}");
    // equal likelihoods take the whole remaining step
    assert_eq!(solve_delta_beta(&[-2.0; 6], 1.0, 0.4).unwrap(), 0.4);
}

#[test]
fn controller_examples() {
    let c = Controller::new(0.5, 0.234, 2.1).unwrap();
    assert_eq!(c.update(0.234).sigma, 0.5);
    let up = c.update(1.0);
    assert!((up.sigma / 0.5 - 4.996).abs() < 1e-3, "{}", up.sigma / 0.5);
    assert!((up.sigma / 0.5 - (2.1f64 * 0.766).exp()).abs() < 1e-12);
    assert!(c.update(0.0).sigma < 0.5);
}

fn gaussian_target(dim: usize, sd: f64) -> TemperedTarget {
    let prior = Arc::new(BlockPrior::iid("x", dim, Marginal::gaussian(0.0, 1.0).unwrap()).unwrap());
    let p = 1.0 / (sd * sd);
    let like: Arc<dyn LogLikelihood> =
        Arc::new(FnLikelihood::new(move |x: &[f64]| -0.5 * p * x.iter().map(|v| v * v).sum::<f64>()));
    TemperedTarget::exponent(prior, Some(like), 1.0).unwrap()
}

fn exact_population(target: &TemperedTarget, n: usize, sd: f64, seed: u64) -> Population {
    let mut rng = stream(seed, 0, Purpose::Other, 0);
    let d = target.prior().dim();
    let pts = (0..n)
        .map(|_| {
            let v = (0..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
            target.prior().param(v).unwrap()
        })
        .collect();
    Population::from_points(pts, target).unwrap()
}

#[test]
fn correlation_target_of_one_stops_after_a_block() {
    let target = gaussian_target(2, 1.0);
    let post_sd = (0.5f64).sqrt();
    let mut pop = exact_population(&target, 200, post_sd, 4);
    let prop = ProposalSpec::identity(2, 1.0).unwrap();
    let opts = EvolveOptions { rho_target: 1.0, block: 5, max_steps: 200, measure: CorrMeasure::Cca };
    let r = evolve_level(&mut pop, &target, KernelKind::Rwm, &prop, &opts, 1, 1).unwrap();
    assert_eq!(r.steps, 5);
    assert!(!r.cap_hit);
}

#[test]
fn a_long_block_decorrelates_a_fast_mixing_target() {
    let target = gaussian_target(1, 1.0);
    let sd = (0.5f64).sqrt();
    let n = 2000;
    let mut pop = exact_population(&target, n, sd, 5);
    let prop = ProposalSpec::identity(1, 2.4 * sd).unwrap();
    let opts = EvolveOptions { rho_target: 0.0, block: 60, max_steps: 60, measure: CorrMeasure::Componentwise };
    let r = evolve_level(&mut pop, &target, KernelKind::Rwm, &prop, &opts, 2, 1).unwrap();
    assert_eq!(r.steps, 60);
    assert!(r.correlation.abs() < 3.0 / (n as f64).sqrt(), "{}", r.correlation);
}

#[test]
fn stopping_time_tracks_the_autocorrelation() {
    // 2-D Gaussian target; the lag at which one long chain's autocorrelation
    // falls to the target should match the population stopping time
    let target = gaussian_target(2, 1.0);
    let sd = (0.5f64).sqrt();
    let prop = ProposalSpec::identity(2, 0.5 * sd).unwrap();
    let rho = 0.6;

    let mut pop = exact_population(&target, 1, sd, 6);
    let mut chain = pop.chains.remove(0);
    let mut rng = stream(7, 0, Purpose::Evolve, 0);
    let len = 400_000;
    let mut xs = Vec::with_capacity(len);
    for _ in 0..len {
        KernelKind::Rwm.step(&mut chain, &target, &prop, &mut rng).unwrap();
        xs.push(chain.values()[0]);
    }
    let mean = xs.iter().sum::<f64>() / len as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / len as f64;
    let acf = |lag: usize| {
        (0..len - lag).map(|i| (xs[i] - mean) * (xs[i + lag] - mean)).sum::<f64>() / ((len - lag) as f64 * var)
    };
    let lag = (1..500).find(|&l| acf(l) <= rho).unwrap();

    let mut pop = exact_population(&target, 2000, sd, 8);
    let opts = EvolveOptions { rho_target: rho, block: 1, max_steps: 1000, measure: CorrMeasure::Componentwise };
    let r = evolve_level(&mut pop, &target, KernelKind::Rwm, &prop, &opts, 9, 1).unwrap();
    let ratio = r.steps as f64 / lag as f64;
    assert!((0.5..=2.0).contains(&ratio), "stopped after {} steps, autocorrelation lag {lag}", r.steps);
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(|x| x.as_slice()).collect()
}

#[test]
fn cca_sees_rotations_that_componentwise_misses() {
    let mut rng = stream(10, 0, Purpose::Other, 0);
    let start: Vec<Vec<f64>> = (0..500).map(|_| (0..2).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let q = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let end: Vec<Vec<f64>> = start
        .iter()
        .map(|p| {
            let v = &q * nalgebra::DVector::from_column_slice(p);
            v.iter().copied().collect()
        })
        .collect();
    let cca = corr_cca(&refs(&start), &refs(&end)).unwrap();
    let comp = corr_componentwise(&refs(&start), &refs(&end)).unwrap();
    assert!((cca.value - 1.0).abs() < 1e-6, "{}", cca.value);
    assert!(comp.value < 0.2, "{}", comp.value);
}

#[test]
fn log_target_correlation_of_identical_and_permuted_values() {
    let mut rng = stream(11, 0, Purpose::Other, 0);
    let n = 1000;
    let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    assert!((corr_log_target(&a, &a).unwrap().value - 1.0).abs() < 1e-12);
    let mut b = a.clone();
    // Fisher-Yates with the test stream
    for i in (1..n).rev() {
        b.swap(i, rng.random_range(0..=i));
    }
    assert!(corr_log_target(&a, &b).unwrap().value.abs() < 3.0 / (n as f64).sqrt());
}

#[test]
fn log_likelihood_decorrelates_before_parameters_on_two_islands() {
    // chains stay on their island; within an island the log-likelihood is
    // refreshed while the island label keeps the parameters correlated
    let mut rng = stream(12, 0, Purpose::Other, 0);
    let n = 2000;
    let mut start = Vec::new();
    let mut end = Vec::new();
    let mut ls = Vec::new();
    let mut le = Vec::new();
    for i in 0..n {
        let centre = if i % 2 == 0 { -3.0 } else { 3.0 };
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        start.push(vec![centre + 0.3 * a]);
        end.push(vec![centre + 0.3 * b]);
        ls.push(-0.5 * a * a);
        le.push(-0.5 * b * b);
    }
    let cca = corr_cca(&refs(&start), &refs(&end)).unwrap().value;
    let ll = corr_log_target(&ls, &le).unwrap().value;
    assert!(cca > 0.9, "{cca}");
    assert!(ll < cca && ll.abs() < 0.1, "{ll}");
}
