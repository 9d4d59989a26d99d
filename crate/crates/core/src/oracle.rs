//! Independent numerical checks of the PBP machinery.
//!
//! Each check returns an [`OracleReport`]; the CLI self-test and the
//! acceptance suite both run them.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::pbp::{
    gaussian_log_density, log_marginal_gradient, pbp_update_weight, update_noise_posterior, GammaPosterior,
    GaussianMatrix, PartitionTriple, DEFAULT_VARIANCE_FLOOR,
};
use crate::rng::{SeedTree, SimRng};
use crate::rnn::RecurrentBayesNet;
use crate::sequence::ObservationSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed discrepancy, in the check's own unit.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (tolerance {:.1e}, {} cases)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.cases
        )
    }
}

/// Prior N(0, 1), one observation y = 1 with unit noise: the posterior is
/// N(0.5, 0.5), which one PBP update must reproduce exactly.
pub fn conjugate_oracle() -> Result<OracleReport> {
    let g = log_marginal_gradient(1.0, 0.0, 1.0, 1.0)?;
    let up = pbp_update_weight(0.0, 1.0, g.d_mean, g.d_var, DEFAULT_VARIANCE_FLOOR);
    let worst = (up.mean - 0.5).abs().max((up.variance - 0.5).abs());
    Ok(OracleReport {
        name: "conjugate gaussian update",
        passed: worst <= 1e-10,
        worst,
        tolerance: 1e-10,
        cases: 1,
    })
}

fn random_layer(rows: usize, cols: usize, rng: &mut SimRng) -> GaussianMatrix {
    let means = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let variances = (0..rows * cols).map(|_| rng.random_range(0.05..0.5)).collect();
    GaussianMatrix::from_parts(rows, cols, means, variances).expect("valid random layer")
}

/// Net with every weight variance well away from zero.
pub fn random_net(input_dim: usize, hidden_dim: usize, rng: &mut SimRng) -> RecurrentBayesNet {
    RecurrentBayesNet::from_parts(
        random_layer(hidden_dim, input_dim + 1, rng),
        random_layer(hidden_dim, hidden_dim + 1, rng),
        random_layer(1, hidden_dim + 1, rng),
        GammaPosterior::default(),
        Default::default(),
    )
    .expect("consistent shapes")
}

pub fn random_sequence(len: usize, dim: usize, rng: &mut SimRng) -> ObservationSequence {
    ObservationSequence::from_flat((0..len * dim).map(|_| rng.random_range(-1.0..1.0)).collect(), dim, 0)
        .expect("valid shape")
}

fn step_log_z(net: &RecurrentBayesNet, seq: &ObservationSequence, label: f64) -> Result<Vec<f64>> {
    let trace = net.forward_sequence(seq)?;
    let noise = net.noise.noise_variance();
    trace
        .outputs
        .iter()
        .map(|o| gaussian_log_density(label, o.means[0], o.variances[0] + noise))
        .collect()
}

/// Which of the three matrices and whether its means or variances.
fn param_slot(net: &mut RecurrentBayesNet, layer: usize, variances: bool) -> &mut [f64] {
    let m = match layer {
        0 => &mut net.recurrent_input,
        1 => &mut net.recurrent_hidden,
        _ => &mut net.readout,
    };
    if variances {
        m.variances_mut()
    } else {
        m.means_mut()
    }
}

/// Relative error of every analytic `d logZ_t / d(m, v)` against central
/// differences, on `nets` random nets with the given shape.
pub fn gradient_oracle(nets: usize, input_dim: usize, hidden_dim: usize, len: usize, seed: u64) -> Result<OracleReport> {
    const STEP: f64 = 1e-6;
    const TOL: f64 = 1e-5;
    let tree = SeedTree::new(seed);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 0..nets {
        let mut rng = tree.stream("gradient-oracle", n as u64);
        let net = random_net(input_dim, hidden_dim, &mut rng);
        let seq = random_sequence(len, input_dim, &mut rng);
        let label = f64::from(rng.random_range(0..2u8));
        let analytic = net.step_gradients(&seq, label)?;
        for layer in 0..3 {
            for variances in [false, true] {
                let count = param_slot(&mut net.clone(), layer, variances).len();
                for k in 0..count {
                    let mut plus = net.clone();
                    param_slot(&mut plus, layer, variances)[k] += STEP;
                    let mut minus = net.clone();
                    param_slot(&mut minus, layer, variances)[k] -= STEP;
                    let lp = step_log_z(&plus, &seq, label)?;
                    let lm = step_log_z(&minus, &seq, label)?;
                    for (t, step) in analytic.iter().enumerate() {
                        let g = match (layer, variances) {
                            (0, false) => &step.grad.recurrent_input.means,
                            (0, true) => &step.grad.recurrent_input.variances,
                            (1, false) => &step.grad.recurrent_hidden.means,
                            (1, true) => &step.grad.recurrent_hidden.variances,
                            (_, false) => &step.grad.readout.means,
                            (_, true) => &step.grad.readout.variances,
                        }[k];
                        let fd = (lp[t] - lm[t]) / (2.0 * STEP);
                        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-4);
                        worst = worst.max(rel);
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok(OracleReport {
        name: "tbptt gradients vs central differences",
        passed: worst <= TOL,
        worst,
        tolerance: TOL,
        cases,
    })
}

fn sample_weight(m: &GaussianMatrix, i: usize, j: usize, rng: &mut SimRng) -> f64 {
    m.mean(i, j) + m.variance(i, j).sqrt() * rng.sample::<f64, _>(StandardNormal)
}

/// Hidden unit `i` after `t + 1` steps, with fresh weights for this use and
/// an independent draw of every upstream unit.
fn sample_hidden(net: &RecurrentBayesNet, seq: &ObservationSequence, t: usize, i: usize, rng: &mut SimRng) -> f64 {
    let w_in = &net.recurrent_input;
    let w_h = &net.recurrent_hidden;
    let x = seq.step(t);
    let d = x.len();
    let mut a = 0.0;
    for (j, xj) in x.iter().enumerate() {
        a += sample_weight(w_in, i, j, rng) * xj;
    }
    a += sample_weight(w_in, i, d, rng);
    let mut b = sample_weight(w_h, i, net.hidden_dim(), rng);
    for j in 0..net.hidden_dim() {
        let hj = if t == 0 { 0.0 } else { sample_hidden(net, seq, t - 1, j, rng) };
        b += sample_weight(w_h, i, j, rng) * hj;
    }
    w_in.scale() * a + w_h.scale() * b
}

/// Ancestral sample of the readout under the factorized model that moment
/// propagation describes exactly: every weight use and every upstream unit
/// is drawn independently.
pub fn sample_output(net: &RecurrentBayesNet, seq: &ObservationSequence, rng: &mut SimRng) -> f64 {
    let r = &net.readout;
    let t = seq.len() - 1;
    let mut s = sample_weight(r, 0, net.hidden_dim(), rng);
    for j in 0..net.hidden_dim() {
        s += sample_weight(r, 0, j, rng) * sample_hidden(net, seq, t, j, rng);
    }
    r.scale() * s
}

/// Largest deviation, in standard errors, between propagated output
/// moments and `samples` ancestral samples, over `nets` random nets.
pub fn moment_oracle(nets: usize, samples: usize, input_dim: usize, hidden_dim: usize, len: usize, seed: u64) -> Result<OracleReport> {
    let tree = SeedTree::new(seed);
    let mut worst = 0.0f64;
    for n in 0..nets {
        let mut rng = tree.stream("moment-oracle", n as u64);
        let net = random_net(input_dim, hidden_dim, &mut rng);
        let seq = random_sequence(len, input_dim, &mut rng);
        let pred = net.forward_sequence(&seq)?.prediction;
        let mut sampler = tree.stream("moment-oracle-samples", n as u64);
        let xs: Vec<f64> = (0..samples).map(|_| sample_output(&net, &seq, &mut sampler)).collect();
        let k = samples as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / k;
        let se_mean = (var / k).sqrt();
        let se_var = ((m4 - var * var).max(0.0) / k).sqrt();
        worst = worst
            .max((mean - pred.mean).abs() / se_mean)
            .max((var - pred.variance).abs() / se_var);
    }
    Ok(OracleReport {
        name: "moment propagation vs ancestral sampling",
        passed: worst <= 3.0,
        worst,
        tolerance: 3.0,
        cases: nets,
    })
}

/// Trapezoid rule for `∫ f(γ) dγ` over γ > 0, taken in `u = ln γ`.
fn integrate_positive(f: impl Fn(f64) -> f64) -> f64 {
    const LO: f64 = -25.0;
    const HI: f64 = 8.0;
    const N: usize = 20_000;
    let h = (HI - LO) / N as f64;
    let mut s = 0.0;
    for i in 0..=N {
        let u = LO + i as f64 * h;
        let g = u.exp();
        let w = if i == 0 || i == N { 0.5 } else { 1.0 };
        s += w * f(g) * g;
    }
    s * h
}

/// One noise-posterior test case: label, output moments and prior Gamma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCase {
    pub y: f64,
    pub mean: f64,
    pub var: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Partition triple with each `Z_k = ∫ Gamma(γ; α+k, β) N(y | m, v + 1/γ) dγ`
/// integrated numerically, up to a constant common to all three.
pub fn quadrature_partition(c: &NoiseCase) -> PartitionTriple {
    let normal = |g: f64| {
        let s = c.var + 1.0 / g;
        (-(c.y - c.mean).powi(2) / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt()
    };
    // Gamma(α+k) = Gamma(α) α (α+1) ... (α+k-1); Gamma(α) cancels.
    let z = |k: i32| {
        let shape = c.alpha + k as f64;
        let rising: f64 = (0..k).map(|i| c.alpha + i as f64).product();
        let log_norm = shape * c.beta.ln() - rising.ln();
        let scale = c.alpha * c.beta.ln();
        integrate_positive(|g| {
            ((log_norm - scale) + (shape - 1.0) * g.ln() - c.beta * g).exp() * normal(g)
        })
        .ln()
    };
    PartitionTriple {
        log_z: z(0),
        log_z1: z(1),
        log_z2: z(2),
    }
}

/// Gamma moment-matched to the exact tilted posterior over the precision.
pub fn quadrature_moment_match(c: &NoiseCase) -> (f64, f64) {
    // Unnormalized Gamma(α, β) density scaled to 1 at its mode.
    let mode = (c.alpha - 1.0) / c.beta;
    let log_peak = (c.alpha - 1.0) * mode.ln() - c.beta * mode;
    let tilted = |g: f64, k: i32| {
        let s = c.var + 1.0 / g;
        let n = (-(c.y - c.mean).powi(2) / (2.0 * s)).exp() / s.sqrt();
        ((c.alpha - 1.0) * g.ln() - c.beta * g - log_peak).exp() * n * g.powi(k)
    };
    let z0 = integrate_positive(|g| tilted(g, 0));
    let e1 = integrate_positive(|g| tilted(g, 1)) / z0;
    let e2 = integrate_positive(|g| tilted(g, 2)) / z0;
    let var = e2 - e1 * e1;
    (e1 * e1 / var, e1 / var)
}

pub fn random_noise_case(rng: &mut SimRng) -> NoiseCase {
    NoiseCase {
        y: f64::from(rng.random_range(0..2u8)),
        mean: rng.random_range(-0.5..1.5),
        var: rng.random_range(0.001..0.5),
        alpha: rng.random_range(2.0..20.0),
        beta: rng.random_range(0.5..10.0),
    }
}

/// `update_noise_posterior` fed exact partitions against direct moment
/// matching of the tilted posterior, as worst relative error in α and β.
pub fn noise_posterior_oracle(cases: usize, seed: u64) -> Result<OracleReport> {
    let tree = SeedTree::new(seed);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let c = random_noise_case(&mut tree.stream("noise-oracle", i as u64));
        let prior = GammaPosterior::new(c.alpha, c.beta)?;
        let up = update_noise_posterior(&prior, &quadrature_partition(&c));
        let (a, b) = quadrature_moment_match(&c);
        let rel = if up.rejected {
            f64::INFINITY
        } else {
            ((up.posterior.alpha() - a) / a).abs().max(((up.posterior.beta() - b) / b).abs())
        };
        worst = worst.max(rel);
    }
    Ok(OracleReport {
        name: "noise posterior vs quadrature moment matching",
        passed: worst <= 1e-3,
        worst,
        tolerance: 1e-3,
        cases,
    })
}

/// All four oracles at their acceptance sizes.
pub fn run_all(seed: u64) -> Result<Vec<OracleReport>> {
    Ok(vec![
        conjugate_oracle()?,
        gradient_oracle(100, 9, 3, 4, seed)?,
        moment_oracle(20, 100_000, 4, 3, 3, seed)?,
        noise_posterior_oracle(20, seed)?,
    ])
}
