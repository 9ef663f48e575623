//! Cross-entropy search over a joint Gaussian and independent categoricals.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{par, Error, Result};

const COV_JITTER: f64 = 1e-9;
const PROB_FLOOR: f64 = 1e-6;
const REDRAWS: usize = 10;

/// Box-bounded continuous dims plus categorical dims with explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Category values for each discrete dim.
    pub categories: Vec<Vec<f64>>,
}

impl VariableSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, categories: Vec<Vec<f64>>) -> Result<Self> {
        let s = Self { lower, upper, categories };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::Config("bound vectors differ in length".into()));
        }
        for (d, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Config(format!("continuous dim {d} has bounds [{lo}, {hi}]")));
            }
        }
        if let Some(d) = self.categories.iter().position(|c| c.is_empty()) {
            return Err(Error::Config(format!("discrete dim {d} has no categories")));
        }
        Ok(())
    }

    pub fn continuous_dim(&self) -> usize {
        self.lower.len()
    }

    pub fn discrete_dim(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty() && self.categories.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    /// Category index per discrete dim.
    pub k: Vec<usize>,
}

impl Sample {
    /// Category values in place of indices.
    pub fn discrete_values(&self, spec: &VariableSpec) -> Vec<f64> {
        self.k.iter().zip(&spec.categories).map(|(&k, c)| c[k]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedDistribution {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub probs: Vec<Vec<f64>>,
}

impl MixedDistribution {
    /// Moments of the uniform distribution on the spec's box.
    pub fn uniform(spec: &VariableSpec) -> Self {
        let n = spec.continuous_dim();
        let mean = DVector::from_iterator(n, spec.lower.iter().zip(&spec.upper).map(|(l, u)| 0.5 * (l + u)));
        let var = DVector::from_iterator(n, spec.lower.iter().zip(&spec.upper).map(|(l, u)| (u - l).powi(2) / 12.0));
        let probs = spec.categories.iter().map(|c| vec![1.0 / c.len() as f64; c.len()]).collect();
        Self { mean, cov: DMatrix::from_diagonal(&var), probs }
    }

    /// Maximum-likelihood fit to the elites, regularized.
    pub fn fit(elites: &[&Sample], spec: &VariableSpec) -> Self {
        let n = spec.continuous_dim();
        let m = elites.len() as f64;
        let mut mean = DVector::zeros(n);
        for s in elites {
            mean += DVector::from_column_slice(&s.x);
        }
        mean /= m;
        let mut cov = DMatrix::zeros(n, n);
        for s in elites {
            let d = DVector::from_column_slice(&s.x) - &mean;
            cov += &d * d.transpose();
        }
        cov /= m;
        for i in 0..n {
            cov[(i, i)] += COV_JITTER;
        }
        let probs = spec
            .categories
            .iter()
            .enumerate()
            .map(|(d, c)| {
                let mut p = vec![0.0; c.len()];
                for s in elites {
                    p[s.k[d]] += 1.0;
                }
                let p: Vec<f64> = p.iter().map(|v| (v / m).max(PROB_FLOOR)).collect();
                let z: f64 = p.iter().sum();
                p.iter().map(|v| v / z).collect()
            })
            .collect();
        Self { mean, cov, probs }
    }

    /// Mean clamped to the box, most likely category per discrete dim.
    pub fn mode(&self, spec: &VariableSpec) -> Sample {
        let x = (0..spec.continuous_dim()).map(|i| self.mean[i].clamp(spec.lower[i], spec.upper[i])).collect();
        let k = self
            .probs
            .iter()
            .map(|p| p.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0)
            .collect();
        Sample { x, k }
    }

    /// Summed Shannon entropy of the categorical parts, in nats.
    pub fn entropy(&self) -> f64 {
        self.probs.iter().flatten().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
    }

    /// Lower factor `L` with `L L^T = cov`; falls back to an eigen split.
    fn factor(&self) -> DMatrix<f64> {
        if let Some(ch) = self.cov.clone().cholesky() {
            return ch.l();
        }
        let eig = self.cov.clone().symmetric_eigen();
        let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&root)
    }

    fn draw(&self, factor: &DMatrix<f64>, spec: &VariableSpec, rng: &mut impl Rng) -> Sample {
        let n = spec.continuous_dim();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let v = &self.mean + factor * z;
        let x = (0..n).map(|i| v[i].clamp(spec.lower[i], spec.upper[i])).collect();
        Sample { x, k: self.probs.iter().map(|p| categorical(p, rng)).collect() }
    }
}

fn categorical(p: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn uniform_draw(spec: &VariableSpec, rng: &mut impl Rng) -> Sample {
    let x = spec.lower.iter().zip(&spec.upper).map(|(&l, &u)| if l < u { rng.random_range(l..=u) } else { l }).collect();
    let k = spec.categories.iter().map(|c| rng.random_range(0..c.len())).collect();
    Sample { x, k }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CemConfig {
    pub population: usize,
    pub elite_frac: f64,
    pub max_iters: usize,
    /// Stop once the elite mean score improves by less than this.
    pub stop_tol: f64,
    pub seed: u64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self { population: 1000, elite_frac: 0.3, max_iters: 300, stop_tol: 1e-3, seed: 0 }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 10 {
            return Err(Error::Config(format!("population must be at least 10, got {}", self.population)));
        }
        if !(self.elite_frac > 0.0 && self.elite_frac < 1.0) {
            return Err(Error::Config(format!("elite fraction must lie in (0, 1), got {}", self.elite_frac)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn elites(&self) -> usize {
        ((self.elite_frac * self.population as f64).ceil() as usize).clamp(2, self.population)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CemTraceRow {
    pub iteration: usize,
    /// Best score seen so far.
    pub best: f64,
    pub elite_mean: f64,
    pub mean: Vec<f64>,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CemResult {
    pub best: Sample,
    pub score: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<CemTraceRow>,
}

impl CemResult {
    pub fn trace_csv(&self) -> String {
        let n = self.trace.first().map_or(0, |r| r.mean.len());
        let mut out = String::from("iteration,best,elite_mean,entropy");
        for i in 0..n {
            let _ = write!(out, ",mu{i}");
        }
        out.push('\n');
        for r in &self.trace {
            let _ = write!(out, "{},{},{},{}", r.iteration, r.best, r.elite_mean, r.entropy);
            for m in &r.mean {
                let _ = write!(out, ",{m}");
            }
            out.push('\n');
        }
        out
    }
}

/// Maximize `objective` over `spec`.
///
/// The first population is uniform on the domain. The best sample found so
/// far replaces one member of every later population. The result is the
/// final distribution's mode unless the incumbent scores higher.
pub fn cem_optimize<F>(objective: F, spec: &VariableSpec, cfg: &CemConfig) -> Result<CemResult>
where
    F: Fn(&Sample) -> f64 + Sync,
{
    spec.validate()?;
    cfg.validate()?;
    if spec.is_empty() {
        let best = Sample { x: vec![], k: vec![] };
        let score = objective(&best);
        return Ok(CemResult { best, score, iterations: 0, evaluations: 1, trace: Vec::new() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_elite = cfg.elites();
    let mut dist = MixedDistribution::uniform(spec);
    let mut incumbent: Option<(Sample, f64)> = None;
    let mut trace = Vec::new();
    let mut evaluations = 0;
    let mut prev_mean = f64::NEG_INFINITY;

    for it in 0..cfg.max_iters {
        let factor = dist.factor();
        let draw = |rng: &mut ChaCha8Rng| if it == 0 { uniform_draw(spec, rng) } else { dist.draw(&factor, spec, rng) };
        let fresh = cfg.population - usize::from(incumbent.is_some());
        let mut samples: Vec<Sample> = (0..fresh).map(|_| draw(&mut rng)).collect();
        let mut scores = par::map(&samples, |s| objective(s));
        evaluations += samples.len();
        for _ in 0..REDRAWS {
            let bad: Vec<usize> = (0..scores.len()).filter(|&i| !scores[i].is_finite()).collect();
            if bad.is_empty() {
                break;
            }
            let redrawn: Vec<Sample> = bad.iter().map(|_| draw(&mut rng)).collect();
            let rescored = par::map(&redrawn, |s| objective(s));
            evaluations += redrawn.len();
            for ((i, s), v) in bad.into_iter().zip(redrawn).zip(rescored) {
                samples[i] = s;
                scores[i] = v;
            }
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("objective stayed non-finite after {REDRAWS} redraws")));
        }
        if let Some((s, v)) = &incumbent {
            samples.push(s.clone());
            scores.push(*v);
        }

        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let elites: Vec<&Sample> = order[..n_elite].iter().map(|&i| &samples[i]).collect();
        let elite_mean = order[..n_elite].iter().map(|&i| scores[i]).sum::<f64>() / n_elite as f64;
        let top = order[0];
        if incumbent.as_ref().map_or(true, |(_, v)| scores[top] > *v) {
            incumbent = Some((samples[top].clone(), scores[top]));
        }
        dist = MixedDistribution::fit(&elites, spec);
        trace.push(CemTraceRow {
            iteration: it,
            best: incumbent.as_ref().map_or(f64::NEG_INFINITY, |b| b.1),
            elite_mean,
            mean: dist.mean.iter().copied().collect(),
            entropy: dist.entropy(),
        });
        if elite_mean - prev_mean < cfg.stop_tol {
            break;
        }
        prev_mean = elite_mean;
    }

    let mode = dist.mode(spec);
    let mode_score = objective(&mode);
    evaluations += 1;
    let (best, score) = match incumbent {
        Some((s, v)) if !(mode_score >= v) => (s, v),
        _ => (mode, mode_score),
    };
    Ok(CemResult { best, score, iterations: trace.len(), evaluations, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(seed: u64) -> CemConfig {
        CemConfig { seed, ..CemConfig::default() }
    }

    #[test]
    fn quadratic_bowl() {
        let spec = VariableSpec::new(vec![-1.0; 2], vec![1.0; 2], vec![]).unwrap();
        let r = cem_optimize(|s| -(s.x[0].powi(2) + s.x[1].powi(2)), &spec, &cfg(0)).unwrap();
        assert!(r.best.x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-2, "{:?}", r.best);
    }

    #[test]
    fn discrete_only_picks_best_category() {
        let table = [-1.0, -0.2, 0.0, -3.0];
        let spec = VariableSpec::new(vec![], vec![], vec![vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
        let r = cem_optimize(|s| table[s.k[0]], &spec, &cfg(1)).unwrap();
        let exhaustive = (0..4).max_by(|&a, &b| table[a].total_cmp(&table[b])).unwrap();
        assert_eq!(r.best.k[0], exhaustive);
        assert_eq!(r.best.k[0], 2);
    }

    #[test]
    fn mixed_matches_grid_search() {
        let c = [-0.5, 0.0, 0.25, 0.5];
        let spec = VariableSpec::new(vec![-1.0], vec![1.0], vec![c.to_vec()]).unwrap();
        let f = |s: &Sample| -(s.x[0] - c[s.k[0]]).powi(2);
        let r = cem_optimize(f, &spec, &cfg(2)).unwrap();
        let grid_best = (0..4)
            .flat_map(|k| (0..=2000).map(move |i| (k, -1.0 + i as f64 / 1000.0)))
            .map(|(k, x)| f(&Sample { x: vec![x], k: vec![k] }))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(r.score >= -1e-3);
        assert!((r.score - grid_best).abs() <= 1e-3);
    }

    #[test]
    fn non_finite_samples_are_redrawn() {
        let spec = VariableSpec::new(vec![-1.0], vec![1.0], vec![]).unwrap();
        let r = cem_optimize(|s| if s.x[0] < -0.9 { f64::NAN } else { -(s.x[0] - 0.3).abs() }, &spec, &cfg(3)).unwrap();
        assert!((r.best.x[0] - 0.3).abs() < 1e-2);
        let err = cem_optimize(|_| f64::INFINITY, &spec, &cfg(3)).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn config_checks() {
        let spec = VariableSpec::new(vec![0.0], vec![1.0], vec![]).unwrap();
        for bad in [
            CemConfig { population: 5, ..CemConfig::default() },
            CemConfig { elite_frac: 1.0, ..CemConfig::default() },
            CemConfig { max_iters: 0, ..CemConfig::default() },
        ] {
            assert!(cem_optimize(|_| 0.0, &spec, &bad).is_err());
        }
        assert!(VariableSpec::new(vec![1.0], vec![0.0], vec![]).is_err());
        assert!(VariableSpec::new(vec![], vec![], vec![vec![]]).is_err());
        let empty = VariableSpec::new(vec![], vec![], vec![]).unwrap();
        let r = cem_optimize(|_| 2.5, &empty, &CemConfig::default()).unwrap();
        assert_eq!((r.score, r.evaluations, r.iterations), (2.5, 1, 0));
    }

    #[test]
    fn trace_csv_has_a_row_per_iteration() {
        let spec = VariableSpec::new(vec![-1.0], vec![1.0], vec![vec![0.0, 1.0]]).unwrap();
        let r = cem_optimize(|s| -s.x[0].abs() + s.k[0] as f64, &spec, &CemConfig { population: 50, ..cfg(4) }).unwrap();
        let csv = r.trace_csv();
        assert!(csv.starts_with("iteration,best,elite_mean,entropy,mu0\n"));
        assert_eq!(csv.lines().count(), r.iterations + 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn best_is_monotone_and_distribution_valid(
            seed in 0u64..1000,
            cx in -1.0f64..1.0,
            w in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let spec = VariableSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![vec![0.0, 1.0, 2.0]]).unwrap();
            let f = |s: &Sample| -(s.x[0] - cx).powi(2) - s.x[1].abs() + w[s.k[0]];
            let c = CemConfig { population: 40, max_iters: 15, stop_tol: -1.0, ..cfg(seed) };
            let r = cem_optimize(f, &spec, &c).unwrap();
            for pair in r.trace.windows(2) {
                prop_assert!(pair[1].best >= pair[0].best);
            }
            prop_assert!(r.score >= r.trace.last().unwrap().best);
            let again = cem_optimize(f, &spec, &c).unwrap();
            prop_assert_eq!(&r.best, &again.best);
            prop_assert_eq!(r.score, again.score);
        }

        #[test]
        fn fitted_distribution_is_valid(pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0usize..4), 2..30)) {
            let spec = VariableSpec::new(vec![-1.0; 2], vec![1.0; 2], vec![vec![0.0; 4]]).unwrap();
            let samples: Vec<Sample> = pts.iter().map(|&(a, b, k)| Sample { x: vec![a, b], k: vec![k] }).collect();
            let refs: Vec<&Sample> = samples.iter().collect();
            let d = MixedDistribution::fit(&refs, &spec);
            prop_assert!((d.cov.clone() - d.cov.transpose()).abs().max() <= 1e-15);
            prop_assert!(d.cov.clone().symmetric_eigen().eigenvalues.min() >= 0.0);
            let p = &d.probs[0];
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(p.iter().all(|&v| v > 0.0));
        }
    }
}
