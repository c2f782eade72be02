//! Projective (Hannan) and coupling (Wu) dependence coefficients, the
//! covariance sums, and the long-run variance `σ² = Σ_j Cov(X_0, X_j)`.
//!
//! Closed forms cover the linear, Volterra and interval-construction
//! families. Anything else falls back to Monte Carlo; in particular the
//! projection norms `‖P_0 X_i‖_p` are estimated with a nested scheme in which
//! the outer loop draws the conditioning innovations and the inner loop
//! redraws the rest, sharing each inner redraw across all `2^d` terms of
//! the alternating sum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{IntervalModel, FieldModel, VolterraField};
use crate::innovations::{stream_seed, InnovationField, InnovationSource, LatticePoint};
use crate::parallel::map_indexed;
use crate::stats::{bootstrap_se, Moments};
use crate::weights::for_each_in_box;

const FRESH_SALT: u64 = 0x5851_F42D_4C95_7F2D;
const BOOTSTRAP_SALT: u64 = 0x2545_F491_4F6C_DD1D;

/// A value with its Monte Carlo standard error (zero when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_error: 0.0 }
    }

    pub fn is_exact(&self) -> bool {
        self.std_error == 0.0
    }

    /// `|self − target| ≤ k·SE + abs_tol`.
    pub fn agrees_with(&self, target: f64, k: f64, abs_tol: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error + abs_tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    /// Sites `|i|_∞ ≤ window_radius` enter every truncated sum.
    pub window_radius: i64,
    pub n_outer: usize,
    pub n_inner: usize,
    /// Replications for covariance and coupling estimates.
    pub n_samples: usize,
    pub seed: u64,
    pub workers: usize,
    pub bootstrap: usize,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            window_radius: 3,
            n_outer: 2000,
            n_inner: 32,
            n_samples: 10_000,
            seed: 1,
            workers: 0,
            bootstrap: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub model: String,
    pub method: Method,
    pub window_radius: i64,
    /// `Δ_p(X)` keyed by `p`.
    pub delta_p: BTreeMap<u32, Estimate>,
    /// `Σ_j ‖X_j − X_j*‖_p` keyed by `p`.
    pub wu_p: BTreeMap<u32, Estimate>,
    pub cov_sum_abs: Estimate,
    pub sigma2: Estimate,
    /// Set when the outermost shell of a truncated Monte Carlo sum carries
    /// more than 10% of the total.
    pub tail_warning: bool,
    /// `Σ_j |Cov(X_0, X_j)| ≤ Δ_2²`, within 3 SE for estimated entries.
    pub covariance_bound_holds: Option<bool>,
}

/// `Δ_p = m_p^{1/p} Σ_i |a_i|` for linear fields.
pub fn delta_p_analytic(model: &FieldModel, p: u32) -> Result<f64> {
    let kernel = model
        .as_kernel()
        .ok_or_else(|| Error::Unsupported(format!("no closed-form Δ_p for the {} family", model.family())))?;
    Ok(model.innovation().spec.abs_moment(p)?.powf(1.0 / p as f64) * kernel.l1())
}

/// `Cov(X_0, X_j)` for every `j` with a nonzero value.
pub fn covariances(model: &FieldModel) -> Result<BTreeMap<LatticePoint, f64>> {
    let mut out: BTreeMap<LatticePoint, f64> = BTreeMap::new();
    let m2 = model.innovation().spec.abs_moment(2)?;
    let mut add = |j: Vec<i64>, v: f64| *out.entry(LatticePoint(j)).or_insert(0.0) += v;
    match model {
        FieldModel::Kernel(_) | FieldModel::Difference(_) => {
            let kernel = model.as_kernel().unwrap();
            for (k, a) in kernel.terms() {
                for (k2, a2) in kernel.terms() {
                    add(diff(&k2.0, &k.0), m2 * a * a2);
                }
            }
        }
        FieldModel::Volterra(v) => {
            for (k, a) in v.linear.terms() {
                for (k2, a2) in v.linear.terms() {
                    add(diff(&k2.0, &k.0), m2 * a * a2);
                }
            }
            for (k, l, c) in &v.pairs {
                for (k2, l2, c2) in &v.pairs {
                    let (jk, jl) = (diff(&k2.0, &k.0), diff(&l2.0, &l.0));
                    if jk == jl {
                        add(jk, m2 * m2 * c * c2);
                    }
                    let (jx, jy) = (diff(&l2.0, &k.0), diff(&k2.0, &l.0));
                    if jx == jy {
                        add(jx, m2 * m2 * c * c2);
                    }
                }
            }
        }
        FieldModel::Interval(e) => {
            for (a, &n) in e.alpha.iter().zip(&e.n_seq) {
                add(vec![0], 2.0 * a * a);
                add(vec![n], -a * a);
                add(vec![-n], -a * a);
            }
        }
    }
    out.retain(|_, v| *v != 0.0);
    Ok(out)
}

fn diff(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Exact `σ² = Σ_j Cov(X_0, X_j)`.
pub fn sigma2_exact(model: &FieldModel) -> Result<f64> {
    if let Some(kernel) = model.as_kernel() {
        return Ok(model.innovation().spec.abs_moment(2)? * kernel.sum().powi(2));
    }
    Ok(covariances(model)?.values().sum())
}

/// Exact `Σ_j |Cov(X_0, X_j)|`.
pub fn cov_sum_abs_exact(model: &FieldModel) -> Result<f64> {
    Ok(covariances(model)?.values().map(|v| v.abs()).sum())
}

type PairCoefficients = BTreeMap<(Vec<i64>, Vec<i64>), f64>;

/// `‖P_0 X_i‖_2` for a Volterra field, keyed by `i`.
///
/// The product `ε_u ε_v` (with `u ≠ v`) survives `P_0` iff the componentwise
/// maximum of `u` and `v` is the origin, and the surviving terms are
/// orthogonal unless they name the same unordered pair.
pub fn volterra_projection_norms(v: &VolterraField) -> Result<BTreeMap<LatticePoint, f64>> {
    let m2 = v.innovation.spec.abs_moment(2)?;
    let mut linear: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (k, a) in v.linear.terms() {
        *linear.entry(k.0.clone()).or_insert(0.0) += a;
    }
    // i ↦ {unordered pair} ↦ combined coefficient
    let mut quad: BTreeMap<Vec<i64>, PairCoefficients> = BTreeMap::new();
    for (k, l, c) in &v.pairs {
        let i: Vec<i64> = k.0.iter().zip(&l.0).map(|(a, b)| *a.min(b)).collect();
        let (u, w) = (diff(&i, &k.0), diff(&i, &l.0));
        let key = if u <= w { (u, w) } else { (w, u) };
        *quad.entry(i).or_default().entry(key).or_insert(0.0) += c;
    }
    let mut sites: Vec<Vec<i64>> = linear.keys().chain(quad.keys()).cloned().collect();
    sites.sort();
    sites.dedup();
    Ok(sites
        .into_iter()
        .map(|i| {
            let a = linear.get(&i).copied().unwrap_or(0.0);
            let q: f64 = quad.get(&i).map_or(0.0, |m| m.values().map(|c| c * c).sum());
            let norm = (m2 * a * a + m2 * m2 * q).sqrt();
            (LatticePoint(i), norm)
        })
        .filter(|(_, v)| *v != 0.0)
        .collect())
}

/// `‖X_j − X_j*‖_2` for a Volterra field, keyed by `j`.
pub fn volterra_coupling_norms(v: &VolterraField) -> Result<BTreeMap<LatticePoint, f64>> {
    let m2 = v.innovation.spec.abs_moment(2)?;
    let mut linear: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (k, a) in v.linear.terms() {
        *linear.entry(k.0.clone()).or_insert(0.0) += a;
    }
    // j ↦ partner site ↦ combined coefficient of ε_0 ε_partner in X_j
    let mut quad: BTreeMap<Vec<i64>, BTreeMap<Vec<i64>, f64>> = BTreeMap::new();
    for (k, l, c) in &v.pairs {
        *quad.entry(k.0.clone()).or_default().entry(diff(&k.0, &l.0)).or_insert(0.0) += c;
        *quad.entry(l.0.clone()).or_default().entry(diff(&l.0, &k.0)).or_insert(0.0) += c;
    }
    let mut sites: Vec<Vec<i64>> = linear.keys().chain(quad.keys()).cloned().collect();
    sites.sort();
    sites.dedup();
    Ok(sites
        .into_iter()
        .map(|j| {
            let a = linear.get(&j).copied().unwrap_or(0.0);
            let q: f64 = quad.get(&j).map_or(0.0, |m| m.values().map(|c| c * c).sum());
            (LatticePoint(j), (2.0 * m2 * (a * a + m2 * q)).sqrt())
        })
        .filter(|(_, v)| *v != 0.0)
        .collect())
}

/// `E|Σ_k w_k ζ^(k)|^p` with the ζ's of one site, by enumerating label cells.
fn interval_layer_moment(model: &IntervalModel, weights: &[f64], p: u32) -> f64 {
    fn rec(model: &IntervalModel, w: &[f64], p: u32, k: usize, acc: f64, prob: f64) -> f64 {
        if k == w.len() {
            return prob * acc.abs().powi(p as i32);
        }
        let d = model.d_seq[k];
        let z = 1.0 / d.sqrt();
        let mut s = 0.0;
        if w[k] == 0.0 {
            return rec(model, w, p, k + 1, acc, prob);
        }
        s += rec(model, w, p, k + 1, acc + w[k] * z, prob * d / 2.0);
        s += rec(model, w, p, k + 1, acc - w[k] * z, prob * d / 2.0);
        if d < 1.0 {
            s += rec(model, w, p, k + 1, acc, prob * (1.0 - d));
        }
        s
    }
    rec(model, weights, p, 0, 0.0, 1.0)
}

/// `‖P_0 X_i‖_p` for the interval-construction model.
///
/// `P_0 X_0 = Σ_k α_k ζ_0^(k)` and `P_0 X_{n_ℓ} = −α_ℓ ζ_0^(ℓ)`; every other
/// projection vanishes.
pub fn interval_projection_norms(model: &IntervalModel, p: u32) -> BTreeMap<LatticePoint, f64> {
    let inv = 1.0 / p as f64;
    let mut out = BTreeMap::new();
    out.insert(LatticePoint(vec![0]), interval_layer_moment(model, &model.alpha, p).powf(inv));
    for (l, (&a, &n)) in model.alpha.iter().zip(&model.n_seq).enumerate() {
        let mut w = vec![0.0; model.k_max()];
        w[l] = a;
        out.insert(LatticePoint(vec![n]), interval_layer_moment(model, &w, p).powf(inv));
    }
    out
}

/// Closed-form `Δ_p` where available, otherwise `None`.
pub fn delta_p_exact(model: &FieldModel, p: u32) -> Result<Option<f64>> {
    match model {
        FieldModel::Kernel(_) | FieldModel::Difference(_) => delta_p_analytic(model, p).map(Some),
        FieldModel::Volterra(v) if p == 2 => Ok(Some(volterra_projection_norms(v)?.values().sum())),
        FieldModel::Interval(e) => Ok(Some(interval_projection_norms(e, p).values().sum())),
        _ => Ok(None),
    }
}

/// Closed-form `Σ_j ‖X_j − X_j*‖_p` where available.
pub fn wu_exact(model: &FieldModel, p: u32) -> Result<Option<f64>> {
    match model {
        FieldModel::Kernel(_) | FieldModel::Difference(_) => {
            let kernel = model.as_kernel().unwrap();
            Ok(Some(model.innovation().spec.coupling_norm(p)? * kernel.l1()))
        }
        FieldModel::Volterra(v) if p == 2 => Ok(Some(volterra_coupling_norms(v)?.values().sum())),
        _ => Ok(None),
    }
}

/// Innovations `ε_u` for `u ≤ cut` (componentwise), fresh draws elsewhere.
struct Spliced<'a> {
    base: &'a InnovationField,
    fresh: &'a InnovationField,
    cut: &'a [i64],
}

impl InnovationSource for Spliced<'_> {
    #[inline]
    fn innovation(&self, site: &[i64]) -> f64 {
        if site.iter().zip(self.cut).all(|(u, c)| u <= c) {
            self.base.value_unchecked(site)
        } else {
            self.fresh.value_unchecked(site)
        }
    }
}

fn window_sites(dim: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for_each_in_box(&vec![(-radius, radius); dim], |s| out.push(s.to_vec()));
    out
}

/// Nested Monte Carlo estimate of `Σ_{|i|_∞ ≤ R} ‖P_0 X_i‖_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionEstimate {
    pub total: Estimate,
    pub per_site: Vec<(LatticePoint, f64)>,
    /// Share of the total carried by sites with `|i|_∞ = R`.
    pub last_shell_fraction: f64,
    pub tail_warning: bool,
}

/// Estimates `‖P_0 X_i‖_p` by nested Monte Carlo and sums over the window.
///
/// For each outer draw, `D_r = Σ_δ (−1)^{|δ|} X_i(ε on {u ≤ −δ}, η_r elsewhere)`
/// averages to `P̂ ≈ P_0 X_i`. The plug-in `|P̂|^p` is corrected by the
/// second-order term `½ p (p−1) |P̂|^{p−2} s²_D / n_inner`, which removes the
/// bias exactly for `p = 2`.
pub fn delta_p_monte_carlo(model: &FieldModel, p: u32, opts: &MonteCarloOptions) -> Result<ProjectionEstimate> {
    if opts.n_inner < 2 {
        return Err(Error::Config(format!("n_inner = {} must be at least 2", opts.n_inner)));
    }
    if opts.n_outer < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: opts.n_outer });
    }
    if opts.window_radius < 0 {
        return Err(Error::Domain("window radius must be nonnegative".into()));
    }
    let d = model.dim();
    let sites = window_sites(d, opts.window_radius);
    let deltas = (0..(1u32 << d))
        .map(|mask| (0..d).map(|q| -(((mask >> q) & 1) as i64)).collect::<Vec<i64>>())
        .collect::<Vec<_>>();
    let pf = p as f64;
    let template = model.innovation();

    let rows: Vec<Vec<f64>> = map_indexed(opts.n_outer, opts.workers, |o| {
        let base_seed = stream_seed(opts.seed, o as u64);
        let base = template.reseeded(base_seed);
        let fresh: Vec<InnovationField> = (0..opts.n_inner)
            .map(|r| template.reseeded(stream_seed(base_seed ^ FRESH_SALT, r as u64)))
            .collect();
        sites
            .iter()
            .map(|i| {
                let mut m = Moments::default();
                for f in &fresh {
                    let mut dsum = 0.0;
                    for cut in &deltas {
                        let sign = if cut.iter().filter(|c| **c != 0).count() % 2 == 0 { 1.0 } else { -1.0 };
                        let src = Spliced { base: &base, fresh: f, cut };
                        dsum += sign * model.evaluate_with(&src, i);
                    }
                    m.push(dsum);
                }
                let ph = m.mean.abs();
                let spread = m.variance() / opts.n_inner as f64;
                let corr = if p == 2 { spread } else { 0.5 * pf * (pf - 1.0) * ph.powf(pf - 2.0) * spread };
                ph.powf(pf) - corr
            })
            .collect()
    });

    let total_of = |idx: &[usize]| -> (f64, Vec<f64>) {
        let per: Vec<f64> = (0..sites.len())
            .map(|s| {
                let mean = idx.iter().map(|&o| rows[o][s]).sum::<f64>() / idx.len() as f64;
                mean.max(0.0).powf(1.0 / pf)
            })
            .collect();
        (per.iter().sum(), per)
    };
    let all: Vec<usize> = (0..opts.n_outer).collect();
    let (total, per) = total_of(&all);
    let se = bootstrap_se(opts.n_outer, opts.bootstrap, opts.seed ^ BOOTSTRAP_SALT, |idx| total_of(idx).0);
    let shell: f64 = sites
        .iter()
        .zip(&per)
        .filter(|(s, _)| s.iter().map(|c| c.abs()).max().unwrap_or(0) == opts.window_radius)
        .map(|(_, v)| v)
        .sum();
    let frac = if total > 0.0 { shell / total } else { 0.0 };
    Ok(ProjectionEstimate {
        total: Estimate { value: total, std_error: se },
        per_site: sites.into_iter().map(LatticePoint).zip(per).collect(),
        last_shell_fraction: frac,
        tail_warning: opts.window_radius > 0 && frac > 0.1,
    })
}

/// Monte Carlo `Σ_{|j|_∞ ≤ R} ‖X_j − X_j*‖_p` with a bootstrap standard error.
pub fn wu_monte_carlo(model: &FieldModel, p: u32, opts: &MonteCarloOptions) -> Result<Estimate> {
    if opts.n_samples < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: opts.n_samples });
    }
    let sites = window_sites(model.dim(), opts.window_radius);
    let pf = p as f64;
    let template = model.innovation();
    let rows: Vec<Vec<f64>> = map_indexed(opts.n_samples, opts.workers, |s| {
        let field = template.reseeded(stream_seed(opts.seed, s as u64));
        let star = field.star_copy();
        sites
            .iter()
            .map(|j| (model.evaluate_with(&field, j) - model.evaluate_with(&star, j)).abs().powf(pf))
            .collect()
    });
    let total_of = |idx: &[usize]| -> f64 {
        (0..sites.len())
            .map(|k| (idx.iter().map(|&s| rows[s][k]).sum::<f64>() / idx.len() as f64).powf(1.0 / pf))
            .sum()
    };
    let all: Vec<usize> = (0..opts.n_samples).collect();
    Ok(Estimate {
        value: total_of(&all),
        std_error: bootstrap_se(opts.n_samples, opts.bootstrap, opts.seed ^ BOOTSTRAP_SALT, total_of),
    })
}

/// Monte Carlo `(σ², Σ_j |Cov(X_0, X_j)|)` over `|j|_∞ ≤ R`.
pub fn covariance_monte_carlo(model: &FieldModel, opts: &MonteCarloOptions) -> Result<(Estimate, Estimate)> {
    if opts.n_samples < 2 {
        return Err(Error::InsufficientReplications { needed: 2, got: opts.n_samples });
    }
    let d = model.dim();
    let sites = window_sites(d, opts.window_radius);
    let origin = vec![0i64; d];
    let template = model.innovation();
    let rows: Vec<Vec<f64>> = map_indexed(opts.n_samples, opts.workers, |s| {
        let field = template.reseeded(stream_seed(opts.seed, s as u64));
        let x0 = model.evaluate_with(&field, &origin);
        sites.iter().map(|j| x0 * model.evaluate_with(&field, j)).collect()
    });
    let sigma: Moments = rows.iter().map(|r| r.iter().sum::<f64>()).collect();
    let abs_of = |idx: &[usize]| -> f64 {
        (0..sites.len())
            .map(|k| (idx.iter().map(|&s| rows[s][k]).sum::<f64>() / idx.len() as f64).abs())
            .sum()
    };
    let all: Vec<usize> = (0..opts.n_samples).collect();
    Ok((
        Estimate { value: sigma.mean, std_error: sigma.std_error() },
        Estimate {
            value: abs_of(&all),
            std_error: bootstrap_se(opts.n_samples, opts.bootstrap, opts.seed ^ BOOTSTRAP_SALT, abs_of),
        },
    ))
}

/// `σ²`: exact where a closed form exists, Monte Carlo otherwise.
pub fn sigma2(model: &FieldModel, opts: &MonteCarloOptions) -> Result<Estimate> {
    match sigma2_exact(model) {
        Ok(v) => Ok(Estimate::exact(v)),
        Err(_) => Ok(covariance_monte_carlo(model, opts)?.0),
    }
}

/// `Σ_j ‖X_j − X_j*‖_p`: exact where a closed form exists, Monte Carlo otherwise.
pub fn wu_coefficient(model: &FieldModel, p: u32, opts: &MonteCarloOptions) -> Result<Estimate> {
    match wu_exact(model, p)? {
        Some(v) => Ok(Estimate::exact(v)),
        None => wu_monte_carlo(model, p, opts),
    }
}

/// Full report over the requested moment orders.
pub fn dependence_report(model: &FieldModel, ps: &[u32], opts: &MonteCarloOptions) -> Result<DependenceReport> {
    let mut delta_p = BTreeMap::new();
    let mut wu_p = BTreeMap::new();
    let mut tail_warning = false;
    for &p in ps {
        let delta = match delta_p_exact(model, p)? {
            Some(v) => Estimate::exact(v),
            None => {
                let est = delta_p_monte_carlo(model, p, opts)?;
                tail_warning |= est.tail_warning;
                est.total
            }
        };
        delta_p.insert(p, delta);
        wu_p.insert(p, wu_coefficient(model, p, opts)?);
    }
    let (sigma2, cov_sum_abs) = match (sigma2_exact(model), cov_sum_abs_exact(model)) {
        (Ok(s), Ok(c)) => (Estimate::exact(s), Estimate::exact(c)),
        _ => covariance_monte_carlo(model, opts)?,
    };
    let covariance_bound_holds = delta_p.get(&2).map(|d2| {
        let bound = d2.value * d2.value;
        let slack = 3.0 * (cov_sum_abs.std_error + 2.0 * d2.value * d2.std_error) + 1e-12;
        cov_sum_abs.value <= bound + slack
    });
    let all_exact = delta_p.values().chain(wu_p.values()).all(Estimate::is_exact)
        && sigma2.is_exact()
        && cov_sum_abs.is_exact();
    Ok(DependenceReport {
        model: model.family().to_string(),
        method: if all_exact { Method::Analytic } else { Method::MonteCarlo },
        window_radius: opts.window_radius,
        delta_p,
        wu_p,
        cov_sum_abs,
        sigma2,
        tail_warning,
        covariance_bound_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Kernel;
    use crate::innovations::InnovationSpec;

    fn kernel_model(dim: usize, terms: Vec<(Vec<i64>, f64)>, spec: InnovationSpec) -> FieldModel {
        let f = InnovationField::new(spec, dim, 11).unwrap();
        FieldModel::kernel(Kernel::new(dim, terms).unwrap(), f).unwrap()
    }

    fn small_opts() -> MonteCarloOptions {
        MonteCarloOptions { window_radius: 2, n_outer: 400, n_inner: 16, n_samples: 4000, bootstrap: 100, ..Default::default() }
    }

    #[test]
    fn analytic_delta_examples() {
        let iid = kernel_model(1, vec![(vec![0], 1.0)], InnovationSpec::Rademacher);
        assert_eq!(delta_p_analytic(&iid, 2).unwrap(), 1.0);
        let dif = kernel_model(1, vec![(vec![0], 1.0), (vec![1], -1.0)], InnovationSpec::Rademacher);
        assert_eq!(delta_p_analytic(&dif, 2).unwrap(), 2.0);
        let diag = kernel_model(2, vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)], InnovationSpec::StandardGaussian);
        assert!((delta_p_analytic(&diag, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(delta_p_analytic(&iid, 5), Err(Error::UnsupportedMomentOrder { p: 5, .. })));
    }

    #[test]
    fn sigma2_examples() {
        let f = InnovationField::new(InnovationSpec::Rademacher, 1, 1).unwrap();
        let dif = FieldModel::difference(f).unwrap();
        assert_eq!(sigma2_exact(&dif).unwrap(), 0.0);
        let cov = covariances(&dif).unwrap();
        assert_eq!(cov[&LatticePoint(vec![0])], 2.0);
        assert_eq!(cov[&LatticePoint(vec![1])], -1.0);
        let two = kernel_model(2, vec![(vec![0, 0], 1.0), (vec![1, 0], 1.0)], InnovationSpec::StandardGaussian);
        assert!((sigma2_exact(&two).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn wu_kernel_gaussian() {
        let m = kernel_model(1, vec![(vec![0], 1.0), (vec![2], -0.5)], InnovationSpec::StandardGaussian);
        let w = wu_exact(&m, 2).unwrap().unwrap();
        assert!((w - 1.5 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn volterra_single_pair_projection() {
        let f = InnovationField::new(InnovationSpec::Rademacher, 1, 1).unwrap();
        let m = FieldModel::volterra(Kernel::new(1, vec![(vec![0], 0.0001)]).unwrap(), vec![(vec![0], vec![1], 1.0)], f)
            .unwrap();
        let FieldModel::Volterra(v) = &m else { unreachable!() };
        let norms = volterra_projection_norms(v).unwrap();
        assert!((norms[&LatticePoint(vec![0])] - (1.0f64 + 1e-8).sqrt()).abs() < 1e-12);
        assert_eq!(norms.len(), 1);
    }

    #[test]
    fn covariance_bound_for_closed_forms() {
        let f = InnovationField::new(InnovationSpec::StandardGaussian, 1, 1).unwrap();
        let models = vec![
            kernel_model(1, vec![(vec![0], 1.0), (vec![1], -0.4), (vec![3], 0.8)], InnovationSpec::Rademacher),
            FieldModel::volterra(
                Kernel::new(1, vec![(vec![0], 1.0), (vec![1], 0.5)]).unwrap(),
                vec![(vec![0], vec![1], 0.7), (vec![1], vec![0], -0.2), (vec![0], vec![2], 0.3)],
                f,
            )
            .unwrap(),
            FieldModel::Interval(IntervalModel::preset(crate::fields::IntervalPreset::Small, 3, 2).unwrap()),
        ];
        for m in models {
            let d2 = delta_p_exact(&m, 2).unwrap().unwrap();
            assert!(cov_sum_abs_exact(&m).unwrap() <= d2 * d2 + 1e-12, "{}", m.family());
        }
    }

    #[test]
    fn interval_projection_includes_lag_zero() {
        let m = IntervalModel::new(vec![0.5, 0.25], vec![2, 8], vec![1.0, 0.5], 1).unwrap();
        let norms = interval_projection_norms(&m, 2);
        assert!((norms[&LatticePoint(vec![0])] - (0.25f64 + 0.0625).sqrt()).abs() < 1e-14);
        assert!((norms[&LatticePoint(vec![2])] - 0.5).abs() < 1e-14);
        assert!((norms[&LatticePoint(vec![8])] - 0.25).abs() < 1e-14);
        // ‖ζ‖_4 = d^{1/4 − 1/2}
        let n4 = interval_projection_norms(&m, 4);
        assert!((n4[&LatticePoint(vec![8])] - 0.25 * 0.5f64.powf(-0.25)).abs() < 1e-14);
    }

    #[test]
    fn truncation_does_not_increase_delta() {
        let m = kernel_model(1, vec![(vec![0], 1.0), (vec![2], -0.7), (vec![-3], 0.2)], InnovationSpec::Rademacher);
        let full = delta_p_analytic(&m, 4).unwrap();
        for k in 0..4 {
            assert!(delta_p_analytic(&m.m_truncate(k).unwrap(), 4).unwrap() <= full + 1e-15);
        }
    }

    #[test]
    fn monte_carlo_delta_matches_kernel() {
        let m = kernel_model(1, vec![(vec![0], 1.0), (vec![1], -0.5)], InnovationSpec::StandardGaussian);
        let est = delta_p_monte_carlo(&m, 2, &small_opts()).unwrap();
        assert!(est.total.agrees_with(1.5, 3.0, 0.02), "{:?}", est.total);
        // i.i.d. field: nothing away from the origin
        let iid = kernel_model(1, vec![(vec![0], 1.0)], InnovationSpec::Rademacher);
        let est = delta_p_monte_carlo(&iid, 2, &small_opts()).unwrap();
        for (i, v) in &est.per_site {
            if i.0[0] != 0 {
                assert!(v.abs() < 1e-12, "{i}: {v}");
            }
        }
        assert!(!est.tail_warning);
    }

    #[test]
    fn monte_carlo_needs_two_inner() {
        let m = kernel_model(1, vec![(vec![0], 1.0)], InnovationSpec::Rademacher);
        let opts = MonteCarloOptions { n_inner: 1, ..small_opts() };
        assert!(delta_p_monte_carlo(&m, 2, &opts).is_err());
    }

    #[test]
    fn tail_warning_on_short_window() {
        let m = kernel_model(1, vec![(vec![0], 0.2), (vec![1], 1.0)], InnovationSpec::StandardGaussian);
        let opts = MonteCarloOptions { window_radius: 1, ..small_opts() };
        assert!(delta_p_monte_carlo(&m, 2, &opts).unwrap().tail_warning);
    }
}
