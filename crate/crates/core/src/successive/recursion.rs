//! Grid recursion for the density of the n-th passage time.
//!
//! With the restart kernel `f(t−s | s) = e^{−b²t/2} √s / (π t √(t−s))` the
//! convolution step reads
//!
//! ```text
//! f_{τ_n}(t) = e^{−b²t/2} / (π t) · ∫₀ᵗ g(s) (t − s)^{−1/2} ds,   g(s) = √s f_{τ_{n−1}}(s)
//! ```
//!
//! `g` is taken piecewise linear on a log-spaced working grid and the
//! `(t − s)^{−1/2}` weight is integrated exactly on every cell, so the
//! endpoint singularity costs no accuracy.

use rayon::prelude::*;

use super::{t2_conditional_survival, t2_defect};
use crate::error::{ensure, Error, Result};
use crate::linear_passage::{
    first_passage_cdf_unchecked, first_passage_density_unchecked, never_return_unchecked, no_zero_probability,
    PassageProblem,
};
use crate::numerics::QuadSpec;

/// Tabulated density on ascending abscissae.
///
/// `left_exponent` is the power `α` of the behaviour `f(t) ~ C t^α` below the
/// first abscissa; `+∞` declares a density that vanishes faster than any power
/// (every `τ_n` density does).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    abscissae: Vec<f64>,
    values: Vec<f64>,
    left_exponent: f64,
}

impl DensityGrid {
    pub fn new(abscissae: Vec<f64>, values: Vec<f64>, left_exponent: f64) -> Result<Self> {
        ensure(abscissae.len() >= 2 && abscissae.len() == values.len(), || {
            format!("density grid needs matching arrays of length >= 2, got {} and {}", abscissae.len(), values.len())
        })?;
        ensure(abscissae.iter().all(|t| t.is_finite()), || "non-finite abscissa".into())?;
        ensure(abscissae.windows(2).all(|w| w[0] < w[1]), || "abscissae must be strictly increasing".into())?;
        ensure(values.iter().all(|v| v.is_finite() && *v >= 0.0), || {
            "density values must be finite and non-negative".into()
        })?;
        ensure(left_exponent > -1.0, || format!("left exponent {left_exponent} is not integrable"))?;
        Ok(Self { abscissae, values, left_exponent })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_exponent(&self) -> f64 {
        self.left_exponent
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    /// Mass below the first abscissa implied by the declared power law.
    pub fn head_mass(&self) -> f64 {
        if self.left_exponent.is_infinite() {
            return 0.0;
        }
        let t0 = self.abscissae[0];
        if t0 <= 0.0 {
            return 0.0;
        }
        t0 * self.values[0] / (self.left_exponent + 1.0)
    }

    /// Trapezoid mass over the grid plus the head correction.
    pub fn mass(&self) -> f64 {
        let body: f64 = self
            .abscissae
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
            .sum();
        body + self.head_mass()
    }

    /// Linear interpolation inside the grid, the declared power law below it,
    /// `None` above the last abscissa.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let (ts, fs) = (&self.abscissae, &self.values);
        if t > *ts.last()? {
            return None;
        }
        if t < ts[0] {
            if self.left_exponent.is_infinite() || t <= 0.0 {
                return Some(0.0);
            }
            return Some(fs[0] * (t / ts[0]).powf(self.left_exponent));
        }
        let k = ts.partition_point(|&s| s <= t).min(ts.len() - 1).max(1);
        let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
        Some(fs[k - 1] + w * (fs[k] - fs[k - 1]))
    }
}

/// Law of `τ_n`: density on a grid plus the mass at `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct NthPassageLaw {
    pub n: usize,
    pub density: DensityGrid,
    pub atom_at_infinity: f64,
}

/// Working-grid resolution for [`PassageRecursion`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionConfig {
    pub points_per_decade: usize,
    /// Lower end of the working grid; defaults to `10⁻³·min((a−x)², |(a−x)/b|)`.
    pub lower: Option<f64>,
    /// Truncation point `T_max`; defaults to `10⁶·|(a−x)/b|`, or `10⁶·(a−x)²`
    /// when `b = 0`.
    pub upper: Option<f64>,
}

impl Default for RecursionConfig {
    fn default() -> Self {
        Self { points_per_decade: 400, lower: None, upper: None }
    }
}

/// Tolerance on `|mass-based atom − analytic atom|` before the grid is
/// declared too coarse.
pub const ATOM_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone)]
struct Level {
    values: Vec<f64>,
    /// `P(T_max < τ_n < ∞)`
    tail: f64,
    atom: f64,
}

/// Successive densities `f_{τ_1}, f_{τ_2}, …` on a shared log-spaced grid.
#[derive(Debug, Clone)]
pub struct PassageRecursion {
    problem: PassageProblem,
    spec: QuadSpec,
    grid: Vec<f64>,
    log_step: f64,
    levels: Vec<Level>,
}

impl PassageRecursion {
    pub fn new(p: &PassageProblem, spec: &QuadSpec) -> Result<Self> {
        Self::with_config(p, spec, RecursionConfig::default())
    }

    pub fn with_config(p: &PassageProblem, spec: &QuadSpec, config: RecursionConfig) -> Result<Self> {
        p.require_recurrent()?;
        let q = p.canonical();
        let d = q.gap();
        let scale = if q.b == 0.0 { d * d } else { d / q.b.abs() };
        let lower = config.lower.unwrap_or(1e-3 * scale.min(d * d));
        let upper = config.upper.unwrap_or(1e6 * scale);
        ensure(lower > 0.0 && upper > lower && upper.is_finite(), || {
            format!("working grid needs 0 < lower < upper < ∞, got [{lower}, {upper}]")
        })?;
        ensure(config.points_per_decade >= 10, || "points_per_decade must be at least 10".into())?;

        let decades = (upper / lower).log10();
        let cells = (decades * config.points_per_decade as f64).ceil() as usize;
        let log_step = (upper / lower).ln() / cells as f64;
        let grid: Vec<f64> = (0..=cells).map(|k| lower * (k as f64 * log_step).exp()).collect();

        let values: Vec<f64> = grid.iter().map(|&t| first_passage_density_unchecked(&q, t)).collect();
        let tail = 1.0 - first_passage_cdf_unchecked(&q, upper);
        let levels = vec![Level { values, tail, atom: 0.0 }];
        Ok(Self { problem: q, spec: *spec, grid, log_step, levels })
    }

    pub fn problem(&self) -> &PassageProblem {
        &self.problem
    }

    pub fn working_grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn upper(&self) -> f64 {
        *self.grid.last().expect("grid has at least two points")
    }

    /// Density of `τ_n` on the working grid.
    pub fn level(&mut self, n: usize) -> Result<&[f64]> {
        self.ensure_level(n)?;
        Ok(&self.levels[n - 1].values)
    }

    /// Mass of `τ_n` at `+∞` (0 for `n = 1`: the problem is recurrent).
    pub fn atom(&mut self, n: usize) -> Result<f64> {
        self.ensure_level(n)?;
        Ok(self.levels[n - 1].atom)
    }

    /// `f_{τ_n}(t)` at an arbitrary `t` in `(0, T_max]`.
    pub fn density_at(&mut self, n: usize, t: f64) -> Result<f64> {
        ensure(n >= 1, || "passage index n must be >= 1".into())?;
        ensure(t > 0.0 && t <= self.upper(), || format!("t = {t} outside the working range (0, {}]", self.upper()))?;
        if n == 1 {
            return Ok(first_passage_density_unchecked(&self.problem, t));
        }
        self.ensure_level(n - 1)?;
        Ok(self.convolve_at(&self.levels[n - 2].values, t))
    }

    /// Law of `τ_n` sampled on `grid`.
    pub fn law(&mut self, n: usize, grid: &[f64]) -> Result<NthPassageLaw> {
        ensure(n >= 1, || "passage index n must be >= 1".into())?;
        ensure(grid.iter().all(|&t| t > 0.0 && t <= self.upper()), || {
            format!("output grid must lie in (0, {}]", self.upper())
        })?;
        self.ensure_level(n)?;
        let values: Vec<f64> = if n == 1 {
            grid.iter().map(|&t| first_passage_density_unchecked(&self.problem, t)).collect()
        } else {
            let prev = &self.levels[n - 2].values;
            grid.par_iter().map(|&t| self.convolve_at(prev, t)).collect()
        };
        Ok(NthPassageLaw {
            n,
            density: DensityGrid::new(grid.to_vec(), values, f64::INFINITY)?,
            atom_at_infinity: self.levels[n - 1].atom,
        })
    }

    /// `P(T_n ≤ t) = ∫ f_{τ_{n−1}}(s)·(1 − ∫₀^s ψ_{s+t}(y) dy) ds` for `n ≥ 2`.
    pub fn tn_cdf(&mut self, n: usize, t: f64) -> Result<f64> {
        ensure(n >= 2, || format!("tn_cdf needs n >= 2, got {n}"))?;
        ensure(t >= 0.0, || format!("tn_cdf: t must be >= 0, got {t}"))?;
        if t == 0.0 {
            return Ok(0.0);
        }
        self.ensure_level(n - 1)?;
        let b = self.problem.b;
        let spec = self.spec;
        let prev = &self.levels[n - 2];
        let peak = prev.values.iter().zip(&self.grid).map(|(f, s)| f * s).fold(0.0, f64::max);
        let weighted: Vec<f64> = self
            .grid
            .par_iter()
            .zip(prev.values.par_iter())
            .map(|(&s, &f)| {
                if s * f <= 1e-16 * peak {
                    return Ok(0.0);
                }
                Ok(s * f * (1.0 - no_zero_probability(b, s, t, &spec)?))
            })
            .collect::<Result<_>>()?;
        let body = self.log_trapezoid(&weighted);
        let tail = prev.tail * (1.0 - no_zero_probability(b, self.upper(), t, &spec)?);
        Ok((body + tail).clamp(0.0, 1.0))
    }

    fn log_trapezoid(&self, weighted: &[f64]) -> f64 {
        let inner: f64 = weighted.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
        inner * self.log_step
    }

    fn mass_of(&self, values: &[f64]) -> f64 {
        let weighted: Vec<f64> = self.grid.iter().zip(values).map(|(s, f)| s * f).collect();
        self.log_trapezoid(&weighted)
    }

    fn ensure_level(&mut self, n: usize) -> Result<()> {
        ensure(n >= 1, || "passage index n must be >= 1".into())?;
        while self.levels.len() < n {
            let next = self.next_level()?;
            self.levels.push(next);
        }
        Ok(())
    }

    fn next_level(&self) -> Result<Level> {
        let n = self.levels.len() + 1;
        let prev = self.levels.last().expect("level 1 is built on construction");
        let b = self.problem.b;
        let upper = self.upper();

        let values: Vec<f64> = self.grid.par_iter().map(|&t| self.convolve_at(&prev.values, t)).collect();

        // P(T_max < τ_n < ∞) = P(T_max < τ_{n−1} < ∞)
        //   + ∫₀^{T_max} f_{τ_{n−1}}(s)·P(T_max − s < T_n < ∞ | s) ds
        let restart_tail: Vec<f64> = if b == 0.0 {
            self.grid
                .iter()
                .zip(&prev.values)
                .map(|(&s, &f)| s * f * std::f64::consts::FRAC_2_PI * (s / upper).sqrt().min(1.0).asin())
                .collect()
        } else if 0.5 * b * b * upper > 700.0 {
            vec![0.0; self.grid.len()]
        } else {
            self.grid
                .par_iter()
                .zip(prev.values.par_iter())
                .map(|(&s, &f)| Ok(s * f * t2_conditional_survival(b, s, upper - s, &self.spec)?))
                .collect::<Result<_>>()?
        };
        let tail = prev.tail + self.log_trapezoid(&restart_tail);

        let mass = self.mass_of(&values);
        let mass_atom = 1.0 - mass - tail;

        // P(τ_n = ∞) = P(τ_{n−1} = ∞) + E[never-return probability at τ_{n−1}]
        let analytic_atom = if b == 0.0 {
            0.0
        } else if n == 2 {
            t2_defect(&self.problem, &self.spec)?
        } else {
            let weighted: Vec<f64> =
                self.grid.iter().zip(&prev.values).map(|(&s, &f)| s * f * never_return_unchecked(b, s)).collect();
            prev.atom + self.log_trapezoid(&weighted) + prev.tail * never_return_unchecked(b, upper)
        };
        if (mass_atom - analytic_atom).abs() > ATOM_TOLERANCE {
            return Err(Error::GridTooCoarse { n, mass_atom, analytic_atom });
        }
        let atom = if b == 0.0 { 0.0 } else { mass_atom.clamp(0.0, 1.0) };
        Ok(Level { values, tail, atom })
    }

    /// One convolution step evaluated at `t`, with `prev` on the working grid.
    fn convolve_at(&self, prev: &[f64], t: f64) -> f64 {
        let grid = &self.grid;
        if t <= grid[0] {
            // prev vanishes faster than any power below the grid
            return 0.0;
        }
        let damp = -0.5 * self.problem.b * self.problem.b * t;
        if damp < -745.0 {
            return 0.0;
        }
        let g = |j: usize| grid[j].sqrt() * prev[j];
        let k = grid.partition_point(|&s| s <= t);
        let mut sum = 0.0;
        for j in 0..k - 1 {
            sum += cell_weight(grid[j], grid[j + 1], g(j), g(j + 1), t);
        }
        let s_last = grid[k - 1];
        if s_last < t && k < grid.len() {
            let w = (t - s_last) / (grid[k] - s_last);
            let g_t = g(k - 1) + w * (g(k) - g(k - 1));
            sum += cell_weight(s_last, t, g(k - 1), g_t, t);
        }
        damp.exp() / (std::f64::consts::PI * t) * sum
    }
}

/// `∫_{s_a}^{s_b} g(s)·(t − s)^{−1/2} ds` for `g` linear between `g_a` and
/// `g_b`, `t ≥ s_b`, written without cancellation for `t ≫ s_b`.
#[inline]
fn cell_weight(s_a: f64, s_b: f64, g_a: f64, g_b: f64, t: f64) -> f64 {
    let h = s_b - s_a;
    let ra = (t - s_a).sqrt();
    let rb = (t - s_b).max(0.0).sqrt();
    let d = h / (ra + rb);
    let i0 = 2.0 * d;
    let i1 = 2.0 * d / 3.0 * (ra * d + h);
    g_a * i0 + (g_b - g_a) / h * i1
}

/// Law of `τ_n` on `grid`, computed by the grid recursion.
pub fn nth_passage_law(p: &PassageProblem, n: usize, grid: &[f64], spec: &QuadSpec) -> Result<NthPassageLaw> {
    ensure(n >= 1, || "passage index n must be >= 1".into())?;
    ensure(!grid.is_empty(), || "output grid is empty".into())?;
    let hi = grid.iter().copied().fold(0.0, f64::max);
    let defaults = PassageRecursion::new(p, spec)?;
    let config = RecursionConfig { upper: Some(defaults.upper().max(hi)), ..RecursionConfig::default() };
    PassageRecursion::with_config(p, spec, config)?.law(n, grid)
}

/// `P(T_n ≤ t)` for `n ≥ 2`, built on the `(n−1)`-th grid law.
pub fn tn_cdf(p: &PassageProblem, n: usize, t: f64, spec: &QuadSpec) -> Result<f64> {
    PassageRecursion::new(p, spec)?.tn_cdf(n, t)
}
