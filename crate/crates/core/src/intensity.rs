//! CPP intensity measures given by their tails, the population-model
//! equation for W, and monotone time changes.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::comb::{Comb, Tooth};
use crate::error::{bail, Result};
use crate::mutation::MutationMeasure;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tail ν̄(x) = ν([x, ∞)) of a CPP intensity measure, with its inverse.
#[derive(Clone)]
pub enum IntensityModel {
    /// ν̄(x) = c / x. The Brownian CPP has c = 1/2 under the excursion
    /// normalization and c = 1 for ν(dx) = dx/x².
    Brownian { c: f64 },
    /// ν̄(x) = 1 / (1 + b x): critical birth–death with rates b.
    CriticalBirthDeath { rate: f64 },
    /// ν̄ = 1 / W with W interpolated linearly on a solver grid.
    FromW(WGrid),
    /// User-supplied nonincreasing tail; inverted by bisection.
    Custom { name: String, tail: RealFn },
}

impl fmt::Debug for IntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Brownian { c } => write!(f, "Brownian {{ c: {c} }}"),
            Self::CriticalBirthDeath { rate } => write!(f, "CriticalBirthDeath {{ rate: {rate} }}"),
            Self::FromW(g) => write!(f, "FromW({} points on [0, {}])", g.w.len(), g.horizon()),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl IntensityModel {
    pub fn brownian(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            bail!(Domain, "Brownian tail constant must be positive, got {c}");
        }
        Ok(Self::Brownian { c })
    }

    pub fn critical_birth_death(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            bail!(Domain, "birth–death rate must be positive, got {rate}");
        }
        Ok(Self::CriticalBirthDeath { rate })
    }

    /// Wraps a tail function after spot-checking that it is nonincreasing
    /// on a log-spaced grid of `[lo, hi]`.
    pub fn custom(
        name: impl Into<String>,
        tail: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        let tail: RealFn = Arc::new(tail);
        let (lo, hi) = (lo.max(1e-300), hi);
        let mut prev = f64::INFINITY;
        for k in 0..=64 {
            let x = lo * (hi / lo).powf(k as f64 / 64.0);
            let y = tail(x);
            if y.is_nan() || y < 0.0 || y > prev * (1.0 + 1e-12) {
                bail!(Validation, "tail is not nonincreasing and nonnegative near x = {x}");
            }
            prev = y;
        }
        Ok(Self::Custom { name: name.into(), tail })
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Brownian { .. } => "brownian",
            Self::CriticalBirthDeath { .. } => "critical_bd",
            Self::FromW(_) => "from_W",
            Self::Custom { name, .. } => name,
        }
    }

    /// ν̄(x) for x ≥ 0 (may be +∞ at 0).
    pub fn tail(&self, x: f64) -> f64 {
        match self {
            Self::Brownian { c } => c / x,
            Self::CriticalBirthDeath { rate } => 1.0 / (1.0 + rate * x),
            Self::FromW(g) => 1.0 / g.eval(x),
            Self::Custom { tail, .. } => tail(x),
        }
    }

    /// The x with ν̄(x) = y.
    pub fn tail_inverse(&self, y: f64) -> f64 {
        match self {
            Self::Brownian { c } => c / y,
            Self::CriticalBirthDeath { rate } => (1.0 / y - 1.0) / rate,
            Self::FromW(g) => g.inverse(1.0 / y),
            Self::Custom { tail, .. } => bisect_decreasing(tail.as_ref(), y),
        }
    }

    /// Total mass ν̄(0); infinite for the Brownian model.
    pub fn total_mass(&self) -> f64 {
        self.tail(0.0)
    }

    /// Height drawn from ν restricted to `[lo, hi)` given a uniform `u`.
    pub fn sample_height(&self, lo: f64, hi: f64, u: f64) -> f64 {
        let (top, bottom) = (self.tail(lo), self.tail(hi));
        let x = self.tail_inverse(bottom + u * (top - bottom));
        x.clamp(lo, hi)
    }
}

fn bisect_decreasing(f: &(dyn Fn(f64) -> f64 + Send + Sync), y: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut guard = 0;
    while f(hi) > y && guard < 2000 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// W on a uniform grid of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WGrid {
    step: f64,
    w: Vec<f64>,
}

impl WGrid {
    pub fn new(horizon: f64, w: Vec<f64>) -> Result<Self> {
        if w.len() < 2 || !(horizon > 0.0) {
            bail!(Validation, "W grid needs at least two points on a positive horizon");
        }
        let step = horizon / (w.len() - 1) as f64;
        Ok(Self { step, w })
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.w.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.w.len()).map(|i| i as f64 * self.step)
    }

    /// Linear interpolation, constant beyond the ends.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.w[0];
        }
        let x = t / self.step;
        let i = x.floor() as usize;
        if i + 1 >= self.w.len() {
            return *self.w.last().unwrap();
        }
        let frac = x - i as f64;
        self.w[i] + frac * (self.w[i + 1] - self.w[i])
    }

    /// Smallest t with W(t) = v under linear interpolation, clamped to the grid.
    pub fn inverse(&self, v: f64) -> f64 {
        if v <= self.w[0] {
            return 0.0;
        }
        let j = self.w.partition_point(|&x| x < v);
        if j == self.w.len() {
            return self.horizon();
        }
        let (a, b) = (self.w[j - 1], self.w[j]);
        let frac = if b > a { (v - a) / (b - a) } else { 0.0 };
        (j as f64 - 1.0 + frac) * self.step
    }

    /// CSV with columns `t,W,nu_tail`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,W,nu_tail")?;
        for (t, &w) in self.times().zip(&self.w) {
            writeln!(out, "{t},{w},{}", 1.0 / w)?;
        }
        Ok(())
    }
}

/// Birth intensity b(t), the density of β̲.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BirthRate {
    Constant(f64),
    /// Piecewise-linear rate through `(t, b)` knots, constant beyond them.
    Grid { grid: Vec<(f64, f64)> },
}

impl BirthRate {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Self::Constant(b) => *b,
            Self::Grid { grid } => {
                let k = grid.partition_point(|&(s, _)| s <= t);
                if k == 0 {
                    return grid[0].1;
                }
                if k == grid.len() {
                    return grid[k - 1].1;
                }
                let (t0, b0) = grid[k - 1];
                let (t1, b1) = grid[k];
                b0 + (b1 - b0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// β̲(t) = ∫_0^t b.
    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            Self::Constant(b) => b * t,
            Self::Grid { grid } => {
                let mut knots: Vec<f64> = vec![0.0];
                knots.extend(grid.iter().map(|&(s, _)| s).filter(|&s| s > 0.0 && s < t));
                knots.push(t);
                knots.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (self.at(w[0]) + self.at(w[1]))).sum()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Constant(b) if !(*b >= 0.0 && b.is_finite()) => {
                bail!(Domain, "birth rate must be nonnegative, got {b}")
            }
            Self::Grid { grid } => {
                if grid.is_empty() {
                    bail!(Validation, "empty birth-rate grid");
                }
                if grid.windows(2).any(|w| w[1].0 <= w[0].0) {
                    bail!(Validation, "birth-rate grid times must be strictly increasing");
                }
                if let Some(&(t, b)) = grid.iter().find(|(_, b)| !(*b >= 0.0 && b.is_finite())) {
                    bail!(Domain, "birth rate {b} at t = {t} is not a nonnegative number");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Lifetime law of an individual. Written `immortal`, `exponential(r)` or
/// `fixed(l)` in model files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Lifetime {
    Immortal,
    Exponential(f64),
    Fixed(f64),
}

impl TryFrom<String> for Lifetime {
    type Error = crate::Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Lifetime> for String {
    fn from(l: Lifetime) -> Self {
        l.to_string()
    }
}

impl fmt::Display for Lifetime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Immortal => write!(f, "immortal"),
            Self::Exponential(r) => write!(f, "exponential({r})"),
            Self::Fixed(l) => write!(f, "fixed({l})"),
        }
    }
}

impl std::str::FromStr for Lifetime {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "immortal" {
            return Ok(Self::Immortal);
        }
        let parse_arg = |prefix: &str| -> Option<f64> {
            s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?.trim().parse().ok()
        };
        let out = if let Some(r) = parse_arg("exponential") {
            Self::Exponential(r)
        } else if let Some(l) = parse_arg("fixed") {
            Self::Fixed(l)
        } else {
            bail!(Validation, "unknown lifetime '{s}' (expected immortal, exponential(r) or fixed(l))");
        };
        match out {
            Self::Exponential(x) | Self::Fixed(x) if !(x > 0.0 && x.is_finite()) => {
                bail!(Domain, "lifetime parameter must be positive in '{s}'")
            }
            _ => Ok(out),
        }
    }
}

/// Birth intensity plus lifetime law; the input to [`solve_w`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel {
    pub birth_rate: BirthRate,
    pub lifetime: Lifetime,
}

impl PopulationModel {
    pub fn yule(b: f64) -> Self {
        Self { birth_rate: BirthRate::Constant(b), lifetime: Lifetime::Immortal }
    }

    pub fn birth_death(b: f64, d: f64) -> Self {
        Self { birth_rate: BirthRate::Constant(b), lifetime: Lifetime::Exponential(d) }
    }
}

/// Model file for the W solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WModelSpec {
    #[serde(flatten)]
    pub model: PopulationModel,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub steps: usize,
}

pub const MIN_W_STEPS: usize = 16;

/// Solves W′(t) = b(T−t)·(W(t) − ∫_0^t W(s) g(T−t, T−s) ds), W(0) = 1, on a
/// uniform grid of `steps` intervals.
///
/// Heun predictor–corrector for the derivative, trapezoid rule for the
/// memory integral; the fixed-lifetime kernel is a point mass, read off the
/// grid by interpolation.
pub fn solve_w(m: &PopulationModel, horizon: f64, steps: usize) -> Result<WGrid> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        bail!(Domain, "horizon T must be positive, got {horizon}");
    }
    if steps < MIN_W_STEPS {
        bail!(Validation, "steps must be at least {MIN_W_STEPS}, got {steps}");
    }
    m.birth_rate.validate()?;
    let h = horizon / steps as f64;
    let mut w = Vec::with_capacity(steps + 1);
    w.push(1.0);
    let kernel: Vec<f64> = match m.lifetime {
        Lifetime::Exponential(r) => (0..=steps).map(|k| r * (-r * k as f64 * h).exp()).collect(),
        _ => Vec::new(),
    };
    // Memory term at grid index n, with W_n supplied separately so the
    // predictor can be used for the newest point.
    let memory = |w: &[f64], n: usize, w_n: f64| -> f64 {
        match m.lifetime {
            Lifetime::Immortal => 0.0,
            Lifetime::Exponential(_) => {
                if n == 0 {
                    return 0.0;
                }
                let mut s = 0.5 * (w[0] * kernel[n] + w_n * kernel[0]);
                for j in 1..n {
                    s += w[j] * kernel[n - j];
                }
                s * h
            }
            Lifetime::Fixed(l) => {
                let t = n as f64 * h - l;
                if t < 0.0 {
                    return 0.0;
                }
                let x = t / h;
                let i = x.floor() as usize;
                let frac = x - i as f64;
                let at = |k: usize| if k < n { w[k] } else { w_n };
                if i >= n {
                    w_n
                } else {
                    at(i) + frac * (at(i + 1) - at(i))
                }
            }
        }
    };
    let rhs = |w: &[f64], n: usize, w_n: f64| -> f64 {
        let t = n as f64 * h;
        m.birth_rate.at(horizon - t) * (w_n - memory(w, n, w_n))
    };
    for n in 0..steps {
        let f_n = rhs(&w, n, w[n]);
        let pred = w[n] + h * f_n;
        let f_pred = rhs(&w, n + 1, pred);
        let next = w[n] + 0.5 * h * (f_n + f_pred);
        if !next.is_finite() || next <= 0.0 {
            bail!(
                Numeric,
                "W left the positive reals at t = {} (value {next}); check the birth rate and lifetime kernel",
                (n + 1) as f64 * h
            );
        }
        w.push(next);
    }
    WGrid::new(horizon, w)
}

/// Monotone bijection between depth scales.
#[derive(Clone)]
pub enum TimeChange {
    Identity,
    /// ψ(t) = c·t.
    Linear(f64),
    /// ψ(t) = e^{−a t}.
    ExpDecay(f64),
    /// ψ(t) = −ln(t)/a, the inverse of `ExpDecay(a)`.
    NegLog(f64),
    Custom { forward: RealFn, inverse: RealFn, increasing: bool },
}

impl fmt::Debug for TimeChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Linear(c) => write!(f, "Linear({c})"),
            Self::ExpDecay(a) => write!(f, "ExpDecay({a})"),
            Self::NegLog(a) => write!(f, "NegLog({a})"),
            Self::Custom { increasing, .. } => write!(f, "Custom {{ increasing: {increasing} }}"),
        }
    }
}

impl TimeChange {
    pub fn custom(
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        increasing: bool,
    ) -> Self {
        Self::Custom { forward: Arc::new(forward), inverse: Arc::new(inverse), increasing }
    }

    pub fn apply(&self, t: f64) -> f64 {
        match self {
            Self::Identity => t,
            Self::Linear(c) => c * t,
            Self::ExpDecay(a) => (-a * t).exp(),
            Self::NegLog(a) => -t.ln() / a,
            Self::Custom { forward, .. } => forward(t),
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        self.inverse().apply(y)
    }

    pub fn inverse(&self) -> TimeChange {
        match self {
            Self::Identity => Self::Identity,
            Self::Linear(c) => Self::Linear(1.0 / c),
            Self::ExpDecay(a) => Self::NegLog(*a),
            Self::NegLog(a) => Self::ExpDecay(*a),
            Self::Custom { forward, inverse, increasing } => {
                Self::Custom { forward: inverse.clone(), inverse: forward.clone(), increasing: *increasing }
            }
        }
    }

    pub fn is_increasing(&self) -> bool {
        match self {
            Self::Identity | Self::NegLog(_) => true,
            Self::Linear(c) => *c > 0.0,
            Self::ExpDecay(a) => *a < 0.0,
            Self::Custom { increasing, .. } => *increasing,
        }
    }

    /// d(ψ⁻¹)/dy.
    pub fn inverse_derivative(&self, y: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Linear(c) => 1.0 / c,
            Self::ExpDecay(a) => -1.0 / (a * y),
            Self::NegLog(a) => -a * (-a * y).exp(),
            Self::Custom { inverse, .. } => {
                let d = 1e-6 * y.abs().max(1e-6);
                (inverse(y + d) - inverse(y - d)) / (2.0 * d)
            }
        }
    }
}

/// Maps every tooth height and the origin height through `psi`; positions
/// are unchanged. Only increasing maps keep a valid comb, so the map is
/// checked to be strictly increasing on the heights actually present.
pub fn time_change_comb(c: &Comb, psi: &TimeChange) -> Result<Comb> {
    let mut hs: Vec<f64> = c.heights().chain([c.origin_height()]).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    let mapped: Vec<f64> = hs.iter().map(|&x| psi.apply(x)).collect();
    if mapped.iter().any(|y| !(y.is_finite() && *y > 0.0)) {
        bail!(Domain, "time change sends a height outside (0, ∞)");
    }
    if mapped.windows(2).any(|w| w[1] <= w[0]) {
        bail!(Validation, "time change is not increasing on the comb heights; coalescence order would not be preserved");
    }
    let teeth = c.teeth().iter().map(|t| Tooth::new(t.pos, psi.apply(t.h))).collect();
    let trunc = if c.truncation() > 0.0 { psi.apply(c.truncation()) } else { 0.0 };
    Comb::with_truncation(c.interval_length(), psi.apply(c.origin_height()), teeth, trunc)
}

/// Tail of the CPP obtained from a pure-birth tree with cumulative birth
/// intensity β̲ after the time change φ: ν̄(t) = exp(β̲(φ⁻¹(t))).
pub fn pure_birth_tail(birth: BirthRate, phi: TimeChange) -> Result<IntensityModel> {
    let psi = phi.clone();
    IntensityModel::custom(
        "pure_birth",
        move |t| (birth.cumulative(psi.invert(t))).exp(),
        1e-6 * phi.apply(0.0).abs().max(1e-6),
        phi.apply(0.0),
    )
}

/// Image of a mutation measure under a time change.
#[derive(Debug, Clone)]
pub struct PushedMeasure {
    base: MutationMeasure,
    psi: TimeChange,
}

/// μ_ψ = μ ∘ ψ⁻¹.
pub fn mutation_rate_pushforward(mu: &MutationMeasure, psi: &TimeChange) -> PushedMeasure {
    PushedMeasure { base: mu.clone(), psi: psi.clone() }
}

impl PushedMeasure {
    /// μ_ψ((x, x′]) for x ≤ x′.
    pub fn mass(&self, x: f64, x2: f64) -> f64 {
        let (a, b) = (self.psi.invert(x), self.psi.invert(x2));
        (self.base.cumulative(a.max(b)) - self.base.cumulative(a.min(b))).abs()
    }

    pub fn density(&self, y: f64) -> f64 {
        self.base.density(self.psi.invert(y)) * self.psi.inverse_derivative(y).abs()
    }

    /// The pushed measure as a cumulative measure from 0, available when ψ
    /// is increasing with ψ(0) = 0.
    pub fn to_measure(&self) -> Result<MutationMeasure> {
        if !self.psi.is_increasing() || self.psi.apply(0.0) != 0.0 {
            bail!(Validation, "only increasing time changes fixing 0 give a cumulative measure from 0");
        }
        let base = self.base.clone();
        let psi = self.psi.clone();
        Ok(MutationMeasure::custom(move |y| base.cumulative(psi.invert(y))))
    }
}
