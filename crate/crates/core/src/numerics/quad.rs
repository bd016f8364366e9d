use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances and endpoint declarations for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Integrand may blow up like `(t - lo)^{-1/2}` at the lower limit.
    pub singular_left: bool,
    /// Integrand may blow up like `(hi - t)^{-1/2}` at the upper limit.
    pub singular_right: bool,
    /// Length of the finite head kept before a `+∞` upper limit is mapped
    /// onto `(0, 1]`. Should be of the order of the integrand's bulk.
    pub tail_scale: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
            singular_left: false,
            singular_right: false,
            tail_scale: 1.0,
        }
    }
}

impl QuadSpec {
    pub fn singular_left(mut self) -> Self {
        self.singular_left = true;
        self
    }

    pub fn singular_right(mut self) -> Self {
        self.singular_right = true;
        self
    }

    pub fn singular_both(self) -> Self {
        self.singular_left().singular_right()
    }

    pub fn smooth(mut self) -> Self {
        self.singular_left = false;
        self.singular_right = false;
        self
    }

    pub fn with_tail_scale(mut self, scale: f64) -> Self {
        self.tail_scale = scale;
        self
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.max_subdivisions >= 1) {
            return Err(Error::InvalidArgument(format!(
                "QuadSpec needs abs_tol > 0, rel_tol > 0, max_subdivisions >= 1, got {self:?}"
            )));
        }
        if !(self.tail_scale > 0.0 && self.tail_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "QuadSpec tail_scale must be positive and finite, got {}",
                self.tail_scale
            )));
        }
        Ok(())
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Outcome of an adaptive integration. A non-converged result still carries
/// the best value found, but callers must opt in to using it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub subdivisions: usize,
}

impl QuadResult {
    /// The value if converged, otherwise [`Error::NotConverged`].
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::NotConverged {
                value: self.value,
                error_estimate: self.error_estimate,
                subdivisions: self.subdivisions,
            })
        }
    }
}

/// Change of variables applied to a piece before Gauss–Kronrod.
#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    /// t = origin + w², removes (t - origin)^{-1/2}
    SqrtLeft {
        origin: f64,
    },
    /// t = origin - w²
    SqrtRight {
        origin: f64,
    },
    /// t = lo + len·sin²θ, removes both endpoint singularities
    SinSquared {
        lo: f64,
        len: f64,
    },
    /// t = origin + scale / w², w ∈ (0, 1]
    InverseSquare {
        origin: f64,
        scale: f64,
    },
}

impl Map {
    #[inline]
    fn apply(&self, s: f64) -> (f64, f64) {
        match *self {
            Map::Identity => (s, 1.0),
            Map::SqrtLeft { origin } => (origin + s * s, 2.0 * s),
            Map::SqrtRight { origin } => (origin - s * s, 2.0 * s),
            Map::SinSquared { lo, len } => {
                let (sn, cs) = s.sin_cos();
                (lo + len * sn * sn, 2.0 * len * sn * cs)
            }
            Map::InverseSquare { origin, scale } => (origin + scale / (s * s), 2.0 * scale / (s * s * s)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    map: Map,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// 21-point Kronrod rule with embedded 10-point Gauss rule on `[a, b]` of the
/// mapped variable. Returns `(value, error, finite)`.
fn gk21<F: Fn(f64) -> f64>(f: &F, map: Map, a: f64, b: f64) -> (f64, f64, bool) {
    let eval = |s: f64| -> f64 {
        let (t, jac) = map.apply(s);
        if !t.is_finite() {
            return 0.0;
        }
        let v = f(t);
        if v == 0.0 {
            0.0
        } else {
            v * jac
        }
    };

    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval(center);
    let mut res_g = 0.0;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for (j, &wg) in WG.iter().enumerate() {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = eval(center - dx);
        let f2 = eval(center + dx);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += wg * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = eval(center - dx);
        let f2 = eval(center + dx);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let abs_half = half.abs();
    let value = res_k * half;
    let res_abs = res_abs * abs_half;
    let res_asc = res_asc * abs_half;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    let finite = value.is_finite() && err.is_finite();
    (value, err, finite)
}

fn run<F: Fn(f64) -> f64>(f: &F, initial: Vec<(Map, f64, f64)>, spec: &QuadSpec) -> QuadResult {
    let mut heap = BinaryHeap::with_capacity(initial.len() + 2 * spec.max_subdivisions);
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut finite = true;
    for (map, a, b) in initial {
        if a == b {
            continue;
        }
        let (value, error, ok) = gk21(f, map, a, b);
        finite &= ok;
        total += value;
        total_err += error;
        heap.push(Piece { map, a, b, value, error });
    }
    if !finite {
        return QuadResult { value: total, error_estimate: f64::INFINITY, converged: false, subdivisions: 0 };
    }

    let mut subdivisions = 0;
    while total_err > spec.tolerance(total) && subdivisions < spec.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // cannot bisect further in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1, ok1) = gk21(f, worst.map, worst.a, mid);
        let (v2, e2, ok2) = gk21(f, worst.map, mid, worst.b);
        if !(ok1 && ok2) {
            return QuadResult { value: total, error_estimate: f64::INFINITY, converged: false, subdivisions };
        }
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece { map: worst.map, a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { map: worst.map, a: mid, b: worst.b, value: v2, error: e2 });
        subdivisions += 1;

        // re-sum periodically so the running totals do not drift
        if subdivisions % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    total = heap.iter().map(|p| p.value).sum();
    total_err = heap.iter().map(|p| p.error).sum::<f64>().max(0.0);

    QuadResult { value: total, error_estimate: total_err, converged: total_err <= spec.tolerance(total), subdivisions }
}

fn finite_piece(lo: f64, hi: f64, left: bool, right: bool) -> (Map, f64, f64) {
    let len = hi - lo;
    match (left, right) {
        (false, false) => (Map::Identity, lo, hi),
        (true, false) => (Map::SqrtLeft { origin: lo }, 0.0, len.sqrt()),
        (false, true) => (Map::SqrtRight { origin: hi }, 0.0, len.sqrt()),
        (true, true) => (Map::SinSquared { lo, len }, 0.0, std::f64::consts::FRAC_PI_2),
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over `(lo, hi)`; `hi` may be
/// `f64::INFINITY`.
///
/// Declared endpoint singularities of order `(t - c)^{-1/2}` are removed by
/// `t = c ± w²` (one side) or `t = lo + (hi - lo)·sin²θ` (both sides). A
/// semi-infinite range is split at `lo + tail_scale` and the tail is mapped by
/// `t = lo + tail_scale / w²`, which turns `t^{-3/2}` decay into a constant.
/// `f` is never evaluated at the endpoints themselves.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadSpec) -> QuadResult {
    integrate_with_breaks(f, lo, &[], hi, spec)
}

/// [`integrate`] with interior break points (kinks, peaks, scale changes).
/// Singularity flags refer to the outer endpoints only. Break points outside
/// `(lo, hi)` are ignored.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, lo: f64, breaks: &[f64], hi: f64, spec: &QuadSpec) -> QuadResult {
    let invalid = QuadResult { value: f64::NAN, error_estimate: f64::INFINITY, converged: false, subdivisions: 0 };
    if spec.validate().is_err() || !lo.is_finite() || hi.is_nan() || hi < lo {
        return invalid;
    }
    if lo == hi {
        return QuadResult { value: 0.0, error_estimate: 0.0, converged: true, subdivisions: 0 };
    }

    let infinite = hi == f64::INFINITY;
    let head_end = if infinite { lo + spec.tail_scale } else { hi };
    let mut points: Vec<f64> = breaks.iter().copied().filter(|&p| p > lo && p < head_end && p.is_finite()).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut knots = Vec::with_capacity(points.len() + 2);
    knots.push(lo);
    knots.extend(points);
    knots.push(head_end);

    let n = knots.len() - 1;
    let mut pieces = Vec::with_capacity(n + 1);
    for i in 0..n {
        let left = i == 0 && spec.singular_left;
        let right = i == n - 1 && spec.singular_right && !infinite;
        pieces.push(finite_piece(knots[i], knots[i + 1], left, right));
    }
    if infinite {
        pieces.push((Map::InverseSquare { origin: lo, scale: spec.tail_scale }, 0.0, 1.0));
    }
    run(&f, pieces, spec)
}

/// [`integrate_with_breaks`] for an integrand that can fail. The first error
/// raised by `f` is returned in place of the quadrature result.
pub fn integrate_fallible<F: Fn(f64) -> Result<f64>>(
    f: F,
    lo: f64,
    breaks: &[f64],
    hi: f64,
    spec: &QuadSpec,
) -> Result<f64> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let res = integrate_with_breaks(
        |t| match f(t) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        breaks,
        hi,
        spec,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => res.into_result(),
    }
}
