//! Float intrinsics shim and numerically careful reductions.
//!
//! The shim routes through `std` float methods when the `std` feature is on
//! and through `libm` otherwise, so every other module can stay agnostic.

#[cfg(feature = "std")]
macro_rules! shim {
    ($(fn $name:ident($($arg:ident),+) => $method:ident;)*) => {
        $(#[inline(always)]
        pub fn $name($($arg: f64),+) -> f64 { shim!(@call $method, $($arg),+) })*
    };
    (@call $method:ident, $x:ident) => { $x.$method() };
    (@call $method:ident, $x:ident, $y:ident) => { $x.$method($y) };
}

#[cfg(not(feature = "std"))]
macro_rules! shim {
    ($(fn $name:ident($($arg:ident),+) => $method:ident;)*) => {
        $(#[inline(always)]
        pub fn $name($($arg: f64),+) -> f64 { shim!(@call $method, $($arg),+) })*
    };
    (@call exp, $x:ident) => { libm::exp($x) };
    (@call ln, $x:ident) => { libm::log($x) };
    (@call sqrt, $x:ident) => { libm::sqrt($x) };
    (@call abs, $x:ident) => { libm::fabs($x) };
    (@call sin, $x:ident) => { libm::sin($x) };
    (@call cos, $x:ident) => { libm::cos($x) };
    (@call sinh, $x:ident) => { libm::sinh($x) };
    (@call cosh, $x:ident) => { libm::cosh($x) };
    (@call asinh, $x:ident) => { libm::asinh($x) };
    (@call atan2, $x:ident, $y:ident) => { libm::atan2($x, $y) };
}

shim! {
    fn exp(x) => exp;
    fn ln(x) => ln;
    fn sqrt(x) => sqrt;
    fn abs(x) => abs;
    fn sin(x) => sin;
    fn cos(x) => cos;
    fn sinh(x) => sinh;
    fn cosh(x) => cosh;
    fn asinh(x) => asinh;
    fn atan2(y, x) => atan2;
}

/// Numerically stable sigmoid 1/(1+e^{-u}); branches to avoid overflow of
/// e^{-u} for large |u|.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + exp(-u))
    } else {
        let e = exp(u);
        e / (1.0 + e)
    }
}

/// Max-shifted log-sum-exp over a slice. `-inf` terms are skipped (they
/// contribute exp(-inf) = 0); returns `-inf` when every term is `-inf` or the
/// slice is empty.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &t in terms {
        if t > m {
            m = t;
        }
    }
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut s = 0.0;
    for &t in terms {
        if t != f64::NEG_INFINITY {
            s += exp(t - m);
        }
    }
    m + ln(s)
}

/// Kahan-compensated sum: an extended-precision accumulation used by test
/// oracles and the few reductions whose tolerance contracts are ≤ 1e-12.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Median of a slice (even count: mean of the two middle order statistics).
/// Returns `None` on an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = alloc::vec::Vec::from(values);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Dot product with four independent accumulator lanes. The manual
/// reassociation is deterministic (fixed lane split) and lets the compiler
/// vectorize the hot MLP matmuls that a strict sequential sum would serialize.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// y += alpha * x, elementwise.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
