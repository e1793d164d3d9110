//! Gaussian special functions and the deterministic random-number source
//! shared by every simulation component.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::ProbabilityOutOfRange(value))
        }
    }

    /// Clamps rounding spill (e.g. `1 + 1e-17`) back into range. Only for
    /// values that are probabilities by construction.
    pub(crate) fn saturating(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        Probability(value.clamp(0.0, 1.0))
    }

    /// Empirical frequency `hits / trials`.
    pub fn from_ratio(hits: u64, trials: u64) -> Self {
        if trials == 0 {
            return Probability::ZERO;
        }
        Probability::saturating(hits as f64 / trials as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

/// Standard Gaussian tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(Probability::saturating(0.5 * libm::erfc(x * FRAC_1_SQRT_2)))
}

fn gaussian_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q_function`]: the `x` with `Q(x) = p`.
///
/// Starts from Acklam's rational approximation of the normal quantile
/// (relative error about 1e-9) and polishes it with Halley steps against
/// `erfc`, which brings it to a few ulps over the whole open interval.
pub fn q_inverse(p: Probability) -> Result<f64> {
    let p = p.value();
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::ThresholdUndefined(p));
    }
    // Q^{-1}(p) = -Phi^{-1}(p)
    let mut x = -acklam_quantile(p);
    for _ in 0..2 {
        let residual = 0.5 * libm::erfc(x * FRAC_1_SQRT_2) - p;
        let density = gaussian_density(x);
        if residual == 0.0 || density == 0.0 {
            break;
        }
        let u = residual / density;
        x += u / (1.0 - 0.5 * x * u);
    }
    Ok(x)
}

fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Seeded, splittable random stream.
///
/// Backed by ChaCha8 with the 64-bit stream id selecting an independent
/// keystream, so `(seed, stream)` pins the whole sequence on every platform
/// and parallel workers never share state.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0)
    }

    /// Sub-stream `stream` of `seed`.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// One `N(0, 1)` draw. Callers scale by the noise standard deviation.
pub fn standard_normal_draw(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}
