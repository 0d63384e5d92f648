use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform 256-level quantizer for the edge position lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaQuant<S> {
    lo: S,
    hi: S,
}

impl<S: Scalar> LambdaQuant<S> {
    pub fn new(lo: S, hi: S) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param(format!(
                "lambda range needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// The `[0, 1]` range used when lambda is clamped to the edge segment.
    pub fn unit() -> Self {
        Self {
            lo: S::zero(),
            hi: S::one(),
        }
    }

    /// Tightest range covering `values`; widened when all values coincide.
    pub fn covering(values: impl IntoIterator<Item = S>) -> Result<Self> {
        let (mut lo, mut hi) = (S::infinity(), S::neg_infinity());
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Self::new(S::zero(), S::one());
        }
        if !(lo < hi) {
            hi = lo + S::one();
        }
        Self::new(lo, hi)
    }

    pub fn lo(&self) -> S {
        self.lo
    }

    pub fn hi(&self) -> S {
        self.hi
    }

    #[inline]
    pub fn step(&self) -> S {
        (self.hi - self.lo) / S::of(256.0)
    }

    #[inline]
    pub fn quantize(&self, lambda: S) -> u8 {
        let t = (lambda.max(self.lo).min(self.hi) - self.lo) / self.step();
        t.floor().min(S::of(255.0)).max(S::zero()).to_u8().unwrap_or(0)
    }

    /// Midpoint of level `b`.
    #[inline]
    pub fn dequantize(&self, b: u8) -> S {
        self.lo + (S::of(b as f64) + S::half()) * self.step()
    }

    /// All 256 level midpoints, indexed by byte.
    pub fn levels(&self) -> [S; 256] {
        std::array::from_fn(|b| self.dequantize(b as u8))
    }
}
