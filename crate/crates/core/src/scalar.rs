//! Scalar rings the solver and energy routines are generic over.
//!
//! Three rings are provided:
//!
//! * [`Complex64`], the default working precision.
//! * [`crate::response::DualScalar`], first-order jets used for linear response.
//! * [`WideComplex`], a 256-bit binary floating-point complex number used by the
//!   verification oracle, where coefficients many orders below `f64` resolution
//!   have to be compared.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_complex::Complex64;

/// Commutative ring with the handful of extra operations the series code needs.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    /// Real numbers of matching precision (used for E₀(M) and k! divisors).
    type Real: Clone + fmt::Debug + Send + Sync + Add<Output = Self::Real>;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_complex(z: Complex64) -> Self;
    fn real(x: f64) -> Self::Real;
    fn div_real(&self, r: &Self::Real) -> Self;
    /// Exact zero test (both channels for jets).
    fn is_zero(&self) -> bool;
    /// Modulus of the leading (value) part, rounded to `f64`.
    fn magnitude(&self) -> f64;
    /// Leading (value) part rounded to `Complex64`.
    fn leading(&self) -> Complex64;
    fn conj(&self) -> Self;

    fn from_f64(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }
}

impl Scalar for Complex64 {
    type Real = f64;

    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn from_complex(z: Complex64) -> Self {
        z
    }
    #[inline]
    fn real(x: f64) -> f64 {
        x
    }
    #[inline]
    fn div_real(&self, r: &f64) -> Self {
        *self / *r
    }
    #[inline]
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    #[inline]
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    #[inline]
    fn leading(&self) -> Complex64 {
        *self
    }
    #[inline]
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
}

/// Binary precision of [`WideReal`], in bits.
pub const WIDE_PRECISION: usize = 256;

type Big = FBig<HalfEven, 2>;

/// Real number carried at [`WIDE_PRECISION`] bits.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct WideReal(Big);

impl WideReal {
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite value {x}");
        let exact = Big::try_from(x).expect("finite f64 converts exactly");
        WideReal(exact.with_precision(WIDE_PRECISION).value())
    }

    pub fn zero() -> Self {
        Self::from_f64(0.0)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    pub fn abs(&self) -> Self {
        if self.0 < Big::ZERO {
            WideReal(-self.0.clone())
        } else {
            self.clone()
        }
    }

    pub fn sqrt(&self) -> Self {
        WideReal(self.0.sqrt())
    }

    pub fn is_zero(&self) -> bool {
        self.0 == Big::ZERO
    }
}

impl fmt::Debug for WideReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl Add for WideReal {
    type Output = WideReal;
    fn add(self, rhs: Self) -> Self {
        WideReal(self.0 + rhs.0)
    }
}

impl Sub for WideReal {
    type Output = WideReal;
    fn sub(self, rhs: Self) -> Self {
        WideReal(self.0 - rhs.0)
    }
}

impl Mul for WideReal {
    type Output = WideReal;
    fn mul(self, rhs: Self) -> Self {
        WideReal(self.0 * rhs.0)
    }
}

impl Div for WideReal {
    type Output = WideReal;
    fn div(self, rhs: Self) -> Self {
        WideReal(self.0 / rhs.0)
    }
}

impl Neg for WideReal {
    type Output = WideReal;
    fn neg(self) -> Self {
        WideReal(-self.0)
    }
}

/// Complex number with [`WideReal`] parts.
#[derive(Clone, PartialEq)]
pub struct WideComplex {
    pub re: WideReal,
    pub im: WideReal,
}

impl WideComplex {
    pub fn new(re: WideReal, im: WideReal) -> Self {
        WideComplex { re, im }
    }

    pub fn norm_sqr(&self) -> WideReal {
        self.re.clone() * self.re.clone() + self.im.clone() * self.im.clone()
    }
}

impl fmt::Debug for WideComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.leading())
    }
}

impl Add for WideComplex {
    type Output = WideComplex;
    fn add(self, rhs: Self) -> Self {
        WideComplex::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for WideComplex {
    type Output = WideComplex;
    fn sub(self, rhs: Self) -> Self {
        WideComplex::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for WideComplex {
    type Output = WideComplex;
    fn mul(self, rhs: Self) -> Self {
        if self.im.is_zero() && rhs.im.is_zero() {
            return WideComplex::new(self.re * rhs.re, WideReal::zero());
        }
        let re = self.re.clone() * rhs.re.clone() - self.im.clone() * rhs.im.clone();
        let im = self.re * rhs.im + self.im * rhs.re;
        WideComplex::new(re, im)
    }
}

impl Div for WideComplex {
    type Output = WideComplex;
    fn div(self, rhs: Self) -> Self {
        if rhs.im.is_zero() {
            return self.div_real(&rhs.re);
        }
        let den = rhs.norm_sqr();
        let num = self * rhs.conj();
        WideComplex::new(num.re / den.clone(), num.im / den)
    }
}

impl Neg for WideComplex {
    type Output = WideComplex;
    fn neg(self) -> Self {
        WideComplex::new(-self.re, -self.im)
    }
}

impl AddAssign for WideComplex {
    fn add_assign(&mut self, rhs: Self) {
        let lhs = std::mem::replace(self, WideComplex::zero());
        *self = lhs + rhs;
    }
}

impl Scalar for WideComplex {
    type Real = WideReal;

    fn zero() -> Self {
        WideComplex::new(WideReal::zero(), WideReal::zero())
    }
    fn one() -> Self {
        WideComplex::new(WideReal::from_f64(1.0), WideReal::zero())
    }
    fn from_complex(z: Complex64) -> Self {
        WideComplex::new(WideReal::from_f64(z.re), WideReal::from_f64(z.im))
    }
    fn real(x: f64) -> WideReal {
        WideReal::from_f64(x)
    }
    fn div_real(&self, r: &WideReal) -> Self {
        WideComplex::new(self.re.clone() / r.clone(), self.im.clone() / r.clone())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn magnitude(&self) -> f64 {
        self.norm_sqr().sqrt().to_f64()
    }
    fn leading(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
    fn conj(&self) -> Self {
        WideComplex::new(self.re.clone(), -self.im.clone())
    }
}
