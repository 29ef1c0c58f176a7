//! Heaviside-type functions, integration measures and domain normalization.
//!
//! A Heaviside-type function is continuous on `[a, b]` except at a single
//! interior point `delta` where both one-sided limits exist. Everything
//! downstream works on the normalized setting `[-1, 1]` with the jump at 0;
//! [`normalize`] maps an arbitrary problem there and records the change of
//! variables together with the measure that keeps L1 distances unchanged.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::poly::Polynomial;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One smooth side of a Heaviside-type function.
#[derive(Clone)]
pub enum Branch {
    Constant(f64),
    Polynomial(Polynomial),
    Expr(Arc<Expr>),
    Custom(ScalarFn),
    /// `inner(transform.to_original(t))`.
    Mapped {
        inner: Arc<Branch>,
        transform: Transform,
    },
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Constant(c) => write!(f, "Constant({c})"),
            Branch::Polynomial(p) => write!(f, "{p:?}"),
            Branch::Expr(e) => write!(f, "Expr({e:?})"),
            Branch::Custom(_) => write!(f, "Custom(..)"),
            Branch::Mapped { inner, transform } => f
                .debug_struct("Mapped")
                .field("inner", inner)
                .field("transform", transform)
                .finish(),
        }
    }
}

impl Branch {
    /// Parses an expression, keeping an exact polynomial form when one exists.
    pub fn parse(src: &str) -> Result<Self> {
        let expr = Expr::parse(src)?;
        Ok(match expr.to_polynomial() {
            Some(p) if p.degree().unwrap_or(0) == 0 => {
                Branch::Constant(p.coeffs().first().copied().unwrap_or(0.0))
            }
            Some(p) => Branch::Polynomial(p),
            None => Branch::Expr(Arc::new(expr)),
        })
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Branch::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Branch::Constant(c) => *c,
            Branch::Polynomial(p) => p.eval(x),
            Branch::Expr(e) => e.eval(x),
            Branch::Custom(f) => f(x),
            Branch::Mapped { inner, transform } => inner.eval(transform.to_original(x)),
        }
    }

    /// Exact polynomial form, available for constant and polynomial branches.
    pub fn as_polynomial(&self) -> Option<Polynomial> {
        match self {
            Branch::Constant(c) => Some(Polynomial::constant(*c)),
            Branch::Polynomial(p) => Some(p.clone()),
            _ => None,
        }
    }

    fn pull_back(&self, transform: &Transform) -> Branch {
        if transform.is_identity() {
            return self.clone();
        }
        match (self, transform.is_affine()) {
            (Branch::Constant(c), _) => Branch::Constant(*c),
            (Branch::Polynomial(p), true) => {
                Branch::Polynomial(p.compose_affine(transform.delta, transform.r))
            }
            _ => Branch::Mapped {
                inner: Arc::new(self.clone()),
                transform: transform.clone(),
            },
        }
    }
}

/// Single-jump function `f` on `[a, b]`.
#[derive(Debug, Clone)]
pub struct HeavisideTypeFunction {
    left: Branch,
    right: Branch,
    jump: f64,
    domain: (f64, f64),
}

/// A branch in JSON: a number or an expression in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BranchSpec {
    Constant(f64),
    Expr(String),
}

impl BranchSpec {
    pub fn build(&self) -> Result<Branch> {
        match self {
            BranchSpec::Constant(c) if c.is_finite() => Ok(Branch::Constant(*c)),
            BranchSpec::Constant(c) => Err(Error::Expression(format!("non-finite constant {c}"))),
            BranchSpec::Expr(src) => Branch::parse(src),
        }
    }
}

/// JSON description `{"domain": [a, b], "jump": d, "left": .., "right": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub domain: [f64; 2],
    pub jump: f64,
    pub left: BranchSpec,
    pub right: BranchSpec,
}

impl FunctionSpec {
    pub fn build(&self) -> Result<HeavisideTypeFunction> {
        HeavisideTypeFunction::new(
            (self.domain[0], self.domain[1]),
            self.jump,
            self.left.build()?,
            self.right.build()?,
        )
    }
}

/// Relative threshold below which the jump is reported as degenerate.
pub const DEGENERATE_JUMP_TOL: f64 = 1e-14;

impl HeavisideTypeFunction {
    pub fn new(domain: (f64, f64), jump: f64, left: Branch, right: Branch) -> Result<Self> {
        let (a, b) = domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidDomain { a, b });
        }
        if !(jump > a && jump < b) {
            return Err(Error::JumpOutsideDomain { delta: jump, a, b });
        }
        let f = Self {
            left,
            right,
            jump,
            domain,
        };
        if !f.left_limit().is_finite() || !f.right_limit().is_finite() {
            return Err(Error::InvalidArgument(
                "one-sided limits at the jump must be finite".into(),
            ));
        }
        Ok(f)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn jump_location(&self) -> f64 {
        self.jump
    }

    pub fn left_branch(&self) -> &Branch {
        &self.left
    }

    pub fn right_branch(&self) -> &Branch {
        &self.right
    }

    pub fn left_limit(&self) -> f64 {
        self.left.eval(self.jump)
    }

    pub fn right_limit(&self) -> f64 {
        self.right.eval(self.jump)
    }

    /// `right_limit - left_limit`.
    pub fn jump_magnitude(&self) -> f64 {
        self.right_limit() - self.left_limit()
    }

    /// True when the one-sided limits coincide (continuous member).
    pub fn is_degenerate(&self) -> bool {
        let scale = self.left_limit().abs().max(self.right_limit().abs()).max(1.0);
        self.jump_magnitude().abs() <= DEGENERATE_JUMP_TOL * scale
    }

    /// Value at `x`; the jump point itself reports the right limit.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (a, b) = self.domain;
        if !(x >= a && x <= b) {
            return Err(Error::OutsideDomain { x, a, b });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        if x < self.jump {
            self.left.eval(x)
        } else {
            self.right.eval(x)
        }
    }

    /// Evaluates the branch of the given side, also at the jump point.
    pub fn eval_side(&self, x: f64, right: bool) -> f64 {
        if right {
            self.right.eval(x)
        } else {
            self.left.eval(x)
        }
    }
}

/// Heaviside step with values `jump_low` on `[-1, 0)` and `jump_high` on `(0, 1]`.
pub fn heaviside(jump_low: f64, jump_high: f64) -> HeavisideTypeFunction {
    HeavisideTypeFunction::new(
        (-1.0, 1.0),
        0.0,
        Branch::Constant(jump_low),
        Branch::Constant(jump_high),
    )
    .expect("canonical heaviside is always valid")
}

/// Weight density of a weighted Lebesgue measure on `[-1, 1]`.
#[derive(Clone)]
pub struct Weight {
    density: ScalarFn,
    label: String,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Weight({})", self.label)
    }
}

/// Integration measure on `[-1, 1]`.
#[derive(Debug, Clone)]
pub enum Measure {
    Lebesgue,
    WeightedLebesgue(Weight),
}

const WEIGHT_PROBES: usize = 401;

impl Measure {
    /// Weighted Lebesgue measure; the weight must be finite and strictly
    /// positive on `[-1, 1]` (checked on a probe grid).
    pub fn weighted<F>(label: impl Into<String>, density: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        for i in 0..WEIGHT_PROBES {
            let x = -1.0 + 2.0 * i as f64 / (WEIGHT_PROBES - 1) as f64;
            let w = density(x);
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidMeasure(format!(
                    "weight must be positive on [-1, 1]; w({x}) = {w}"
                )));
            }
        }
        Ok(Measure::WeightedLebesgue(Weight {
            density: Arc::new(density),
            label: label.into(),
        }))
    }

    pub fn is_lebesgue(&self) -> bool {
        matches!(self, Measure::Lebesgue)
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            Measure::Lebesgue => 1.0,
            Measure::WeightedLebesgue(w) => (w.density)(x),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Measure::Lebesgue => "lebesgue",
            Measure::WeightedLebesgue(w) => &w.label,
        }
    }

    /// True when the density is symmetric about 0 (to rounding).
    pub fn is_even(&self) -> bool {
        match self {
            Measure::Lebesgue => true,
            Measure::WeightedLebesgue(_) => (0..WEIGHT_PROBES).all(|i| {
                let x = i as f64 / (WEIGHT_PROBES - 1) as f64;
                let (l, r) = (self.density(-x), self.density(x));
                (l - r).abs() <= 1e-12 * l.abs().max(r.abs())
            }),
        }
    }
}

/// Increasing homography sending `(a, delta, b)` to `(-1, 0, 1)`.
///
/// With `u = x - delta` the forward map is `t = u / (p u + r)` and the
/// inverse is `x = delta + r t / (1 - p t)`. `p = 0` is the affine case.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    delta: f64,
    p: f64,
    r: f64,
    domain: (f64, f64),
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            delta: 0.0,
            p: 0.0,
            r: 1.0,
            domain: (-1.0, 1.0),
        }
    }

    /// The unique increasing Möbius map with `h(a) = -1`, `h(delta) = 0`,
    /// `h(b) = 1`; affine exactly when `delta` is the midpoint.
    pub fn for_jump(a: f64, delta: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidDomain { a, b });
        }
        if !(delta > a && delta < b) {
            return Err(Error::JumpOutsideDomain { delta, a, b });
        }
        let mut p = (a + b - 2.0 * delta) / (b - a);
        if p.abs() <= 1e-15 {
            p = 0.0;
        }
        let r = 2.0 * (b - delta) * (delta - a) / (b - a);
        Ok(Self {
            delta,
            p,
            r,
            domain: (a, b),
        })
    }

    pub fn is_affine(&self) -> bool {
        self.p == 0.0
    }

    pub fn is_identity(&self) -> bool {
        self.p == 0.0 && self.r == 1.0 && self.delta == 0.0
    }

    pub fn original_domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Original coordinate to `[-1, 1]`.
    pub fn to_normalized(&self, x: f64) -> f64 {
        let u = x - self.delta;
        u / (self.p * u + self.r)
    }

    /// `[-1, 1]` to original coordinate.
    pub fn to_original(&self, t: f64) -> f64 {
        self.delta + self.r * t / (1.0 - self.p * t)
    }

    /// `d x / d t` of the inverse map.
    pub fn jacobian(&self, t: f64) -> f64 {
        let d = 1.0 - self.p * t;
        self.r / (d * d)
    }

    /// `d t / d x` of the forward map.
    pub fn forward_derivative(&self, x: f64) -> f64 {
        let d = self.p * (x - self.delta) + self.r;
        self.r / (d * d)
    }
}

/// Problem mapped to `[-1, 1]` with the jump at 0.
#[derive(Debug, Clone)]
pub struct NormalizedProblem {
    function: HeavisideTypeFunction,
    measure: Measure,
    transform: Transform,
    original: HeavisideTypeFunction,
}

impl NormalizedProblem {
    pub fn function(&self) -> &HeavisideTypeFunction {
        &self.function
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn original(&self) -> &HeavisideTypeFunction {
        &self.original
    }

    /// Factor converting L1 values under [`Self::measure`] into L1 values on
    /// the original domain. The affine case keeps Lebesgue measure, so the
    /// constant Jacobian is applied here; the Möbius case carries it in the
    /// weight already.
    pub fn original_l1_factor(&self) -> f64 {
        if self.transform.is_affine() {
            self.transform.r
        } else {
            1.0
        }
    }

    /// Replaces the measure (e.g. to study a weighted problem directly on `[-1, 1]`).
    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }
}

/// Maps `f` to `[-1, 1]` with the jump at 0.
///
/// Midpoint jumps use the affine map and Lebesgue measure. Any other jump
/// uses the increasing Möbius map through `(a, delta, b)` and the weight
/// `dx/dt`, so that `||f - g||_1` on `[a, b]` equals the weighted L1 norm of
/// the pulled-back difference.
pub fn normalize(f: &HeavisideTypeFunction) -> Result<NormalizedProblem> {
    let (a, b) = f.domain();
    let transform = Transform::for_jump(a, f.jump_location(), b)?;
    let left = f.left.pull_back(&transform);
    let right = f.right.pull_back(&transform);
    let function = HeavisideTypeFunction::new((-1.0, 1.0), 0.0, left, right)?;
    let measure = if transform.is_affine() {
        Measure::Lebesgue
    } else {
        let t = transform.clone();
        Measure::weighted("homography-jacobian", move |x| t.jacobian(x))?
    };
    Ok(NormalizedProblem {
        function,
        measure,
        transform,
        original: f.clone(),
    })
}
