//! Adaptive Gauss-Kronrod (G7/K15) quadrature with forced breakpoints.
//!
//! Integrands in this crate are only piecewise smooth: the jump at 0, spline
//! knots and residual roots are passed as `breaks` so that no panel straddles
//! a kink.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_panels: 20_000,
        }
    }
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[lo, hi]`, splitting first at every break inside the
/// interval. Returns the estimate, or an error when the panel budget runs out
/// before the tolerance is met.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    opts: QuadratureOptions,
) -> Result<f64> {
    if hi < lo {
        return Err(Error::ReversedBounds { lo, hi });
    }
    if hi == lo {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut left = lo;
    for right in cuts.into_iter().chain(std::iter::once(hi)) {
        if right > left {
            let (v, e) = kronrod_panel(&f, left, right);
            panels.push((left, right, v, e));
        }
        left = right;
    }

    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target {
            return Ok(total);
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Quadrature { estimate: err });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("at least one panel");
        let (a, b, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // panel cannot be split further in floating point
            return Ok(total);
        }
        let (v1, e1) = kronrod_panel(&f, a, mid);
        let (v2, e2) = kronrod_panel(&f, mid, b);
        panels.push((a, mid, v1, e1));
        panels.push((mid, b, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_integrals() {
        let v = integrate(f64::exp, 0.0, 1.0, &[], QuadratureOptions::default()).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
        let v = integrate(f64::sin, 0.0, std::f64::consts::PI, &[], Default::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn kink_with_break_is_exact() {
        let f = |x: f64| (x - 0.3).abs();
        let v = integrate(f, -1.0, 1.0, &[0.3], Default::default()).unwrap();
        let expected = 0.5 * 1.3 * 1.3 + 0.5 * 0.7 * 0.7;
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn kink_without_break_still_converges() {
        let f = |x: f64| (x - 0.3).abs();
        let v = integrate(f, -1.0, 1.0, &[], Default::default()).unwrap();
        assert!((v - 1.09).abs() < 1e-11, "{v}");
    }

    #[test]
    fn reversed_bounds_rejected() {
        assert!(matches!(
            integrate(|x| x, 1.0, 0.0, &[], Default::default()),
            Err(Error::ReversedBounds { .. })
        ));
    }
}
