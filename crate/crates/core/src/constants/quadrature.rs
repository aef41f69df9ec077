//! Globally adaptive 21-point Gauss-Kronrod quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! error drops below `max(abs_tol, rel_tol * |I|)`. Nodes are interior only,
//! so integrable endpoint singularities never produce a non-finite sample.

#![allow(clippy::excessive_precision)]

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Config(format!(
                "quadrature tolerances must be positive (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Config("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }

    /// The same settings with both tolerances halved.
    pub fn halved(&self) -> Self {
        QuadratureSpec {
            abs_tol: self.abs_tol / 2.0,
            rel_tol: self.rel_tol / 2.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_814_767,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// 10-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut fv = [(0.0, 0.0); 10];
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        fv[j] = (f(center - dx), f(center + dx));
        let pair = fv[j].0 + fv[j].1;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let value = kronrod * half;
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    // QUADPACK rescaling of the raw Kronrod-Gauss difference.
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    error = error.max(50.0 * f64::EPSILON * value.abs());
    Segment { a, b, value, error }
}

/// Integrates `f` over `[a, b]`.
///
/// Fails with a numerics error when the subdivision budget is exhausted
/// before the tolerance is met, or when the integrand is not finite.
pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let mut segments = vec![gk21(&f, a, b)];
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Numerics(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if error <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
            return Ok(QuadratureResult {
                value,
                error,
                subdivisions: segments.len(),
            });
        }
        if segments.len() >= spec.max_subdivisions {
            return Err(Error::Numerics(format!(
                "quadrature on [{a}, {b}] did not converge: estimate {value}, error {error} after {} subdivisions",
                segments.len()
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("segments is never empty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(Error::Numerics(format!(
                "interval around {mid} cannot be bisected further"
            )));
        }
        segments.push(gk21(&f, seg.a, mid));
        segments.push(gk21(&f, mid, seg.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_panel_is_exact_for_low_degree_polynomials() {
        // Kronrod-21 integrates degree <= 31 exactly.
        for deg in 0..=31 {
            let s = gk21(&|x: f64| x.powi(deg), 0.0, 1.0);
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((s.value - exact).abs() < 1e-14, "degree {deg}: {}", s.value);
        }
    }

    #[test]
    fn gauss_part_is_exact_to_degree_19() {
        let f = |x: f64| x.powi(19) + x.powi(4);
        let s = gk21(&f, -1.0, 1.0);
        assert!(s.error < 1e-13);
        assert!((s.value - 0.4).abs() < 1e-14);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        let spec = QuadratureSpec::new(1e-10, 1e-10, 500).unwrap();
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, &spec).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn smooth_integrand() {
        let r = integrate(f64::exp, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((r.value - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn exhausted_budget_is_an_error() {
        let spec = QuadratureSpec::new(1e-15, 1e-15, 2).unwrap();
        let err = integrate(|x: f64| x.powf(-0.9), 0.0, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::Numerics(_)));
    }

    #[test]
    fn tolerances_must_be_positive() {
        assert!(QuadratureSpec::new(0.0, 1e-8, 10).is_err());
        assert!(QuadratureSpec::new(1e-8, 1e-8, 0).is_err());
    }

    #[test]
    fn halving_tolerance_stays_within_reported_error() {
        let spec = QuadratureSpec::new(1e-8, 1e-8, 500).unwrap();
        let f = |x: f64| (1.0 + x).ln() / x.sqrt();
        let r1 = integrate(f, 0.0, 1.0, &spec).unwrap();
        let r2 = integrate(f, 0.0, 1.0, &spec.halved()).unwrap();
        assert!((r1.value - r2.value).abs() <= r1.error.max(spec.abs_tol));
    }
}
