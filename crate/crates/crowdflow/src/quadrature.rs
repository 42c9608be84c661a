//! Quadrature rules on the unit interval and the reference triangle.
//!
//! All rules are given on reference coordinates. Interval rules list `(t, w)`
//! with nodes `t` in `[0, 1]` and weights summing to one; triangle rules list
//! barycentric coordinates `(l0, l1, l2)` with weights summing to one, so a
//! physical integral is the weighted sum times the cell measure.

/// Two-point Gauss rule on `[0, 1]`, exact through cubic polynomials.
pub const GAUSS_2: [(f64, f64); 2] = [
    (0.5 - SQRT_3_INV_HALF, 0.5),
    (0.5 + SQRT_3_INV_HALF, 0.5),
];

const SQRT_3_INV_HALF: f64 = 0.288_675_134_594_812_9;

/// Five-point Gauss rule on `[0, 1]`, exact through degree nine.
pub const GAUSS_5: [(f64, f64); 5] = [
    (0.5 - 0.453_089_922_969_332, 0.118_463_442_528_094_54),
    (0.5 - 0.269_234_655_052_841_55, 0.239_314_335_249_683_23),
    (0.5, 0.284_444_444_444_444_44),
    (0.5 + 0.269_234_655_052_841_55, 0.239_314_335_249_683_23),
    (0.5 + 0.453_089_922_969_332, 0.118_463_442_528_094_54),
];

/// Edge-midpoint rule on the reference triangle, exact through degree two.
pub const TRI_MIDPOINT: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

/// Seven-point rule on the reference triangle, exact through degree five.
pub const TRI_DEG5: [([f64; 3], f64); 7] = {
    const A: f64 = 0.101_286_507_323_456_34;
    const B: f64 = 0.470_142_064_105_115_1;
    const WA: f64 = 0.125_939_180_544_827_15;
    const WB: f64 = 0.132_394_152_788_506_2;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ]
};
