//! Closed-form qutrit extreme channels and a worked three-term decomposition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::channel::{kraus_to_choi, mix_choi, ChoiState, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};

/// Euler-type angles of an `SU(3)` element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su3Params {
    pub theta: [f64; 3],
    pub phi: [f64; 5],
}

impl Su3Params {
    pub fn validate(&self) -> Result<()> {
        if self.theta.iter().any(|t| !(0.0..=FRAC_PI_2).contains(t)) {
            return Err(Error::InvalidParameter(format!(
                "SU(3) angles must lie in [0, π/2]: {:?}",
                self.theta
            )));
        }
        if self.phi.iter().any(|p| !(0.0..=2.0 * PI).contains(p)) {
            return Err(Error::InvalidParameter(format!(
                "SU(3) phases must lie in [0, 2π]: {:?}",
                self.phi
            )));
        }
        Ok(())
    }
}

fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// The `SU(3)` matrix for the given angles.
pub fn su3(p: &Su3Params) -> ComplexMatrix {
    let [t1, t2, t3] = p.theta;
    let [p1, p2, p3, p4, p5] = p.phi;
    let (s1, c1) = t1.sin_cos();
    let (s2, c2) = t2.sin_cos();
    let (s3, c3) = t3.sin_cos();
    let entries = [
        e(p1) * c1 * c2,
        e(p3) * s1,
        e(p4) * c1 * s2,
        e(-p4 - p5) * s2 * s3 - e(p1 + p2 - p3) * s1 * c2 * c3,
        e(p2) * c1 * c3,
        -e(-p1 - p5) * c2 * s3 - e(p2 - p3 + p4) * s1 * s2 * c3,
        -e(-p2 - p4) * s2 * c3 - e(p1 - p3 + p5) * s1 * c2 * s3,
        e(p5) * c1 * s3,
        e(-p1 - p2) * c2 * c3 - e(-p3 + p4 + p5) * s1 * s2 * s3,
    ];
    ComplexMatrix::from_row_slice(3, 3, &entries)
}

/// Six Kraus angles and three `SU(3)` rotations `(R1, R2, R3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QutritRefParams {
    pub angles: [f64; 6],
    pub rotations: [Su3Params; 3],
}

impl QutritRefParams {
    pub fn validate(&self) -> Result<()> {
        if self.angles.iter().any(|a| !(0.0..=2.0 * PI).contains(a)) {
            return Err(Error::InvalidParameter(format!(
                "Kraus angles must lie in [0, 2π]: {:?}",
                self.angles
            )));
        }
        self.rotations.iter().try_for_each(Su3Params::validate)
    }
}

/// Undressed Kraus operators `(F_0, F_1, F_2)` of the closed-form family.
pub fn qutrit_f(angles: &[f64; 6]) -> [ComplexMatrix; 3] {
    let [a, b, c, d, e, f] = angles.map(|x| x.sin_cos());
    // (sin, cos) pairs
    let r = |x: f64| Complex64::new(x, 0.0);
    let z = r(0.0);
    let f0 = [r(a.1 * c.1), z, z, z, r(b.1), z, z, z, r(d.1)];
    let f1 = [z, r(b.0 * e.1), z, z, z, r(-d.0 * f.0), r(a.0), z, z];
    let f2 = [z, z, r(d.0 * f.1), r(a.1 * c.0), z, z, z, r(b.0 * e.0), z];
    [f0, f1, f2].map(|m| ComplexMatrix::from_row_slice(3, 3, &m))
}

/// `K_i = R1 · F_i · R2 · R3`.
pub fn qutrit_reference_kraus(p: &QutritRefParams) -> Result<KrausChannel> {
    p.validate()?;
    let [r1, r2, r3] = p.rotations.map(|r| su3(&r));
    let right = r2 * r3;
    KrausChannel::from_ops_unchecked(
        qutrit_f(&p.angles)
            .into_iter()
            .map(|f| &r1 * f * &right)
            .collect(),
    )
}

pub fn qutrit_reference_choi(p: &QutritRefParams) -> Result<ChoiState> {
    Ok(kraus_to_choi(&qutrit_reference_kraus(p)?))
}

const fn su3p(v: [f64; 8]) -> Su3Params {
    Su3Params {
        theta: [v[0], v[1], v[2]],
        phi: [v[3], v[4], v[5], v[6], v[7]],
    }
}

/// Three components approximating [`printed_target`].
pub const TABLE: [QutritRefParams; 3] = [
    QutritRefParams {
        angles: [2.1417, 4.8284, 2.3434, 4.0164, 2.7418, 3.1900],
        rotations: [
            su3p([
                1.2344, 1.2781, 0.6618, 1.1865, 4.1535, 1.6894, 0.8490, 4.7523,
            ]),
            su3p([
                0.2292, 0.6352, 0.4768, 4.0185, 3.3050, 5.0089, 2.1711, 3.6288,
            ]),
            su3p([
                0.9562, 0.1978, 0.5194, 2.6995, 5.1831, 2.1618, 3.9187, 1.2381,
            ]),
        ],
    },
    QutritRefParams {
        angles: [2.3442, 1.8620, 4.7272, 2.2822, 4.0726, 4.8792],
        rotations: [
            su3p([
                0.6197, 1.1258, 0.9545, 4.0777, 1.8561, 3.6516, 4.9058, 2.2728,
            ]),
            su3p([
                0.3668, 0.4069, 0.0651, 1.8266, 4.9335, 2.8210, 2.1526, 3.1790,
            ]),
            su3p([
                1.1377, 1.1456, 1.4608, 3.9186, 2.3296, 4.3385, 5.4539, 3.1468,
            ]),
        ],
    },
    QutritRefParams {
        angles: [2.0610, 3.9621, 1.6220, 1.0321, 2.5719, 5.2118],
        rotations: [
            su3p([
                0.3082, 0.6092, 1.4406, 4.9068, 5.4269, 2.6902, 2.8977, 0.6585,
            ]),
            su3p([
                1.1345, 0.5117, 0.6749, 4.7498, 3.1036, 5.3635, 4.5586, 3.6124,
            ]),
            su3p([
                0.3574, 1.1794, 0.3582, 2.1275, 2.5366, 5.1105, 3.3091, 2.2142,
            ]),
        ],
    },
];

pub const TABLE_PROBABILITIES: [f64; 3] = [0.2974, 0.3676, 0.3350];

/// Nonzero Choi eigenvalues of the undressed components, ascending, as tabulated.
pub const TABLE_F_EIGENVALUES: [[f64; 3]; 3] = [
    [0.5667, 0.8868, 1.5465],
    [0.5088, 1.0942, 1.3970],
    [0.5457, 0.7287, 1.7256],
];

/// Spectrum of the tabulated mixture, ascending, as printed.
pub const TABLE_MIXTURE_EIGENVALUES: [f64; 9] = [
    0.0039, 0.0280, 0.0797, 0.1264, 0.2473, 0.4395, 0.5825, 0.6515, 0.8413,
];

/// Trace distance between [`printed_target`] and the mixture of [`TABLE`].
pub const TABLE_TRACE_DISTANCE: f64 = 0.046;

/// Mixture of the three [`TABLE`] components.
pub fn table_mixture() -> Result<ChoiState> {
    let parts = TABLE
        .iter()
        .map(qutrit_reference_choi)
        .collect::<Result<Vec<_>>>()?;
    mix_choi(
        &TABLE_PROBABILITIES
            .iter()
            .copied()
            .zip(parts.iter())
            .collect::<Vec<_>>(),
    )
}

fn from_pairs(m: &[[(f64, f64); 9]; 9]) -> ComplexMatrix {
    ComplexMatrix::from_fn(9, 9, |r, c| Complex64::new(m[r][c].0, m[r][c].1))
}

/// Target Choi matrix of the worked qutrit example, as printed to four decimals.
pub fn printed_target() -> ComplexMatrix {
    from_pairs(&PRINTED_TARGET)
}

/// Approximating Choi matrix of the worked qutrit example, as printed.
pub fn printed_approximation() -> ComplexMatrix {
    from_pairs(&PRINTED_APPROXIMATION)
}

/// Tolerance under which the four-decimal printed matrices validate as Choi states.
pub const PRINTED_TOLERANCE: f64 = 1e-3;

pub fn printed_target_choi() -> Result<ChoiState> {
    ChoiState::with_tolerance(
        3,
        printed_target(),
        linalg::Tolerances::uniform(PRINTED_TOLERANCE),
    )
}

const PRINTED_TARGET: [[(f64, f64); 9]; 9] = [
    [
        (0.3105, 0.0000),
        (0.1052, 0.0154),
        (0.0394, -0.0099),
        (0.0554, 0.0013),
        (-0.0892, -0.0667),
        (0.0185, 0.0149),
        (-0.0070, 0.0066),
        (-0.1068, 0.1226),
        (0.1131, 0.0192),
    ],
    [
        (0.1052, -0.0154),
        (0.2526, 0.0000),
        (-0.0174, 0.0148),
        (0.0715, -0.0388),
        (-0.0307, -0.0814),
        (-0.1021, 0.0296),
        (-0.0250, 0.0841),
        (0.0778, -0.0614),
        (-0.0717, 0.0218),
    ],
    [
        (0.0394, 0.0099),
        (-0.0174, -0.0148),
        (0.2473, 0.0000),
        (0.0302, 0.0637),
        (0.0600, 0.0425),
        (0.0800, 0.1476),
        (-0.0986, 0.0101),
        (0.0475, -0.0007),
        (-0.0440, 0.0073),
    ],
    [
        (0.0554, -0.0013),
        (0.0715, 0.0388),
        (0.0302, -0.0637),
        (0.2891, 0.0000),
        (-0.0066, -0.0301),
        (-0.0147, 0.0141),
        (-0.0501, -0.0559),
        (0.1728, -0.0571),
        (0.1132, 0.0481),
    ],
    [
        (-0.0892, 0.0667),
        (-0.0307, 0.0814),
        (0.0600, -0.0425),
        (-0.0066, 0.0301),
        (0.2667, 0.0000),
        (0.0816, 0.0849),
        (-0.0968, 0.1558),
        (0.0234, -0.0100),
        (-0.0568, -0.0703),
    ],
    [
        (0.0185, -0.0149),
        (-0.1021, -0.0296),
        (0.0800, -0.1476),
        (-0.0147, -0.0141),
        (0.0816, -0.0849),
        (0.3716, 0.0000),
        (0.0306, 0.1539),
        (-0.1073, -0.0026),
        (0.0882, 0.0653),
    ],
    [
        (-0.0070, -0.0066),
        (-0.0250, -0.0841),
        (-0.0986, -0.0101),
        (-0.0501, 0.0559),
        (-0.0968, -0.1558),
        (0.0306, -0.1539),
        (0.4004, 0.0000),
        (-0.0986, 0.0147),
        (-0.0247, -0.0042),
    ],
    [
        (-0.1068, -0.1226),
        (0.0778, 0.0614),
        (0.0475, 0.0007),
        (0.1728, 0.0571),
        (0.0234, 0.0100),
        (-0.1073, 0.0026),
        (-0.0986, -0.0147),
        (0.4807, 0.0000),
        (-0.0641, -0.0998),
    ],
    [
        (0.1131, -0.0192),
        (-0.0717, -0.0218),
        (-0.0440, -0.0073),
        (0.1132, -0.0481),
        (-0.0568, 0.0703),
        (0.0882, -0.0653),
        (-0.0247, 0.0042),
        (-0.0641, 0.0998),
        (0.3811, 0.0000),
    ],
];

const PRINTED_APPROXIMATION: [[(f64, f64); 9]; 9] = [
    [
        (0.3103, 0.0000),
        (0.1082, 0.0119),
        (0.0386, -0.0089),
        (0.0559, 0.0007),
        (-0.0859, -0.0676),
        (0.0207, 0.0164),
        (-0.0090, 0.0044),
        (-0.1058, 0.1225),
        (0.1126, 0.0218),
    ],
    [
        (0.1082, -0.0119),
        (0.2522, 0.0000),
        (-0.0243, 0.0256),
        (0.0726, -0.0333),
        (-0.0393, -0.0777),
        (-0.0922, 0.0272),
        (-0.0260, 0.0903),
        (0.0797, -0.0632),
        (-0.0676, 0.0221),
    ],
    [
        (0.0386, 0.0089),
        (-0.0243, -0.0256),
        (0.2520, 0.0000),
        (0.0309, 0.0603),
        (0.0645, 0.0313),
        (0.0765, 0.1407),
        (-0.1034, 0.0120),
        (0.0461, 0.0006),
        (-0.0414, 0.0107),
    ],
    [
        (0.0559, -0.0007),
        (0.0726, 0.0333),
        (0.0309, -0.0603),
        (0.2951, 0.0000),
        (-0.0095, -0.0290),
        (-0.0133, 0.0100),
        (-0.0521, -0.0552),
        (0.1708, -0.0550),
        (0.1136, 0.0481),
    ],
    [
        (-0.0859, 0.0676),
        (-0.0393, 0.0777),
        (0.0645, -0.0313),
        (-0.0095, 0.0290),
        (0.2677, 0.0000),
        (0.0871, 0.0753),
        (-0.0975, 0.1628),
        (0.0246, -0.0135),
        (-0.0505, -0.0714),
    ],
    [
        (0.0207, -0.0164),
        (-0.0922, -0.0272),
        (0.0765, -0.1407),
        (-0.0133, -0.0100),
        (0.0871, -0.0753),
        (0.3731, 0.0000),
        (0.0329, 0.1523),
        (-0.1037, -0.0034),
        (0.0828, 0.0638),
    ],
    [
        (-0.0090, -0.0044),
        (-0.0260, -0.0903),
        (-0.1034, -0.0120),
        (-0.0521, 0.0552),
        (-0.0975, -0.1628),
        (0.0329, -0.1523),
        (0.3946, 0.0000),
        (-0.0987, 0.0171),
        (-0.0253, -0.0012),
    ],
    [
        (-0.1058, -0.1225),
        (0.0797, 0.0632),
        (0.0461, -0.0006),
        (0.1708, 0.0550),
        (0.0246, 0.0135),
        (-0.1037, 0.0034),
        (-0.0987, -0.0171),
        (0.4802, 0.0000),
        (-0.0628, -0.1009),
    ],
    [
        (0.1126, -0.0218),
        (-0.0676, -0.0221),
        (-0.0414, -0.0107),
        (0.1136, -0.0481),
        (-0.0505, 0.0714),
        (0.0828, -0.0638),
        (-0.0253, 0.0012),
        (-0.0628, 0.1009),
        (0.3749, 0.0000),
    ],
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::trace_distance;
    use crate::linalg::{max_abs, unitarity_residual};

    #[test]
    fn su3_is_special_unitary() {
        for p in TABLE.iter().flat_map(|t| t.rotations.iter()) {
            let u = su3(p);
            assert!(unitarity_residual(&u) < 1e-12);
            assert!((u.determinant() - linalg::ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_form_is_trace_preserving() {
        for t in &TABLE {
            assert!(qutrit_reference_kraus(t).unwrap().completeness_residual() < 1e-12);
        }
    }

    #[test]
    fn ranges_are_enforced() {
        let mut p = TABLE[0];
        p.rotations[1].theta[0] = 2.0;
        assert!(qutrit_reference_kraus(&p).is_err());
        let mut p = TABLE[0];
        p.angles[3] = -0.1;
        assert!(qutrit_reference_kraus(&p).is_err());
    }

    #[test]
    fn printed_matrices_are_near_valid() {
        printed_target_choi().unwrap();
        let c = printed_target();
        assert!(max_abs(&(&c - c.adjoint())) < 1e-12);
        let dt = trace_distance(&c, &printed_approximation()).unwrap();
        assert!((dt - TABLE_TRACE_DISTANCE).abs() < 1e-3);
    }
}
