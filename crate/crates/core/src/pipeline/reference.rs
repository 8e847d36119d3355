//! Published field-study figures, shown beside computed values for context.
//! They are never used as pass/fail thresholds.

use serde::{Deserialize, Serialize};

pub const REFERENCE_LABEL: &str = "reference (published field study)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub scenario: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q75: f64,
    pub max: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTest {
    pub test: String,
    pub comparison: String,
    pub statistic: String,
    pub p_value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDepthModel {
    pub cv_mae_transformed: f64,
    pub mse_transformed: f64,
    pub mae_transformed: f64,
    pub r2_transformed: f64,
    pub mse_original: f64,
    pub mae_original: f64,
    pub r2_original: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceHeightMae {
    pub kind: String,
    pub n: usize,
    pub mae_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstants {
    pub label: String,
    pub geolocation: Vec<ReferenceSummary>,
    pub tests: Vec<ReferenceTest>,
    pub depth_model: ReferenceDepthModel,
    /// Height MAE by object class for the inside/slow drive.
    pub height_mae_in_slow: Vec<ReferenceHeightMae>,
}

#[allow(clippy::approx_constant)]
pub fn reference_constants() -> ReferenceConstants {
    let row = |scenario: &str, n, mean, median, std, min, q25, q75, max, iqr| ReferenceSummary {
        scenario: scenario.into(),
        n,
        mean,
        median,
        std,
        min,
        q25,
        q75,
        max,
        iqr,
    };
    let test = |test: &str, comparison: &str, statistic: &str, p: &str| ReferenceTest {
        test: test.into(),
        comparison: comparison.into(),
        statistic: statistic.into(),
        p_value: p.into(),
    };
    let mae = |kind: &str, n, mae_m| ReferenceHeightMae { kind: kind.into(), n, mae_m };
    ReferenceConstants {
        label: REFERENCE_LABEL.into(),
        geolocation: vec![
            row("In_Slow", 63, 2.83, 1.92, 2.71, 0.31, 1.06, 3.70, 16.19, 2.64),
            row("In_Speed", 62, 5.01, 3.60, 4.26, 0.15, 1.68, 7.94, 16.57, 6.25),
            row("Out_Slow", 63, 3.04, 2.24, 2.53, 0.48, 1.43, 3.82, 10.93, 2.39),
            row("Out_Speed", 62, 4.13, 3.44, 3.14, 0.47, 1.86, 5.50, 16.12, 3.63),
        ],
        tests: vec![
            test("wilcoxon", "mount (inside vs outside)", "W = 919.0", "0.6869"),
            test("wilcoxon", "speed (slow vs high)", "W = 353.0", "<0.0001"),
            test("friedman", "all four scenarios", "chi2 = 19.29", "0.0002"),
            test("wilcoxon", "In_Slow vs In_Speed", "W = 375.0", "<0.0001"),
            test("wilcoxon", "Out_Slow vs Out_Speed", "W = 488.0", "0.0006"),
            test("wilcoxon", "In_Slow vs Out_Slow", "W = 739.0", "0.0959"),
            test("wilcoxon", "In_Speed vs Out_Speed", "W = 778.0", "0.1640"),
        ],
        depth_model: ReferenceDepthModel {
            cv_mae_transformed: 0.3965,
            mse_transformed: 0.1797,
            mae_transformed: 0.3118,
            r2_transformed: 0.9200,
            mse_original: 36.5503,
            mae_original: 4.1590,
            r2_original: 0.9051,
        },
        height_mae_in_slow: vec![mae("tree", 38, 2.09), mae("pole", 16, 0.88), mae("other", 8, 1.17)],
    }
}
