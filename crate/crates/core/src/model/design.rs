//! Design rows for the latency and energy equations.
//!
//! Column order (numeric data-type encoding, 12 columns):
//!
//! | idx | name      | value                              |
//! |-----|-----------|------------------------------------|
//! | 0   | alpha     | 1                                  |
//! | 1-3 | beta_kNN, beta_RF, beta_NN | algorithm contrasts vs SVM |
//! | 4   | beta_D    | ln n (latency) or n (energy)       |
//! | 5   | gamma_D   | p                                  |
//! | 6   | delta_D   | t code 0/1/2                       |
//! | 7-11| phi_expl .. phi_privacy | guardrail intensities |
//!
//! The one-hot data-type encoding replaces column 6 with indicators for
//! text (`delta_D`) and image (`delta_D_image`), giving 13 columns.
//!
//! The algorithm slots are the 4-way one-hot `{SVM, kNN, RF, NN}` with the
//! SVM slot dropped: an SVM row has all three contrasts at 0 and its
//! baseline is absorbed into `alpha`. A four-slot coefficient vector
//! `(b_SVM, b_kNN, b_RF, b_NN)` maps to `alpha + b_SVM` and contrasts
//! `b_x - b_SVM`.

use serde::{Deserialize, Serialize};

use super::{PredictorInputs, Target};
use crate::classifiers::AlgorithmKind;
use crate::datasets::DataType;

pub const NUMERIC_COLUMNS: usize = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeEncoding {
    /// `t` entered as its code 0, 1, 2.
    #[default]
    Numeric,
    /// `t` entered as text and image indicators against tabular.
    OneHot,
}

impl TypeEncoding {
    pub fn width(self) -> usize {
        match self {
            TypeEncoding::Numeric => NUMERIC_COLUMNS,
            TypeEncoding::OneHot => NUMERIC_COLUMNS + 1,
        }
    }

    /// Coefficient names in column order.
    pub fn column_names(self) -> Vec<&'static str> {
        let mut names = vec!["alpha", "beta_kNN", "beta_RF", "beta_NN", "beta_D", "gamma_D", "delta_D"];
        if self == TypeEncoding::OneHot {
            names.push("delta_D_image");
        }
        names.extend(["phi_expl", "phi_fair", "phi_interp", "phi_safety", "phi_privacy"]);
        names
    }

    /// Index of the first guardrail column.
    pub fn guardrail_offset(self) -> usize {
        self.width() - 5
    }
}

/// Column index of the dataset-size term.
pub const SIZE_COLUMN: usize = 4;

pub fn size_term(n: u64, target: Target) -> f64 {
    match target {
        Target::Latency => (n as f64).ln(),
        Target::Energy => n as f64,
    }
}

/// The 12-component numeric-encoding design row.
pub fn design_row(inputs: &PredictorInputs, target: Target) -> [f64; NUMERIC_COLUMNS] {
    let v = design_row_with(inputs, target, TypeEncoding::Numeric);
    let mut row = [0.0; NUMERIC_COLUMNS];
    row.copy_from_slice(&v);
    row
}

pub fn design_row_with(inputs: &PredictorInputs, target: Target, encoding: TypeEncoding) -> Vec<f64> {
    let mut row = Vec::with_capacity(encoding.width());
    row.push(1.0);
    for kind in [AlgorithmKind::Knn, AlgorithmKind::Rf, AlgorithmKind::Nn] {
        row.push(if inputs.algorithm == kind { 1.0 } else { 0.0 });
    }
    row.push(size_term(inputs.n, target));
    row.push(inputs.p as f64);
    match encoding {
        TypeEncoding::Numeric => row.push(f64::from(inputs.t.code())),
        TypeEncoding::OneHot => {
            row.push(if inputs.t == DataType::Text { 1.0 } else { 0.0 });
            row.push(if inputs.t == DataType::Image { 1.0 } else { 0.0 });
        }
    }
    row.extend(inputs.g.as_array());
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guardrails::GuardrailConfig;

    fn inputs(algorithm: AlgorithmKind, n: u64, p: u64, t: DataType, g: GuardrailConfig) -> PredictorInputs {
        PredictorInputs::new(algorithm, n, p, t, g).unwrap()
    }

    #[test]
    fn svm_reference_row() {
        let row =
            design_row(&inputs(AlgorithmKind::Svm, 1, 1, DataType::Tabular, GuardrailConfig::OFF), Target::Latency);
        assert_eq!(row, [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rf_energy_row_unrolled() {
        let g = GuardrailConfig::single(0, 0.7).unwrap();
        let row = design_row(&inputs(AlgorithmKind::Rf, 100, 5, DataType::Image, g), Target::Energy);
        assert_eq!(row, [1.0, 0.0, 1.0, 0.0, 100.0, 5.0, 2.0, 0.7, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn one_hot_encoding_adds_one_column() {
        let g = GuardrailConfig::from_array([0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let row = design_row_with(
            &inputs(AlgorithmKind::Nn, 10, 3, DataType::Text, g),
            Target::Latency,
            TypeEncoding::OneHot,
        );
        assert_eq!(row.len(), 13);
        assert_eq!(&row[6..8], &[1.0, 0.0]);
        assert_eq!(&row[8..], &[0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(TypeEncoding::OneHot.column_names().len(), 13);
        assert_eq!(TypeEncoding::OneHot.column_names()[TypeEncoding::OneHot.guardrail_offset()], "phi_expl");
    }
}
