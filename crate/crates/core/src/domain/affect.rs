use serde::{Deserialize, Serialize};

/// Number of affect dimensions.
pub const AFFECT_DIM: usize = 8;

/// Affect dimension names, in vector order.
pub const AFFECT_NAMES: [&str; AFFECT_DIM] = [
    "joy",
    "sadness",
    "fear",
    "surprise",
    "anger",
    "disgust",
    "trust",
    "anticipation",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AffectError {
    #[error("affect vector must have {AFFECT_DIM} components, got {0}")]
    Length(usize),
    #[error("affect component {name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
}

/// Intensities for the eight primary emotions, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AffectVector([f64; AFFECT_DIM]);

impl AffectVector {
    pub fn new(values: [f64; AFFECT_DIM]) -> Result<Self, AffectError> {
        for (name, &value) in AFFECT_NAMES.iter().zip(values.iter()) {
            if !(0.0..=1.0).contains(&value) {
                return Err(AffectError::OutOfRange { name, value });
            }
        }
        Ok(Self(values))
    }

    /// Builds a vector, clamping each component into `[0, 1]` (NaN becomes 0).
    /// Returns the names of components that had to be adjusted.
    pub fn clamped(values: [f64; AFFECT_DIM]) -> (Self, Vec<&'static str>) {
        let mut adjusted = Vec::new();
        let mut out = [0.0; AFFECT_DIM];
        for i in 0..AFFECT_DIM {
            let v = values[i];
            let c = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            if c != v {
                adjusted.push(AFFECT_NAMES[i]);
            }
            out[i] = c;
        }
        (Self(out), adjusted)
    }

    pub fn values(&self) -> &[f64; AFFECT_DIM] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        AFFECT_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.0[i])
    }

    /// Name of the strongest dimension (first wins on ties).
    pub fn dominant(&self) -> &'static str {
        let mut best = 0;
        for i in 1..AFFECT_DIM {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        AFFECT_NAMES[best]
    }

    pub fn describe(&self) -> String {
        AFFECT_NAMES
            .iter()
            .zip(self.0.iter())
            .map(|(n, v)| format!("{n}={v:.2}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl TryFrom<Vec<f64>> for AffectVector {
    type Error = AffectError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        let arr: [f64; AFFECT_DIM] = v
            .try_into()
            .map_err(|v: Vec<f64>| AffectError::Length(v.len()))?;
        Self::new(arr)
    }
}

impl From<AffectVector> for Vec<f64> {
    fn from(a: AffectVector) -> Self {
        a.0.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_range() {
        assert_eq!(
            AffectVector::try_from(vec![0.0; 7]).unwrap_err(),
            AffectError::Length(7)
        );
        assert!(AffectVector::new([0.0, 0.0, 0.0, 0.0, 1.2, 0.0, 0.0, 0.0]).is_err());
        assert!(serde_json::from_str::<AffectVector>("[0,0,0,0,0,0,0,-0.1]").is_err());
    }

    #[test]
    fn clamp_reports_adjusted_dims() {
        let (v, adjusted) = AffectVector::clamped([0.1, 0.0, 0.0, 0.0, 1.4, 0.0, f64::NAN, 0.0]);
        assert_eq!(v.get("anger"), Some(1.0));
        assert_eq!(v.get("trust"), Some(0.0));
        assert_eq!(adjusted, ["anger", "trust"]);
        assert_eq!(v.dominant(), "anger");
    }
}
