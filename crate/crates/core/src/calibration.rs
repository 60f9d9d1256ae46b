//! Values with uncertainties, transmission chains, and the calibration
//! constant that converts observed count-rate ratios into emission-rate
//! ratios.
//!
//! All uncertainties are symmetric and treated as independent. Two
//! first-order propagation rules are offered: [`Propagation::Linear`] adds the
//! absolute contributions `|∂f/∂x_i|·σ_i` (worst case) and
//! [`Propagation::Quadrature`] adds them in quadrature. The linear rule is the
//! default.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    #[default]
    Linear,
    Quadrature,
}

impl Propagation {
    /// Combines independent absolute contributions `|∂f/∂x_i|·σ_i`.
    pub fn combine<I: IntoIterator<Item = f64>>(self, contributions: I) -> f64 {
        match self {
            Propagation::Linear => contributions.into_iter().map(f64::abs).fold(0.0, |a, b| a + b),
            Propagation::Quadrature => contributions.into_iter().map(|c| c * c).sum::<f64>().sqrt(),
        }
    }
}

impl FromStr for Propagation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Propagation::Linear),
            "quadrature" => Ok(Propagation::Quadrature),
            other => Err(Error::domain(format!("unknown propagation mode '{other}'"))),
        }
    }
}

impl fmt::Display for Propagation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Propagation::Linear => "linear",
            Propagation::Quadrature => "quadrature",
        })
    }
}

/// A number with a one-standard-uncertainty (or worst-case) error bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredValue {
    pub value: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

impl MeasuredValue {
    pub fn new(value: f64, sigma: f64) -> Result<Self> {
        if !value.is_finite() || !sigma.is_finite() {
            return Err(Error::domain("measured value and sigma must be finite"));
        }
        if sigma < 0.0 {
            return Err(Error::domain(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self {
            value,
            sigma,
            label: String::new(),
        })
    }

    pub fn exact(value: f64) -> Self {
        Self {
            value,
            sigma: 0.0,
            label: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `sigma / |value|`; infinite for a zero value with non-zero sigma.
    pub fn relative(&self) -> f64 {
        if self.sigma == 0.0 {
            0.0
        } else {
            self.sigma / self.value.abs()
        }
    }

    /// Product of two values.
    pub fn mul(&self, other: &MeasuredValue, mode: Propagation) -> MeasuredValue {
        let value = self.value * other.value;
        let sigma = mode.combine([other.value * self.sigma, self.value * other.sigma]);
        MeasuredValue::exact(value).with_sigma(sigma)
    }

    /// Quotient of two values; the divisor must be non-zero.
    pub fn div(&self, other: &MeasuredValue, mode: Propagation) -> Result<MeasuredValue> {
        if other.value == 0.0 {
            return Err(Error::domain("division by a zero measured value"));
        }
        let value = self.value / other.value;
        let sigma = mode.combine([self.sigma / other.value, value / other.value * other.sigma]);
        Ok(MeasuredValue::exact(value).with_sigma(sigma))
    }

    pub fn scale(&self, factor: f64) -> MeasuredValue {
        MeasuredValue {
            value: self.value * factor,
            sigma: self.sigma * factor.abs(),
            label: self.label.clone(),
        }
    }

    fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }
}

impl fmt::Display for MeasuredValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.label.is_empty() {
            write!(f, "{} ± {}", self.value, self.sigma)
        } else {
            write!(f, "{} = {} ± {}", self.label, self.value, self.sigma)
        }
    }
}

/// First-order propagation for `f = scale · Π x_i^{p_i}`.
///
/// The partial derivative of each factor is taken analytically, so a zero
/// factor with exponent 1 still propagates its absolute uncertainty.
pub fn power_law(scale: f64, factors: &[(&MeasuredValue, f64)], mode: Propagation) -> Result<MeasuredValue> {
    let mut value = scale;
    for (x, p) in factors {
        if x.value == 0.0 && *p < 0.0 {
            return Err(Error::domain(format!("zero value '{}' raised to a negative power", x.label)));
        }
        value *= x.value.powf(*p);
    }
    let contributions = factors.iter().enumerate().map(|(i, (x, p))| {
        // ∂f/∂x_i = scale · p · x_i^{p-1} · Π_{j≠i} x_j^{p_j}
        let mut d = scale * p * x.value.powf(p - 1.0);
        for (j, (y, q)) in factors.iter().enumerate() {
            if j != i {
                d *= y.value.powf(*q);
            }
        }
        d * x.sigma
    });
    Ok(MeasuredValue::exact(value).with_sigma(mode.combine(contributions.collect::<Vec<_>>())))
}

/// Ordered optical path; each element is a transmission in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionChain {
    pub factors: Vec<MeasuredValue>,
}

impl TransmissionChain {
    pub fn new(factors: Vec<MeasuredValue>) -> Result<Self> {
        for f in &factors {
            if !(f.value > 0.0 && f.value <= 1.0) {
                return Err(Error::domain(format!(
                    "transmission factor '{}' = {} outside (0, 1]",
                    f.label, f.value
                )));
            }
        }
        Ok(Self { factors })
    }

    /// Chain of exact factors, labelled by position.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| MeasuredValue::exact(v).with_label(format!("factor{i}")))
                .collect(),
        )
    }
}

/// Overall transmission of a chain: the product of its factors.
pub fn chain_transmission(chain: &TransmissionChain, mode: Propagation) -> Result<MeasuredValue> {
    if chain.factors.is_empty() {
        return Err(Error::domain("transmission chain has no factors"));
    }
    let terms: Vec<(&MeasuredValue, f64)> = chain.factors.iter().map(|f| (f, 1.0)).collect();
    power_law(1.0, &terms, mode)
}

/// Radiation-path collection efficiency: objective acceptance times the
/// fiber-lens enhancement.
pub fn effective_collection(
    na_fraction: &MeasuredValue,
    enhancement: &MeasuredValue,
    mode: Propagation,
) -> Result<MeasuredValue> {
    if na_fraction.value <= 0.0 || enhancement.value <= 0.0 {
        return Err(Error::domain("collection fraction and enhancement must be positive"));
    }
    power_law(1.0, &[(na_fraction, 1.0), (enhancement, 1.0)], mode)
}

/// `C = κg / (2 κr ηr) · (η_APD1 / η_APD2)`.
///
/// The factor 2 accounts for detecting the guided light at only one fiber end.
pub fn compute_c(
    kappa_g: &MeasuredValue,
    kappa_r: &MeasuredValue,
    eta_r: &MeasuredValue,
    detector_ratio: &MeasuredValue,
    mode: Propagation,
) -> Result<MeasuredValue> {
    if kappa_r.value <= 0.0 || eta_r.value <= 0.0 {
        return Err(Error::domain("kappa_r and eta_r must be positive"));
    }
    power_law(
        0.5,
        &[(kappa_g, 1.0), (kappa_r, -1.0), (eta_r, -1.0), (detector_ratio, 1.0)],
        mode,
    )
}

/// The full set of path constants for one setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    pub kappa_g: MeasuredValue,
    /// Product of the individually measured guided-path elements, when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_g_chain: Option<MeasuredValue>,
    pub kappa_r: MeasuredValue,
    pub eta_r: MeasuredValue,
    pub detector_ratio: MeasuredValue,
    pub c: MeasuredValue,
    pub propagation: Propagation,
}

impl CalibrationConstants {
    pub fn new(
        kappa_g: MeasuredValue,
        kappa_r: MeasuredValue,
        eta_r: MeasuredValue,
        detector_ratio: MeasuredValue,
        propagation: Propagation,
    ) -> Result<Self> {
        let c = compute_c(&kappa_g, &kappa_r, &eta_r, &detector_ratio, propagation)?.with_label("C");
        Ok(Self {
            kappa_g: kappa_g.with_label("kappa_g"),
            kappa_g_chain: None,
            kappa_r: kappa_r.with_label("kappa_r"),
            eta_r: eta_r.with_label("eta_r"),
            detector_ratio: detector_ratio.with_label("detector_ratio"),
            c,
            propagation,
        })
    }

    /// Constants of the reference setup: κg = 0.496(21), κr = 0.235(13),
    /// ηr = 0.148(3), identical detectors.
    pub fn reference_setup() -> Self {
        Self::new(
            MeasuredValue::new(0.496, 0.021).unwrap(),
            MeasuredValue::new(0.235, 0.013).unwrap(),
            MeasuredValue::new(0.148, 0.003).unwrap(),
            MeasuredValue::exact(1.0),
            Propagation::Linear,
        )
        .expect("reference constants are valid")
    }

    /// Relative mismatch between the stored C and one recomputed from the
    /// stored path constants.
    pub fn consistency_error(&self) -> f64 {
        let c = 0.5 * self.kappa_g.value / (self.kappa_r.value * self.eta_r.value) * self.detector_ratio.value;
        ((c - self.c.value) / c).abs()
    }

    /// Builds constants from `<name>.value` / `<name>.sigma` pairs.
    ///
    /// Recognized names: `kappa_g`, `kappa_r`, `eta_r`, `detector_ratio`,
    /// `na_fraction` and `enhancement` (used when `eta_r` is absent), and
    /// chain elements `kappa_g.chain.<element>` / `kappa_r.chain.<element>`.
    /// A missing κr is replaced by its chain product; a κg chain is kept
    /// alongside a directly measured κg, which takes precedence.
    pub fn from_key_values(entries: &KeyValues, mode: Propagation) -> Result<Self> {
        let kappa_g_chain = entries.chain("kappa_g")?.map(|c| chain_transmission(&c, mode)).transpose()?;
        let kappa_r_chain = entries.chain("kappa_r")?.map(|c| chain_transmission(&c, mode)).transpose()?;

        let kappa_g = match entries.measured("kappa_g")? {
            Some(v) => v,
            None => kappa_g_chain
                .clone()
                .ok_or_else(|| Error::Schema("missing kappa_g (value or chain)".into()))?,
        };
        let kappa_r = match entries.measured("kappa_r")? {
            Some(v) => v,
            None => kappa_r_chain.ok_or_else(|| Error::Schema("missing kappa_r (value or chain)".into()))?,
        };
        let eta_r = match entries.measured("eta_r")? {
            Some(v) => v,
            None => {
                let na = entries
                    .measured("na_fraction")?
                    .ok_or_else(|| Error::Schema("missing eta_r (or na_fraction + enhancement)".into()))?;
                let enh = entries
                    .measured("enhancement")?
                    .ok_or_else(|| Error::Schema("missing enhancement for eta_r".into()))?;
                effective_collection(&na, &enh, mode)?
            }
        };
        let detector_ratio = entries.measured("detector_ratio")?.unwrap_or_else(|| MeasuredValue::exact(1.0));
        let mut out = Self::new(kappa_g, kappa_r, eta_r, detector_ratio, mode)?;
        out.kappa_g_chain = kappa_g_chain.map(|v| v.with_label("kappa_g_chain"));
        Ok(out)
    }
}

/// Parsed `key = value` calibration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, f64>,
}

impl KeyValues {
    /// Parses `key = number` lines; `#` starts a comment, blank lines are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = k.trim().to_string();
            let value: f64 = v.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("'{}' is not a number", v.trim()),
            })?;
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    /// `<name>.value` with optional `<name>.sigma` (default 0).
    pub fn measured(&self, name: &str) -> Result<Option<MeasuredValue>> {
        let sigma = self.get(&format!("{name}.sigma"));
        match self.get(&format!("{name}.value")) {
            Some(v) => Ok(Some(MeasuredValue::new(v, sigma.unwrap_or(0.0))?.with_label(name))),
            None if sigma.is_some() => Err(Error::Schema(format!("'{name}.sigma' given without '{name}.value'"))),
            None => Ok(None),
        }
    }

    fn chain(&self, name: &str) -> Result<Option<TransmissionChain>> {
        let prefix = format!("{name}.chain.");
        let mut elements: Vec<String> = self
            .entries
            .keys()
            .filter_map(|k| k.strip_prefix(&prefix))
            .filter_map(|rest| rest.strip_suffix(".value"))
            .map(str::to_string)
            .collect();
        if elements.is_empty() {
            return Ok(None);
        }
        elements.dedup();
        let factors = elements
            .iter()
            .map(|e| {
                let key = format!("{prefix}{e}");
                self.measured(&key).map(|m| m.expect("value key present").with_label(e.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        TransmissionChain::new(factors).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mv(v: f64, s: f64) -> MeasuredValue {
        MeasuredValue::new(v, s).unwrap()
    }

    #[test]
    fn guided_path_chain_product() {
        let chain = TransmissionChain::from_values(&[0.81, 0.81, 0.83, 0.90]).unwrap();
        let t = chain_transmission(&chain, Propagation::Linear).unwrap();
        assert_abs_diff_eq!(t.value, 0.490, epsilon = 5e-4);
        assert_eq!(t.sigma, 0.0);
    }

    #[test]
    fn radiation_path_chain_product() {
        let chain = TransmissionChain::from_values(&[0.74, 0.63, 0.83, 0.75, 0.81]).unwrap();
        let t = chain_transmission(&chain, Propagation::Linear).unwrap();
        assert_abs_diff_eq!(t.value, 0.235, epsilon = 5e-4);
    }

    #[test]
    fn single_factor_chain_is_identity() {
        let chain = TransmissionChain::new(vec![mv(0.7, 0.02)]).unwrap();
        let t = chain_transmission(&chain, Propagation::Quadrature).unwrap();
        assert_eq!(t.value, 0.7);
        assert_abs_diff_eq!(t.sigma, 0.02, epsilon = 1e-15);
    }

    #[test]
    fn chain_rejects_out_of_range_factor() {
        assert!(TransmissionChain::from_values(&[0.5, 1.2]).is_err());
        assert!(TransmissionChain::from_values(&[0.0]).is_err());
        assert!(chain_transmission(&TransmissionChain { factors: vec![] }, Propagation::Linear).is_err());
    }

    #[test]
    fn effective_collection_reference_values() {
        let eta = effective_collection(&mv(0.10, 0.0), &mv(1.48, 0.03), Propagation::Linear).unwrap();
        assert_abs_diff_eq!(eta.value, 0.148, epsilon = 1e-12);
        assert_abs_diff_eq!(eta.sigma, 0.003, epsilon = 1e-12);

        let same = effective_collection(&mv(0.37, 0.01), &mv(1.0, 0.0), Propagation::Linear).unwrap();
        assert_eq!(same.value, 0.37);
        assert_abs_diff_eq!(same.sigma, 0.01, epsilon = 1e-15);

        let rel = effective_collection(&mv(0.10, 0.01), &mv(1.48, 0.0), Propagation::Linear).unwrap();
        assert_abs_diff_eq!(rel.sigma, 0.0148, epsilon = 1e-12);
    }

    #[test]
    fn c_reference_value_linear() {
        let c = compute_c(
            &mv(0.496, 0.021),
            &mv(0.235, 0.013),
            &mv(0.148, 0.003),
            &MeasuredValue::exact(1.0),
            Propagation::Linear,
        )
        .unwrap();
        assert_abs_diff_eq!(c.value, 7.13, epsilon = 0.005);
        assert_abs_diff_eq!(c.sigma, 0.84, epsilon = 0.005);
    }

    #[test]
    fn c_reference_value_quadrature() {
        let c = compute_c(
            &mv(0.496, 0.021),
            &mv(0.235, 0.013),
            &mv(0.148, 0.003),
            &MeasuredValue::exact(1.0),
            Propagation::Quadrature,
        )
        .unwrap();
        // root-sum-square of the three relative errors
        let rel = ((0.021f64 / 0.496).powi(2) + (0.013f64 / 0.235).powi(2) + (0.003f64 / 0.148).powi(2)).sqrt();
        assert_abs_diff_eq!(c.sigma, c.value * rel, epsilon = 1e-12);
        assert_abs_diff_eq!(c.sigma, 0.51, epsilon = 0.01);
    }

    #[test]
    fn c_constructed_identity_and_zero_denominator() {
        let one = MeasuredValue::exact(1.0);
        let c = compute_c(&mv(0.5, 0.0), &mv(0.25, 0.0), &one, &one, Propagation::Linear).unwrap();
        assert_abs_diff_eq!(c.value, 1.0, epsilon = 1e-15);
        assert!(compute_c(&mv(0.5, 0.0), &mv(0.0, 0.0), &one, &one, Propagation::Linear).is_err());
    }

    #[test]
    fn constants_stay_consistent() {
        let k = CalibrationConstants::reference_setup();
        assert!(k.consistency_error() < 1e-12);
    }

    #[test]
    fn negative_sigma_is_rejected() {
        assert!(MeasuredValue::new(1.0, -0.1).is_err());
    }

    #[test]
    fn key_value_file_builds_constants() {
        let text = "\
# reference setup
kappa_g.value = 0.496
kappa_g.sigma = 0.021
kappa_g.chain.fiber.value = 0.81
kappa_g.chain.splice.value = 0.81
kappa_g.chain.filter.value = 0.83
kappa_g.chain.coupler.value = 0.90
kappa_r.value = 0.235
kappa_r.sigma = 0.013
na_fraction.value = 0.10
enhancement.value = 1.48
enhancement.sigma = 0.03
";
        let kv = KeyValues::parse(text).unwrap();
        let k = CalibrationConstants::from_key_values(&kv, Propagation::Linear).unwrap();
        assert_abs_diff_eq!(k.eta_r.value, 0.148, epsilon = 1e-12);
        assert_abs_diff_eq!(k.c.value, 7.13, epsilon = 0.005);
        assert_abs_diff_eq!(k.kappa_g_chain.as_ref().unwrap().value, 0.490, epsilon = 5e-4);
        assert_eq!(k.kappa_g.value, 0.496);
    }

    #[test]
    fn key_value_parse_errors_carry_line_numbers() {
        match KeyValues::parse("a.value = 1\nbroken line\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(KeyValues::parse("a = x"), Err(Error::Parse { line: 1, .. })));
    }
}
