//! Typed description of a run, validated against a per-experiment schema.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    GenDevices,
    Train3q,
    Train4q,
    Train3qudit,
    Train5part,
    RandomTest,
    Train,
    Eval,
    ScanWerner,
    ScanAlphaBeta,
    Kcorr4q,
    GraphExp,
    Robustness,
    BisepSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Int,
    Real,
    Text,
    IntList,
}

impl Kind {
    fn accepts(self, v: &Value) -> bool {
        match self {
            Kind::Int => v.is_u64(),
            Kind::Real => v.is_number(),
            Kind::Text => v.is_string(),
            Kind::IntList => v.as_array().is_some_and(|a| !a.is_empty() && a.iter().all(Value::is_u64)),
        }
    }
}

/// `(name, kind, required)` per parameter.
fn schema(id: ExperimentId) -> &'static [(&'static str, Kind, bool)] {
    use Kind::*;
    match id {
        ExperimentId::GenDevices => &[("dims", IntList, true), ("m", Int, true)],
        ExperimentId::Train3q | ExperimentId::Train4q | ExperimentId::Train3qudit | ExperimentId::Train5part => {
            &[("scale", Real, true), ("device_fingerprint", Text, true)]
        }
        ExperimentId::RandomTest => {
            &[("scale", Real, true), ("device_fingerprint", Text, true), ("parties", Int, true)]
        }
        ExperimentId::Train => &[("dataset_fingerprint", Text, true), ("config", Text, false)],
        ExperimentId::Eval => &[("device_fingerprint", Text, true), ("rows", Int, true)],
        ExperimentId::ScanWerner => &[
            ("device_fingerprint", Text, true),
            ("family", Text, true),
            ("convention", Text, true),
            ("step", Real, true),
        ],
        ExperimentId::ScanAlphaBeta => &[("device_fingerprint", Text, true), ("step", Real, true)],
        ExperimentId::Kcorr4q => &[("k", Int, true), ("scale", Real, true), ("step", Real, true)],
        ExperimentId::GraphExp => &[("n", Int, true), ("k", Int, true), ("train", Int, true), ("test", Int, true)],
        ExperimentId::Robustness => &[("scale", Real, true), ("step", Real, true), ("device_seeds", IntList, true)],
        ExperimentId::BisepSearch => &[
            ("alpha", Real, true),
            ("beta", Real, true),
            ("restarts", Int, true),
            ("iterations", Int, true),
            ("tolerance", Real, true),
        ],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub parameters: BTreeMap<String, Value>,
    pub root_seed: u64,
}

impl ExperimentSpec {
    /// Builds and validates.
    pub fn new(id: ExperimentId, parameters: BTreeMap<String, Value>, root_seed: u64) -> Result<Self> {
        let spec = Self { id, parameters, root_seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Every required parameter present with the right type, no unknown
    /// keys, and the numeric ranges each experiment needs.
    pub fn validate(&self) -> Result<()> {
        let fields = schema(self.id);
        for (key, v) in &self.parameters {
            match fields.iter().find(|f| f.0 == key) {
                None => return Err(Error::Malformed(format!("{:?}: unknown parameter {key:?}", self.id))),
                Some(&(_, kind, _)) if !kind.accepts(v) => {
                    return Err(Error::Malformed(format!("{:?}: parameter {key:?} must be {kind:?}, got {v}", self.id)))
                }
                _ => {}
            }
        }
        if let Some((key, ..)) = fields.iter().find(|f| f.2 && !self.parameters.contains_key(f.0)) {
            return Err(Error::Malformed(format!("{:?}: missing parameter {key:?}", self.id)));
        }
        self.check_ranges()
    }

    fn real(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).and_then(Value::as_f64)
    }

    fn int(&self, key: &str) -> Option<u64> {
        self.parameters.get(key).and_then(Value::as_u64)
    }

    fn check_ranges(&self) -> Result<()> {
        let bad = |what: String| Err(Error::OutOfRange(format!("{:?}: {what}", self.id)));
        if let Some(s) = self.real("scale") {
            if !(s > 0.0) {
                return bad(format!("scale {s}"));
            }
        }
        if let Some(s) = self.real("step") {
            if !(s > 0.0 && s <= 1.0) {
                return bad(format!("step {s}"));
            }
        }
        for key in ["m", "k", "train", "test", "restarts", "iterations"] {
            if self.int(key) == Some(0) {
                return bad(format!("{key} must be positive"));
            }
        }
        match self.id {
            ExperimentId::GraphExp => {
                let n = self.int("n").unwrap_or(0);
                if !(10..=12).contains(&n) {
                    return bad(format!("n = {n}, expected 10, 11 or 12"));
                }
            }
            ExperimentId::RandomTest => {
                let p = self.int("parties").unwrap_or(0);
                if ![3, 4, 5].contains(&p) {
                    return bad(format!("parties = {p}, expected 3, 4 or 5"));
                }
            }
            ExperimentId::BisepSearch => {
                let (a, b) = (self.real("alpha").unwrap_or(-1.0), self.real("beta").unwrap_or(-1.0));
                if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0) {
                    return bad(format!("(alpha, beta) = ({a}, {b}) outside the simplex"));
                }
                if !(self.real("tolerance").unwrap_or(0.0) > 0.0) {
                    return bad("tolerance must be positive".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn params(v: Value) -> BTreeMap<String, Value> {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn accepts_complete_parameters() {
        let s =
            ExperimentSpec::new(ExperimentId::GraphExp, params(json!({"n": 12, "k": 4, "train": 600, "test": 200})), 1)
                .unwrap();
        let back: ExperimentSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        ExperimentSpec::new(ExperimentId::Train, params(json!({"dataset_fingerprint": "ab"})), 0).unwrap();
    }

    #[test]
    fn rejects_bad_parameters() {
        let cases = [
            (ExperimentId::GraphExp, json!({"n": 12, "k": 4, "train": 600})),
            (ExperimentId::GraphExp, json!({"n": 9, "k": 4, "train": 600, "test": 200})),
            (ExperimentId::GraphExp, json!({"n": 12, "k": 4, "train": 600, "test": 200, "extra": 1})),
            (ExperimentId::GenDevices, json!({"dims": [2, 2], "m": 0})),
            (ExperimentId::GenDevices, json!({"dims": [], "m": 2})),
            (ExperimentId::GenDevices, json!({"dims": [2, 2], "m": 1.5})),
            (ExperimentId::ScanAlphaBeta, json!({"device_fingerprint": "x", "step": 0.0})),
            (
                ExperimentId::BisepSearch,
                json!({"alpha": 0.6, "beta": 0.5, "restarts": 5, "iterations": 10, "tolerance": 1e-6}),
            ),
            (ExperimentId::Train3q, json!({"scale": -1.0, "device_fingerprint": "x"})),
        ];
        for (id, p) in cases {
            assert!(ExperimentSpec::new(id, params(p.clone()), 0).is_err(), "{id:?} {p}");
        }
    }
}
