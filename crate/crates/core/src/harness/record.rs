use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krls::{KrlsModel, Predictor};
use crate::localized::{AveragedModel, LocalizedModel};
use crate::nystrom::NystromModel;
use crate::points::Points;

pub const RECORD_FORMAT: &str = "partkrls-model";
pub const RECORD_VERSION: u32 = 1;

/// Any fitted estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum AnyModel {
    Krls(KrlsModel),
    Nystrom(NystromModel),
    Localized(LocalizedModel),
    LocalizedNystrom(LocalizedModel),
    DistributedAvg(AveragedModel),
}

impl Predictor for AnyModel {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            AnyModel::Krls(m) => m.predict(x),
            AnyModel::Nystrom(m) => m.predict(x),
            AnyModel::Localized(m) | AnyModel::LocalizedNystrom(m) => m.predict(x),
            AnyModel::DistributedAvg(m) => m.predict(x),
        }
    }

    fn predict_many(&self, xs: &Points) -> Result<Vec<f64>> {
        match self {
            AnyModel::Krls(m) => m.predict_many(xs),
            AnyModel::Nystrom(m) => m.predict_many(xs),
            AnyModel::Localized(m) | AnyModel::LocalizedNystrom(m) => m.predict_many(xs),
            AnyModel::DistributedAvg(m) => m.predict_many(xs),
        }
    }
}

/// Versioned on-disk form of a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub format: String,
    pub version: u32,
    pub model: AnyModel,
}

impl ModelRecord {
    pub fn new(model: AnyModel) -> Self {
        Self {
            format: RECORD_FORMAT.to_string(),
            version: RECORD_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: Self = serde_json::from_str(text)?;
        if record.format != RECORD_FORMAT {
            return Err(Error::contract(format!(
                "not a model record: format '{}'",
                record.format
            )));
        }
        if record.version != RECORD_VERSION {
            return Err(Error::contract(format!(
                "model record version {} is not supported (expected {RECORD_VERSION})",
                record.version
            )));
        }
        Ok(record)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::krls::fit_krls;
    use crate::localized::fit_localized_nystrom;
    use crate::partition::Partition;

    fn data() -> (Points, Vec<f64>) {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.618).fract()).collect();
        let y = x.iter().map(|t| t * (1.0 - t)).collect();
        (Points::from_scalars(&x), y)
    }

    #[test]
    fn krls_record_round_trip() {
        let (xs, y) = data();
        let model = AnyModel::Krls(fit_krls(&xs, &y, 1e-3, &KernelSpec::brownian()).unwrap());
        let record = ModelRecord::new(model);
        let back = ModelRecord::from_json(&record.to_json().unwrap()).unwrap();
        assert_eq!(back, record);
        assert_eq!(
            back.model.predict(&[0.3]).unwrap(),
            record.model.predict(&[0.3]).unwrap()
        );
    }

    #[test]
    fn localized_record_round_trip() {
        let (xs, y) = data();
        let p = Partition::intervals(0.0, 1.0, 3).unwrap();
        let specs = vec![KernelSpec::brownian(); 3];
        let m = fit_localized_nystrom(&xs, &y, &p, 1e-3, 5, 8, &specs).unwrap();
        let record = ModelRecord::new(AnyModel::LocalizedNystrom(m));
        let back = ModelRecord::from_json(&record.to_json().unwrap()).unwrap();
        assert_eq!(back, record);
    }

    #[test]
    fn foreign_records_are_rejected() {
        let (xs, y) = data();
        let model = AnyModel::Krls(fit_krls(&xs, &y, 1e-3, &KernelSpec::brownian()).unwrap());
        let mut record = ModelRecord::new(model);
        record.version = 99;
        assert!(ModelRecord::from_json(&record.to_json().unwrap()).is_err());
        record.version = RECORD_VERSION;
        record.format = "other".into();
        assert!(ModelRecord::from_json(&record.to_json().unwrap()).is_err());
    }
}
