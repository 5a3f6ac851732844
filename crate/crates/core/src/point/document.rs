//! Versioned TOML documents for fitted point forecasters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::forecaster::PointForecaster;

pub const FORMAT: &str = "windcast-point-model";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    forecasters: Vec<PointForecaster>,
}

pub fn to_document(forecasters: &[PointForecaster]) -> Result<String> {
    let doc = Document {
        format: FORMAT.to_owned(),
        version: VERSION,
        forecasters: forecasters.to_vec(),
    };
    toml::to_string(&doc).map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn from_document(text: &str) -> Result<Vec<PointForecaster>> {
    let doc: Document = toml::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if doc.format != FORMAT {
        return Err(Error::ModelFormat(format!("unexpected format '{}'", doc.format)));
    }
    if doc.version != VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {}", doc.version)));
    }
    Ok(doc.forecasters)
}

pub fn save_forecaster(path: impl AsRef<Path>, forecasters: &[PointForecaster]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_document(forecasters)?).map_err(|e| Error::io(path, e))
}

pub fn load_forecaster(path: impl AsRef<Path>) -> Result<Vec<PointForecaster>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_document(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SiteSet;
    use crate::point::cp::CparxSpec;
    use crate::point::forecaster::{HorizonMode, ModelFamily};
    use crate::point::linear::{LinearSpec, RegimeCovariate, RegimeRule};
    use crate::point::nwp::PerfectNwp;
    use crate::point::Inputs;
    use crate::sim::{simulate, SimConfig};

    #[test]
    fn documents_round_trip() {
        let cfg = SimConfig::homogeneous(SiteSet::uniform("s", 2, 1.0).unwrap(), 0.5, 5);
        let sim = simulate(&cfg, 4000).unwrap();
        let nwp = PerfectNwp::new(sim.speed.clone(), sim.direction.clone()).unwrap();
        let inputs = Inputs::new(&sim.power, cfg.start).with_nwp(&nwp);
        let rule = RegimeRule::new(RegimeCovariate::OwnLag(1), vec![0.3]).unwrap();
        let models = vec![
            PointForecaster::fit(
                &ModelFamily::Linear(LinearSpec::tar(0, vec![1, 2], 1, rule)),
                HorizonMode::Iterated,
                4,
                &inputs,
            )
            .unwrap(),
            PointForecaster::fit(
                &ModelFamily::Cparx(CparxSpec::new(1, 1)),
                HorizonMode::Direct,
                2,
                &inputs,
            )
            .unwrap(),
        ];
        let text = to_document(&models).unwrap();
        assert!(text.contains("version = 1"));
        let back = from_document(&text).unwrap();
        assert_eq!(back, models);
        let bumped = text.replace("version = 1", "version = 9");
        assert!(matches!(from_document(&bumped), Err(Error::ModelFormat(_))));
    }
}
