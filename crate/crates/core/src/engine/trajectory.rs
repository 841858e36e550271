use std::io::Write;

use serde::Serialize;

use super::{EngineConfig, EngineError, PopulationState, Stepper};
use crate::offspring::OffspringSpec;
use crate::rng::StreamKey;

/// A single replica driven by per-generation random streams.
#[derive(Debug, Clone)]
pub struct Walk<'a> {
    stepper: Stepper<'a>,
    state: PopulationState,
    key: StreamKey,
}

impl<'a> Walk<'a> {
    pub fn new(
        spec: &'a OffspringSpec,
        config: EngineConfig,
        start: i64,
        key: StreamKey,
    ) -> Result<Self, EngineError> {
        Ok(Walk {
            stepper: Stepper::new(spec, config)?,
            state: PopulationState::init_with_mode(start, config.mode),
            key,
        })
    }

    pub fn state(&self) -> &PopulationState {
        &self.state
    }

    pub fn advance(&mut self) -> Result<&PopulationState, EngineError> {
        let mut rng = self.key.generation_rng(self.state.generation() + 1);
        self.state = self.stepper.step(&self.state, &mut rng)?;
        Ok(&self.state)
    }

    /// Advances to `horizon`, recording every generation including 0.
    pub fn run(&mut self, horizon: u64) -> Result<Vec<GenerationRecord>, EngineError> {
        let mut records = vec![GenerationRecord::of(&self.state)?];
        while self.state.generation() < horizon {
            records.push(GenerationRecord::of(self.advance()?)?);
        }
        Ok(records)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub n: u64,
    #[serde(rename = "M_n")]
    pub max: i64,
    #[serde(rename = "L_n")]
    pub min: i64,
    pub total: u64,
    #[serde(rename = "saturated_flag")]
    pub saturated: bool,
}

impl GenerationRecord {
    pub fn of(state: &PopulationState) -> Result<Self, EngineError> {
        Ok(GenerationRecord {
            n: state.generation(),
            max: state.max_position()?,
            min: state.min_position()?,
            total: state.total(),
            saturated: state.is_saturated() || state.total_saturated(),
        })
    }
}

/// CSV with columns `n, M_n, L_n, total, saturated_flag`.
pub fn write_trajectory_csv<W: Write>(records: &[GenerationRecord], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::{CountLaw, StepLaw};

    #[test]
    fn trajectory_csv_layout() {
        let spec = OffspringSpec::product(
            CountLaw::constant(2).unwrap(),
            StepLaw::uniform(&[-1, 1]).unwrap(),
        );
        let mut walk = Walk::new(&spec, EngineConfig::exact(), 0, StreamKey::new(1, 0, 0)).unwrap();
        let records = walk.run(3).unwrap();
        assert_eq!(records.len(), 4);
        assert_eq!(records[3].total, 8);
        let mut buf = Vec::new();
        write_trajectory_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,M_n,L_n,total,saturated_flag\n0,0,0,1,false\n"));
    }
}
