use serde::{Deserialize, Serialize};

use super::pipeline::LpEvalRow;
use super::LpAltError;
use crate::model::{StageTime, TimeUnit};

/// Stage times, the full-test horizon and the resulting acceleration ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelerationReport {
    pub t1: StageTime,
    pub t2: StageTime,
    pub t3: StageTime,
    pub horizon: StageTime,
    /// horizon / t2, both in the horizon's unit.
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<LpEvalRow>,
}

/// Expresses `t` in `unit`. Seconds and hours convert; cycles need
/// `seconds_per_cycle`.
pub fn convert_time(t: StageTime, unit: TimeUnit, seconds_per_cycle: Option<f64>) -> Result<f64, LpAltError> {
    if t.unit == unit {
        return Ok(t.value);
    }
    let to_seconds = |u: TimeUnit| -> Result<f64, LpAltError> {
        match u {
            TimeUnit::Seconds => Ok(1.0),
            TimeUnit::Hours => Ok(3600.0),
            TimeUnit::Cycles => match seconds_per_cycle {
                Some(s) if s > 0.0 => Ok(s),
                _ => Err(LpAltError::UnitMismatch(format!(
                    "cannot convert {} to {} without a cycle duration",
                    t.unit.name(),
                    unit.name()
                ))),
            },
        }
    };
    Ok(t.value * to_seconds(t.unit)? / to_seconds(unit)?)
}

pub fn acceleration_report(
    stages: [StageTime; 3],
    horizon: StageTime,
    seconds_per_cycle: Option<f64>,
    metrics: Vec<LpEvalRow>,
) -> Result<AccelerationReport, LpAltError> {
    let [t1, t2, t3] = stages;
    let t2_value = convert_time(t2, horizon.unit, seconds_per_cycle)?;
    if !(t2_value > 0.0) {
        return Err(LpAltError::ZeroT2Time);
    }
    Ok(AccelerationReport { t1, t2, t3, horizon, ratio: horizon.value / t2_value, metrics })
}
