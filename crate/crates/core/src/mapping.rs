//! Raw node outputs to MIDI attributes and milliseconds.
//!
//! All scalings are exact integer/rational arithmetic rounded half-up, so
//! results are identical on every platform.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lut::ValueRange;
use crate::topology::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MappingError {
    #[error("raw value {raw} outside value range {range}")]
    RawOutOfRange { raw: u32, range: ValueRange },
    #[error("pitch scale has {len} steps but the value range spans {span}")]
    ScaleTooShort { len: usize, span: u32 },
    #[error("pitch mapping reaches MIDI note {0}, above 127")]
    PitchOverflow(u32),
    #[error("velocity step must be positive")]
    ZeroVelocityStep,
    #[error("entry-delay scale needs 1 <= min_ms < max_ms, got {min_ms}..{max_ms}")]
    InvalidEdScale { min_ms: u32, max_ms: u32 },
    #[error("duration fraction table has {len} entries but the value range spans {span}")]
    FractionTableTooShort { len: usize, span: u32 },
    #[error("duration fraction {0} is negative or has a zero denominator")]
    BadFraction(String),
    #[error("fixed duration table start must be at least 1 ms")]
    ZeroDurationStart,
    #[error("CC number {0} above 127")]
    CcNumber(u8),
    #[error("CC output bounds {lo}..{hi} not within 0..127")]
    CcBounds { lo: u8, hi: u8 },
}

/// `floor(num / den + 1/2)` for non-negative operands.
pub fn round_half_up(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

fn offset(raw: u32, range: ValueRange) -> Result<u32, MappingError> {
    if range.contains(raw) {
        Ok(raw - range.min())
    } else {
        Err(MappingError::RawOutOfRange { raw, range })
    }
}

fn default_base() -> u8 {
    60
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PitchMap {
    #[serde(default = "default_base")]
    pub base_note: u8,
    /// Semitone offsets indexed by `raw - min`. `None` means chromatic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<u8>>,
}

impl Default for PitchMap {
    fn default() -> Self {
        PitchMap { base_note: default_base(), scale: None }
    }
}

impl PitchMap {
    pub fn chromatic(base_note: u8) -> Self {
        PitchMap { base_note, scale: None }
    }

    fn step(&self, k: u32) -> Option<u32> {
        match &self.scale {
            None => Some(k),
            Some(s) => s.get(k as usize).map(|&o| u32::from(o)),
        }
    }

    pub fn check(&self, range: ValueRange) -> Result<(), MappingError> {
        if let Some(s) = &self.scale {
            if s.len() < range.span() as usize {
                return Err(MappingError::ScaleTooShort { len: s.len(), span: range.span() });
            }
        }
        for k in 0..range.span() {
            let note = u32::from(self.base_note) + self.step(k).unwrap_or(0);
            if note > 127 {
                return Err(MappingError::PitchOverflow(note));
            }
        }
        Ok(())
    }
}

pub fn map_pitch(raw: u32, map: &PitchMap, range: ValueRange) -> Result<u8, MappingError> {
    let k = offset(raw, range)?;
    let step = map.step(k).ok_or(MappingError::ScaleTooShort {
        len: map.scale.as_ref().map_or(0, Vec::len),
        span: range.span(),
    })?;
    let note = u32::from(map.base_note) + step;
    u8::try_from(note).ok().filter(|&n| n <= 127).ok_or(MappingError::PitchOverflow(note))
}

fn default_velocity_step() -> u32 {
    10
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityMap {
    #[serde(default = "default_velocity_step")]
    pub step: u32,
}

impl Default for VelocityMap {
    fn default() -> Self {
        VelocityMap { step: default_velocity_step() }
    }
}

/// `clip(step * (raw - min + 1), 1, 127)`.
pub fn map_velocity(raw: u32, map: &VelocityMap, range: ValueRange) -> Result<u8, MappingError> {
    if map.step == 0 {
        return Err(MappingError::ZeroVelocityStep);
    }
    let k = u64::from(offset(raw, range)?) + 1;
    Ok((u64::from(map.step) * k).clamp(1, 127) as u8)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DurationMap {
    /// `start_ms + step_ms * (raw - min)`.
    FixedTable { start_ms: u32, step_ms: u32 },
    /// `max(1, round(delay_ms * fraction[raw - min]))`. Without an explicit
    /// table, `fraction[k] = (k + 1) / span`.
    EdFraction {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fractions: Option<Vec<Ratio<u64>>>,
    },
}

impl Default for DurationMap {
    fn default() -> Self {
        DurationMap::EdFraction { fractions: None }
    }
}

impl DurationMap {
    pub fn check(&self, range: ValueRange) -> Result<(), MappingError> {
        match self {
            DurationMap::FixedTable { start_ms, .. } if *start_ms == 0 => Err(MappingError::ZeroDurationStart),
            DurationMap::FixedTable { .. } => Ok(()),
            DurationMap::EdFraction { fractions: Some(f) } => {
                if f.len() < range.span() as usize {
                    return Err(MappingError::FractionTableTooShort { len: f.len(), span: range.span() });
                }
                match f.iter().find(|r| *r.denom() == 0) {
                    Some(r) => Err(MappingError::BadFraction(format!("{}/{}", r.numer(), r.denom()))),
                    None => Ok(()),
                }
            }
            DurationMap::EdFraction { fractions: None } => Ok(()),
        }
    }
}

pub fn map_duration(raw: u32, map: &DurationMap, delay_ms: u32, range: ValueRange) -> Result<u32, MappingError> {
    let k = offset(raw, range)?;
    let ms = match map {
        DurationMap::FixedTable { start_ms, step_ms } => u64::from(*start_ms) + u64::from(*step_ms) * u64::from(k),
        DurationMap::EdFraction { fractions: None } => {
            round_half_up(u64::from(delay_ms) * u64::from(k + 1), u64::from(range.span()))
        }
        DurationMap::EdFraction { fractions: Some(table) } => {
            let f = table.get(k as usize).ok_or(MappingError::FractionTableTooShort {
                len: table.len(),
                span: range.span(),
            })?;
            round_half_up(u64::from(delay_ms) * f.numer(), *f.denom())
        }
    };
    Ok(ms.clamp(1, u64::from(u32::MAX)) as u32)
}

fn default_ed_min() -> u32 {
    100
}

fn default_ed_max() -> u32 {
    1300
}

/// Linear map from the value range onto `min_ms..=max_ms`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdScale {
    #[serde(default = "default_ed_min")]
    pub min_ms: u32,
    #[serde(default = "default_ed_max")]
    pub max_ms: u32,
}

impl Default for EdScale {
    fn default() -> Self {
        EdScale { min_ms: default_ed_min(), max_ms: default_ed_max() }
    }
}

impl EdScale {
    pub fn new(min_ms: u32, max_ms: u32) -> Result<Self, MappingError> {
        let s = EdScale { min_ms, max_ms };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), MappingError> {
        if self.min_ms < 1 || self.max_ms <= self.min_ms {
            return Err(MappingError::InvalidEdScale { min_ms: self.min_ms, max_ms: self.max_ms });
        }
        Ok(())
    }
}

/// `min_ms + round((raw - min) * (max_ms - min_ms) / (max - min))`.
pub fn scale_entry_delay(raw: u32, scale: &EdScale, range: ValueRange) -> Result<u32, MappingError> {
    let k = u64::from(offset(raw, range)?);
    let width = u64::from(scale.max_ms - scale.min_ms);
    let steps = u64::from(range.max() - range.min());
    Ok(scale.min_ms + round_half_up(k * width, steps) as u32)
}

fn cc_hi() -> u8 {
    127
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcRoute {
    pub source: NodeId,
    pub cc_number: u8,
    #[serde(default)]
    pub out_min: u8,
    #[serde(default = "cc_hi")]
    pub out_max: u8,
}

impl CcRoute {
    pub fn check(&self) -> Result<(), MappingError> {
        if self.cc_number > 127 {
            return Err(MappingError::CcNumber(self.cc_number));
        }
        if self.out_min > 127 || self.out_max > 127 {
            return Err(MappingError::CcBounds { lo: self.out_min, hi: self.out_max });
        }
        Ok(())
    }

    /// Affine map of the value range onto `out_min..=out_max`. A reversed
    /// pair gives a decreasing map.
    pub fn scale(&self, raw: u32, range: ValueRange) -> Result<u8, MappingError> {
        let k = u64::from(offset(raw, range)?);
        let steps = u64::from(range.max() - range.min());
        let (lo, hi) = (u64::from(self.out_min), u64::from(self.out_max));
        let v = if hi >= lo {
            lo + round_half_up(k * (hi - lo), steps)
        } else {
            lo - round_half_up(k * (lo - hi), steps)
        };
        Ok(v.min(127) as u8)
    }
}

/// Controller routes, emitted in list order.
pub type CcMap = Vec<CcRoute>;

/// Routes whose source has a value in `values`, in route order.
pub fn map_cc(values: &[(NodeId, u32)], map: &[CcRoute], range: ValueRange) -> Result<Vec<(u8, u8)>, MappingError> {
    let mut out = Vec::new();
    for route in map {
        if let Some(&(_, raw)) = values.iter().find(|(n, _)| *n == route.source) {
            out.push((route.cc_number, route.scale(raw, range)?));
        }
    }
    Ok(out)
}

/// Everything the engine needs to turn raw quartets into notes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    #[serde(default)]
    pub pitch: PitchMap,
    #[serde(default)]
    pub velocity: VelocityMap,
    #[serde(default)]
    pub duration: DurationMap,
    #[serde(default)]
    pub entry_delay: EdScale,
    #[serde(default)]
    pub cc: CcMap,
}

impl MappingConfig {
    pub fn check(&self, range: ValueRange) -> Result<(), MappingError> {
        self.pitch.check(range)?;
        if self.velocity.step == 0 {
            return Err(MappingError::ZeroVelocityStep);
        }
        self.duration.check(range)?;
        self.entry_delay.check()?;
        self.cc.iter().try_for_each(CcRoute::check)
    }
}
