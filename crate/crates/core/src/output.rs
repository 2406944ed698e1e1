//! The `{explanation, positions}` document a student model must emit.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::extract::{extract_object, ExtractionMethod};
use crate::world::{Point, WorldError, WorldMap};

/// Parsed model answer: reasoning text plus the ordered goal list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub explanation: String,
    pub positions: Vec<Point>,
}

impl ModelOutput {
    /// Canonical serialization, shared with dataset and training exports.
    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("model output serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub extraction_method: ExtractionMethod,
    pub repairs_applied: Vec<String>,
    pub ignored_objects: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("no JSON object found in model output")]
    NoObject,
    #[error("object lacks \"positions\"")]
    MissingPositions,
    #[error("object lacks \"explanation\"")]
    MissingExplanation,
    #[error("\"explanation\" must be a string or null")]
    InvalidExplanation,
    #[error("\"positions\" must be a list")]
    PositionsNotList,
    #[error("position {index} is not a pair of finite numbers")]
    InvalidPosition { index: usize },
}

pub fn parse_model_output(raw: &str) -> Result<(ModelOutput, ParseDiagnostics), ParseError> {
    let extracted = extract_object(raw).ok_or(ParseError::NoObject)?;
    let mut repairs = extracted.repairs;
    let obj = extracted.object;

    let positions = obj.get("positions").ok_or(ParseError::MissingPositions)?;
    let explanation = match obj.get("explanation") {
        None => return Err(ParseError::MissingExplanation),
        Some(Value::Null) => {
            repairs.push("null explanation read as empty".to_string());
            String::new()
        }
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(ParseError::InvalidExplanation),
    };
    let (positions, coerced) = parse_positions(positions)?;
    if coerced {
        repairs.push("integer coordinates read as floats".to_string());
    }
    Ok((
        ModelOutput { explanation, positions },
        ParseDiagnostics {
            extraction_method: extracted.method,
            repairs_applied: repairs,
            ignored_objects: extracted.ignored_objects,
        },
    ))
}

/// Reads a list of `[x, y]` pairs. The flag reports integer coercion.
pub(crate) fn parse_positions(value: &Value) -> Result<(Vec<Point>, bool), ParseError> {
    let items = value.as_array().ok_or(ParseError::PositionsNotList)?;
    let mut coerced = false;
    let mut out = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let pair = match item.as_array() {
            Some(pair) if pair.len() == 2 => pair,
            _ => return Err(ParseError::InvalidPosition { index }),
        };
        let mut coords = [0.0; 2];
        for (slot, v) in coords.iter_mut().zip(pair) {
            let Value::Number(n) = v else {
                return Err(ParseError::InvalidPosition { index });
            };
            coerced |= !n.is_f64();
            *slot = n.as_f64().filter(|f| f.is_finite()).ok_or(ParseError::InvalidPosition { index })?;
        }
        out.push(Point::new(coords[0], coords[1]));
    }
    Ok((out, coerced))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub require_free_cell: bool,
    pub max_points: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { require_free_cell: true, max_points: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("model produced no positions")]
    Empty,
    #[error("{count} positions exceed the limit of {max}")]
    TooManyPoints { count: usize, max: usize },
    #[error("position {index} {point} is outside the map")]
    OutOfBounds { index: usize, point: Point },
    #[error("position {index} {point} lies on an occupied cell")]
    OccupiedCell { index: usize, point: Point },
}

/// Checks that the goal list is usable by the navigation controller.
pub fn validate_positions(
    out: &ModelOutput,
    map: &WorldMap,
    opts: ValidationOptions,
) -> Result<Vec<Point>, ValidationError> {
    if out.positions.is_empty() {
        return Err(ValidationError::Empty);
    }
    if out.positions.len() > opts.max_points {
        return Err(ValidationError::TooManyPoints { count: out.positions.len(), max: opts.max_points });
    }
    for (index, &point) in out.positions.iter().enumerate() {
        let cell = map.world_to_cell(point).map_err(|e| match e {
            WorldError::OutOfBounds(_) => ValidationError::OutOfBounds { index, point },
            _ => unreachable!("world_to_cell only reports bounds errors"),
        })?;
        if opts.require_free_cell && map.is_occupied(cell) {
            return Err(ValidationError::OccupiedCell { index, point });
        }
    }
    Ok(out.positions.clone())
}
