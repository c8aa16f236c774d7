//! UrbanSound8K class labels.

use crate::error::{Error, Result};

/// Display names indexed by `classID` 0-9.
pub const CLASS_NAMES: [&str; 10] = [
    "Air Conditioner",
    "Car Horn",
    "Children Playing",
    "Dog Bark",
    "Drilling",
    "Engine Idling",
    "Gun Shot",
    "Jackhammer",
    "Siren",
    "Street Music",
];

pub fn class_name(class_id: u16) -> Result<&'static str> {
    CLASS_NAMES
        .get(class_id as usize)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("class id {class_id} out of range 0-9")))
}

/// Resolves a class by display name or by the snake_case form used in the
/// UrbanSound8K metadata (`children_playing`, `dog_bark`, ...).
pub fn class_id(name: &str) -> Option<u16> {
    let canon = canonical(name);
    CLASS_NAMES.iter().position(|n| canonical(n) == canon).map(|i| i as u16)
}

fn canonical(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}
