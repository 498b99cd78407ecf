use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainKind {
    Flat,
    Mattress,
    Doormat,
}

/// Surface model: how much stride turns into displacement and how noisy the torso is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terrain {
    pub kind: TerrainKind,
    /// Fraction of commanded stride speed realized as displacement.
    pub slip_gain: f64,
    /// Tilt noise density, rad/√s.
    pub tilt_noise: f64,
    /// Per-step probability of a foot catching in a crevice.
    pub snag_probability: f64,
}

impl Terrain {
    pub const fn flat() -> Self {
        Self {
            kind: TerrainKind::Flat,
            slip_gain: 1.0,
            tilt_noise: 0.01,
            snag_probability: 0.0,
        }
    }

    pub const fn mattress() -> Self {
        Self {
            kind: TerrainKind::Mattress,
            slip_gain: 0.6,
            tilt_noise: 0.03,
            snag_probability: 0.0,
        }
    }

    pub const fn doormat() -> Self {
        Self {
            kind: TerrainKind::Doormat,
            slip_gain: 1.0,
            tilt_noise: 0.02,
            snag_probability: 0.02,
        }
    }

    pub const fn of(kind: TerrainKind) -> Self {
        match kind {
            TerrainKind::Flat => Self::flat(),
            TerrainKind::Mattress => Self::mattress(),
            TerrainKind::Doormat => Self::doormat(),
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

impl TerrainKind {
    pub fn name(self) -> &'static str {
        match self {
            TerrainKind::Flat => "flat",
            TerrainKind::Mattress => "mattress",
            TerrainKind::Doormat => "doormat",
        }
    }
}

impl fmt::Display for TerrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TerrainKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(Self::Flat),
            "mattress" => Ok(Self::Mattress),
            "doormat" => Ok(Self::Doormat),
            other => Err(EnvError::UnknownTerrain(other.to_string())),
        }
    }
}

/// Axis-aligned training rectangle centered at the origin.
///
/// Serializes as `"<width>x<height>"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Workspace {
    pub half_width: f64,
    pub half_height: f64,
}

impl Workspace {
    pub const LARGE: Workspace = Workspace::from_size(5.0, 2.0);
    pub const MEDIUM: Workspace = Workspace::from_size(2.0, 1.4);
    pub const SMALL: Workspace = Workspace::from_size(1.2, 0.8);
    pub const PRESETS: [Workspace; 3] = [Self::LARGE, Self::MEDIUM, Self::SMALL];

    /// From full extents (east-west width × north-south height), meters.
    pub const fn from_size(width: f64, height: f64) -> Self {
        Self {
            half_width: width / 2.0,
            half_height: height / 2.0,
        }
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn height(&self) -> f64 {
        2.0 * self.half_height
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.half_width && y.abs() <= self.half_height
    }

    pub fn label(&self) -> String {
        format!("{:.1}x{:.1}", self.width(), self.height())
    }
}

impl fmt::Display for Workspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Workspace {
    type Err = EnvError;

    /// Accepts `"<width>x<height>"` in meters, e.g. `"2.0x1.4"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EnvError::InvalidWorkspace(s.to_string());
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let w: f64 = w.trim().parse().map_err(|_| bad())?;
        let h: f64 = h.trim().parse().map_err(|_| bad())?;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(bad());
        }
        Ok(Self::from_size(w, h))
    }
}

impl From<Workspace> for String {
    fn from(w: Workspace) -> String {
        format!("{}x{}", w.width(), w.height())
    }
}

impl TryFrom<String> for Workspace {
    type Error = EnvError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
