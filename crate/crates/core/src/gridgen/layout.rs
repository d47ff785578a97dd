use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("cells {0} and {0} are the same cell")]
    SameCell(usize),
    #[error("cell {cell} is outside a {n}x{n} grid")]
    OutOfRange { cell: usize, n: usize },
    #[error("unknown direction `{0}`")]
    UnknownDirection(String),
}

/// Direction of one cell as seen from another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelativeDirection {
    Left,
    Right,
    Top,
    Bottom,
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl RelativeDirection {
    pub const ALL: [RelativeDirection; 8] = [
        Self::Left,
        Self::Right,
        Self::Top,
        Self::Bottom,
        Self::TopLeft,
        Self::TopRight,
        Self::BottomLeft,
        Self::BottomRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Left => "left",
            Self::Right => "right",
            Self::Top => "top",
            Self::Bottom => "bottom",
            Self::TopLeft => "top left",
            Self::TopRight => "top right",
            Self::BottomLeft => "bottom left",
            Self::BottomRight => "bottom right",
        }
    }

    pub fn parse(s: &str) -> Result<Self, LayoutError> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| LayoutError::UnknownDirection(s.to_string()))
    }

    pub fn opposite(self) -> Self {
        match self {
            Self::Left => Self::Right,
            Self::Right => Self::Left,
            Self::Top => Self::Bottom,
            Self::Bottom => Self::Top,
            Self::TopLeft => Self::BottomRight,
            Self::BottomRight => Self::TopLeft,
            Self::TopRight => Self::BottomLeft,
            Self::BottomLeft => Self::TopRight,
        }
    }

    /// Prepositional phrase used in questions: "the object {phrase} the cup".
    pub fn phrase(self) -> &'static str {
        match self {
            Self::Left => "to the left of",
            Self::Right => "to the right of",
            Self::Top => "above",
            Self::Bottom => "below",
            Self::TopLeft => "to the top left of",
            Self::TopRight => "to the top right of",
            Self::BottomLeft => "to the bottom left of",
            Self::BottomRight => "to the bottom right of",
        }
    }
}

impl fmt::Display for RelativeDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn check_cell(cell: usize, n: usize) -> Result<(), LayoutError> {
    if cell >= n * n {
        Err(LayoutError::OutOfRange { cell, n })
    } else {
        Ok(())
    }
}

/// Direction of cell `a` as seen from cell `b` in an `n`x`n` grid.
pub fn relative_position(a: usize, b: usize, n: usize) -> Result<RelativeDirection, LayoutError> {
    check_cell(a, n)?;
    check_cell(b, n)?;
    if a == b {
        return Err(LayoutError::SameCell(a));
    }
    let (ra, ca) = (a / n, a % n);
    let (rb, cb) = (b / n, b % n);
    use std::cmp::Ordering::*;
    Ok(match (ra.cmp(&rb), ca.cmp(&cb)) {
        (Equal, Less) => RelativeDirection::Left,
        (Equal, Greater) => RelativeDirection::Right,
        (Less, Equal) => RelativeDirection::Top,
        (Greater, Equal) => RelativeDirection::Bottom,
        (Less, Less) => RelativeDirection::TopLeft,
        (Less, Greater) => RelativeDirection::TopRight,
        (Greater, Less) => RelativeDirection::BottomLeft,
        (Greater, Greater) => RelativeDirection::BottomRight,
        (Equal, Equal) => unreachable!("distinct cells differ in row or column"),
    })
}

const NAMES_2: [&str; 4] = ["top left", "top right", "bottom left", "bottom right"];
const NAMES_3: [&str; 9] = [
    "top left",
    "top middle",
    "top right",
    "middle left",
    "middle",
    "middle right",
    "bottom left",
    "bottom middle",
    "bottom right",
];

pub fn absolute_position_name(cell: usize, n: usize) -> Result<&'static str, LayoutError> {
    let names: &[&str] = match n {
        2 => &NAMES_2,
        3 => &NAMES_3,
        _ => return Err(LayoutError::OutOfRange { cell, n }),
    };
    names
        .get(cell)
        .copied()
        .ok_or(LayoutError::OutOfRange { cell, n })
}

pub fn position_names(n: usize) -> Vec<&'static str> {
    (0..n * n)
        .map(|c| absolute_position_name(c, n).expect("cell in range"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub object_id: String,
    /// Fraction of the cell the sprite's longer side may occupy.
    pub scale: f64,
    /// Pixel offset from the cell centre.
    pub offset: (i32, i32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub n: usize,
    pub cells: Vec<Option<PlacedObject>>,
    pub background: u8,
}

impl GridLayout {
    pub fn empty(n: usize, background: u8) -> Self {
        Self {
            n,
            cells: vec![None; n * n],
            background,
        }
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, &PlacedObject)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|p| (i, p)))
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied().count()
    }
}
