//! Segmentation prompts and their `auto | click:… | bbox:…` text grammar.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SegError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickPoint {
    pub at: [usize; 3],
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prompt {
    Autonomy,
    Click(Vec<ClickPoint>),
    /// Opposite voxel corners, inclusive.
    BBox { min: [usize; 3], max: [usize; 3] },
}

impl Prompt {
    /// Box prompt with corners reordered so that `min ≤ max` on every axis.
    pub fn bbox(a: [usize; 3], b: [usize; 3]) -> Self {
        let mut min = a;
        let mut max = b;
        for axis in 0..3 {
            if min[axis] > max[axis] {
                std::mem::swap(&mut min[axis], &mut max[axis]);
            }
        }
        Prompt::BBox { min, max }
    }

    pub fn click(at: [usize; 3]) -> Self {
        Prompt::Click(vec![ClickPoint { at, positive: true }])
    }

    pub fn validate(&self, dims: [usize; 3]) -> Result<(), SegError> {
        let inside = |p: [usize; 3]| (0..3).all(|a| p[a] < dims[a]);
        match self {
            Prompt::Autonomy => Ok(()),
            Prompt::Click(points) => {
                if let Some(p) = points.iter().find(|p| !inside(p.at)) {
                    return Err(SegError::PromptOutOfBounds { at: p.at, dims });
                }
                if !points.iter().any(|p| p.positive) {
                    return Err(SegError::NoPositiveSeed);
                }
                Ok(())
            }
            Prompt::BBox { min, max } => {
                for corner in [min, max] {
                    if !inside(*corner) {
                        return Err(SegError::PromptOutOfBounds { at: *corner, dims });
                    }
                }
                if (0..3).any(|a| min[a] > max[a]) {
                    return Err(SegError::BadPrompt("bbox corners not ordered".into()));
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Prompt {
    type Err = SegError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || SegError::BadPrompt(s.to_string());
        let coord = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        if s == "auto" {
            return Ok(Prompt::Autonomy);
        }
        if let Some(rest) = s.strip_prefix("click:") {
            let mut points = Vec::new();
            for item in rest.split(';').filter(|i| !i.trim().is_empty()) {
                let parts: Vec<&str> = item.split(',').collect();
                if parts.len() != 4 {
                    return Err(bad());
                }
                let positive = match parts[3].trim() {
                    "+" | "1" => true,
                    "-" | "0" => false,
                    _ => return Err(bad()),
                };
                points.push(ClickPoint {
                    at: [coord(parts[0])?, coord(parts[1])?, coord(parts[2])?],
                    positive,
                });
            }
            if points.is_empty() {
                return Err(bad());
            }
            return Ok(Prompt::Click(points));
        }
        if let Some(rest) = s.strip_prefix("bbox:") {
            let c: Vec<usize> = rest.split(',').map(coord).collect::<Result<_, _>>()?;
            if c.len() != 6 {
                return Err(bad());
            }
            return Ok(Prompt::bbox([c[0], c[1], c[2]], [c[3], c[4], c[5]]));
        }
        Err(bad())
    }
}

impl fmt::Display for Prompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prompt::Autonomy => f.write_str("auto"),
            Prompt::Click(points) => {
                let items: Vec<String> = points
                    .iter()
                    .map(|p| {
                        let sign = if p.positive { '+' } else { '-' };
                        format!("{},{},{},{sign}", p.at[0], p.at[1], p.at[2])
                    })
                    .collect();
                write!(f, "click:{}", items.join(";"))
            }
            Prompt::BBox { min, max } => write!(
                f,
                "bbox:{},{},{},{},{},{}",
                min[0], min[1], min[2], max[0], max[1], max[2]
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_roundtrip() {
        for text in ["auto", "click:1,2,3,+;4,5,6,-", "bbox:0,1,2,3,4,5"] {
            let p: Prompt = text.parse().unwrap();
            assert_eq!(p.to_string(), text);
        }
    }

    #[test]
    fn bbox_corners_normalized() {
        let p: Prompt = "bbox:5,1,9,2,4,3".parse().unwrap();
        assert_eq!(p, Prompt::BBox { min: [2, 1, 3], max: [5, 4, 9] });
    }

    #[test]
    fn validation() {
        let dims = [4, 4, 4];
        assert!(matches!(
            "click:1,1,4,+".parse::<Prompt>().unwrap().validate(dims),
            Err(SegError::PromptOutOfBounds { .. })
        ));
        assert!(matches!(
            "click:1,1,1,-".parse::<Prompt>().unwrap().validate(dims),
            Err(SegError::NoPositiveSeed)
        ));
        assert!("bbox:0,0,0,3,3,3".parse::<Prompt>().unwrap().validate(dims).is_ok());
        assert!("bbox:0,0,0,3,3,4".parse::<Prompt>().unwrap().validate(dims).is_err());
    }

    #[test]
    fn rejects_garbage() {
        for text in ["", "clock:1,2,3,+", "click:1,2,+", "click:1,2,3,x", "bbox:1,2,3"] {
            assert!(text.parse::<Prompt>().is_err(), "{text}");
        }
    }
}
