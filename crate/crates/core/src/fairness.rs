//! Group-fairness gaps for binary predictions, labels and sensitive groups.
//!
//! Each gap is `|P̂(event | condition, s = 1) − P̂(event | condition, s = 0)|`
//! computed from integer counts and kept as an exact fraction:
//!
//! * independence: event `Ŷ = 1`, no condition
//! * separation:   event `Ŷ = 1`, condition `Y = y`
//! * sufficiency:  event `Y = 1`, condition `Ŷ = ŷ`
//!
//! A gap whose conditioning cell is empty in either group is undefined and
//! represented as `None`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FairnessError {
    #[error(
        "input lengths differ: {preds} predictions, {labels} labels, {sensitive} sensitive values"
    )]
    LengthMismatch {
        preds: usize,
        labels: usize,
        sensitive: usize,
    },
    #[error("no samples to audit")]
    Empty,
    #[error("{field}[{index}] = {value} is not 0 or 1")]
    NonBinary {
        field: &'static str,
        index: usize,
        value: u8,
    },
    #[error("fairness gap `{0}` is undefined (empty conditioning cell)")]
    Undefined(&'static str),
}

/// Joint counts of `(Y, Ŷ, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupCounts {
    /// `cells[y][ŷ][s]`
    pub cells: [[[u64; 2]; 2]; 2],
    pub total: u64,
}

impl GroupCounts {
    #[inline]
    pub fn get(&self, y: usize, yhat: usize, s: usize) -> u64 {
        self.cells[y][yhat][s]
    }

    fn group_size(&self, s: usize) -> u64 {
        (0..2)
            .flat_map(|y| (0..2).map(move |yh| (y, yh)))
            .map(|(y, yh)| self.cells[y][yh][s])
            .sum()
    }
}

/// `|a/b − c/d|` held as the exact fraction `|ad − cb| / bd`.
#[derive(Debug, Clone, Copy)]
pub struct Gap {
    num: u128,
    den: u128,
}

impl Gap {
    /// Gap between the rates `hits1/n1` (group 1) and `hits0/n0` (group 0).
    pub fn between(hits1: u64, n1: u64, hits0: u64, n0: u64) -> Option<Gap> {
        if n1 == 0 || n0 == 0 {
            return None;
        }
        let lhs = u128::from(hits1) * u128::from(n0);
        let rhs = u128::from(hits0) * u128::from(n1);
        Some(Gap {
            num: lhs.abs_diff(rhs),
            den: u128::from(n1) * u128::from(n0),
        })
    }

    pub fn numerator(&self) -> u128 {
        self.num
    }

    pub fn denominator(&self) -> u128 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Gap {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Gap {}

impl PartialOrd for Gap {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Gap {
    fn cmp(&self, other: &Self) -> Ordering {
        // counts are far below 2^32 in practice, so the products fit in u128
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.value(), f)
    }
}

impl Serialize for Gap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

fn check_binary(field: &'static str, v: &[u8]) -> Result<(), FairnessError> {
    match v.iter().position(|&x| x > 1) {
        Some(index) => Err(FairnessError::NonBinary {
            field,
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

pub fn tally(preds: &[u8], labels: &[u8], sensitive: &[u8]) -> Result<GroupCounts, FairnessError> {
    if preds.len() != labels.len() || preds.len() != sensitive.len() {
        return Err(FairnessError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
            sensitive: sensitive.len(),
        });
    }
    if preds.is_empty() {
        return Err(FairnessError::Empty);
    }
    check_binary("preds", preds)?;
    check_binary("labels", labels)?;
    check_binary("sensitive", sensitive)?;
    let mut c = GroupCounts::default();
    for ((&p, &y), &s) in preds.iter().zip(labels).zip(sensitive) {
        c.cells[y as usize][p as usize][s as usize] += 1;
    }
    c.total = preds.len() as u64;
    Ok(c)
}

/// `|P̂(Ŷ=1 | s=1) − P̂(Ŷ=1 | s=0)|`.
pub fn independence_gap(c: &GroupCounts) -> Option<Gap> {
    let pos = |s| c.get(0, 1, s) + c.get(1, 1, s);
    Gap::between(pos(1), c.group_size(1), pos(0), c.group_size(0))
}

/// Gaps in `P̂(Ŷ=1 | Y=y, s)` for `y = 0` and `y = 1`.
pub fn separation_gaps(c: &GroupCounts) -> (Option<Gap>, Option<Gap>) {
    let at = |y: usize| {
        let n = |s| c.get(y, 0, s) + c.get(y, 1, s);
        Gap::between(c.get(y, 1, 1), n(1), c.get(y, 1, 0), n(0))
    };
    (at(0), at(1))
}

/// Gaps in `P̂(Y=1 | Ŷ=ŷ, s)` for `ŷ = 0` and `ŷ = 1`.
pub fn sufficiency_gaps(c: &GroupCounts) -> (Option<Gap>, Option<Gap>) {
    let at = |yh: usize| {
        let n = |s| c.get(0, yh, s) + c.get(1, yh, s);
        Gap::between(c.get(1, yh, 1), n(1), c.get(1, yh, 0), n(0))
    };
    (at(0), at(1))
}

/// The five group gaps of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FairnessReport {
    pub independence: Option<Gap>,
    pub separation_y0: Option<Gap>,
    pub separation_y1: Option<Gap>,
    pub sufficiency_yhat0: Option<Gap>,
    pub sufficiency_yhat1: Option<Gap>,
}

impl FairnessReport {
    pub fn from_counts(c: &GroupCounts) -> Self {
        let (separation_y0, separation_y1) = separation_gaps(c);
        let (sufficiency_yhat0, sufficiency_yhat1) = sufficiency_gaps(c);
        Self {
            independence: independence_gap(c),
            separation_y0,
            separation_y1,
            sufficiency_yhat0,
            sufficiency_yhat1,
        }
    }

    /// Gaps in the column order `ind, sep_y0, sep_y1, suf_yhat0, suf_yhat1`.
    pub fn gaps(&self) -> [(&'static str, Option<Gap>); 5] {
        [
            ("ind", self.independence),
            ("sep_y0", self.separation_y0),
            ("sep_y1", self.separation_y1),
            ("suf_yhat0", self.sufficiency_yhat0),
            ("suf_yhat1", self.sufficiency_yhat1),
        ]
    }

    /// Gaps as displayed in the two-column comparison table, where the
    /// independence gap fills both columns.
    pub fn table_gaps(&self) -> [Option<Gap>; 6] {
        [
            self.independence,
            self.independence,
            self.separation_y0,
            self.separation_y1,
            self.sufficiency_yhat0,
            self.sufficiency_yhat1,
        ]
    }

    /// Errors on the first undefined gap.
    pub fn require_defined(&self) -> Result<[Gap; 5], FairnessError> {
        let g = self.gaps();
        let mut out = [Gap { num: 0, den: 1 }; 5];
        for (slot, (name, gap)) in out.iter_mut().zip(g) {
            *slot = gap.ok_or(FairnessError::Undefined(name))?;
        }
        Ok(out)
    }

    /// Number of gaps that are defined in both reports and strictly smaller
    /// in `self` than in `baseline`.
    pub fn improvements_over(&self, baseline: &FairnessReport) -> usize {
        self.table_gaps()
            .iter()
            .zip(baseline.table_gaps())
            .filter(|(a, b)| matches!((a, b), (Some(a), Some(b)) if a < b))
            .count()
    }

    /// Renders the 3×2 comparison table with `NA` for undefined gaps.
    pub fn to_table(&self) -> String {
        let cell = |g: Option<Gap>| match g {
            Some(g) => format!("{:.3}", g.value()),
            None => "NA".to_string(),
        };
        let t = self.table_gaps();
        let mut s = String::new();
        s.push_str("Diff:  | Y=0, |S1-S0| | Y=1, |S1-S0|\n");
        for (i, name) in ["Ind.", "Sep.", "Suff."].iter().enumerate() {
            s.push_str(&format!(
                "{:<6}| {:>12} | {:>12}\n",
                name,
                cell(t[2 * i]),
                cell(t[2 * i + 1])
            ));
        }
        s
    }
}

pub fn fairness_report(
    preds: &[u8],
    labels: &[u8],
    sensitive: &[u8],
) -> Result<FairnessReport, FairnessError> {
    Ok(FairnessReport::from_counts(&tally(
        preds, labels, sensitive,
    )?))
}

/// Like [`fairness_report`] but fails when any gap is undefined.
pub fn fairness_report_strict(
    preds: &[u8],
    labels: &[u8],
    sensitive: &[u8],
) -> Result<FairnessReport, FairnessError> {
    let r = fairness_report(preds, labels, sensitive)?;
    r.require_defined()?;
    Ok(r)
}
