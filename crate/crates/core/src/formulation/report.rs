use std::collections::BTreeSet;
use std::fmt;

/// Constraint identifiers. Numbering has no 8 or 9, and 20 and 26 are
/// objectives, not constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintId {
    Eq2,
    Eq3,
    Eq4,
    Eq5,
    Eq6,
    Eq7,
    Eq10,
    Eq11,
    Eq12,
    Eq13,
    Eq14,
    Eq15,
    Eq16,
    Eq17,
    Eq18,
    Eq19,
    Eq21,
    Eq22,
    Eq23,
    Eq24,
    Eq25,
    Eq27,
    Eq28,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 23] = [
        ConstraintId::Eq2,
        ConstraintId::Eq3,
        ConstraintId::Eq4,
        ConstraintId::Eq5,
        ConstraintId::Eq6,
        ConstraintId::Eq7,
        ConstraintId::Eq10,
        ConstraintId::Eq11,
        ConstraintId::Eq12,
        ConstraintId::Eq13,
        ConstraintId::Eq14,
        ConstraintId::Eq15,
        ConstraintId::Eq16,
        ConstraintId::Eq17,
        ConstraintId::Eq18,
        ConstraintId::Eq19,
        ConstraintId::Eq21,
        ConstraintId::Eq22,
        ConstraintId::Eq23,
        ConstraintId::Eq24,
        ConstraintId::Eq25,
        ConstraintId::Eq27,
        ConstraintId::Eq28,
    ];

    pub fn number(self) -> u8 {
        use ConstraintId::*;
        match self {
            Eq2 => 2,
            Eq3 => 3,
            Eq4 => 4,
            Eq5 => 5,
            Eq6 => 6,
            Eq7 => 7,
            Eq10 => 10,
            Eq11 => 11,
            Eq12 => 12,
            Eq13 => 13,
            Eq14 => 14,
            Eq15 => 15,
            Eq16 => 16,
            Eq17 => 17,
            Eq18 => 18,
            Eq19 => 19,
            Eq21 => 21,
            Eq22 => 22,
            Eq23 => 23,
            Eq24 => 24,
            Eq25 => 25,
            Eq27 => 27,
            Eq28 => 28,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let n: u8 = s.strip_prefix("eq")?.parse().ok()?;
        Self::ALL.into_iter().find(|c| c.number() == n)
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "eq{}", self.number())
    }
}

/// One failed row. Indices are 0-based; `flow` is the flow's own id.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub flow: Option<usize>,
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub x: Option<usize>,
    /// Signed margin; negative means the row is violated by that much.
    pub slack: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintReport {
    checked: BTreeSet<ConstraintId>,
    violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mark_checked(&mut self, id: ConstraintId) {
        self.checked.insert(id);
    }

    pub fn push(&mut self, v: Violation) {
        self.checked.insert(v.constraint);
        self.violations.push(v);
    }

    pub fn merge(&mut self, other: ConstraintReport) {
        self.checked.extend(other.checked);
        self.violations.extend(other.violations);
    }

    pub fn checked(&self) -> impl Iterator<Item = ConstraintId> + '_ {
        self.checked.iter().copied()
    }

    pub fn was_checked(&self, id: ConstraintId) -> bool {
        self.checked.contains(&id)
    }

    /// True when `id` was evaluated and every row held.
    pub fn passes(&self, id: ConstraintId) -> bool {
        self.was_checked(id) && !self.violations.iter().any(|v| v.constraint == id)
    }

    pub fn fails(&self, id: ConstraintId) -> bool {
        self.violations.iter().any(|v| v.constraint == id)
    }

    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn violations_of(&self, id: ConstraintId) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.constraint == id)
    }

    pub fn failed(&self) -> BTreeSet<ConstraintId> {
        self.violations.iter().map(|v| v.constraint).collect()
    }

    /// `eqID,flow,i,j,x,status,slack`, one pass line per clean constraint and
    /// one fail line per violated row. Indices are 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eqID,flow,i,j,x,status,slack\n");
        let opt = |v: Option<usize>, shift: usize| v.map(|k| (k + shift).to_string()).unwrap_or_default();
        for id in &self.checked {
            let mut any = false;
            for v in self.violations_of(*id) {
                any = true;
                out.push_str(&format!(
                    "{},{},{},{},{},fail,{}\n",
                    id,
                    opt(v.flow, 0),
                    opt(v.i, 1),
                    opt(v.j, 1),
                    opt(v.x, 1),
                    v.slack
                ));
            }
            if !any {
                out.push_str(&format!("{id},,,,,pass,\n"));
            }
        }
        out
    }
}
