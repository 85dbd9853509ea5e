use serde::{Deserialize, Serialize};

use super::AugmentError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Synthetic,
    Authentic,
}

impl PhaseKind {
    pub fn other(self) -> PhaseKind {
        match self {
            PhaseKind::Synthetic => PhaseKind::Authentic,
            PhaseKind::Authentic => PhaseKind::Synthetic,
        }
    }
}

impl std::str::FromStr for PhaseKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "synthetic" | "syn" => Ok(PhaseKind::Synthetic),
            "authentic" | "auth" => Ok(PhaseKind::Authentic),
            other => Err(format!("unknown phase kind `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub steps: u64,
    /// First optimizer step of the phase (0-based).
    pub start_step: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlternationSchedule {
    pub phases: Vec<Phase>,
}

impl AlternationSchedule {
    pub fn total_steps(&self) -> u64 {
        self.phases.iter().map(|p| p.steps).sum()
    }

    /// Kind of data to train on at `step`, or None past the end.
    pub fn kind_at(&self, step: u64) -> Option<PhaseKind> {
        self.phases
            .iter()
            .find(|p| step >= p.start_step && step < p.start_step + p.steps)
            .map(|p| p.kind)
    }
}

/// Alternates synthetic and authentic phases from `start`, truncating the
/// last phase so the schedule covers exactly `total_steps`.
pub fn at_schedule(
    total_steps: u64,
    synthetic_len: u64,
    authentic_len: u64,
    start: PhaseKind,
) -> Result<AlternationSchedule, AugmentError> {
    if total_steps == 0 || synthetic_len == 0 || authentic_len == 0 {
        return Err(AugmentError::InvalidSchedule {
            total: total_steps,
            synthetic: synthetic_len,
            authentic: authentic_len,
        });
    }
    let mut phases = Vec::new();
    let mut kind = start;
    let mut at = 0;
    while at < total_steps {
        let len = match kind {
            PhaseKind::Synthetic => synthetic_len,
            PhaseKind::Authentic => authentic_len,
        };
        let steps = len.min(total_steps - at);
        phases.push(Phase {
            kind,
            steps,
            start_step: at,
        });
        at += steps;
        kind = kind.other();
    }
    Ok(AlternationSchedule { phases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PhaseKind::*;

    fn shape(s: &AlternationSchedule) -> Vec<(PhaseKind, u64)> {
        s.phases.iter().map(|p| (p.kind, p.steps)).collect()
    }

    #[test]
    fn truncated_alternation() {
        let s = at_schedule(10, 3, 2, Synthetic).unwrap();
        assert_eq!(
            shape(&s),
            vec![(Synthetic, 3), (Authentic, 2), (Synthetic, 3), (Authentic, 2)]
        );
        let s = at_schedule(11, 3, 2, Synthetic).unwrap();
        assert_eq!(s.phases.last().map(|p| (p.kind, p.steps)), Some((Synthetic, 1)));
    }

    #[test]
    fn single_step() {
        let s = at_schedule(1, 3, 2, Authentic).unwrap();
        assert_eq!(shape(&s), vec![(Authentic, 1)]);
    }

    #[test]
    fn exact_fit() {
        let s = at_schedule(10, 5, 5, Authentic).unwrap();
        assert_eq!(shape(&s), vec![(Authentic, 5), (Synthetic, 5)]);
        assert_eq!(s.kind_at(4), Some(Authentic));
        assert_eq!(s.kind_at(5), Some(Synthetic));
        assert_eq!(s.kind_at(10), None);
    }

    #[test]
    fn zero_lengths_are_rejected() {
        assert!(at_schedule(0, 1, 1, Synthetic).is_err());
        assert!(at_schedule(5, 0, 1, Synthetic).is_err());
    }

    proptest! {
        #[test]
        fn totals_and_alternation(total in 1u64..500, syn in 1u64..40, auth in 1u64..40, start_syn: bool) {
            let start = if start_syn { Synthetic } else { Authentic };
            let s = at_schedule(total, syn, auth, start).unwrap();
            prop_assert_eq!(s.total_steps(), total);
            prop_assert_eq!(s.phases[0].kind, start);
            for w in s.phases.windows(2) {
                prop_assert_ne!(w[0].kind, w[1].kind);
                prop_assert_eq!(w[0].start_step + w[0].steps, w[1].start_step);
            }
            prop_assert_eq!(s.clone(), at_schedule(total, syn, auth, start).unwrap());
        }
    }
}
