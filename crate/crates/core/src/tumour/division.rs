//! Division outcome probability tree for cancer cells and cancer stem cells.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentType;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisionRules {
    /// CC division yielding CC + CSC instead of CC + CC.
    pub dediff_prob: f64,
    /// CSC division that is asymmetric (CSC + CC).
    pub csc_asym_prob: f64,
    /// Given a symmetric CSC division, the chance of CSC + CSC (else CC + CC).
    pub csc_sym_two_csc_prob: f64,
}

impl Default for DivisionRules {
    fn default() -> Self {
        Self {
            dediff_prob: 0.005,
            csc_asym_prob: 0.99,
            csc_sym_two_csc_prob: 0.99,
        }
    }
}

/// What a dividing agent turns into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivisionOutcome {
    TwoCc,
    CcAndCsc,
    TwoCsc,
}

impl DivisionOutcome {
    pub fn daughters(self) -> (AgentType, AgentType) {
        match self {
            DivisionOutcome::TwoCc => (AgentType::Cc, AgentType::Cc),
            DivisionOutcome::CcAndCsc => (AgentType::Cc, AgentType::Csc),
            DivisionOutcome::TwoCsc => (AgentType::Csc, AgentType::Csc),
        }
    }
}

impl DivisionRules {
    pub fn is_valid(&self) -> bool {
        [self.dediff_prob, self.csc_asym_prob, self.csc_sym_two_csc_prob]
            .iter()
            .all(|p| (0.0..=1.0).contains(p))
    }

    /// Sample the outcome for a dividing agent. Only CC and CSC divide.
    pub fn sample<R: Rng + ?Sized>(&self, parent: AgentType, rng: &mut R) -> Option<DivisionOutcome> {
        match parent {
            AgentType::Cc => Some(if rng.random::<f64>() < self.dediff_prob {
                DivisionOutcome::CcAndCsc
            } else {
                DivisionOutcome::TwoCc
            }),
            AgentType::Csc => Some(if rng.random::<f64>() < self.csc_asym_prob {
                DivisionOutcome::CcAndCsc
            } else if rng.random::<f64>() < self.csc_sym_two_csc_prob {
                DivisionOutcome::TwoCsc
            } else {
                DivisionOutcome::TwoCc
            }),
            AgentType::Vp | AgentType::Necrotic => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    const DRAWS: usize = 100_000;

    fn within_3_sigma(hits: usize, n: usize, p: f64) -> bool {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        ((hits as f64 / n as f64) - p).abs() <= 3.0 * sigma
    }

    #[test]
    fn cc_dedifferentiation_frequency() {
        let rules = DivisionRules::default();
        let mut rng = rng_from_seed(11);
        let hits = (0..DRAWS)
            .filter(|_| rules.sample(AgentType::Cc, &mut rng) == Some(DivisionOutcome::CcAndCsc))
            .count();
        assert!(within_3_sigma(hits, DRAWS, 0.005), "{hits}");
    }

    #[test]
    fn csc_asymmetric_and_symmetric_split() {
        let rules = DivisionRules::default();
        let mut rng = rng_from_seed(12);
        let outcomes: Vec<_> = (0..DRAWS)
            .map(|_| rules.sample(AgentType::Csc, &mut rng).unwrap())
            .collect();
        let asym = outcomes.iter().filter(|o| **o == DivisionOutcome::CcAndCsc).count();
        assert!(within_3_sigma(asym, DRAWS, 0.99), "{asym}");

        // conditional split, sampled directly from the symmetric branch
        let sym_rules = DivisionRules {
            csc_asym_prob: 0.0,
            ..rules
        };
        let two_csc = (0..DRAWS)
            .filter(|_| sym_rules.sample(AgentType::Csc, &mut rng) == Some(DivisionOutcome::TwoCsc))
            .count();
        assert!(within_3_sigma(two_csc, DRAWS, 0.99), "{two_csc}");
    }

    #[test]
    fn non_dividing_types() {
        let rules = DivisionRules::default();
        let mut rng = rng_from_seed(1);
        assert!(rules.sample(AgentType::Vp, &mut rng).is_none());
        assert!(rules.sample(AgentType::Necrotic, &mut rng).is_none());
    }
}
