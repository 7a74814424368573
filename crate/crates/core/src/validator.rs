//! Acceptance rule over simulated-student repair counts.
//!
//! `n1` counts suite-passing repairs from the standard repair prompt, `n2`
//! those from the prompt augmented with the feedback. All comparisons are on
//! exact rationals.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Proportion, RuleVariant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("sample count n must be at least 1")]
    EmptySampleSet,
    #[error("pass counts ({n1}, {n2}) exceed sample count {n}")]
    CountOutOfRange { n1: u32, n2: u32, n: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub n1: u32,
    pub n2: u32,
    pub n: u32,
    pub accepted: bool,
    pub rule_variant: RuleVariant,
}

pub fn decide(
    n1: u32,
    n2: u32,
    n: u32,
    alpha: Proportion,
    beta: Proportion,
    variant: RuleVariant,
) -> Result<bool, ContractError> {
    if n == 0 {
        return Err(ContractError::EmptySampleSet);
    }
    if n1 > n || n2 > n {
        return Err(ContractError::CountOutOfRange { n1, n2, n });
    }
    let total = i64::from(n);
    let without = Ratio::new(i64::from(n1), total);
    let with = Ratio::new(i64::from(n2), total);

    let relative = with >= without;
    let absolute = with >= alpha.ratio();
    let margin = with >= without + beta.ratio();

    Ok(match variant {
        RuleVariant::Full => relative && (absolute || margin),
        RuleVariant::AbsoluteOnly => absolute,
        RuleVariant::NoBeta => relative && absolute,
        RuleVariant::RelativeOnly => relative,
    })
}

/// Evaluates the rule and packages the counts alongside the decision.
pub fn validate(
    n1: u32,
    n2: u32,
    n: u32,
    alpha: Proportion,
    beta: Proportion,
    variant: RuleVariant,
) -> Result<ValidationOutcome, ContractError> {
    let accepted = decide(n1, n2, n, alpha, beta, variant)?;
    Ok(ValidationOutcome {
        n1,
        n2,
        n,
        accepted,
        rule_variant: variant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(n1: u32, n2: u32) -> bool {
        decide(
            n1,
            n2,
            10,
            Proportion::new(1, 2),
            Proportion::new(1, 4),
            RuleVariant::Full,
        )
        .unwrap()
    }

    #[test]
    fn reported_trials() {
        assert!(full(2, 6));
        assert!(!full(8, 0));
        assert!(!full(6, 0));
        assert!(!full(5, 0));
    }

    #[test]
    fn rule_arithmetic_cases() {
        assert!(full(0, 3));
        assert!(!full(3, 4));
        assert!(full(5, 5));
    }

    #[test]
    fn variants_differ_where_expected() {
        let a = Proportion::new(1, 2);
        let b = Proportion::new(1, 4);
        // n1 high, n2 at alpha: only the variants ignoring n1 accept.
        assert!(decide(8, 5, 10, a, b, RuleVariant::AbsoluteOnly).unwrap());
        assert!(!decide(8, 5, 10, a, b, RuleVariant::Full).unwrap());
        // margin path only
        assert!(decide(0, 3, 10, a, b, RuleVariant::Full).unwrap());
        assert!(!decide(0, 3, 10, a, b, RuleVariant::NoBeta).unwrap());
        assert!(decide(0, 3, 10, a, b, RuleVariant::RelativeOnly).unwrap());
    }

    #[test]
    fn contract_violations() {
        let a = Proportion::new(1, 2);
        let b = Proportion::new(1, 4);
        assert_eq!(
            decide(0, 0, 0, a, b, RuleVariant::Full),
            Err(ContractError::EmptySampleSet)
        );
        assert!(matches!(
            decide(11, 0, 10, a, b, RuleVariant::Full),
            Err(ContractError::CountOutOfRange { .. })
        ));
    }

    #[test]
    fn boundary_margin_is_inclusive() {
        // n2/n == n1/n + beta exactly, below alpha.
        assert!(decide(
            1,
            3,
            8,
            Proportion::new(1, 2),
            Proportion::new(1, 4),
            RuleVariant::Full
        )
        .unwrap());
    }
}
