use std::collections::BTreeSet;

use cinepipe_core::taxonomy::{balance_report, generate_plan, Taxonomy};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginals_within_one(n in 0..600usize, seed in any::<u64>()) {
        let tax = Taxonomy::default_taxonomy();
        let plan = generate_plan(n, &tax, seed).unwrap();
        prop_assert_eq!(plan.entries.len(), n);
        for (dim, counts) in &plan.report {
            prop_assert!(counts.max_deviation <= 1, "{} deviates by {}", dim, counts.max_deviation);
            prop_assert_eq!(counts.total(), n);
        }
        prop_assert_eq!(&balance_report(&plan.entries, &tax), &plan.report);
        for e in &plan.entries {
            prop_assert!(tax.validate(e).is_ok());
            let distinct: BTreeSet<&String> = e.movements.iter().collect();
            prop_assert_eq!(distinct.len(), e.movements.len());
            prop_assert_eq!(e.movements.len(), e.shot_count as usize);
        }
    }

    #[test]
    fn reruns_are_byte_identical(n in 1..300usize, seed in any::<u64>()) {
        let tax = Taxonomy::default_taxonomy();
        prop_assert_eq!(generate_plan(n, &tax, seed).unwrap().to_jsonl(), generate_plan(n, &tax, seed).unwrap().to_jsonl());
    }
}
