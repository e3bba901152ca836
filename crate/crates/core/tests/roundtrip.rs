mod common;

use clinistruct::FormatKind;
use proptest::prelude::*;

fn check(format: FormatKind, seed: u64, case: u64) -> Result<(), String> {
    let catalog = common::catalog();
    let registry = common::registry(&catalog);
    match common::random_event_set(&catalog, format, seed, case) {
        Some((record, events)) => common::round_trip(&record, &events, format, &registry, seed),
        None => Ok(()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fhir_bundles_round_trip(seed in any::<u64>(), case in 0u64..1_000_000) {
        prop_assert_eq!(check(FormatKind::FhirJson, seed, case), Ok(()));
    }

    #[test]
    fn hl7_messages_round_trip(seed in any::<u64>(), case in 0u64..1_000_000) {
        prop_assert_eq!(check(FormatKind::Hl7V2, seed, case), Ok(()));
    }

    #[test]
    fn csv_extracts_round_trip(seed in any::<u64>(), case in 0u64..1_000_000) {
        prop_assert_eq!(check(FormatKind::CsvExtract, seed, case), Ok(()));
    }

    #[test]
    fn narrative_notes_round_trip(seed in any::<u64>(), case in 0u64..1_000_000) {
        prop_assert_eq!(check(FormatKind::Narrative, seed, case), Ok(()));
    }
}
