use rand::Rng;
use rayon::prelude::*;

use super::{NliInstance, PhraseSet};
use crate::rng::seeded;
use crate::{Error, Result};

pub const AUGMENTED_UID_SUFFIX: &str = "-aug";

/// Prepend `phrase` and a single space to the hypothesis. The label is
/// left untouched.
pub fn augment_instance(inst: &NliInstance, phrase: &str) -> Result<NliInstance> {
    if phrase.trim().is_empty() {
        return Err(Error::usage("augmentation phrase is empty"));
    }
    if inst.augmented {
        return Err(Error::usage(format!("{} is already augmented", inst.uid)));
    }
    Ok(NliInstance {
        uid: format!("{}{AUGMENTED_UID_SUFFIX}", inst.uid),
        premise: inst.premise.clone(),
        hypothesis: format!("{phrase} {}", inst.hypothesis),
        label: inst.label,
        source_round: inst.source_round,
        augmented: true,
        phrase_used: Some(phrase.to_owned()),
    })
}

/// Inverse of [`augment_instance`] on the hypothesis.
pub fn strip_phrase(inst: &NliInstance) -> Option<&str> {
    let phrase = inst.phrase_used.as_deref()?;
    inst.hypothesis.strip_prefix(phrase)?.strip_prefix(' ')
}

/// Index into `phrases` for each of `n` instances: independent uniform
/// draws from a stream seeded with `seed`.
pub fn phrase_assignments(n: usize, phrases: &PhraseSet, seed: u64) -> Vec<usize> {
    let mut rng = seeded(seed);
    (0..n).map(|_| rng.random_range(0..phrases.len())).collect()
}

/// The original corpus followed by one augmented copy of every instance.
pub fn build_augmented_corpus(corpus: &[NliInstance], phrases: &PhraseSet, seed: u64) -> Result<Vec<NliInstance>> {
    if corpus.is_empty() {
        return Err(Error::usage("cannot augment an empty corpus"));
    }
    for inst in corpus {
        inst.validate()?;
    }
    let picks = phrase_assignments(corpus.len(), phrases, seed);
    let entries = phrases.entries();
    let augmented = corpus
        .par_iter()
        .zip(picks.par_iter())
        .map(|(inst, &i)| augment_instance(inst, &entries[i].phrase))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(corpus.len() * 2);
    out.extend_from_slice(corpus);
    out.extend(augmented);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::NliLabel;

    fn inst(uid: &str, hyp: &str, label: NliLabel) -> NliInstance {
        NliInstance {
            uid: uid.into(),
            premise: "American pancakes are similar to Scotch pancakes".into(),
            hypothesis: hyp.into(),
            label,
            source_round: Some(1),
            augmented: false,
            phrase_used: None,
        }
    }

    #[test]
    fn sentiment_phrase_prefix() {
        let a = augment_instance(
            &inst("x", "they are like scotch pancakes", NliLabel::Entailment),
            "I love that!",
        )
        .unwrap();
        assert_eq!(a.hypothesis, "I love that! they are like scotch pancakes");
        assert_eq!(a.label, NliLabel::Entailment);
        assert!(a.augmented);
        assert_eq!(a.uid, "x-aug");
        a.validate().unwrap();
    }

    #[test]
    fn strip_restores_original() {
        let orig = inst("x", "  odd  spacing ", NliLabel::Neutral);
        let a = augment_instance(&orig, "Here is what I know:").unwrap();
        assert_eq!(strip_phrase(&a), Some(orig.hypothesis.as_str()));
    }

    #[test]
    fn errors() {
        let a = inst("x", "h", NliLabel::Contradiction);
        assert!(matches!(augment_instance(&a, ""), Err(Error::Usage(_))));
        let twice = augment_instance(&a, "I think").unwrap();
        assert!(matches!(augment_instance(&twice, "I think"), Err(Error::Usage(_))));
        assert!(build_augmented_corpus(&[], &PhraseSet::default(), 0).is_err());
    }

    #[test]
    fn doubles_corpus_with_originals_first() {
        let corpus: Vec<_> = (0..5).map(|i| inst(&format!("u{i}"), "h", NliLabel::Neutral)).collect();
        let out = build_augmented_corpus(&corpus, &PhraseSet::default(), 3).unwrap();
        assert_eq!(out.len(), 10);
        assert_eq!(&out[..5], &corpus[..]);
        assert!(out[5..].iter().all(|i| i.augmented));
    }

    #[test]
    fn seeds_control_assignments() {
        let d = PhraseSet::default();
        let a = phrase_assignments(1000, &d, 1);
        assert_eq!(a, phrase_assignments(1000, &d, 1));
        let b = phrase_assignments(1000, &d, 2);
        let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / 1000.0;
        // Independent uniform draws over ten phrases agree 10% of the time;
        // the band is about four standard deviations wide.
        assert!((0.06..=0.14).contains(&agree), "agreement {agree}");
    }
}
