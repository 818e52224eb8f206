//! Consolidation of repeated binary model answers with label models.
//!
//! Votes from repeated prompting runs are collected into a [`votes::VoteMatrix`]
//! (items by sources, `+1`/`-1`/abstain), turned into posteriors by one of the
//! estimators in [`label_models`], and scored against gold labels with exact
//! fractions. [`prompting`] renders prompts and keeps a replayable store of raw
//! responses; [`experiment`] runs sweeps and builds the summary tables.

pub mod experiment;
pub mod label_models;
pub mod prompting;
pub mod simulate;
pub mod votes;

/// Order-preserving map, parallel when the `parallel` feature is on.
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
