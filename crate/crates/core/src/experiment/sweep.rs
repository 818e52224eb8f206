use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use super::ExperimentError;
use crate::prompting::{render_prompt, Completer, PromptingError, RunConfig, RunRecord, RunRequest};
use crate::votes::EntailmentExample;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// One record per planned request, in plan order.
    pub records: Vec<RunRecord>,
    /// Records that were not in the store before this sweep.
    pub new_records: usize,
}

/// Every request of the sweep, ordered by temperature, run index, then
/// dataset order.
pub fn plan_requests(dataset: &[EntailmentExample], config: &RunConfig) -> Vec<RunRequest> {
    let prompts: Vec<String> = dataset.iter().map(|ex| render_prompt(ex, config.prompt_type)).collect();
    let mut out = Vec::with_capacity(dataset.len() * config.temperatures.len() * config.runs_per_temperature as usize);
    for &temperature in &config.temperatures {
        for run_index in 0..config.runs_per_temperature {
            for (ex, prompt) in dataset.iter().zip(&prompts) {
                out.push(RunRequest {
                    example_id: ex.id.clone(),
                    prompt_type: config.prompt_type,
                    temperature,
                    run_index,
                    model_name: config.model_name.clone(),
                    prompt: prompt.clone(),
                });
            }
        }
    }
    out
}

/// Ensures one stored record per (example, temperature, run).
///
/// Stored keys are skipped, so an interrupted sweep resumes where it stopped.
/// Up to `max_parallel_requests` completions run at once; after the first
/// failure no new request is started and the error is returned. In replay
/// mode the first missing key (in plan order) is reported before anything
/// else happens.
pub fn sweep(
    dataset: &[EntailmentExample],
    config: &RunConfig,
    completer: &Completer,
) -> Result<SweepOutcome, ExperimentError> {
    config.validate()?;
    let requests = plan_requests(dataset, config);
    let store = completer.store();
    let pending: Vec<usize> = (0..requests.len()).filter(|&i| !store.contains(&requests[i].run_key())).collect();
    if completer.is_replay() {
        if let Some(&i) = pending.first() {
            return Err(PromptingError::CacheMiss(requests[i].run_key()).into());
        }
    }

    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let first_error: Mutex<Option<(usize, PromptingError)>> = Mutex::new(None);
    let workers = config.max_parallel_requests.min(pending.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let slot = next.fetch_add(1, Ordering::SeqCst);
                let Some(&i) = pending.get(slot) else { break };
                if let Err(e) = completer.complete(&requests[i]) {
                    failed.store(true, Ordering::SeqCst);
                    let mut guard = first_error.lock().expect("error slot poisoned");
                    if guard.as_ref().map_or(true, |(j, _)| i < *j) {
                        *guard = Some((i, e));
                    }
                    break;
                }
            });
        }
    });
    if let Some((_, e)) = first_error.into_inner().expect("error slot poisoned") {
        return Err(e.into());
    }

    let records = requests
        .iter()
        .map(|r| store.get(&r.run_key()).ok_or_else(|| PromptingError::CacheMiss(r.run_key())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepOutcome { records, new_records: pending.len() })
}
