use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::record::Stage;
use crate::runner::Pipeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: String,
    pub stage: Stage,
    pub paused: bool,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub total: usize,
    pub finals: usize,
    pub failed: usize,
    pub paused: usize,
    /// Highest number of samples that were in progress at once.
    pub max_in_flight: usize,
    pub outcomes: Vec<RunOutcome>,
}

/// Resumes every run on `parallelism` worker threads. One sample's failure
/// never stops the others.
pub fn run_batch(pipeline: &Pipeline, ids: &[String], parallelism: usize) -> BatchReport {
    let workers = parallelism.max(1).min(ids.len().max(1));
    let next = AtomicUsize::new(0);
    let in_flight = AtomicUsize::new(0);
    let peak = AtomicUsize::new(0);
    let outcomes: Mutex<Vec<(usize, RunOutcome)>> = Mutex::new(Vec::with_capacity(ids.len()));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(id) = ids.get(i) else { break };
                let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                let outcome = match pipeline.resume(id) {
                    Ok(rec) => RunOutcome {
                        run_id: id.clone(),
                        stage: rec.stage,
                        paused: rec.is_paused(),
                        error: rec.failure.map(|f| f.message),
                    },
                    Err(e) => RunOutcome {
                        run_id: id.clone(),
                        stage: Stage::Failed,
                        paused: false,
                        error: Some(e.to_string()),
                    },
                };
                in_flight.fetch_sub(1, Ordering::SeqCst);
                outcomes.lock().unwrap().push((i, outcome));
            });
        }
    });
    let mut outcomes = outcomes.into_inner().unwrap();
    outcomes.sort_by_key(|(i, _)| *i);
    let outcomes: Vec<RunOutcome> = outcomes.into_iter().map(|(_, o)| o).collect();
    BatchReport {
        total: ids.len(),
        finals: outcomes.iter().filter(|o| o.stage == Stage::Final).count(),
        failed: outcomes.iter().filter(|o| o.stage == Stage::Failed).count(),
        paused: outcomes.iter().filter(|o| o.paused).count(),
        max_in_flight: peak.load(Ordering::SeqCst),
        outcomes,
    }
}
