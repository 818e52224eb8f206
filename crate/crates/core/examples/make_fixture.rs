//! Regenerates `fixtures/dataset.jsonl` and `fixtures/store.jsonl`.
//!
//! A synthetic 20-item dataset is swept through a local stub endpoint at ten
//! temperatures with ten runs each. Stub answers are seeded by (item,
//! temperature, call count), the sweep runs sequentially and timestamps are
//! pinned, so the output is reproducible.
//!
//! ```text
//! cargo run -p lexvote-core --example make_fixture -- fixtures
//! ```

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use lexvote::experiment::sweep;
use lexvote::prompting::stub::{reasoning_transcript, StubReply, StubServer};
use lexvote::prompting::{
    Completer, HttpTransport, RetryPolicy, RunConfig, RunStore, StoreFilter, Temperature,
};
use lexvote::votes::io::write_dataset;
use lexvote::votes::{EntailmentExample, Vote};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIXTURE_MODEL: &str = "stub-chat";

const TOPICS: [(&str, &str); 10] = [
    ("a minor who concludes a contract without consent", "may rescind the contract unless the act only acquires a right"),
    ("a person under curatorship", "needs the curator's consent to borrow money"),
    ("an agent acting without authority", "binds the principal only after ratification"),
    ("a mortgagee", "may exercise the mortgage against the proceeds of a sale of the property"),
    ("a possessor in good faith", "acquires the fruits of the thing possessed"),
    ("a lessee", "may not sublease the thing without the lessor's approval"),
    ("a guarantor", "may demand that the creditor first claim against the principal obligor"),
    ("a party to a bilateral contract", "may refuse performance until the other party tenders its own"),
    ("a donor under an unwritten gift", "may cancel the gift before performance"),
    ("an heir who renounces the inheritance", "is deemed never to have been an heir"),
];

fn dataset() -> Vec<EntailmentExample> {
    (0..20)
        .map(|i| {
            let (who, rule) = TOPICS[i % 10];
            let positive = i % 10 < 6 || (i >= 10 && i % 3 == 0);
            let number = 90 + 7 * i;
            let query = if positive {
                format!("Under Article {number}, {who} {rule}.")
            } else {
                format!("Under Article {number}, {who} never {rule}.")
            };
            let article = format!(
                "Article {number}\n(1) Subject to the provisions of this Section, {who} {rule}.\n(2) The preceding paragraph does not apply where a third party in good faith would be prejudiced."
            );
            EntailmentExample {
                id: format!("R{:02}-{:02}", 4 + i / 10, i % 10 + 1),
                query,
                articles: vec![article],
                gold: Some(Vote::from_bool(positive)),
            }
        })
        .collect()
}

fn query_of(prompt: &str) -> &str {
    let start = prompt.find("Query: ```").map(|i| i + "Query: ```".len()).unwrap_or(0);
    let rest = &prompt[start..];
    &rest[..rest.find("```").unwrap_or(rest.len())]
}

fn seed_of(parts: &[&[u8]]) -> u64 {
    // FNV-1a, enough to spread fixture seeds
    let mut h: u64 = 0xcbf29ce484222325;
    for p in parts {
        for b in *p {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()).into();
    std::fs::create_dir_all(&out)?;
    let examples = dataset();
    let truth: HashMap<String, (usize, bool)> = examples
        .iter()
        .enumerate()
        .map(|(i, ex)| (ex.query.clone(), (i, ex.gold == Some(Vote::Positive))))
        .collect();
    let counters: Mutex<HashMap<(String, u64), u32>> = Mutex::new(HashMap::new());

    let server = StubServer::start(move |req| {
        let Some(&(item, positive)) = truth.get(query_of(&req.prompt)) else {
            return StubReply::Status(400);
        };
        let t_key = (req.temperature * 1000.0).round() as u64;
        let call = {
            let mut c = counters.lock().unwrap();
            let n = c.entry((req.prompt.clone(), t_key)).or_insert(0);
            *n += 1;
            *n
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&[&item.to_le_bytes(), &t_key.to_le_bytes(), &call.to_le_bytes()]));
        // Item difficulty spreads base accuracy over 0.45..0.95; higher
        // temperatures blur every item a little.
        let base = 0.45 + 0.5 * ((item * 7) % 20) as f64 / 19.0;
        let p_correct = (base - 0.08 * req.temperature).clamp(0.3, 0.97);
        let vote = if rng.random_bool(0.03) {
            Vote::Abstain
        } else {
            Vote::from_bool(positive == rng.random_bool(p_correct))
        };
        StubReply::Ok(reasoning_transcript(vote, &format!("The query concerns item {item} and its article.")))
    })?;

    let tmp = out.join("store.jsonl.tmp");
    let _ = std::fs::remove_file(&tmp);
    let store = Arc::new(RunStore::open(&tmp)?);
    let transport = HttpTransport::new(&server.base_url(), None).map_err(|e| format!("{e:?}"))?;
    let completer = Completer::live(store.clone(), Box::new(transport), RetryPolicy::immediate(3));
    let mut config = RunConfig::new(Temperature::decile_grid(), 10, FIXTURE_MODEL);
    config.max_parallel_requests = 1;
    let outcome = sweep(&examples, &config, &completer)?;
    drop(completer);

    let pinned: DateTime<Utc> = "2024-01-01T00:00:00Z".parse()?;
    let mut lines = String::new();
    for mut r in store.list(&StoreFilter::default()) {
        r.created_at = pinned;
        lines.push_str(&serde_json::to_string(&r)?);
        lines.push('\n');
    }
    std::fs::remove_file(&tmp)?;
    std::fs::write(out.join("store.jsonl"), lines)?;
    write_dataset(std::fs::File::create(out.join("dataset.jsonl"))?, &examples)?;
    println!("{} records, {} stub calls", outcome.records.len(), server.calls());
    Ok(())
}
