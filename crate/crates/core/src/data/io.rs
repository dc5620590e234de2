//! Text ingestion and the on-disk dataset layout.
//!
//! Event logs are UTF-8 TSV, one adoption per line:
//! `user_id<TAB>item_id<TAB>timestamp<TAB>exposed(0|1)`; metadata files carry
//! `user_id<TAB>n_friends<TAB>n_posts`. Lines starting with `#` and blank
//! lines are skipped in every file this module reads.
//!
//! A serialized dataset is a directory of four files: `users.tsv` (id,
//! friend and post counts, and the authoritative load ratio), `items.tsv`
//! (ids), and `adoptions.tsv`/`exposure.tsv` (sparse `user item 1` triplets
//! in strictly increasing (user, item) order). Plain text keeps the layout
//! portable across languages.

use super::{
    estimate_rho, AdoptionDataset, AdoptionEvent, DataError, UserMeta, DEFAULT_POST_RATE_COEFF,
    DEFAULT_VISIT_RATE_COEFF,
};
use crate::distributions::LoadRatio;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse {
        path: path.display().to_string(),
        line: line,
        message: message.into(),
    }
}

/// Reads a text file into (1-based line number, payload) rows, dropping
/// comments and blank lines.
fn read_rows(path: &Path) -> Result<Vec<(usize, String)>, DataError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rows.push((idx + 1, line.to_string()));
    }
    Ok(rows)
}

fn parse_meta_file(path: &Path) -> Result<BTreeMap<String, UserMeta>, DataError> {
    let mut meta = BTreeMap::new();
    for (line_no, row) in read_rows(path)? {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        if fields[0].is_empty() {
            return Err(parse_err(path, line_no, "empty user id"));
        }
        let n_friends: u64 = fields[1].parse().map_err(|_| {
            parse_err(
                path,
                line_no,
                format!("friend count must be a non-negative integer, got {:?}", fields[1]),
            )
        })?;
        let n_posts: u64 = fields[2].parse().map_err(|_| {
            parse_err(
                path,
                line_no,
                format!("post count must be a non-negative integer, got {:?}", fields[2]),
            )
        })?;
        let user_id = fields[0].to_string();
        if meta
            .insert(
                user_id.clone(),
                UserMeta {
                    user_id,
                    n_friends,
                    n_posts,
                },
            )
            .is_some()
        {
            return Err(parse_err(
                path,
                line_no,
                format!("duplicate metadata for user {:?}", fields[0]),
            ));
        }
    }
    Ok(meta)
}

fn parse_event_file(path: &Path) -> Result<Vec<AdoptionEvent>, DataError> {
    let mut events = Vec::new();
    for (line_no, row) in read_rows(path)? {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(parse_err(path, line_no, "empty user or item id"));
        }
        let timestamp: u64 = fields[2].parse().map_err(|_| {
            parse_err(
                path,
                line_no,
                format!("timestamp must be a non-negative integer, got {:?}", fields[2]),
            )
        })?;
        let exposed = match fields[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("exposed flag must be 0 or 1, got {other:?}"),
                ))
            }
        };
        events.push(AdoptionEvent {
            user_id: fields[0].to_string(),
            item_id: fields[1].to_string(),
            timestamp,
            exposed,
        });
    }
    Ok(events)
}

/// [`load_events_with_rates`] with the default rate coefficients.
pub fn load_events(events_path: &Path, meta_path: &Path) -> Result<AdoptionDataset, DataError> {
    load_events_with_rates(
        events_path,
        meta_path,
        DEFAULT_POST_RATE_COEFF,
        DEFAULT_VISIT_RATE_COEFF,
    )
}

/// Ingests an adoption event log plus user metadata into a dataset.
///
/// Index maps are assigned lexicographically over the ids that actually
/// occur in the event file; metadata rows for absent users are ignored.
/// Repeated (user, item) events collapse into one adoption — the exposure
/// flags OR together — and are tallied in `duplicate_events`.
pub fn load_events_with_rates(
    events_path: &Path,
    meta_path: &Path,
    post_rate_coeff: f64,
    visit_rate_coeff: f64,
) -> Result<AdoptionDataset, DataError> {
    let meta_by_id = parse_meta_file(meta_path)?;
    let events = parse_event_file(events_path)?;

    let unknown: BTreeSet<&str> = events
        .iter()
        .filter(|e| !meta_by_id.contains_key(&e.user_id))
        .map(|e| e.user_id.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(DataError::UnknownUsers {
            users: unknown.into_iter().map(String::from).collect(),
        });
    }

    let user_ids: Vec<String> = events
        .iter()
        .map(|e| e.user_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let item_ids: Vec<String> = events
        .iter()
        .map(|e| e.item_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let user_index: BTreeMap<&str, usize> = user_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let item_index: BTreeMap<&str, usize> = item_ids
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j))
        .collect();

    let n = user_ids.len();
    let mut adopted_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut exposed_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut duplicates = 0usize;
    for event in &events {
        let i = user_index[event.user_id.as_str()];
        let j = item_index[event.item_id.as_str()];
        if !adopted_sets[i].insert(j) {
            duplicates += 1;
        }
        if event.exposed {
            exposed_sets[i].insert(j);
        }
    }

    let mut meta = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    let mut floors = 0usize;
    for id in &user_ids {
        let m = meta_by_id[id.as_str()].clone();
        let est = estimate_rho(&m, post_rate_coeff, visit_rate_coeff)?;
        floors += est.floored as usize;
        rho.push(est.rho);
        meta.push(m);
    }

    let data = AdoptionDataset::from_parts(
        user_ids,
        item_ids,
        adopted_sets.into_iter().map(Vec::from_iter).collect(),
        exposed_sets.into_iter().map(Vec::from_iter).collect(),
        meta,
        rho,
    )?;
    Ok(data.with_counters(duplicates, floors))
}

/// Writes the dataset directory layout described in the module docs.
/// Ingestion diagnostics (duplicate and floor counters) are not persisted.
pub fn save_dir(data: &AdoptionDataset, dir: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let users_path = dir.join("users.tsv");
    let mut w = BufWriter::new(File::create(&users_path).map_err(|e| io_err(&users_path, e))?);
    (|| -> std::io::Result<()> {
        writeln!(w, "# user_id\tn_friends\tn_posts\trho")?;
        for i in 0..data.n_users() {
            let m = data.meta(i);
            writeln!(
                w,
                "{}\t{}\t{}\t{:e}",
                m.user_id,
                m.n_friends,
                m.n_posts,
                data.rho(i).value()
            )?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(&users_path, e))?;

    let items_path = dir.join("items.tsv");
    let mut w = BufWriter::new(File::create(&items_path).map_err(|e| io_err(&items_path, e))?);
    (|| -> std::io::Result<()> {
        writeln!(w, "# item_id")?;
        for id in data.item_ids() {
            writeln!(w, "{id}")?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(&items_path, e))?;

    for (name, lists) in [
        ("adoptions.tsv", data.all_adopted()),
        ("exposure.tsv", data.all_exposed()),
    ] {
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
        (|| -> std::io::Result<()> {
            writeln!(w, "# user\titem\tvalue")?;
            for (i, items) in lists.iter().enumerate() {
                for &j in items {
                    writeln!(w, "{i}\t{j}\t1")?;
                }
            }
            w.flush()
        })()
        .map_err(|e| io_err(&path, e))?;
    }

    Ok(())
}

/// Loads a dataset directory written by [`save_dir`]. The `rho` column of
/// `users.tsv` is authoritative — it is not re-derived from the metadata
/// counts, which are carried for provenance only.
pub fn load_dir(dir: &Path) -> Result<AdoptionDataset, DataError> {
    let users_path = dir.join("users.tsv");
    let mut user_ids = Vec::new();
    let mut meta = Vec::new();
    let mut rho = Vec::new();
    for (line_no, row) in read_rows(&users_path)? {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                &users_path,
                line_no,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        let n_friends: u64 = fields[1].parse().map_err(|_| {
            parse_err(&users_path, line_no, format!("bad friend count {:?}", fields[1]))
        })?;
        let n_posts: u64 = fields[2].parse().map_err(|_| {
            parse_err(&users_path, line_no, format!("bad post count {:?}", fields[2]))
        })?;
        let rho_value: f64 = fields[3].parse().map_err(|_| {
            parse_err(&users_path, line_no, format!("bad load ratio {:?}", fields[3]))
        })?;
        let rho_value = LoadRatio::new(rho_value)
            .map_err(|e| parse_err(&users_path, line_no, e.to_string()))?;
        user_ids.push(fields[0].to_string());
        meta.push(UserMeta {
            user_id: fields[0].to_string(),
            n_friends,
            n_posts,
        });
        rho.push(rho_value);
    }

    let items_path = dir.join("items.tsv");
    let mut item_ids = Vec::new();
    for (line_no, row) in read_rows(&items_path)? {
        if row.contains('\t') {
            return Err(parse_err(&items_path, line_no, "expected a single id field"));
        }
        item_ids.push(row);
    }

    let adopted = read_triplets(&dir.join("adoptions.tsv"), user_ids.len(), item_ids.len())?;
    let exposed = read_triplets(&dir.join("exposure.tsv"), user_ids.len(), item_ids.len())?;

    AdoptionDataset::from_parts(user_ids, item_ids, adopted, exposed, meta, rho)
}

fn read_triplets(path: &Path, n_users: usize, n_items: usize) -> Result<Vec<Vec<usize>>, DataError> {
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    let mut prev: Option<(usize, usize)> = None;
    for (line_no, row) in read_rows(path)? {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(path, line_no, format!("bad user index {:?}", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(path, line_no, format!("bad item index {:?}", fields[1])))?;
        if fields[2] != "1" {
            return Err(parse_err(
                path,
                line_no,
                format!("sparse entries must have value 1, got {:?}", fields[2]),
            ));
        }
        if i >= n_users || j >= n_items {
            return Err(parse_err(
                path,
                line_no,
                format!("({i}, {j}) out of bounds for {n_users} users x {n_items} items"),
            ));
        }
        if prev.is_some_and(|p| p >= (i, j)) {
            return Err(parse_err(
                path,
                line_no,
                "triplets must be strictly increasing by (user, item)",
            ));
        }
        prev = Some((i, j));
        lists[i].push(j);
    }
    Ok(lists)
}
