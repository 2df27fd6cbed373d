//! Measures the best possible exact-mask accuracy of any per-token
//! classifier whose decision depends only on the token window a stack of
//! diagonally-masked encoder layers can observe (half-width = layers * k).

use rewriter::datagen::{build_selector_dataset, DatasetSizes, SelectorExample};
use rewriter::term::Domain;
use std::collections::HashMap;

fn windows(r: &SelectorExample, hw: usize) -> Vec<(Vec<String>, bool)> {
    let n = r.tokens.len();
    (0..n)
        .map(|i| {
            let w: Vec<String> = (0..2 * hw + 1)
                .map(|j| {
                    let p = i as isize + j as isize - hw as isize;
                    if p < 0 || p >= n as isize {
                        "<pad>".to_string()
                    } else {
                        r.tokens[p as usize].clone()
                    }
                })
                .collect();
            (w, r.mask[i])
        })
        .collect()
}

fn exact_mask_rate(
    records: &[&SelectorExample],
    table: &HashMap<Vec<String>, [u64; 2]>,
    hw: usize,
) -> f64 {
    let mut exact = 0usize;
    for r in records {
        let ok = windows(r, hw).iter().all(|(w, label)| {
            let c = table.get(w).copied().unwrap_or([0, 0]);
            (c[1] >= c[0]) == *label
        });
        exact += ok as usize;
    }
    exact as f64 / records.len() as f64
}

fn main() {
    let ds = build_selector_dataset(Domain::Logic, &DatasetSizes::default(), 7);
    let train: Vec<&SelectorExample> = ds.train_groups.iter().flatten().collect();
    let id: Vec<&SelectorExample> = ds.id_val.iter().collect();
    let ood: Vec<&SelectorExample> = ds.ood_val.iter().collect();
    for hw in [2usize, 3, 4] {
        let mut table: HashMap<Vec<String>, [u64; 2]> = HashMap::new();
        for r in &train {
            for (w, label) in windows(r, hw) {
                table.entry(w).or_insert([0, 0])[label as usize] += 1;
            }
        }
        let ambiguous = table.values().filter(|c| c[0] > 0 && c[1] > 0).count();
        println!(
            "half-width {hw}: windows {} ambiguous {} | train {:.4} id {:.4} ood {:.4}",
            table.len(),
            ambiguous,
            exact_mask_rate(&train, &table, hw),
            exact_mask_rate(&id, &table, hw),
            exact_mask_rate(&ood, &table, hw),
        );
    }
}
