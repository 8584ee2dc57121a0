use std::collections::BTreeMap;

use biasmax::harness::sweep::{summarize, write_summary, SweepDataset};
use biasmax::harness::{write_records, RECORD_HEADER};
use biasmax::maximizers::Flag;
use biasmax::{run_sweep, Algorithm, SweepConfig};

fn config(dataset: SweepDataset) -> SweepConfig {
    SweepConfig {
        dataset,
        n: 60,
        k: 12,
        betas: vec![0.05, 1.0],
        fractions: vec![0.25, 0.5],
        deltas: vec![2.0],
        trials: 6,
        algorithms: Algorithm::ALL.to_vec(),
        seed: 17,
        ..SweepConfig::default()
    }
}

#[test]
fn summary_matches_hand_aggregation_of_raw_csv() {
    let records = run_sweep(&config(SweepDataset::Synthetic2)).unwrap();
    let mut raw = Vec::new();
    write_records(&mut raw, &records).unwrap();
    let mut sum = Vec::new();
    write_summary(&mut sum, &summarize(&records)).unwrap();

    // recompute from the raw CSV text
    let mut rdr = csv::Reader::from_reader(raw.as_slice());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>().join(","), RECORD_HEADER);
    let mut cells: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let key = (rec[1].to_string(), rec[2].to_string(), rec[4].to_string());
        cells.entry(key).or_default().push(rec[9].parse().unwrap());
    }
    let mut rdr = csv::Reader::from_reader(sum.as_slice());
    let mut seen = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let vals = &cells[&(rec[1].to_string(), rec[2].to_string(), rec[4].to_string())];
        let t = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / t;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1.0)).sqrt();
        let got_mean: f64 = rec[7].parse().unwrap();
        let got_sem: f64 = rec[8].parse().unwrap();
        assert_eq!(rec[6].parse::<usize>().unwrap(), vals.len());
        assert!((got_mean - mean).abs() < 1e-9, "{got_mean} vs {mean}");
        assert!((got_sem - sd / t.sqrt()).abs() < 1e-9, "{got_sem} vs {}", sd / t.sqrt());
        seen += 1;
    }
    assert_eq!(seen, cells.len());
    assert_eq!(seen, 2 * 2 * 3);
}

#[test]
fn sweeps_are_byte_identical_and_nlu_bounded() {
    for ds in [SweepDataset::Synthetic1, SweepDataset::Synthetic2] {
        let cfg = config(ds);
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_records(&mut x, &a).unwrap();
        write_records(&mut y, &b).unwrap();
        assert_eq!(x, y);
        assert_eq!(a.len(), cfg.record_count());
        for r in &a {
            assert!(!r.flags.contains(Flag::Failed), "{}", r.csv_line());
            assert!(r.nlu >= 0.0 && r.nlu <= 1.0 + 1e-9, "{}", r.csv_line());
            assert_eq!(r.group_counts.iter().sum::<usize>(), cfg.k);
        }
    }
}

#[test]
fn seed_changes_output() {
    let mut cfg = config(SweepDataset::Synthetic2);
    let a = run_sweep(&cfg).unwrap();
    cfg.seed += 1;
    let b = run_sweep(&cfg).unwrap();
    assert_ne!(a, b);
}

#[test]
fn algorithms_share_the_draw_within_a_trial() {
    let records = run_sweep(&config(SweepDataset::Synthetic2)).unwrap();
    let mut seeds: BTreeMap<(String, u64), Vec<u64>> = BTreeMap::new();
    for r in &records {
        seeds.entry((r.csv_line().split(',').nth(2).unwrap().to_string(), r.seed)).or_default().push(r.seed);
    }
    // every (fraction, seed) pair covers both betas and all three algorithms
    assert!(seeds.values().all(|v| v.len() == 2 * 3));
}
