//! Regenerates the packaged synthetic fixture: three training years and one
//! target year of weather and Poisson cases drawn from the model itself.
//!
//! `cargo run -p spillcast --example make_fixture -- <out-dir>`

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use chrono::Datelike;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spillcast_core::carrycap::KSeries;
use spillcast_core::ingest::{CaseSeries, Config};
use spillcast_core::synthetic::{expected_weekly_cases, sample_cases, Climate};

const SEED: u64 = 7;
const FIRST_YEAR: i32 = 2019;
const TARGET_YEAR: i32 = 2022;
const K_PER_YEAR: [f64; 4] = [12000.0, 10000.0, 14000.0, 12000.0];

fn main() -> std::io::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/cli/tests/fixtures".into())
        .into();
    std::fs::create_dir_all(&out)?;
    let cfg = Config::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let years = TARGET_YEAR - FIRST_YEAR + 1;
    let weather = Climate::default().generate(FIRST_YEAR, years, &mut rng);
    let (weeks, expected) =
        expected_weekly_cases(&cfg, &weather, &K_PER_YEAR).expect("fixture simulation");
    let cases = sample_cases(&weeks, &expected, &mut rng);
    let train = CaseSeries::new(
        cases
            .records()
            .iter()
            .filter(|c| c.week_start.year() < TARGET_YEAR)
            .copied()
            .collect(),
    )
    .expect("subset of weekly series");

    weather.write_csv(
        BufWriter::new(File::create(out.join("weather.csv"))?),
        false,
    )?;
    cases.write_csv(BufWriter::new(File::create(out.join("cases.csv"))?))?;
    train.write_csv(BufWriter::new(File::create(out.join("cases-train.csv"))?))?;
    let k: Vec<f64> = weather
        .records()
        .iter()
        .map(|r| K_PER_YEAR[(r.date.year() - FIRST_YEAR) as usize])
        .collect();
    KSeries::new(weather.dates(), k).write_csv(BufWriter::new(File::create(out.join("k.csv"))?))?;
    Ok(())
}
