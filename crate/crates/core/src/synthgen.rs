//! Seeded synthetic cash-flow extracts with planted structure: every vendor
//! posts to one G/L account, except that with probability `flip_probability`
//! a line goes to a different account chosen uniformly.

use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{write_source_file, IngestError, RawTransaction, SourceSchema};
use crate::money::Money;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error("generator spec file: {0}")]
    Parse(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmountRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DateRange {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub seed: u64,
    pub n_records: usize,
    pub n_vendors: usize,
    pub n_gl_accounts: usize,
    /// G/L account index per vendor index. Defaults to `vendor % n_gl_accounts`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<Vec<usize>>,
    #[serde(default)]
    pub flip_probability: f64,
    /// Amounts are log-uniform over `[min, max]`, rounded to the cent.
    pub amount: AmountRange,
    pub dates: DateRange,
    #[serde(default = "default_company")]
    pub company_code: String,
    #[serde(default = "default_first_document")]
    pub first_document: u64,
}

fn default_company() -> String {
    "1000".into()
}

fn default_first_document() -> u64 {
    1_226_000_001
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 42,
            n_records: 1000,
            n_vendors: 20,
            n_gl_accounts: 10,
            rules: None,
            flip_probability: 0.0,
            amount: AmountRange { min: 200.0, max: 3_000_000.0 },
            dates: DateRange {
                from: NaiveDate::from_ymd_opt(2012, 8, 1).expect("valid date"),
                to: NaiveDate::from_ymd_opt(2012, 9, 30).expect("valid date"),
            },
            company_code: default_company(),
            first_document: default_first_document(),
        }
    }
}

/// Vendor number for vendor index `i`.
pub fn vendor_code(i: usize) -> String {
    format!("{}", 100_001 + i)
}

/// G/L account number for account index `i`.
pub fn gl_code(i: usize) -> String {
    format!("{}", 120_010 + 10_000 * i)
}

impl GenSpec {
    pub fn parse(text: &str) -> Result<Self, GenError> {
        let spec: GenSpec = toml::from_str(text).map_err(|e| GenError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::Spec(m));
        if self.n_records == 0 {
            return bad("n_records must be positive".into());
        }
        if self.n_vendors == 0 || self.n_gl_accounts == 0 {
            return bad("n_vendors and n_gl_accounts must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return bad(format!("flip_probability {} outside [0, 1]", self.flip_probability));
        }
        if self.flip_probability > 0.0 && self.n_gl_accounts < 2 {
            return bad("flipping needs at least 2 G/L accounts".into());
        }
        if let Some(rules) = &self.rules {
            if rules.len() != self.n_vendors {
                return bad(format!("rule table has {} entries for {} vendors", rules.len(), self.n_vendors));
            }
            if let Some(r) = rules.iter().find(|r| **r >= self.n_gl_accounts) {
                return bad(format!("rule table names account {r}, but n_gl_accounts is {}", self.n_gl_accounts));
            }
        }
        let AmountRange { min, max } = self.amount;
        if !(min.is_finite() && max.is_finite() && min > 0.0 && min <= max) {
            return bad(format!("amount range [{min}, {max}] must be positive and ordered"));
        }
        if Money::from_f64(max).map_or(true, |m| m.digit_count() > 13) {
            return bad(format!("amount {max} does not fit 13 digits"));
        }
        if self.dates.from > self.dates.to {
            return bad("date range is reversed".into());
        }
        if self.first_document.checked_add(self.n_records as u64).map_or(true, |last| last > 9_999_999_999) {
            return bad("document numbers exceed 10 digits".into());
        }
        if self.company_code.is_empty() || self.company_code.chars().count() > 4 {
            return bad("company_code must have 1 to 4 characters".into());
        }
        Ok(())
    }

    /// The planted G/L account index of vendor index `v`.
    pub fn rule(&self, v: usize) -> usize {
        match &self.rules {
            Some(r) => r[v],
            None => v % self.n_gl_accounts,
        }
    }
}

/// Draws the records of `spec`. Each record draws, in order: vendor, flip,
/// replacement account (when flipped), amount, date.
pub fn generate(spec: &GenSpec) -> Result<Vec<RawTransaction>, GenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (ln_lo, ln_hi) = (spec.amount.min.ln(), spec.amount.max.ln());
    let min = Money::from_f64(spec.amount.min).expect("validated");
    let max = Money::from_f64(spec.amount.max).expect("validated");
    let days = (spec.dates.to - spec.dates.from).num_days();
    let fiscal_year = |d: NaiveDate| chrono::Datelike::year(&d) as u16;
    let mut out = Vec::with_capacity(spec.n_records);
    for i in 0..spec.n_records {
        let v = rng.gen_range(0..spec.n_vendors);
        let mut gl = spec.rule(v);
        if spec.flip_probability > 0.0 && rng.gen_bool(spec.flip_probability) {
            // uniform over the other accounts
            let other = rng.gen_range(0..spec.n_gl_accounts - 1);
            gl = if other >= gl { other + 1 } else { other };
        }
        let amount = if ln_lo == ln_hi { spec.amount.min } else { rng.gen_range(ln_lo..ln_hi).exp() };
        let amount = Money::from_f64(amount).expect("finite amount").clamp(min, max);
        let date = spec.dates.from + chrono::Duration::days(rng.gen_range(0..=days));
        out.push(RawTransaction {
            company_code: spec.company_code.clone(),
            gl_account: gl_code(gl),
            posting_date: date,
            business_head: "OPER".into(),
            amount_lc: amount,
            document_no: (spec.first_document + i as u64).to_string(),
            fiscal_year: fiscal_year(date),
            vendor: Some(vendor_code(v)),
            customer: None,
            currency: "INR".into(),
        });
    }
    Ok(out)
}

/// Writes the generated extract in the source file format.
pub fn generate_file<W: Write>(spec: &GenSpec, writer: W) -> Result<usize, GenError> {
    let records = generate(spec)?;
    write_source_file(&records, writer, &SourceSchema::cash_flow())?;
    Ok(records.len())
}

pub fn generate_text(spec: &GenSpec) -> Result<String, GenError> {
    let mut buf = Vec::new();
    generate_file(spec, &mut buf)?;
    Ok(String::from_utf8(buf).expect("extract is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_source_file;
    use std::collections::BTreeMap;

    fn spec(seed: u64) -> GenSpec {
        GenSpec { seed, ..GenSpec::default() }
    }

    #[test]
    fn same_seed_same_file() {
        assert_eq!(generate_text(&spec(7)).unwrap(), generate_text(&spec(7)).unwrap());
        assert_ne!(generate_text(&spec(7)).unwrap(), generate_text(&spec(8)).unwrap());
    }

    #[test]
    fn parses_back_losslessly() {
        let s = spec(1);
        let records = generate(&s).unwrap();
        let parsed = parse_source_file(generate_text(&s).unwrap().as_bytes(), &SourceSchema::cash_flow()).unwrap();
        assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
        assert_eq!(parsed.records, records);
    }

    #[test]
    fn zero_flip_follows_the_rule_table() {
        let s = GenSpec { rules: Some((0..20).map(|v| (v * 3) % 10).collect()), ..spec(3) };
        for r in generate(&s).unwrap() {
            let v: usize = r.vendor.as_deref().unwrap().parse::<usize>().unwrap() - 100_001;
            assert_eq!(r.gl_account, gl_code(s.rule(v)));
        }
    }

    #[test]
    fn flips_land_elsewhere_at_the_stated_rate() {
        let s = GenSpec { n_records: 5000, flip_probability: 0.2, ..spec(5) };
        let recs = generate(&s).unwrap();
        let flipped = recs
            .iter()
            .filter(|r| {
                let v = r.vendor.as_deref().unwrap().parse::<usize>().unwrap() - 100_001;
                r.gl_account != gl_code(s.rule(v))
            })
            .count();
        // binomial sd = sqrt(5000 * 0.2 * 0.8) ~ 28; allow 5 sd
        assert!((flipped as f64 - 1000.0).abs() < 140.0, "{flipped}");
    }

    #[test]
    fn vendor_counts_pass_chi_square() {
        // df = 19; the 0.999 quantile of chi-square(19) is 43.82
        for seed in 0..5 {
            let recs = generate(&GenSpec { n_records: 1000, n_vendors: 20, ..spec(seed) }).unwrap();
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for r in &recs {
                *counts.entry(r.vendor.clone().unwrap()).or_default() += 1;
            }
            assert_eq!(counts.len(), 20);
            let chi2: f64 = counts.values().map(|&c| (c as f64 - 50.0).powi(2) / 50.0).sum();
            assert!(chi2 < 43.82, "seed {seed}: chi2 = {chi2}");
        }
    }

    #[test]
    fn amounts_and_dates_stay_in_range() {
        let s = spec(9);
        for r in generate(&s).unwrap() {
            assert!(r.amount_lc >= Money::from_major(200) && r.amount_lc <= Money::from_major(3_000_000));
            assert!(r.posting_date >= s.dates.from && r.posting_date <= s.dates.to);
        }
    }

    #[test]
    fn inconsistent_specs_are_rejected() {
        let bad = [
            GenSpec { n_records: 0, ..spec(0) },
            GenSpec { flip_probability: 1.5, ..spec(0) },
            GenSpec { rules: Some(vec![10; 20]), ..spec(0) },
            GenSpec { rules: Some(vec![0; 3]), ..spec(0) },
            GenSpec { amount: AmountRange { min: 5.0, max: 1.0 }, ..spec(0) },
            GenSpec { n_gl_accounts: 1, flip_probability: 0.1, ..spec(0) },
        ];
        for s in bad {
            assert!(matches!(generate(&s), Err(GenError::Spec(_))), "{s:?}");
        }
    }

    #[test]
    fn spec_text_round_trip() {
        let s = GenSpec { rules: Some(vec![1; 20]), flip_probability: 0.2, ..spec(11) };
        assert_eq!(GenSpec::parse(&s.to_text()).unwrap(), s);
        let minimal = "seed = 1\nn_records = 5\nn_vendors = 2\nn_gl_accounts = 2\n\
                       [amount]\nmin = 1.0\nmax = 10.0\n[dates]\nfrom = \"2012-08-01\"\nto = \"2012-08-31\"\n";
        assert_eq!(generate(&GenSpec::parse(minimal).unwrap()).unwrap().len(), 5);
    }
}
