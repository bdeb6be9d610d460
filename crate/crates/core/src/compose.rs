//! Composite problem construction.
//!
//! Three templates combine a pair of problem records into one composite:
//! a boolean gate (print the second output only when the first is True),
//! an integer product, and sequential I/O concatenation. Composite tests are
//! built by pairing part tests; the pairing is Cartesian in row-major order
//! and capped, since test-rich problems blow up quadratically.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, STREAM_SAMPLE};

/// Wording revision for the composite descriptions; bump when the text
/// resources change so experiment outputs remain attributable.
pub const TEMPLATE_VERSION: &str = "1";

pub const DEFAULT_TEST_CAP: usize = 20;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Boolean,
    Integer,
    Text,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TestCase {
    pub input: String,
    pub expected_output: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProblemRecord {
    pub problem_id: String,
    pub description: String,
    pub signature: String,
    pub tests: Vec<TestCase>,
    pub output_kind: OutputKind,
}

impl ProblemRecord {
    pub fn validate(&self) -> Result<()> {
        if self.tests.is_empty() {
            return Err(Error::InvalidModel(format!(
                "problem {} has no tests",
                self.problem_id
            )));
        }
        for t in &self.tests {
            let ok = match self.output_kind {
                OutputKind::Boolean => t.expected_output == "True" || t.expected_output == "False",
                OutputKind::Integer => t.expected_output.trim().parse::<i64>().is_ok(),
                OutputKind::Text => true,
            };
            if !ok {
                return Err(Error::InvalidModel(format!(
                    "problem {}: expected output '{}' does not match declared kind {:?}",
                    self.problem_id, t.expected_output, self.output_kind
                )));
            }
        }
        Ok(())
    }

    /// A problem is I/O-style when its tests actually feed input.
    pub fn has_io_tests(&self) -> bool {
        self.tests.iter().any(|t| !t.input.is_empty())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    BoolGate,
    Product,
    SequentialIo,
}

impl Template {
    pub fn as_str(&self) -> &'static str {
        match self {
            Template::BoolGate => "bool_gate",
            Template::Product => "product",
            Template::SequentialIo => "sequential_io",
        }
    }
}

impl std::str::FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bool_gate" => Ok(Template::BoolGate),
            "product" => Ok(Template::Product),
            "sequential_io" => Ok(Template::SequentialIo),
            other => Err(Error::TemplateMismatch(format!("unknown template '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CompositeRecord {
    pub composite_id: String,
    pub template: Template,
    pub parts: (ProblemRecord, ProblemRecord),
    pub description: String,
    pub tests: Vec<TestCase>,
}

/// The template's combination rule on part-level expected outputs. This is
/// the oracle every composite test must satisfy.
pub fn combine_expected(template: Template, out1: &str, out2: &str) -> Result<String> {
    match template {
        Template::BoolGate => match out1 {
            "True" => Ok(out2.to_string()),
            "False" => Ok("-1".to_string()),
            other => Err(Error::TemplateMismatch(format!(
                "bool_gate needs True/False from part 1, found '{other}'"
            ))),
        },
        Template::Product => {
            let a: i64 = out1.trim().parse().map_err(|_| {
                Error::TemplateMismatch(format!("product needs integer outputs, found '{out1}'"))
            })?;
            let b: i64 = out2.trim().parse().map_err(|_| {
                Error::TemplateMismatch(format!("product needs integer outputs, found '{out2}'"))
            })?;
            Ok((a as i128 * b as i128).to_string())
        }
        Template::SequentialIo => Ok(format!("{out1}\n{out2}")),
    }
}

/// Combined test input. Sequential I/O concatenates the raw stdin streams;
/// the function-style templates put the two argument blocks on separate
/// lines.
fn combine_input(template: Template, in1: &str, in2: &str) -> String {
    match template {
        Template::SequentialIo => format!("{in1}{in2}"),
        Template::BoolGate | Template::Product => {
            if in1.is_empty() || in2.is_empty() {
                format!("{in1}{in2}")
            } else {
                format!("{in1}\n{in2}")
            }
        }
    }
}

fn description_for(template: Template, p1: &ProblemRecord, p2: &ProblemRecord) -> String {
    let instruction = match template {
        Template::BoolGate => {
            "Solve both problems on the given inputs. If problem 1's output is True, \
             print problem 2's output; otherwise, print \"-1\"."
        }
        Template::Product => {
            "Solve both problems on the given inputs and print the product of their outputs."
        }
        Template::SequentialIo => {
            "Read the inputs sequentially and print the outputs sequentially: first the \
             output of problem 1, then the output of problem 2."
        }
    };
    format!(
        "{instruction}\n\nProblem 1 ({sig1}):\n{d1}\n\nProblem 2 ({sig2}):\n{d2}\n",
        sig1 = p1.signature,
        d1 = p1.description,
        sig2 = p2.signature,
        d2 = p2.description,
    )
}

fn check_eligibility(template: Template, p1: &ProblemRecord, p2: &ProblemRecord) -> Result<()> {
    match template {
        Template::BoolGate => {
            if p1.output_kind != OutputKind::Boolean {
                return Err(Error::TemplateMismatch(format!(
                    "bool_gate needs a boolean-output first part, {} is {:?}",
                    p1.problem_id, p1.output_kind
                )));
            }
        }
        Template::Product => {
            for p in [p1, p2] {
                if p.output_kind != OutputKind::Integer {
                    return Err(Error::TemplateMismatch(format!(
                        "product needs integer outputs, {} is {:?}",
                        p.problem_id, p.output_kind
                    )));
                }
            }
        }
        Template::SequentialIo => {
            for p in [p1, p2] {
                if !p.has_io_tests() {
                    return Err(Error::TemplateMismatch(format!(
                        "sequential_io needs I/O-style tests, {} has none",
                        p.problem_id
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Compose two problems under a template.
///
/// Tests pair the part tests in row-major order, capped at `test_cap`; the
/// composite id is a deterministic function of the part ids and template.
pub fn compose(
    p1: &ProblemRecord,
    p2: &ProblemRecord,
    template: Template,
    test_cap: usize,
) -> Result<CompositeRecord> {
    p1.validate()?;
    p2.validate()?;
    check_eligibility(template, p1, p2)?;
    let mut tests = Vec::new();
    'outer: for t1 in &p1.tests {
        for t2 in &p2.tests {
            if tests.len() >= test_cap {
                break 'outer;
            }
            tests.push(TestCase {
                input: combine_input(template, &t1.input, &t2.input),
                expected_output: combine_expected(
                    template,
                    &t1.expected_output,
                    &t2.expected_output,
                )?,
            });
        }
    }
    Ok(CompositeRecord {
        composite_id: format!(
            "{}::{}::{}",
            template.as_str(),
            p1.problem_id,
            p2.problem_id
        ),
        template,
        parts: (p1.clone(), p2.clone()),
        description: description_for(template, p1, p2),
        tests,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pairing {
    /// (0,1), (2,3), ... in dataset order.
    Adjacent,
    /// Seeded shuffle, then adjacent.
    Random { seed: u64 },
    /// Explicit (first_id, second_id) pairs.
    Explicit { pairs: Vec<(String, String)> },
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SkippedPair {
    pub first: String,
    pub second: String,
    pub reason: String,
}

/// Compose a dataset pairwise. Ineligible pairs are skipped with reasons,
/// not fatal; the output order is deterministic for a fixed pairing.
pub fn batch_compose(
    dataset: &[ProblemRecord],
    pairing: &Pairing,
    template: Template,
    test_cap: usize,
) -> Result<(Vec<CompositeRecord>, Vec<SkippedPair>)> {
    if dataset.is_empty() {
        return Err(Error::InvalidModel("empty dataset".into()));
    }
    let index_pairs: Vec<(usize, usize)> = match pairing {
        Pairing::Adjacent => (0..dataset.len() / 2).map(|i| (2 * i, 2 * i + 1)).collect(),
        Pairing::Random { seed } => {
            let mut order: Vec<usize> = (0..dataset.len()).collect();
            let mut rng = derive_rng(*seed, &[STREAM_SAMPLE]);
            // Fisher-Yates
            for i in (1..order.len()).rev() {
                let j = rand::Rng::gen_range(&mut rng, 0..=i);
                order.swap(i, j);
            }
            (0..order.len() / 2)
                .map(|i| (order[2 * i], order[2 * i + 1]))
                .collect()
        }
        Pairing::Explicit { pairs } => {
            let find = |id: &str| -> Result<usize> {
                dataset
                    .iter()
                    .position(|p| p.problem_id == id)
                    .ok_or_else(|| Error::UnknownToken(format!("problem id '{id}'")))
            };
            pairs
                .iter()
                .map(|(a, b)| Ok((find(a)?, find(b)?)))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut composites = Vec::new();
    let mut skipped = Vec::new();
    for (i, j) in index_pairs {
        match compose(&dataset[i], &dataset[j], template, test_cap) {
            Ok(c) => composites.push(c),
            Err(e) => skipped.push(SkippedPair {
                first: dataset[i].problem_id.clone(),
                second: dataset[j].problem_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    Ok((composites, skipped))
}

pub fn read_problems_jsonl<R: BufRead>(reader: R) -> Result<Vec<ProblemRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ProblemRecord = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        rec.validate().map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_composites_jsonl<W: Write>(mut w: W, records: &[CompositeRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
