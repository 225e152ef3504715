use serde::{Deserialize, Serialize};

use gpsample::testbeds::Problem;

use super::Command;
use crate::error::CliResult;
use crate::output::OutDir;

/// Lists the benchmark registry; takes no parameters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarksConfig {}

#[derive(Serialize)]
struct Listing {
    problems: Vec<gpsample::testbeds::ProblemInfo>,
}

impl Command for BenchmarksConfig {
    fn resolve(self) -> CliResult<Self> {
        Ok(self)
    }

    fn run(&self, _seed: u64, out: &OutDir) -> CliResult<()> {
        let problems = Problem::all().into_iter().map(Problem::info).collect();
        out.write_json("benchmarks.json", &Listing { problems })
    }
}
