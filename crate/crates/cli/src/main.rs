// SPDX-License-Identifier: Apache-2.0

use clap::Parser;

fn main() {
    let cli = ceff_cli::Cli::parse();
    std::process::exit(ceff_cli::run_and_report(cli));
}
